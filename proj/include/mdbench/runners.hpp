#pragma once

// Task runners: send prompts through an adapter session and turn the
// responses into raw per-sample reports.

#include "mdbench/adapter.hpp"
#include "mdbench/corpus.hpp"
#include "mdbench/engine.hpp"
#include "mdbench/reports.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace mdbench::runners {

class RunnerError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Thrown between batches when RunOptions::cancelled returns true. Reports
/// of finished batches have already reached the sink.
class Interrupted : public RunnerError {
public:
    using RunnerError::RunnerError;
};

struct RunOptions {
    // Requests handed to the adapter per generate_batch call.
    std::size_t batch_size = 64;
    // Worker threads for replay and engine scoring.
    unsigned jobs = 1;
    int max_new_tokens = 256;
    // Request seed is base seed + sample index; no seed is sent when unset.
    std::optional<std::int64_t> seed;
    // Sample indices to leave out (already present in a resumed output).
    std::set<std::size_t> skip;
    // Polled before each batch.
    std::function<bool()> cancelled;
};

inline constexpr int kDefaultMoveCap = 70;

struct MoveGenOptions {
    int move_cap = kDefaultMoveCap;
    // Centipawn losses are scored only with an engine pool.
    engine::EnginePool* engines = nullptr;
    engine::AnalysisLimit limit = engine::AnalysisLimit::depth(12);
};

/// Replays a model continuation after a SAN prompt. Move-number tokens are
/// skipped; a result token ends the game; the first illegal token stops
/// replay. Replay continues past the move cap and sets `capped`, so both
/// capped and uncapped views can be aggregated from the same report.
/// `moves`, when given, receives every accepted (position, move) pair.
reports::GameReport adjudicate_game(std::string_view prompt, std::string_view output, int move_cap,
                                    std::vector<std::pair<chess::Position, chess::Move>>* moves = nullptr);

template <typename Report>
using Sink = std::function<void(const Report&)>;

/// Reports come back in input order, skipped indices omitted. `sink` sees
/// each report as soon as its batch is finished, also in input order.
std::vector<reports::GameReport> run_move_generation(adapter::AdapterSession& session,
                                                     const std::vector<std::string>& prompts,
                                                     const MoveGenOptions& game_options = {},
                                                     const RunOptions& options = {},
                                                     const Sink<reports::GameReport>& sink = {});

std::vector<reports::EvalOutcome> run_board_eval(adapter::AdapterSession& session,
                                                 const std::vector<corpus::TaskSample>& samples,
                                                 const RunOptions& options = {},
                                                 const Sink<reports::EvalOutcome>& sink = {});

/// Samples must all be code-summarize or all code-generate. Throws on empty input.
reports::TranslationReport run_translation(adapter::AdapterSession& session,
                                           const std::vector<corpus::TaskSample>& samples,
                                           const RunOptions& options = {},
                                           const Sink<reports::TranslationPair>& sink = {});

/// Chess iff the token is SAN (castling, results and move numbers included).
/// Code iff it is an identifier, keyword, non-integer numeric literal,
/// operator run, or an ASCII token mixing word characters with code
/// punctuation. Bare integers and everything else are ambiguous.
reports::Domain classify_token_domain(std::string_view token);

struct ProbePrompt {
    reports::Domain domain = reports::Domain::chess;
    std::string prompt;
};

struct ProbeOptions {
    // Domain the model was tuned on; unset means every prompt is cross-domain.
    std::optional<reports::Domain> tuned;
    // Minimum share of non-ambiguous tokens in the prompted domain.
    double success_threshold = 0.5;
};

/// Success for one response under the probe criterion.
bool probe_success(std::string_view output, reports::Domain prompted, double threshold,
                   std::size_t* chess_tokens = nullptr, std::size_t* code_tokens = nullptr);

std::vector<reports::ProbeOutcome> run_cross_domain_probe(adapter::AdapterSession& session,
                                                          const std::vector<ProbePrompt>& prompts,
                                                          const ProbeOptions& probe_options = {},
                                                          const RunOptions& options = {},
                                                          const Sink<reports::ProbeOutcome>& sink = {});

}  // namespace mdbench::runners
