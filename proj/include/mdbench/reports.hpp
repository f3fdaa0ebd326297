#pragma once

// Raw per-task measurements produced by the task runners, their JSONL
// persistence, and the sub-metric aggregates computed from them.

#include "mdbench/chess.hpp"
#include "mdbench/corpus.hpp"

#include <cstdint>
#include <filesystem>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

namespace mdbench::reports {

class ReportError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct GameReport {
    std::size_t index = 0;
    int prompt_plies = 0;
    // Model moves replayed successfully after the prompt.
    int moves_accepted = 0;
    // Position of the first illegal token within the continuation (1-based).
    std::optional<int> illegal_move_number;
    std::string illegal_token;
    // A terminal position was reached and further move tokens followed.
    bool missed_end_state = false;
    std::optional<chess::GameTermination> termination;
    // A result token emitted by the model, if any.
    std::optional<std::string> declared_result;
    // Pawn units, one per accepted model move, when an engine scored the game.
    std::vector<double> centipawn_losses;
    // The output carried move tokens beyond the move cap.
    bool capped = false;
    std::optional<std::string> error;

    int game_length() const { return prompt_plies + moves_accepted; }
    bool operator==(const GameReport&) const = default;
};

/// Play sub-metrics over a set of games. Percentages are 0-100.
struct GameAggregates {
    std::size_t games = 0;    // games that produced output
    std::size_t errored = 0;  // adapter failures, excluded from everything else
    std::uint64_t move_tokens = 0;
    std::uint64_t illegal_moves = 0;
    std::uint64_t moves_accepted = 0;
    std::uint64_t moves_scored = 0;
    std::optional<double> illegal_move_pct;
    std::optional<double> avg_illegal_move_number;  // games without an illegal move excluded
    std::optional<double> avg_centipawn_loss;       // mean over every scored move
    std::optional<double> missed_end_state_pct;
    std::optional<double> avg_game_length;
};

/// With a cap, each game is viewed as if replay had stopped after `cap` plies.
GameAggregates aggregate_games(const std::vector<GameReport>& games, std::optional<int> cap = std::nullopt);

struct EvalOutcome {
    std::size_t index = 0;
    std::string target;
    std::string prediction;
    std::optional<std::string> error;
    bool operator==(const EvalOutcome&) const = default;
};

struct EvalReport {
    std::uint64_t true_numeric = 0;
    std::uint64_t predicted_numeric = 0;  // among true-numeric samples
    std::uint64_t true_non_numeric = 0;
    std::uint64_t predicted_non_numeric = 0;  // among true-non-numeric samples
    std::uint64_t correct_non_numeric = 0;
    double squared_error_sum = 0.0;
    std::uint64_t squared_error_count = 0;

    void add(const EvalOutcome& outcome);

    std::optional<double> ratio_numeric() const;
    std::optional<double> ratio_non_numeric() const;
    std::optional<double> mse() const;
    std::optional<double> accuracy() const;
    bool operator==(const EvalReport&) const = default;
};

EvalReport fold(const std::vector<EvalOutcome>& outcomes);

enum class Direction { code_to_summary, summary_to_code };

std::string_view direction_name(Direction d);
std::optional<Direction> parse_direction(std::string_view name);

struct TranslationPair {
    std::size_t index = 0;
    std::string candidate;
    std::string reference;
    std::optional<std::string> error;
    bool operator==(const TranslationPair&) const = default;
};

struct TranslationReport {
    Direction direction = Direction::code_to_summary;
    std::vector<TranslationPair> pairs;
};

enum class Domain { chess, code, ambiguous };

std::string_view domain_name(Domain d);
std::optional<Domain> parse_domain(std::string_view name);

using TokenCounts = std::map<std::string, std::uint64_t>;

struct ProbeOutcome {
    std::size_t index = 0;
    Domain prompted = Domain::chess;
    // Prompt comes from the domain the model was not tuned on.
    bool cross_domain = false;
    std::string output;
    std::size_t chess_tokens = 0;
    std::size_t code_tokens = 0;
    bool success = false;
    std::optional<std::string> error;
    bool operator==(const ProbeOutcome&) const = default;
};

struct ProbeReport {
    TokenCounts chess_output_tokens;  // tokens of responses to chess prompts
    TokenCounts code_output_tokens;   // tokens of responses to code prompts
    std::uint64_t successes = 0;
    std::uint64_t attempts = 0;

    void add(const ProbeOutcome& outcome);
    bool operator==(const ProbeReport&) const = default;
};

ProbeReport fold(const std::vector<ProbeOutcome>& outcomes);

std::vector<std::string> whitespace_tokens(std::string_view text);

// One JSON object per line.
std::string to_jsonl(const GameReport& r);
std::string to_jsonl(const EvalOutcome& r);
std::string to_jsonl(const TranslationPair& r, Direction d);
std::string to_jsonl(const ProbeOutcome& r);

GameReport game_from_jsonl(const std::string& line);
EvalOutcome eval_from_jsonl(const std::string& line);
TranslationPair translation_from_jsonl(const std::string& line, Direction* direction = nullptr);
ProbeOutcome probe_from_jsonl(const std::string& line);

// File readers. Errors name the file and line.
std::vector<GameReport> read_game_reports(const std::filesystem::path& path);
std::vector<EvalOutcome> read_eval_outcomes(const std::filesystem::path& path);
TranslationReport read_translation_report(const std::filesystem::path& path);
std::vector<ProbeOutcome> read_probe_outcomes(const std::filesystem::path& path);

}  // namespace mdbench::reports
