#pragma once

// Task dataset construction: evaluation binning, task samples with their
// text prefixes, and deterministic train/test splitting.

#include "mdbench/pgn.hpp"

#include <cmath>
#include <cstdint>
#include <istream>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

namespace mdbench::corpus {

class CorpusError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline constexpr double kEvalClamp = 10.0;
inline constexpr int kEvalBins = 44;
inline constexpr double kBinWidth = 2.0 * kEvalClamp / kEvalBins;

/// Clamps to [-10, 10] and maps onto 44 uniform half-open bins; +10 joins the
/// top bin. Throws CorpusError for non-finite input.
int bin_evaluation(double pawns);

/// Midpoint of a bin's interval. Throws CorpusError outside [0, 43].
double bin_center(int bin);

/// Either pawn units or a mate token such as "#+3".
using RawEval = std::variant<double, std::string>;

struct EvalRecord {
    std::vector<std::string> moves;  // SAN prefix
    RawEval eval;
};

struct EvalTarget {
    enum class Kind { numeric_bin, non_numeric };
    Kind kind = Kind::numeric_bin;
    int bin = 0;
    std::string token;

    /// Target text: the bin center with two decimals, or the token verbatim.
    std::string text() const;
    bool operator==(const EvalTarget&) const = default;
};

bool is_mate_token(std::string_view text);

/// Parses a numeric text ("-1.6", "+0.25") fully; nullopt if not a finite real.
std::optional<double> parse_real(std::string_view text);

/// Numbers and numeric text become bins; mate tokens pass through verbatim.
EvalTarget make_eval_target(const RawEval& raw);

struct CodePair {
    std::string code;
    std::string docstring;
};

/// Trims the code block and collapses docstring whitespace. nullopt if
/// either side ends up empty.
std::optional<CodePair> normalize(CodePair pair);

enum class TaskKind { move_gen, board_eval, code_summarize, code_generate };

std::string_view task_name(TaskKind task);
std::optional<TaskKind> parse_task(std::string_view name);

inline constexpr std::string_view kSummarizePrefix = "summarize: ";
inline constexpr std::string_view kGeneratePrefix = "generate: ";

/// Input prefix for a task; empty for the chess tasks.
std::string_view task_prefix(TaskKind task);

struct TaskSample {
    TaskKind task = TaskKind::move_gen;
    std::string input;
    std::string target;
    bool operator==(const TaskSample&) const = default;
};

/// Move generation: the first `opening_plies` moves become the prompt; the
/// target is the remaining SAN moves followed by the result token.
std::vector<TaskSample> make_task_samples(const std::vector<PgnGame>& games, std::size_t opening_plies = 0);
std::vector<TaskSample> make_task_samples(const std::vector<EvalRecord>& records);
std::vector<TaskSample> make_task_samples(TaskKind task, const std::vector<CodePair>& pairs);

std::string join_words(const std::vector<std::string>& words, std::size_t begin = 0,
                       std::size_t end = static_cast<std::size_t>(-1));

/// Unbiased index in [0, n) from a 64-bit Mersenne Twister; portable across
/// standard library implementations.
std::uint64_t uniform_index(std::mt19937_64& rng, std::uint64_t n);

/// Seeded Fisher-Yates shuffle (portable, unlike std::shuffle).
template <typename T>
void deterministic_shuffle(std::vector<T>& items, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    for (std::size_t i = items.size(); i > 1; --i) {
        const std::size_t j = uniform_index(rng, i);
        std::swap(items[i - 1], items[j]);
    }
}

/// Indices of the test partition: round(fraction * n) of them, chosen by a
/// seeded shuffle, returned sorted.
std::vector<std::size_t> test_indices(std::size_t n, double test_fraction, std::uint64_t seed);

/// Deterministic partition. Both halves keep the input's relative order.
template <typename T>
std::pair<std::vector<T>, std::vector<T>> split(const std::vector<T>& records, double test_fraction,
                                                std::uint64_t seed) {
    if (records.empty()) throw CorpusError("split: empty input");
    const auto test_idx = test_indices(records.size(), test_fraction, seed);
    std::vector<T> train, test;
    train.reserve(records.size() - test_idx.size());
    test.reserve(test_idx.size());
    std::size_t t = 0;
    for (std::size_t i = 0; i < records.size(); ++i) {
        if (t < test_idx.size() && test_idx[t] == i) {
            test.push_back(records[i]);
            ++t;
        } else {
            train.push_back(records[i]);
        }
    }
    return {std::move(train), std::move(test)};
}

/// Evaluated-position dump with a header row naming `moves` and `eval` columns.
std::vector<EvalRecord> read_eval_csv(std::istream& in);
/// One object per line: {"moves": "e4 e5" | ["e4","e5"], "eval": 0.3 | "#-5" | "0.3"}.
std::vector<EvalRecord> read_eval_jsonl(std::istream& in);
/// One object per line: {"code": ..., "docstring": ...}.
std::vector<CodePair> read_code_pairs_jsonl(std::istream& in);

}  // namespace mdbench::corpus
