#pragma once

// Rank aggregation and scalar scores: play score, eval score, corpus BLEU,
// token mix ratio, cross-domain recall and the multi-domain learning score.

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace mdbench::metrics {

class MetricsError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class Better { lower, higher };

/// Ranks 1..m where the best value receives m. Ties share the mean of their
/// positions; missing (or NaN) values take the lowest ranks.
std::vector<double> rank_competitors(const std::vector<std::optional<double>>& values, Better direction);

struct SubMetric {
    std::string name;
    Better direction = Better::higher;
    std::vector<std::optional<double>> values;  // one per competitor
};

struct SubMetricTable {
    std::vector<std::string> competitors;
    std::vector<SubMetric> columns;

    const SubMetric& column(std::string_view name) const;  // throws MetricsError
    bool has(std::string_view name) const;
};

// Column names shared by the table builders and the leaderboard.
inline constexpr std::string_view kIllegalMovePct = "illegal_move_pct";
inline constexpr std::string_view kIllegalMoveNumber = "avg_illegal_move_number";
inline constexpr std::string_view kCentipawnLoss = "avg_centipawn_loss";
inline constexpr std::string_view kMissedEndState = "missed_end_state_pct";
inline constexpr std::string_view kGameLength = "avg_game_length";
inline constexpr std::string_view kRatioNumeric = "ratio_numeric";
inline constexpr std::string_view kRatioNonNumeric = "ratio_non_numeric";
inline constexpr std::string_view kMse = "mse";
inline constexpr std::string_view kAccuracy = "accuracy";

Better play_direction(std::string_view column);

/// Mean rank over the five play sub-metrics.
std::vector<double> play_score(const SubMetricTable& table);

/// (rank on MSE + rank on accuracy) / 2.
std::vector<double> eval_score(const SubMetricTable& table);

/// Corpus BLEU on a 0-100 scale with whitespace tokenization, uniform weights
/// and no smoothing. Each candidate may have several references; the
/// reference length used for the brevity penalty is the closest one
/// (shorter wins a tie).
double corpus_bleu(const std::vector<std::string>& candidates, const std::vector<std::vector<std::string>>& references,
                   int max_order = 4);
double corpus_bleu(const std::vector<std::string>& candidates, const std::vector<std::string>& references,
                   int max_order = 4);

using Sentence = std::vector<std::string>;
double corpus_bleu_tokens(const std::vector<Sentence>& candidates, const std::vector<std::vector<Sentence>>& references,
                          int max_order = 4);

/// 1 - |A ∩ B| / |A ∪ B| over the distinct tokens with non-zero count; 1 when both are empty.
double nmr(const std::map<std::string, std::uint64_t>& chess_tokens,
           const std::map<std::string, std::uint64_t>& code_tokens);

double crr(std::uint64_t successes, std::uint64_t attempts);

/// 100 × harmonic mean of the two ratios.
double mdls(double nmr_value, double crr_value);

}  // namespace mdbench::metrics
