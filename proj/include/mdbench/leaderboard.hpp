#pragma once

#include "mdbench/metrics.hpp"
#include "mdbench/reports.hpp"

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace mdbench::metrics {

/// One metric family: raw sub-metric columns, the ranks of the ranked
/// columns, and the aggregate score per competitor.
struct ScoreFamily {
    std::string name;
    std::string score_name;
    SubMetricTable table;
    std::map<std::string, std::vector<double>> ranks;
    std::vector<std::optional<double>> scores;
};

struct Leaderboard {
    std::vector<std::string> competitors;
    std::vector<ScoreFamily> families;

    const ScoreFamily* family(std::string_view name) const;
};

ScoreFamily play_family(const SubMetricTable& table, std::string name = "play");
ScoreFamily eval_family(const SubMetricTable& table);
ScoreFamily bleu_family(std::string name, const std::vector<std::string>& competitors,
                        const std::vector<std::optional<double>>& bleu);
ScoreFamily mdls_family(const std::vector<std::string>& competitors, const std::vector<double>& nmr_values,
                        const std::vector<double>& crr_values);

struct CompetitorReports {
    std::string name;
    std::optional<std::vector<reports::GameReport>> games;
    std::optional<reports::EvalReport> eval;
    std::map<reports::Direction, reports::TranslationReport> translations;
    std::optional<reports::ProbeReport> probe;
};

struct LeaderboardOptions {
    int move_cap = 70;
};

SubMetricTable play_table(const std::vector<std::string>& competitors,
                          const std::vector<reports::GameAggregates>& aggregates);
SubMetricTable eval_table(const std::vector<std::string>& competitors,
                          const std::vector<reports::EvalReport>& reports);

/// Computes every metric family that all competitors have reports for.
/// Throws MetricsError when only some competitors carry a family, or when
/// fewer than two competitors are given.
Leaderboard assemble_leaderboard(const std::vector<CompetitorReports>& competitors, LeaderboardOptions options = {});

/// Full-precision JSON.
std::string to_json(const Leaderboard& board);
/// Aligned text table, two decimals, "-" for missing values.
std::string to_text(const Leaderboard& board);

}  // namespace mdbench::metrics
