#include "mdbench/leaderboard.hpp"

#include <json.hpp>

#include <algorithm>
#include <cstdio>

namespace mdbench::metrics {

using nlohmann::ordered_json;

const ScoreFamily* Leaderboard::family(std::string_view name) const {
    for (const auto& f : families)
        if (f.name == name) return &f;
    return nullptr;
}

namespace {

std::vector<std::optional<double>> present(const std::vector<double>& v) {
    return {v.begin(), v.end()};
}

}  // namespace

ScoreFamily play_family(const SubMetricTable& table, std::string name) {
    ScoreFamily f{std::move(name), "PS", table, {}, present(play_score(table))};
    for (auto col : {kIllegalMovePct, kIllegalMoveNumber, kCentipawnLoss, kMissedEndState, kGameLength}) {
        const auto& c = table.column(col);
        f.ranks[c.name] = rank_competitors(c.values, c.direction);
    }
    return f;
}

ScoreFamily eval_family(const SubMetricTable& table) {
    ScoreFamily f{"eval", "ES", table, {}, present(eval_score(table))};
    for (auto col : {kMse, kAccuracy}) {
        const auto& c = table.column(col);
        f.ranks[c.name] = rank_competitors(c.values, c.direction);
    }
    return f;
}

ScoreFamily bleu_family(std::string name, const std::vector<std::string>& competitors,
                        const std::vector<std::optional<double>>& bleu) {
    ScoreFamily f;
    f.name = std::move(name);
    f.score_name = "BLEU";
    f.table.competitors = competitors;
    f.scores = bleu;
    return f;
}

ScoreFamily mdls_family(const std::vector<std::string>& competitors, const std::vector<double>& nmr_values,
                        const std::vector<double>& crr_values) {
    ScoreFamily f;
    f.name = "multi-domain";
    f.score_name = "MDLS";
    f.table.competitors = competitors;
    f.table.columns.push_back({"nmr", Better::higher, present(nmr_values)});
    f.table.columns.push_back({"crr", Better::higher, present(crr_values)});
    for (std::size_t i = 0; i < competitors.size(); ++i) f.scores.push_back(mdls(nmr_values[i], crr_values[i]));
    return f;
}

SubMetricTable play_table(const std::vector<std::string>& competitors,
                          const std::vector<reports::GameAggregates>& aggregates) {
    SubMetricTable t{competitors, {}};
    auto add = [&](std::string_view name, auto member) {
        SubMetric c{std::string(name), play_direction(name), {}};
        for (const auto& a : aggregates) c.values.push_back(a.*member);
        t.columns.push_back(std::move(c));
    };
    add(kIllegalMovePct, &reports::GameAggregates::illegal_move_pct);
    add(kIllegalMoveNumber, &reports::GameAggregates::avg_illegal_move_number);
    add(kCentipawnLoss, &reports::GameAggregates::avg_centipawn_loss);
    add(kMissedEndState, &reports::GameAggregates::missed_end_state_pct);
    add(kGameLength, &reports::GameAggregates::avg_game_length);
    return t;
}

SubMetricTable eval_table(const std::vector<std::string>& competitors,
                          const std::vector<reports::EvalReport>& reports) {
    SubMetricTable t{competitors, {}};
    auto add = [&](std::string_view name, Better dir, auto getter) {
        SubMetric c{std::string(name), dir, {}};
        for (const auto& r : reports) c.values.push_back((r.*getter)());
        t.columns.push_back(std::move(c));
    };
    add(kRatioNumeric, Better::higher, &reports::EvalReport::ratio_numeric);
    add(kRatioNonNumeric, Better::higher, &reports::EvalReport::ratio_non_numeric);
    add(kMse, Better::lower, &reports::EvalReport::mse);
    add(kAccuracy, Better::higher, &reports::EvalReport::accuracy);
    return t;
}

namespace {

// Returns true when every competitor has the family, false when none has it.
template <typename Has>
bool all_or_none(const std::vector<CompetitorReports>& cs, const std::string& family, Has has) {
    const auto n = std::count_if(cs.begin(), cs.end(), has);
    if (n == 0) return false;
    if (static_cast<std::size_t>(n) == cs.size()) return true;
    for (const auto& c : cs)
        if (!has(c)) throw MetricsError("competitor '" + c.name + "' is missing a " + family + " report");
    return true;
}

}  // namespace

Leaderboard assemble_leaderboard(const std::vector<CompetitorReports>& cs, LeaderboardOptions options) {
    if (cs.size() < 2) throw MetricsError("a leaderboard needs at least 2 competitors");
    Leaderboard board;
    for (const auto& c : cs) {
        if (std::find(board.competitors.begin(), board.competitors.end(), c.name) != board.competitors.end())
            throw MetricsError("duplicate competitor '" + c.name + "'");
        board.competitors.push_back(c.name);
    }

    if (all_or_none(cs, "move-gen", [](const CompetitorReports& c) { return c.games.has_value(); })) {
        std::vector<reports::GameAggregates> full, capped;
        for (const auto& c : cs) {
            full.push_back(reports::aggregate_games(*c.games));
            capped.push_back(reports::aggregate_games(*c.games, options.move_cap));
        }
        board.families.push_back(play_family(play_table(board.competitors, full), "play"));
        board.families.push_back(play_family(play_table(board.competitors, capped), "play-capped"));
    }
    if (all_or_none(cs, "board-eval", [](const CompetitorReports& c) { return c.eval.has_value(); })) {
        std::vector<reports::EvalReport> evals;
        for (const auto& c : cs) evals.push_back(*c.eval);
        board.families.push_back(eval_family(eval_table(board.competitors, evals)));
    }
    for (auto dir : {reports::Direction::code_to_summary, reports::Direction::summary_to_code}) {
        const std::string name(reports::direction_name(dir));
        if (!all_or_none(cs, name, [&](const CompetitorReports& c) { return c.translations.count(dir) > 0; }))
            continue;
        std::vector<std::optional<double>> scores;
        for (const auto& c : cs) {
            const auto& pairs = c.translations.at(dir).pairs;
            if (pairs.empty()) {
                scores.push_back(std::nullopt);
                continue;
            }
            std::vector<std::string> cand, ref;
            for (const auto& p : pairs) {
                cand.push_back(p.candidate);
                ref.push_back(p.reference);
            }
            scores.push_back(corpus_bleu(cand, ref));
        }
        board.families.push_back(bleu_family(name, board.competitors, scores));
    }
    if (all_or_none(cs, "probe", [](const CompetitorReports& c) { return c.probe.has_value(); })) {
        std::vector<double> n, r;
        for (const auto& c : cs) {
            n.push_back(nmr(c.probe->chess_output_tokens, c.probe->code_output_tokens));
            r.push_back(crr(c.probe->successes, c.probe->attempts));
        }
        board.families.push_back(mdls_family(board.competitors, n, r));
    }
    return board;
}

namespace {

ordered_json opt(const std::optional<double>& v) { return v ? ordered_json(*v) : ordered_json(nullptr); }

std::string fixed2(const std::optional<double>& v) {
    if (!v) return "-";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.2f", *v);
    return buf;
}

}  // namespace

std::string to_json(const Leaderboard& board) {
    ordered_json j;
    j["competitors"] = board.competitors;
    j["families"] = ordered_json::array();
    for (const auto& f : board.families) {
        ordered_json fj;
        fj["name"] = f.name;
        fj["score"] = f.score_name;
        fj["columns"] = ordered_json::array();
        for (const auto& c : f.table.columns) {
            ordered_json cj;
            cj["name"] = c.name;
            cj["better"] = c.direction == Better::lower ? "lower" : "higher";
            cj["values"] = ordered_json::array();
            for (const auto& v : c.values) cj["values"].push_back(opt(v));
            if (auto it = f.ranks.find(c.name); it != f.ranks.end()) cj["ranks"] = it->second;
            fj["columns"].push_back(std::move(cj));
        }
        fj["scores"] = ordered_json::array();
        for (const auto& s : f.scores) fj["scores"].push_back(opt(s));
        j["families"].push_back(std::move(fj));
    }
    return j.dump(2) + "\n";
}

std::string to_text(const Leaderboard& board) {
    std::vector<std::vector<std::string>> rows;
    rows.push_back({"metric"});
    for (const auto& c : board.competitors) rows[0].push_back(c);
    for (const auto& f : board.families) {
        for (const auto& c : f.table.columns) {
            std::vector<std::string> row{f.name + "/" + c.name};
            for (const auto& v : c.values) row.push_back(fixed2(v));
            rows.push_back(std::move(row));
        }
        std::vector<std::string> row{f.name + "/" + f.score_name};
        for (const auto& s : f.scores) row.push_back(fixed2(s));
        rows.push_back(std::move(row));
    }
    std::vector<std::size_t> width(rows[0].size(), 0);
    for (const auto& r : rows)
        for (std::size_t i = 0; i < r.size(); ++i) width[i] = std::max(width[i], r[i].size());
    std::string out;
    for (const auto& r : rows) {
        for (std::size_t i = 0; i < r.size(); ++i) {
            if (i == 0) {
                out += r[i] + std::string(width[i] - r[i].size(), ' ');
            } else {
                out += "  " + std::string(width[i] - r[i].size(), ' ') + r[i];
            }
        }
        out += '\n';
    }
    return out;
}

}  // namespace mdbench::metrics
