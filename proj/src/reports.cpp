#include "mdbench/reports.hpp"

#include <json.hpp>

#include <algorithm>
#include <fstream>
#include <limits>
#include <sstream>

namespace mdbench::reports {

using nlohmann::json;
using nlohmann::ordered_json;

GameAggregates aggregate_games(const std::vector<GameReport>& games, std::optional<int> cap) {
    const long long limit = cap ? *cap : std::numeric_limits<int>::max();
    GameAggregates agg;
    long long illegal_number_sum = 0;
    double loss_sum = 0.0;
    long long length_sum = 0;
    std::uint64_t missed = 0;

    for (const auto& g : games) {
        if (g.error) {
            ++agg.errored;
            continue;
        }
        ++agg.games;
        const long long room = std::max(0LL, limit - g.prompt_plies);
        const long long accepted = std::min<long long>(g.moves_accepted, room);
        const bool illegal = g.illegal_move_number && *g.illegal_move_number <= room;
        agg.move_tokens += static_cast<std::uint64_t>(accepted + (illegal ? 1 : 0));
        agg.moves_accepted += static_cast<std::uint64_t>(accepted);
        if (illegal) {
            ++agg.illegal_moves;
            illegal_number_sum += g.prompt_plies + *g.illegal_move_number;
        }
        const long long length = g.prompt_plies + accepted;
        length_sum += length;
        if (g.missed_end_state && g.game_length() < limit) ++missed;
        const auto scored = std::min<std::size_t>(g.centipawn_losses.size(), static_cast<std::size_t>(accepted));
        for (std::size_t i = 0; i < scored; ++i) loss_sum += g.centipawn_losses[i];
        agg.moves_scored += scored;
    }

    if (agg.move_tokens > 0)
        agg.illegal_move_pct = 100.0 * static_cast<double>(agg.illegal_moves) / static_cast<double>(agg.move_tokens);
    if (agg.illegal_moves > 0)
        agg.avg_illegal_move_number = static_cast<double>(illegal_number_sum) / static_cast<double>(agg.illegal_moves);
    if (agg.moves_scored > 0) agg.avg_centipawn_loss = loss_sum / static_cast<double>(agg.moves_scored);
    // Games where the model never produced a legal move say nothing about
    // end-state handling or length.
    if (agg.moves_accepted > 0) {
        agg.missed_end_state_pct = 100.0 * static_cast<double>(missed) / static_cast<double>(agg.games);
        agg.avg_game_length = static_cast<double>(length_sum) / static_cast<double>(agg.games);
    }
    return agg;
}

namespace {

std::string trimmed(std::string_view s) {
    auto not_space = [](char c) { return !std::isspace(static_cast<unsigned char>(c)); };
    auto b = std::find_if(s.begin(), s.end(), not_space);
    auto e = std::find_if(s.rbegin(), s.rend(), not_space).base();
    return b < e ? std::string(b, e) : std::string();
}

std::optional<double> ratio(std::uint64_t num, std::uint64_t den) {
    if (den == 0) return std::nullopt;
    return static_cast<double>(num) / static_cast<double>(den);
}

}  // namespace

void EvalReport::add(const EvalOutcome& o) {
    const auto truth = corpus::parse_real(o.target);
    const std::string pred = trimmed(o.prediction);
    const auto guess = o.error ? std::nullopt : corpus::parse_real(pred);
    if (truth) {
        ++true_numeric;
        if (guess) {
            ++predicted_numeric;
            const double d = corpus::bin_center(corpus::bin_evaluation(*guess)) -
                             corpus::bin_center(corpus::bin_evaluation(*truth));
            squared_error_sum += d * d;
            ++squared_error_count;
        }
    } else {
        ++true_non_numeric;
        if (!o.error && !guess) {
            ++predicted_non_numeric;
            if (pred == trimmed(o.target)) ++correct_non_numeric;
        }
    }
}

std::optional<double> EvalReport::ratio_numeric() const { return ratio(predicted_numeric, true_numeric); }
std::optional<double> EvalReport::ratio_non_numeric() const { return ratio(predicted_non_numeric, true_non_numeric); }
std::optional<double> EvalReport::accuracy() const { return ratio(correct_non_numeric, true_non_numeric); }
std::optional<double> EvalReport::mse() const {
    if (squared_error_count == 0) return std::nullopt;
    return squared_error_sum / static_cast<double>(squared_error_count);
}

EvalReport fold(const std::vector<EvalOutcome>& outcomes) {
    EvalReport r;
    for (const auto& o : outcomes) r.add(o);
    return r;
}

std::string_view direction_name(Direction d) {
    return d == Direction::code_to_summary ? "code-summarize" : "code-generate";
}

std::optional<Direction> parse_direction(std::string_view name) {
    if (name == "code-summarize") return Direction::code_to_summary;
    if (name == "code-generate") return Direction::summary_to_code;
    return std::nullopt;
}

std::string_view domain_name(Domain d) {
    switch (d) {
    case Domain::chess: return "chess";
    case Domain::code: return "code";
    case Domain::ambiguous: return "ambiguous";
    }
    return "ambiguous";
}

std::optional<Domain> parse_domain(std::string_view name) {
    for (auto d : {Domain::chess, Domain::code, Domain::ambiguous})
        if (domain_name(d) == name) return d;
    return std::nullopt;
}

std::vector<std::string> whitespace_tokens(std::string_view text) {
    std::vector<std::string> out;
    std::size_t i = 0;
    while (i < text.size()) {
        while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
        std::size_t j = i;
        while (j < text.size() && !std::isspace(static_cast<unsigned char>(text[j]))) ++j;
        if (j > i) out.emplace_back(text.substr(i, j - i));
        i = j;
    }
    return out;
}

void ProbeReport::add(const ProbeOutcome& o) {
    auto& bag = o.prompted == Domain::chess ? chess_output_tokens : code_output_tokens;
    if (!o.error)
        for (auto& t : whitespace_tokens(o.output)) ++bag[t];
    if (o.cross_domain) {
        ++attempts;
        if (o.success && !o.error) ++successes;
    }
}

ProbeReport fold(const std::vector<ProbeOutcome>& outcomes) {
    ProbeReport r;
    for (const auto& o : outcomes) r.add(o);
    return r;
}

namespace {

void put_error(ordered_json& j, const std::optional<std::string>& error) {
    j["error"] = error ? ordered_json(*error) : ordered_json(nullptr);
}

std::optional<std::string> get_error(const json& j) {
    if (!j.contains("error") || j["error"].is_null()) return std::nullopt;
    return j["error"].get<std::string>();
}

chess::TerminationCause parse_cause(const std::string& s) {
    using C = chess::TerminationCause;
    for (auto c : {C::checkmate, C::stalemate, C::insufficient_material, C::fifty_move, C::threefold_repetition})
        if (chess::to_string(c) == s) return c;
    throw ReportError("unknown termination cause '" + s + "'");
}

chess::Outcome parse_outcome(const std::string& s) {
    if (s == "1-0") return chess::Outcome::white_win;
    if (s == "0-1") return chess::Outcome::black_win;
    if (s == "1/2-1/2") return chess::Outcome::draw;
    throw ReportError("unknown result '" + s + "'");
}

template <typename F>
auto parse_line(const std::string& line, F f) {
    try {
        return f(json::parse(line));
    } catch (const ReportError&) {
        throw;
    } catch (const std::exception& e) {
        throw ReportError(e.what());
    }
}

template <typename T, typename Parse>
std::vector<T> read_lines(const std::filesystem::path& path, Parse parse) {
    std::ifstream in(path);
    if (!in) throw ReportError("cannot open report '" + path.string() + "'");
    std::vector<T> out;
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
        ++n;
        if (trimmed(line).empty()) continue;
        try {
            out.push_back(parse(line));
        } catch (const std::exception& e) {
            throw ReportError(path.string() + ":" + std::to_string(n) + ": " + e.what());
        }
    }
    return out;
}

}  // namespace

std::string to_jsonl(const GameReport& r) {
    ordered_json j;
    j["index"] = r.index;
    j["prompt_plies"] = r.prompt_plies;
    j["moves_accepted"] = r.moves_accepted;
    j["illegal_move_number"] = r.illegal_move_number ? ordered_json(*r.illegal_move_number) : ordered_json(nullptr);
    j["illegal_token"] = r.illegal_token;
    j["missed_end_state"] = r.missed_end_state;
    if (r.termination) {
        j["termination"] = {{"cause", chess::to_string(r.termination->cause)},
                            {"result", r.termination->token()}};
    } else {
        j["termination"] = nullptr;
    }
    j["declared_result"] = r.declared_result ? ordered_json(*r.declared_result) : ordered_json(nullptr);
    j["centipawn_losses"] = r.centipawn_losses;
    j["capped"] = r.capped;
    put_error(j, r.error);
    return j.dump();
}

GameReport game_from_jsonl(const std::string& line) {
    return parse_line(line, [](const json& j) {
        GameReport r;
        r.index = j.at("index").get<std::size_t>();
        r.prompt_plies = j.at("prompt_plies").get<int>();
        r.moves_accepted = j.at("moves_accepted").get<int>();
        if (!j.at("illegal_move_number").is_null()) r.illegal_move_number = j["illegal_move_number"].get<int>();
        r.illegal_token = j.value("illegal_token", "");
        r.missed_end_state = j.at("missed_end_state").get<bool>();
        if (j.contains("termination") && !j["termination"].is_null()) {
            const auto& t = j["termination"];
            r.termination = chess::GameTermination{parse_outcome(t.at("result").get<std::string>()),
                                                   parse_cause(t.at("cause").get<std::string>())};
        }
        if (j.contains("declared_result") && !j["declared_result"].is_null())
            r.declared_result = j["declared_result"].get<std::string>();
        r.centipawn_losses = j.value("centipawn_losses", std::vector<double>{});
        r.capped = j.value("capped", false);
        r.error = get_error(j);
        if (r.prompt_plies < 0 || r.moves_accepted < 0) throw ReportError("negative move count");
        if (r.illegal_move_number && (*r.illegal_move_number < 1 || *r.illegal_move_number > r.moves_accepted + 1))
            throw ReportError("illegal move number out of range");
        for (double l : r.centipawn_losses)
            if (!(l >= 0.0)) throw ReportError("negative centipawn loss");
        return r;
    });
}

std::string to_jsonl(const EvalOutcome& r) {
    ordered_json j;
    j["index"] = r.index;
    j["target"] = r.target;
    j["prediction"] = r.prediction;
    put_error(j, r.error);
    return j.dump();
}

EvalOutcome eval_from_jsonl(const std::string& line) {
    return parse_line(line, [](const json& j) {
        return EvalOutcome{j.at("index").get<std::size_t>(), j.at("target").get<std::string>(),
                           j.at("prediction").get<std::string>(), get_error(j)};
    });
}

std::string to_jsonl(const TranslationPair& r, Direction d) {
    ordered_json j;
    j["index"] = r.index;
    j["direction"] = direction_name(d);
    j["candidate"] = r.candidate;
    j["reference"] = r.reference;
    put_error(j, r.error);
    return j.dump();
}

TranslationPair translation_from_jsonl(const std::string& line, Direction* direction) {
    return parse_line(line, [&](const json& j) {
        const auto d = parse_direction(j.at("direction").get<std::string>());
        if (!d) throw ReportError("unknown direction");
        if (direction) *direction = *d;
        return TranslationPair{j.at("index").get<std::size_t>(), j.at("candidate").get<std::string>(),
                               j.at("reference").get<std::string>(), get_error(j)};
    });
}

std::string to_jsonl(const ProbeOutcome& r) {
    ordered_json j;
    j["index"] = r.index;
    j["prompted"] = domain_name(r.prompted);
    j["cross_domain"] = r.cross_domain;
    j["output"] = r.output;
    j["chess_tokens"] = r.chess_tokens;
    j["code_tokens"] = r.code_tokens;
    j["success"] = r.success;
    put_error(j, r.error);
    return j.dump();
}

ProbeOutcome probe_from_jsonl(const std::string& line) {
    return parse_line(line, [](const json& j) {
        ProbeOutcome o;
        o.index = j.at("index").get<std::size_t>();
        const auto d = parse_domain(j.at("prompted").get<std::string>());
        if (!d || *d == Domain::ambiguous) throw ReportError("prompted domain must be chess or code");
        o.prompted = *d;
        o.cross_domain = j.at("cross_domain").get<bool>();
        o.output = j.at("output").get<std::string>();
        o.chess_tokens = j.at("chess_tokens").get<std::size_t>();
        o.code_tokens = j.at("code_tokens").get<std::size_t>();
        o.success = j.at("success").get<bool>();
        o.error = get_error(j);
        return o;
    });
}

std::vector<GameReport> read_game_reports(const std::filesystem::path& path) {
    return read_lines<GameReport>(path, game_from_jsonl);
}

std::vector<EvalOutcome> read_eval_outcomes(const std::filesystem::path& path) {
    return read_lines<EvalOutcome>(path, eval_from_jsonl);
}

TranslationReport read_translation_report(const std::filesystem::path& path) {
    TranslationReport report;
    std::optional<Direction> seen;
    report.pairs = read_lines<TranslationPair>(path, [&](const std::string& line) {
        Direction d{};
        auto p = translation_from_jsonl(line, &d);
        if (seen && *seen != d) throw ReportError("mixed translation directions");
        seen = d;
        return p;
    });
    if (seen) report.direction = *seen;
    return report;
}

std::vector<ProbeOutcome> read_probe_outcomes(const std::filesystem::path& path) {
    return read_lines<ProbeOutcome>(path, probe_from_jsonl);
}

}  // namespace mdbench::reports
