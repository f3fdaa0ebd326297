#include "mdbench/corpus.hpp"

#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <limits>
#include <cstdio>
#include <sstream>

namespace mdbench::corpus {

using nlohmann::json;

int bin_evaluation(double pawns) {
    if (!std::isfinite(pawns)) throw CorpusError("bin_evaluation: non-finite value");
    const double clamped = std::clamp(pawns, -kEvalClamp, kEvalClamp);
    const int bin = static_cast<int>(std::floor((clamped + kEvalClamp) / kBinWidth));
    return std::clamp(bin, 0, kEvalBins - 1);
}

double bin_center(int bin) {
    if (bin < 0 || bin >= kEvalBins) throw CorpusError("bin_center: bin " + std::to_string(bin) + " out of range");
    return -kEvalClamp + (bin + 0.5) * kBinWidth;
}

std::string EvalTarget::text() const {
    if (kind == Kind::non_numeric) return token;
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", bin_center(bin));
    return buf;
}

bool is_mate_token(std::string_view text) {
    if (text.size() < 2 || text.front() != '#') return false;
    std::size_t i = 1;
    if (text[i] == '+' || text[i] == '-') ++i;
    if (i == text.size()) return false;
    return std::all_of(text.begin() + static_cast<std::ptrdiff_t>(i), text.end(),
                       [](char c) { return c >= '0' && c <= '9'; });
}

std::optional<double> parse_real(std::string_view text) {
    while (!text.empty() && std::isspace(static_cast<unsigned char>(text.front()))) text.remove_prefix(1);
    while (!text.empty() && std::isspace(static_cast<unsigned char>(text.back()))) text.remove_suffix(1);
    if (!text.empty() && text.front() == '+') text.remove_prefix(1);
    if (text.empty() || text.front() == '+') return std::nullopt;
    double value = 0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc{} || ptr != text.data() + text.size() || !std::isfinite(value)) return std::nullopt;
    return value;
}

EvalTarget make_eval_target(const RawEval& raw) {
    if (const double* v = std::get_if<double>(&raw)) {
        return EvalTarget{EvalTarget::Kind::numeric_bin, bin_evaluation(*v), {}};
    }
    const std::string& text = std::get<std::string>(raw);
    if (auto v = parse_real(text)) return EvalTarget{EvalTarget::Kind::numeric_bin, bin_evaluation(*v), {}};
    if (is_mate_token(text)) return EvalTarget{EvalTarget::Kind::non_numeric, 0, text};
    throw CorpusError("unrecognized evaluation '" + text + "'");
}

namespace {

std::string trim(std::string_view s) {
    auto not_space = [](char c) { return !std::isspace(static_cast<unsigned char>(c)); };
    auto b = std::find_if(s.begin(), s.end(), not_space);
    auto e = std::find_if(s.rbegin(), s.rend(), not_space).base();
    return b < e ? std::string(b, e) : std::string();
}

std::vector<std::string> split_words(std::string_view s) {
    std::vector<std::string> out;
    std::istringstream in{std::string(s)};
    std::string w;
    while (in >> w) out.push_back(w);
    return out;
}

}  // namespace

std::optional<CodePair> normalize(CodePair pair) {
    // Code: strip trailing whitespace on each line and surrounding blank lines.
    std::string code;
    std::istringstream in(pair.code);
    std::string line;
    while (std::getline(in, line)) {
        while (!line.empty() && std::isspace(static_cast<unsigned char>(line.back()))) line.pop_back();
        code += line;
        code += '\n';
    }
    while (!code.empty() && code.back() == '\n') code.pop_back();
    const auto first = code.find_first_not_of('\n');
    code = first == std::string::npos ? std::string() : code.substr(first);

    std::string doc = join_words(split_words(pair.docstring));
    if (trim(code).empty() || doc.empty()) return std::nullopt;
    return CodePair{std::move(code), std::move(doc)};
}

std::string_view task_name(TaskKind task) {
    switch (task) {
    case TaskKind::move_gen: return "move-gen";
    case TaskKind::board_eval: return "board-eval";
    case TaskKind::code_summarize: return "code-summarize";
    case TaskKind::code_generate: return "code-generate";
    }
    return "unknown";
}

std::optional<TaskKind> parse_task(std::string_view name) {
    for (auto t : {TaskKind::move_gen, TaskKind::board_eval, TaskKind::code_summarize, TaskKind::code_generate})
        if (task_name(t) == name) return t;
    return std::nullopt;
}

std::string_view task_prefix(TaskKind task) {
    switch (task) {
    case TaskKind::code_summarize: return kSummarizePrefix;
    case TaskKind::code_generate: return kGeneratePrefix;
    default: return {};
    }
}

std::string join_words(const std::vector<std::string>& words, std::size_t begin, std::size_t end) {
    end = std::min(end, words.size());
    std::string out;
    for (std::size_t i = begin; i < end; ++i) {
        if (i > begin) out += ' ';
        out += words[i];
    }
    return out;
}

std::vector<TaskSample> make_task_samples(const std::vector<PgnGame>& games, std::size_t opening_plies) {
    std::vector<TaskSample> out;
    out.reserve(games.size());
    for (const auto& g : games) {
        const std::size_t k = std::min(opening_plies, g.moves.size());
        std::string target = join_words(g.moves, k);
        if (!target.empty()) target += ' ';
        target += g.result.empty() ? "*" : g.result;
        out.push_back({TaskKind::move_gen, join_words(g.moves, 0, k), std::move(target)});
    }
    return out;
}

std::vector<TaskSample> make_task_samples(const std::vector<EvalRecord>& records) {
    std::vector<TaskSample> out;
    out.reserve(records.size());
    for (const auto& r : records)
        out.push_back({TaskKind::board_eval, join_words(r.moves), make_eval_target(r.eval).text()});
    return out;
}

std::vector<TaskSample> make_task_samples(TaskKind task, const std::vector<CodePair>& pairs) {
    if (task != TaskKind::code_summarize && task != TaskKind::code_generate)
        throw CorpusError("code pairs only build code-summarize or code-generate samples");
    std::vector<TaskSample> out;
    out.reserve(pairs.size());
    for (const auto& p : pairs) {
        if (task == TaskKind::code_summarize)
            out.push_back({task, std::string(kSummarizePrefix) + p.code, p.docstring});
        else
            out.push_back({task, std::string(kGeneratePrefix) + p.docstring, p.code});
    }
    return out;
}

std::uint64_t uniform_index(std::mt19937_64& rng, std::uint64_t n) {
    // Rejection sampling over the largest multiple of n.
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % n;
    std::uint64_t x;
    do {
        x = rng();
    } while (x >= limit);
    return x % n;
}

std::vector<std::size_t> test_indices(std::size_t n, double test_fraction, std::uint64_t seed) {
    if (!(test_fraction > 0.0 && test_fraction < 1.0))
        throw CorpusError("split: test fraction must lie strictly between 0 and 1");
    if (n == 0) throw CorpusError("split: empty input");
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    deterministic_shuffle(order, seed);
    const auto n_test = static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(n)));
    order.resize(n_test);
    std::sort(order.begin(), order.end());
    return order;
}

namespace {

std::vector<std::string> parse_csv_row(const std::string& line) {
    std::vector<std::string> fields(1);
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                fields.back() += '"';
                ++i;
            } else if (c == '"') {
                quoted = false;
            } else {
                fields.back() += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            fields.emplace_back();
        } else {
            fields.back() += c;
        }
    }
    return fields;
}

std::vector<std::string> moves_from_json(const json& j) {
    if (j.is_string()) return split_words(j.get<std::string>());
    if (j.is_array()) return j.get<std::vector<std::string>>();
    throw CorpusError("'moves' must be a string or an array of strings");
}

}  // namespace

std::vector<EvalRecord> read_eval_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) return {};
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto header = parse_csv_row(line);
    auto column = [&](std::string_view name) -> std::size_t {
        for (std::size_t i = 0; i < header.size(); ++i)
            if (trim(header[i]) == name) return i;
        throw CorpusError("eval CSV: missing column '" + std::string(name) + "'");
    };
    const std::size_t moves_col = column("moves");
    const std::size_t eval_col = column("eval");

    std::vector<EvalRecord> out;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (trim(line).empty()) continue;
        const auto row = parse_csv_row(line);
        if (row.size() <= std::max(moves_col, eval_col))
            throw CorpusError("eval CSV line " + std::to_string(line_no) + ": too few columns");
        const std::string eval = trim(row[eval_col]);
        if (!parse_real(eval) && !is_mate_token(eval))
            throw CorpusError("eval CSV line " + std::to_string(line_no) + ": unrecognized evaluation '" + eval + "'");
        out.push_back({split_words(row[moves_col]), RawEval{eval}});
    }
    return out;
}

std::vector<EvalRecord> read_eval_jsonl(std::istream& in) {
    std::vector<EvalRecord> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        try {
            const json j = json::parse(line);
            EvalRecord rec{moves_from_json(j.at("moves")), 0.0};
            const json& e = j.at("eval");
            if (e.is_number()) rec.eval = e.get<double>();
            else rec.eval = e.get<std::string>();
            make_eval_target(rec.eval);
            out.push_back(std::move(rec));
        } catch (const std::exception& e) {
            throw CorpusError("eval JSONL line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    return out;
}

std::vector<CodePair> read_code_pairs_jsonl(std::istream& in) {
    std::vector<CodePair> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        try {
            const json j = json::parse(line);
            out.push_back({j.at("code").get<std::string>(), j.at("docstring").get<std::string>()});
        } catch (const std::exception& e) {
            throw CorpusError("code JSONL line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    return out;
}

}  // namespace mdbench::corpus
