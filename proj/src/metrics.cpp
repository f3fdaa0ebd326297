#include "mdbench/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace mdbench::metrics {

std::vector<double> rank_competitors(const std::vector<std::optional<double>>& values, Better direction) {
    const std::size_t m = values.size();
    if (m < 2) throw MetricsError("ranking needs at least 2 competitors");

    auto present = [&](std::size_t i) { return values[i] && !std::isnan(*values[i]); };
    std::vector<std::size_t> order(m);
    std::iota(order.begin(), order.end(), 0);
    // Worst first: missing, then present values from worst to best.
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (present(a) != present(b)) return !present(a);
        if (!present(a)) return false;
        return direction == Better::higher ? *values[a] < *values[b] : *values[a] > *values[b];
    });
    auto same = [&](std::size_t a, std::size_t b) {
        if (present(a) != present(b)) return false;
        return !present(a) || *values[a] == *values[b];
    };

    std::vector<double> ranks(m);
    for (std::size_t i = 0; i < m;) {
        std::size_t j = i + 1;
        while (j < m && same(order[i], order[j])) ++j;
        const double shared = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
        for (std::size_t k = i; k < j; ++k) ranks[order[k]] = shared;
        i = j;
    }
    return ranks;
}

const SubMetric& SubMetricTable::column(std::string_view name) const {
    for (const auto& c : columns)
        if (c.name == name) return c;
    throw MetricsError("missing sub-metric column '" + std::string(name) + "'");
}

bool SubMetricTable::has(std::string_view name) const {
    return std::any_of(columns.begin(), columns.end(), [&](const SubMetric& c) { return c.name == name; });
}

Better play_direction(std::string_view column) {
    if (column == kIllegalMovePct || column == kCentipawnLoss || column == kMissedEndState || column == kMse)
        return Better::lower;
    return Better::higher;
}

namespace {

std::vector<double> column_ranks(const SubMetricTable& t, std::string_view name) {
    const auto& c = t.column(name);
    if (c.values.size() != t.competitors.size())
        throw MetricsError("column '" + c.name + "' does not cover every competitor");
    return rank_competitors(c.values, c.direction);
}

}  // namespace

std::vector<double> play_score(const SubMetricTable& table) {
    const std::string_view cols[] = {kIllegalMovePct, kIllegalMoveNumber, kCentipawnLoss, kMissedEndState,
                                     kGameLength};
    std::vector<double> sum(table.competitors.size(), 0.0);
    for (auto name : cols) {
        const auto r = column_ranks(table, name);
        for (std::size_t i = 0; i < r.size(); ++i) sum[i] += r[i];
    }
    for (auto& s : sum) s /= std::size(cols);
    return sum;
}

std::vector<double> eval_score(const SubMetricTable& table) {
    const auto x = column_ranks(table, kMse);
    const auto y = column_ranks(table, kAccuracy);
    std::vector<double> es(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) es[i] = (x[i] + y[i]) / 2.0;
    return es;
}

namespace {

Sentence split(const std::string& s) {
    Sentence out;
    std::istringstream in(s);
    for (std::string w; in >> w;) out.push_back(std::move(w));
    return out;
}

using NgramCounts = std::map<std::vector<std::string>, std::uint64_t>;

NgramCounts ngrams(const Sentence& s, int n) {
    NgramCounts out;
    const auto len = static_cast<int>(s.size());
    for (int i = 0; i + n <= len; ++i) ++out[std::vector<std::string>(s.begin() + i, s.begin() + i + n)];
    return out;
}

}  // namespace

double corpus_bleu_tokens(const std::vector<Sentence>& candidates, const std::vector<std::vector<Sentence>>& references,
                          int max_order) {
    if (candidates.size() != references.size()) throw MetricsError("BLEU: candidate/reference count mismatch");
    if (candidates.empty()) throw MetricsError("BLEU: empty corpus");
    if (max_order < 1) throw MetricsError("BLEU: max order must be positive");

    std::vector<std::uint64_t> matched(max_order, 0), total(max_order, 0);
    std::uint64_t c = 0, r = 0;
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        const auto& cand = candidates[i];
        const auto& refs = references[i];
        if (refs.empty()) throw MetricsError("BLEU: candidate without reference");
        c += cand.size();
        std::size_t best = refs[0].size();
        for (const auto& ref : refs) {
            const auto d = [&](std::size_t len) { return len > cand.size() ? len - cand.size() : cand.size() - len; };
            if (d(ref.size()) < d(best) || (d(ref.size()) == d(best) && ref.size() < best)) best = ref.size();
        }
        r += best;
        for (int n = 1; n <= max_order; ++n) {
            const auto cand_counts = ngrams(cand, n);
            NgramCounts max_ref;
            for (const auto& ref : refs)
                for (const auto& [g, k] : ngrams(ref, n)) max_ref[g] = std::max(max_ref[g], k);
            for (const auto& [g, k] : cand_counts) {
                total[n - 1] += k;
                auto it = max_ref.find(g);
                if (it != max_ref.end()) matched[n - 1] += std::min(k, it->second);
            }
        }
    }

    double log_sum = 0.0;
    for (int n = 0; n < max_order; ++n) {
        if (matched[n] == 0 || total[n] == 0) return 0.0;
        log_sum += std::log(static_cast<double>(matched[n]) / static_cast<double>(total[n]));
    }
    const double bp = c > r ? 1.0 : std::exp(1.0 - static_cast<double>(r) / static_cast<double>(c));
    return 100.0 * bp * std::exp(log_sum / max_order);
}

double corpus_bleu(const std::vector<std::string>& candidates, const std::vector<std::vector<std::string>>& references,
                   int max_order) {
    std::vector<Sentence> cands;
    cands.reserve(candidates.size());
    for (const auto& s : candidates) cands.push_back(split(s));
    std::vector<std::vector<Sentence>> refs;
    refs.reserve(references.size());
    for (const auto& group : references) {
        auto& out = refs.emplace_back();
        for (const auto& s : group) out.push_back(split(s));
    }
    return corpus_bleu_tokens(cands, refs, max_order);
}

double corpus_bleu(const std::vector<std::string>& candidates, const std::vector<std::string>& references,
                   int max_order) {
    std::vector<std::vector<std::string>> refs;
    refs.reserve(references.size());
    for (const auto& r : references) refs.push_back({r});
    return corpus_bleu(candidates, refs, max_order);
}

double nmr(const std::map<std::string, std::uint64_t>& a, const std::map<std::string, std::uint64_t>& b) {
    std::size_t inter = 0, uni = 0;
    auto ia = a.begin(), ib = b.begin();
    auto skip = [](auto& it, const auto& m) {
        while (it != m.end() && it->second == 0) ++it;
    };
    skip(ia, a);
    skip(ib, b);
    while (ia != a.end() || ib != b.end()) {
        if (ib == b.end() || (ia != a.end() && ia->first < ib->first)) {
            ++ia;
        } else if (ia == a.end() || ib->first < ia->first) {
            ++ib;
        } else {
            ++inter;
            ++ia;
            ++ib;
        }
        ++uni;
        skip(ia, a);
        skip(ib, b);
    }
    if (uni == 0) return 1.0;
    return 1.0 - static_cast<double>(inter) / static_cast<double>(uni);
}

double crr(std::uint64_t successes, std::uint64_t attempts) {
    if (attempts == 0) throw MetricsError("CRR: zero attempts");
    if (successes > attempts) throw MetricsError("CRR: successes exceed attempts");
    return static_cast<double>(successes) / static_cast<double>(attempts);
}

double mdls(double nmr_value, double crr_value) {
    if (!(nmr_value >= 0.0 && nmr_value <= 1.0) || !(crr_value >= 0.0 && crr_value <= 1.0))
        throw MetricsError("MDLS inputs must lie in [0, 1]");
    if (nmr_value + crr_value == 0.0) return 0.0;
    return 100.0 * 2.0 * nmr_value * crr_value / (nmr_value + crr_value);
}

}  // namespace mdbench::metrics
