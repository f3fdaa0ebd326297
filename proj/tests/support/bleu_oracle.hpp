#pragma once

// Direct-enumeration BLEU used as an independent oracle for corpus_bleu.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace mdbench::testing {

using Tokens = std::vector<std::string>;

struct BleuCorpus {
    std::vector<Tokens> candidates;
    std::vector<std::vector<Tokens>> references;
};

inline std::size_t occurrences(const Tokens& s, const Tokens& s_src, std::size_t at, std::size_t n) {
    std::size_t count = 0;
    for (std::size_t i = 0; i + n <= s.size(); ++i) {
        bool eq = true;
        for (std::size_t k = 0; k < n && eq; ++k) eq = s[i + k] == s_src[at + k];
        count += eq;
    }
    return count;
}

inline double brute_force_bleu(const std::vector<Tokens>& cands, const std::vector<std::vector<Tokens>>& refs,
                               std::size_t max_n = 4) {
    std::vector<double> clipped(max_n + 1, 0.0), totals(max_n + 1, 0.0);
    double c = 0, r = 0;
    for (std::size_t s = 0; s < cands.size(); ++s) {
        const Tokens& cand = cands[s];
        c += static_cast<double>(cand.size());
        // Closest reference length; ties resolved to the shorter reference.
        std::size_t best_len = 0;
        long best_diff = -1;
        for (const auto& ref : refs[s]) {
            const long diff = std::labs(static_cast<long>(ref.size()) - static_cast<long>(cand.size()));
            if (best_diff < 0 || diff < best_diff || (diff == best_diff && ref.size() < best_len)) {
                best_diff = diff;
                best_len = ref.size();
            }
        }
        r += static_cast<double>(best_len);
        for (std::size_t n = 1; n <= max_n; ++n) {
            for (std::size_t i = 0; i + n <= cand.size(); ++i) {
                totals[n] += 1;
                // Credit each distinct n-gram once, at its first position.
                bool first = true;
                for (std::size_t j = 0; j < i && first; ++j)
                    first = !std::equal(cand.begin() + j, cand.begin() + j + n, cand.begin() + i);
                if (!first) continue;
                const std::size_t in_cand = occurrences(cand, cand, i, n);
                std::size_t in_ref = 0;
                for (const auto& ref : refs[s]) in_ref = std::max(in_ref, occurrences(ref, cand, i, n));
                clipped[n] += static_cast<double>(std::min(in_cand, in_ref));
            }
        }
    }
    double product = 1.0;
    for (std::size_t n = 1; n <= max_n; ++n) {
        if (clipped[n] == 0.0 || totals[n] == 0.0) return 0.0;
        product *= clipped[n] / totals[n];
    }
    const double bp = c > r ? 1.0 : std::exp(1.0 - r / c);
    return 100.0 * bp * std::pow(product, 1.0 / static_cast<double>(max_n));
}

/// Random corpus with a small vocabulary; references are mutated copies of
/// the candidate so that higher-order matches actually occur.
inline BleuCorpus random_bleu_corpus(std::mt19937_64& rng, std::size_t max_sentences, std::size_t max_tokens,
                                     std::size_t vocab) {
    auto word = [&] { return "w" + std::to_string(rng() % vocab); };
    BleuCorpus out;
    const std::size_t n = 1 + rng() % max_sentences;
    for (std::size_t s = 0; s < n; ++s) {
        Tokens cand(rng() % (max_tokens + 1));
        for (auto& t : cand) t = word();
        std::vector<Tokens> refs;
        const std::size_t nrefs = 1 + rng() % 3;
        for (std::size_t k = 0; k < nrefs; ++k) {
            Tokens ref;
            for (const auto& t : cand) {
                const auto roll = rng() % 10;
                if (roll == 0) continue;
                ref.push_back(roll == 1 ? word() : t);
                if (roll == 2) ref.push_back(word());
            }
            while (ref.size() > max_tokens) ref.pop_back();
            refs.push_back(std::move(ref));
        }
        out.candidates.push_back(std::move(cand));
        out.references.push_back(std::move(refs));
    }
    return out;
}

}  // namespace mdbench::testing
