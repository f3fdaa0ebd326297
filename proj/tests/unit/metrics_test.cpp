#include "mdbench/leaderboard.hpp"
#include "mdbench/metrics.hpp"
#include "support/bleu_oracle.hpp"

#include <gtest/gtest.h>

#include <json.hpp>

#include <random>

using namespace mdbench::metrics;
using mdbench::reports::Direction;
using std::nullopt;

namespace {

SubMetricTable table4() {
    SubMetricTable t;
    t.competitors = {"baseline", "A", "B", "C"};
    t.columns = {
        {std::string(kIllegalMovePct), Better::lower, {9.5, 100.0, 40.1, 60.0}},
        {std::string(kIllegalMoveNumber), Better::higher, {54.0, 1.0, 76.0, 68.0}},
        {std::string(kCentipawnLoss), Better::lower, {1.6, nullopt, 1.2, 0.64}},
        {std::string(kMissedEndState), Better::lower, {0.01, nullopt, 4.6, 0.84}},
        {std::string(kGameLength), Better::higher, {69.0, nullopt, 101.0, 55.0}},
    };
    return t;
}

std::vector<double> d(std::initializer_list<double> v) { return v; }

}  // namespace

TEST(Rank, PaperRows) {
    EXPECT_EQ(rank_competitors({9.5, 100.0, 40.1, 60.0}, Better::lower), d({4, 1, 3, 2}));
    EXPECT_EQ(rank_competitors({69.0, nullopt, 101.0, 55.0}, Better::higher), d({3, 1, 4, 2}));
    EXPECT_EQ(rank_competitors({5.0, 5.0}, Better::higher), d({1.5, 1.5}));
    EXPECT_EQ(rank_competitors({nullopt, nullopt, 1.0}, Better::lower), d({1.5, 1.5, 3}));
    EXPECT_EQ(rank_competitors({std::nan(""), 2.0}, Better::lower), d({1, 2}));
    EXPECT_THROW(rank_competitors({1.0}, Better::lower), MetricsError);
}

TEST(Rank, SumAndMonotoneInvariance) {
    std::mt19937_64 rng(1);
    for (int trial = 0; trial < 500; ++trial) {
        const std::size_t m = 2 + rng() % 8;
        std::vector<std::optional<double>> v(m);
        for (auto& x : v) {
            if (rng() % 5 == 0) continue;
            x = static_cast<double>(rng() % 4);
        }
        const auto dir = rng() % 2 ? Better::lower : Better::higher;
        const auto r = rank_competitors(v, dir);
        double sum = 0;
        for (double x : r) sum += x;
        EXPECT_DOUBLE_EQ(sum, m * (m + 1) / 2.0);

        auto t = v;
        for (auto& x : t)
            if (x) x = std::exp(*x) * 3.0 - 7.0;
        EXPECT_EQ(rank_competitors(t, dir), r);
    }
}

TEST(PlayScore, ReproducesPaperRow) {
    EXPECT_EQ(play_score(table4()), d({3.0, 1.0, 3.2, 2.8}));
}

TEST(PlayScore, TiesAndDominance) {
    SubMetricTable t = table4();
    for (auto& c : t.columns) c.values = {1.0, 1.0, 1.0};
    t.competitors = {"x", "y", "z"};
    EXPECT_EQ(play_score(t), d({2.0, 2.0, 2.0}));

    SubMetricTable two = table4();
    two.competitors = {"good", "bad"};
    for (auto& c : two.columns)
        c.values = c.direction == Better::lower ? std::vector<std::optional<double>>{1.0, 2.0}
                                                : std::vector<std::optional<double>>{2.0, 1.0};
    EXPECT_EQ(play_score(two), d({2.0, 1.0}));

    two.columns.pop_back();
    EXPECT_THROW(play_score(two), MetricsError);
}

TEST(EvalScore, TableFiveConvention) {
    SubMetricTable t;
    t.competitors = {"baseline", "A", "B", "C"};
    t.columns = {{std::string(kMse), Better::lower, {2.42, 60.59, 43.42, 76.45}},
                 {std::string(kAccuracy), Better::higher, {0.0, 0.0, 26.02, 25.35}}};
    EXPECT_EQ(eval_score(t), d({2.75, 1.75, 3.5, 2.0}));

    SubMetricTable same{{"p", "q"}, {{std::string(kMse), Better::lower, {1.0, 1.0}},
                                     {std::string(kAccuracy), Better::higher, {0.5, 0.5}}}};
    EXPECT_EQ(eval_score(same), d({1.5, 1.5}));
}

TEST(Bleu, Anchors) {
    const std::vector<std::string> x = {"the cat sat on the mat", "a b c d e f"};
    EXPECT_DOUBLE_EQ(corpus_bleu(x, x), 100.0);
    EXPECT_EQ(corpus_bleu({"q r s t"}, {"a b c d"}), 0.0);
    EXPECT_THROW(corpus_bleu({"a"}, std::vector<std::string>{}), MetricsError);
    EXPECT_THROW(corpus_bleu(std::vector<std::string>{}, std::vector<std::string>{}), MetricsError);
}

TEST(Bleu, ClippedUnigramPrecision) {
    // Only unigrams: the score is 100 * BP * p1 with BP = 1 (7 > 6 tokens).
    const double s = corpus_bleu({"the the the the the the the"}, {"the cat is on the mat"}, 1);
    EXPECT_NEAR(s, 100.0 * 2.0 / 7.0, 1e-12);
}

TEST(Bleu, BrevityPenaltyAndClosestReference) {
    // Candidate length 4, references of length 3 and 5 are equally close: the shorter wins, so BP = 1.
    const double tie = corpus_bleu({"a b c d"}, std::vector<std::vector<std::string>>{{"a b c d e", "a b c"}}, 1);
    EXPECT_NEAR(tie, 100.0, 1e-12);
    const double shorter = corpus_bleu({"a b"}, {"a b c d"}, 1);
    EXPECT_NEAR(shorter, 100.0 * std::exp(1.0 - 2.0), 1e-12);
}

TEST(Bleu, MatchesBruteForceOracleAndIsPermutationInvariant) {
    std::mt19937_64 rng(9);
    for (int trial = 0; trial < 100; ++trial) {
        auto corpus = mdbench::testing::random_bleu_corpus(rng, 8, 12, 5);
        const double fast = corpus_bleu_tokens(corpus.candidates, corpus.references);
        EXPECT_NEAR(fast, mdbench::testing::brute_force_bleu(corpus.candidates, corpus.references), 1e-9);

        std::vector<std::size_t> order(corpus.candidates.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        std::shuffle(order.begin(), order.end(), rng);
        decltype(corpus) perm;
        for (auto i : order) {
            perm.candidates.push_back(corpus.candidates[i]);
            perm.references.push_back(corpus.references[i]);
        }
        EXPECT_NEAR(corpus_bleu_tokens(perm.candidates, perm.references), fast, 1e-9);
    }
    EXPECT_THROW(corpus_bleu_tokens({{"a"}}, {{}}), MetricsError);
}

TEST(Nmr, Basics) {
    using M = std::map<std::string, std::uint64_t>;
    EXPECT_EQ(nmr({{"e4", 3}}, {{"def", 1}}), 1.0);
    EXPECT_EQ(nmr({{"x", 1}, {"y", 2}}, {{"x", 5}, {"y", 1}}), 0.0);
    EXPECT_EQ(nmr({}, {}), 1.0);
    M a, b;
    for (int i = 0; i < 6; ++i) a["a" + std::to_string(i)] = 1;
    for (int i = 0; i < 6; ++i) b["b" + std::to_string(i)] = 1;
    b["a0"] = b["a1"] = 1;
    b.erase("b0");
    b.erase("b1");
    // |A ∩ B| = 2, |A ∪ B| = 10
    EXPECT_NEAR(nmr(a, b), 0.8, 1e-15);
    EXPECT_EQ(nmr({{"z", 0}}, {{"z", 4}}), 1.0);
}

TEST(Crr, Basics) {
    EXPECT_EQ(crr(0, 10), 0.0);
    EXPECT_EQ(crr(10, 10), 1.0);
    EXPECT_DOUBLE_EQ(crr(453, 500), 0.906);
    EXPECT_THROW(crr(0, 0), MetricsError);
    EXPECT_THROW(crr(3, 2), MetricsError);
}

TEST(Mdls, GoldenAndProperties) {
    EXPECT_NEAR(mdls(1.0 - 0.96, 0.104), 5.78, 0.005);
    EXPECT_NEAR(mdls(1.0 - 0.0, 0.071), 13.26, 0.005);
    EXPECT_NEAR(mdls(1.0 - 0.00001, 0.906), 95.07, 0.005);
    EXPECT_EQ(mdls(0.7, 0.0), 0.0);
    EXPECT_EQ(mdls(0.0, 0.0), 0.0);
    EXPECT_THROW(mdls(1.5, 0.1), MetricsError);
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int i = 0; i < 1000; ++i) {
        const double a = u(rng), b = u(rng);
        EXPECT_DOUBLE_EQ(mdls(a, b), mdls(b, a));
        EXPECT_LE(mdls(a, b), 100.0 * 2.0 * std::min(a, b) + 1e-12);
        EXPECT_GE(mdls(a, b), 0.0);
        EXPECT_LE(mdls(a, b), 100.0);
    }
}

TEST(Leaderboard, FromPaperTables) {
    Leaderboard board;
    board.competitors = {"baseline", "A", "B", "C"};
    board.families.push_back(play_family(table4()));
    board.families.push_back(mdls_family(board.competitors, {0.5, 1.0 - 0.96, 1.0, 1.0 - 0.00001},
                                         {0.5, 0.104, 0.071, 0.906}));
    const auto& play = *board.family("play");
    EXPECT_EQ(play.scores, (std::vector<std::optional<double>>{3.0, 1.0, 3.2, 2.8}));
    EXPECT_EQ(play.ranks.at(std::string(kCentipawnLoss)), d({2, 1, 3, 4}));

    const std::string text = to_text(board);
    EXPECT_NE(text.find("play/PS"), std::string::npos);
    EXPECT_NE(text.find("5.78"), std::string::npos);
    EXPECT_NE(text.find("13.26"), std::string::npos);
    EXPECT_NE(text.find("95.07"), std::string::npos);
    EXPECT_EQ(to_json(board), to_json(board));
    auto j = nlohmann::json::parse(to_json(board));
    EXPECT_EQ(j["families"][0]["scores"][2].get<double>(), 3.2);
    EXPECT_TRUE(j["families"][0]["columns"][2]["values"][1].is_null());
}
