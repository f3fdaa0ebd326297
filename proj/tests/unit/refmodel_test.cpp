#include "mdbench/refmodel.hpp"
#include "support/games.hpp"

#include <gtest/gtest.h>

#include <random>
#include <regex>
#include <sstream>

using namespace mdbench;
using namespace mdbench::refmodel;
using corpus::TaskKind;
using corpus::TaskSample;

namespace {

TaskSample text(std::string input, std::string target) { return {TaskKind::move_gen, std::move(input), std::move(target)}; }

std::vector<std::string> split_words(const std::string& s) {
    std::istringstream in(s);
    std::vector<std::string> out;
    for (std::string w; in >> w;) out.push_back(w);
    return out;
}

}  // namespace

TEST(Ngram, SingleContinuation) {
    const auto m = NgramModel::train({text("", "abab")}, 2, bpe::Vocabulary());
    const TokenId a = 'a', b = 'b';
    EXPECT_DOUBLE_EQ(m.probability(std::vector<TokenId>{a}, b), 1.0);
    EXPECT_EQ(m.count(std::vector<TokenId>{a}, b), 2u);
    EXPECT_EQ(m.count(std::vector<TokenId>{b}, a), 1u);
    EXPECT_EQ(m.count(std::vector<TokenId>{b}, kBoundary), 1u);
    EXPECT_EQ(m.generate("a", {.max_new_tokens = 1}), "b");
}

TEST(Ngram, UnigramEqualsTokenFrequencies) {
    const std::vector<TaskSample> samples = {text("e4 e5", "Nf3 1-0"), text("", "d4 d5 c4"), text("c4", "e5 *")};
    const auto vocab = bpe::train({"e4 e5 Nf3 1-0", "d4 d5 c4", "c4 e5 *"}, 270);
    const auto m = NgramModel::train(samples, 1, vocab);

    std::map<TokenId, std::uint64_t> expected;
    for (const auto& s : samples) {
        for (TokenId id : bpe::encode(vocab, s.input)) ++expected[id];
        for (TokenId id : bpe::encode(vocab, s.input.empty() ? s.target : " " + s.target)) ++expected[id];
        ++expected[kBoundary];
    }
    const auto& uni = m.table(1);
    ASSERT_EQ(uni.size(), 1u);
    EXPECT_EQ(uni.begin()->second, (NgramModel::Counts(expected.begin(), expected.end())));
}

TEST(Ngram, BackoffContextsExist) {
    std::vector<TaskSample> samples;
    for (int i = 0; i < 30; ++i) samples.push_back(text(mdbench::testing::random_game(i, 20).moves[0], "x"));
    const auto m = NgramModel::train(samples, 4, bpe::Vocabulary());
    for (int j = 2; j <= 4; ++j) {
        for (const auto& [ctx, counts] : m.table(j)) {
            NgramModel::Context shorter(ctx.begin() + 1, ctx.end());
            EXPECT_TRUE(m.table(j - 1).count(shorter)) << "order " << j;
            for (const auto& [tok, c] : counts) EXPECT_GT(c, 0u);
        }
    }
}

TEST(Ngram, TrainingIsDeterministic) {
    std::vector<TaskSample> samples;
    for (int i = 0; i < 20; ++i) samples.push_back(text("", corpus::join_words(mdbench::testing::random_game(i, 40).moves)));
    const auto vocab = bpe::train({samples[0].target, samples[1].target}, 300);
    EXPECT_EQ(NgramModel::train(samples, 3, vocab), NgramModel::train(samples, 3, vocab));
}

TEST(Ngram, GenerationIsPureInSeed) {
    std::vector<TaskSample> samples;
    for (int i = 0; i < 50; ++i) samples.push_back(text("", corpus::join_words(mdbench::testing::random_game(100 + i, 30).moves)));
    const auto m = NgramModel::train(samples, 3, bpe::Vocabulary());
    for (std::uint64_t seed : {0u, 1u, 99u}) {
        EXPECT_EQ(m.generate("e4", {.max_new_tokens = 40, .seed = seed}), m.generate("e4", {.max_new_tokens = 40, .seed = seed}));
        GenerateOptions s{.max_new_tokens = 40, .seed = seed, .sample = true};
        EXPECT_EQ(m.generate("e4", s), m.generate("e4", s));
    }
    std::set<std::string> sampled;
    for (std::uint64_t seed = 0; seed < 20; ++seed)
        sampled.insert(m.generate("", {.max_new_tokens = 20, .seed = seed, .sample = true}));
    EXPECT_GT(sampled.size(), 1u);
}

TEST(Ngram, UnseenPromptBacksOffToUnigram) {
    const auto m = NgramModel::train({text("", "aaab"), text("", "aab")}, 3, bpe::Vocabulary());
    EXPECT_EQ(m.generate("\x7f\x7f\x7f", {.max_new_tokens = 1}), "a");
    EXPECT_NO_THROW(m.generate("zzz", {.max_new_tokens = 10}));
}

TEST(Ngram, SelectedTokensAlwaysHaveCounts) {
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 40; ++trial) {
        std::vector<TaskSample> samples;
        for (int i = 0; i < 5; ++i) {
            std::string s;
            for (int k = 0; k < 12; ++k) s += static_cast<char>('a' + rng() % 4);
            samples.push_back(text(s.substr(0, 3), s.substr(3)));
        }
        const int order = 1 + static_cast<int>(rng() % 4);
        const auto m = NgramModel::train(samples, order, bpe::Vocabulary());
        for (bool sample : {false, true}) {
            const std::string prompt = std::string(1, static_cast<char>('a' + rng() % 6));
            const auto ids = m.generate_ids(prompt, {.max_new_tokens = 30, .seed = trial, .sample = sample});
            std::vector<TokenId> history{kBoundary};
            for (char c : prompt) history.push_back(static_cast<unsigned char>(c));
            for (TokenId id : ids) {
                EXPECT_NE(id, kBoundary);
                EXPECT_GT(m.probability(history, id), 0.0);
                history.push_back(id);
            }
        }
    }
}

TEST(Ngram, RepeatedGameIsRegenerated) {
    for (std::uint64_t seed : {7u, 8u, 9u}) {
        const auto game = mdbench::testing::random_game(seed, 40);
        const auto whole = corpus::make_task_samples(std::vector<corpus::PgnGame>{game}, 6);
        const std::vector<TaskSample> samples(10, whole[0]);
        const auto vocab = bpe::train(std::vector<std::string>{whole[0].input + " " + whole[0].target}, 320);
        // Order longer than the game's token stream, so every context is unique.
        const auto m = NgramModel::train(samples, 64, vocab);
        EXPECT_EQ(m.generate(whole[0].input, {.max_new_tokens = 1000}), whole[0].target) << "seed " << seed;
    }
}

TEST(Ngram, ChessModelEmitsSanShapedTokens) {
    std::vector<corpus::PgnGame> games;
    for (int i = 0; i < 1000; ++i) games.push_back(mdbench::testing::random_game(5000 + i, 60));
    const auto samples = corpus::make_task_samples(games, 0);
    std::vector<std::string> docs;
    for (int i = 0; i < 200; ++i) docs.push_back(samples[i].target);
    const auto m = NgramModel::train(samples, 4, bpe::train(docs, 400));

    const std::regex san(R"((O-O(-O)?|[NBRQK][a-h]?[1-8]?x?[a-h][1-8]|([a-h]x)?[a-h][1-8](=[NBRQ])?)[+#]?)");
    int tokens = 0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const auto out = split_words(m.generate("e4 e5 Nf3", {.max_new_tokens = 60, .seed = seed}));
        for (std::size_t i = 0; i < out.size(); ++i) {
            // The final word may be cut mid-token by the length limit.
            if (i + 1 == out.size()) break;
            EXPECT_TRUE(std::regex_match(out[i], san) || corpus::is_result_token(out[i])) << out[i];
            ++tokens;
        }
    }
    EXPECT_GT(tokens, 100);
}

TEST(Ngram, SaveLoadRoundTrip) {
    std::vector<TaskSample> samples;
    for (int i = 0; i < 20; ++i) samples.push_back(text("e4", corpus::join_words(mdbench::testing::random_game(i, 30).moves)));
    const auto m = NgramModel::train(samples, 3, bpe::train({samples[0].target, samples[1].target}, 290));
    std::stringstream buf;
    m.save(buf);
    const std::string bytes = buf.str();
    std::istringstream in(bytes);
    const auto back = NgramModel::load(in);
    EXPECT_EQ(back, m);
    EXPECT_EQ(back.generate("e4", {.max_new_tokens = 30, .seed = 4}), m.generate("e4", {.max_new_tokens = 30, .seed = 4}));

    for (std::size_t cut : {std::size_t{0}, std::size_t{5}, std::size_t{20}, bytes.size() / 2, bytes.size() - 1}) {
        std::istringstream t(bytes.substr(0, cut));
        EXPECT_THROW(NgramModel::load(t), RefModelError) << cut;
    }
    std::string bad = bytes;
    bad[8] = 9;  // version
    std::istringstream v(bad);
    EXPECT_THROW(NgramModel::load(v), RefModelError);
    std::istringstream extra(bytes + "x");
    EXPECT_THROW(NgramModel::load(extra), RefModelError);
}

TEST(Ngram, Errors) {
    EXPECT_THROW(NgramModel::train({}, 2, bpe::Vocabulary()), RefModelError);
    EXPECT_THROW(NgramModel::train({text("", "a")}, 0, bpe::Vocabulary()), RefModelError);
}

TEST(Serve, ConformanceAndSeedFlags) {
    std::vector<TaskSample> samples;
    for (int i = 0; i < 50; ++i) samples.push_back(text("", corpus::join_words(mdbench::testing::random_game(i, 30).moves)));
    auto model = std::make_shared<const NgramModel>(NgramModel::train(samples, 3, bpe::Vocabulary()));
    auto session = serve_adapter(model);
    const auto rep = adapter::run_conformance(*session, false);
    for (const auto& c : rep.checks) EXPECT_TRUE(c.passed) << c.name << ": " << c.detail;
    EXPECT_TRUE(rep.seeded_reproducible);
    EXPECT_EQ(session->unseeded_requests(), std::vector<std::string>{"conf-unseeded"});

    const auto out = session->generate_batch({{"q", "move-gen", "e4", 5, 3}});
    ASSERT_TRUE(out[0].ok());
    EXPECT_EQ(out[0].response->output, model->generate("e4", {.max_new_tokens = 5, .seed = 3}));
    EXPECT_LE(*out[0].response->token_count, 5);
    session->close();
    EXPECT_EQ(session->generate_batch({{"r", "move-gen", "e4", 5, 3}})[0].error, adapter::AdapterErrc::session_closed);
}
