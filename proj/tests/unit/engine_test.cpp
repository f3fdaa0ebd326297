#include "mdbench/engine.hpp"
#include "mdbench/subprocess.hpp"

#include <gtest/gtest.h>

#include <cstdlib>
#include <random>
#include <thread>

using namespace mdbench::engine;
using namespace mdbench::chess;
using namespace std::chrono_literals;

namespace {

EngineSession toy(EngineOptions opts = {}) { return EngineSession::spawn(MDBENCH_TOY_ENGINE, opts); }

struct ScopedEnv {
    const char* name;
    ScopedEnv(const char* n, const char* v) : name(n) { setenv(n, v, 1); }
    ~ScopedEnv() { unsetenv(name); }
};

}  // namespace

TEST(Subprocess, EchoRoundTripAndExit) {
    auto p = mdbench::process::Subprocess::shell("cat");
    p.write_line("hello", 1s);
    std::string line;
    ASSERT_EQ(p.read_line(line, 2s), mdbench::process::ReadStatus::line);
    EXPECT_EQ(line, "hello");
    p.close_stdin();
    EXPECT_EQ(p.read_line(line, 2s), mdbench::process::ReadStatus::eof);
    const int st = p.wait(1s);
    EXPECT_TRUE(WIFEXITED(st));
    EXPECT_FALSE(p.running());
}

TEST(Subprocess, TimeoutAndKill) {
    auto p = mdbench::process::Subprocess::shell("sleep 30");
    std::string line;
    EXPECT_EQ(p.read_line(line, 50ms), mdbench::process::ReadStatus::timeout);
    const int st = p.wait(50ms);
    EXPECT_TRUE(WIFSIGNALED(st));
}

TEST(Subprocess, WriteToExitedChildThrows) {
    auto p = mdbench::process::Subprocess::shell("exit 0");
    p.wait(2s);
    std::string big(1 << 20, 'x');
    EXPECT_THROW(p.write(big, 1s), mdbench::process::ProcessError);
}

TEST(Subprocess, MissingExecutable) {
    EXPECT_THROW(mdbench::process::Subprocess::exec({"/nonexistent/engine"}), mdbench::process::ProcessError);
}

TEST(Engine, HandshakeTranscript) {
    auto s = toy();
    EXPECT_EQ(s.name(), "mdbench-toy 1.0");
    EXPECT_EQ(s.sent(), (std::vector<std::string>{"uci", "setoption name Threads value 1", "isready"}));
}

TEST(Engine, NonEngineTimesOut) {
    EngineOptions opts;
    opts.handshake_timeout = 300ms;
    try {
        EngineSession::spawn("/bin/cat", opts);
        FAIL();
    } catch (const EngineError& e) {
        EXPECT_EQ(e.code(), EngineErrc::handshake_timeout);
    }
}

TEST(Engine, SpawnAndDeathErrors) {
    try {
        EngineSession::spawn("/nonexistent/stockfish");
        FAIL();
    } catch (const EngineError& e) {
        EXPECT_EQ(e.code(), EngineErrc::spawn_failed);
    }
    try {
        EngineSession::spawn("/bin/true");
        FAIL();
    } catch (const EngineError& e) {
        EXPECT_EQ(e.code(), EngineErrc::engine_died);
    }
}

TEST(Engine, InitialPositionBestMoveIsLegal) {
    auto s = toy();
    const auto info = s.analyse(Position::initial(), AnalysisLimit::depth(1));
    EXPECT_EQ(info.depth, 1);
    EXPECT_NO_THROW(parse_uci(Position::initial(), info.best_move));
    EXPECT_EQ(s.sent().back(), "go depth 1");
    EXPECT_EQ(s.sent()[s.sent().size() - 2], "position fen " + Position::initial().fen());
}

TEST(Engine, MateInOne) {
    auto s = toy();
    const auto p = Position::from_fen("6k1/5ppp/8/8/8/8/8/R5K1 w - - 0 1");
    const auto info = s.analyse(p, AnalysisLimit::depth(2));
    EXPECT_EQ(info.kind, ScoreInfo::Kind::mate);
    EXPECT_EQ(info.value, 1);
    const auto after = apply_move(p, parse_uci(p, info.best_move));
    auto term = terminal_state(after);
    ASSERT_TRUE(term);
    EXPECT_EQ(term->cause, TerminationCause::checkmate);
}

TEST(Engine, DeterministicAtFixedDepth) {
    auto s = toy();
    const auto p = Position::from_fen("r1bqkbnr/pppp1ppp/2n5/1B2p3/4P3/5N2/PPPP1PPP/RNBQK2R b KQkq - 3 3");
    EXPECT_EQ(s.analyse(p, AnalysisLimit::depth(2)), s.analyse(p, AnalysisLimit::depth(2)));
}

TEST(Engine, MirroredPositionsScoreAlike) {
    auto s = toy();
    const auto a = s.analyse(Position::from_fen("4k3/8/8/3p4/8/8/8/3QK3 w - - 0 1"), AnalysisLimit::depth(2));
    const auto b = s.analyse(Position::from_fen("3qk3/8/8/8/3P4/8/8/4K3 b - - 0 1"), AnalysisLimit::depth(2));
    EXPECT_EQ(a.kind, b.kind);
    EXPECT_EQ(a.value, b.value);
}

TEST(Engine, CentipawnLoss) {
    auto s = toy();
    const auto p = Position::from_fen("3qk3/8/8/4p3/8/8/8/3QK3 w - - 0 1");
    const auto best = parse_uci(p, s.analyse(p, AnalysisLimit::depth(2)).best_move);
    EXPECT_EQ(centipawn_loss(s, p, best, AnalysisLimit::depth(2)), 0.0);
    const double hung = centipawn_loss(s, p, parse_san(p, "Qd4"), AnalysisLimit::depth(2));
    EXPECT_NEAR(hung, 9.0, 2.0);

    // Delivering mate is never a loss.
    const auto m = Position::from_fen("6k1/5ppp/8/8/8/8/8/R5K1 w - - 0 1");
    EXPECT_EQ(centipawn_loss(s, m, parse_san(m, "Ra8#"), AnalysisLimit::depth(2)), 0.0);
}

TEST(Engine, NoisyInfoLines) {
    ScopedEnv env("MDBENCH_TOY_NOISE", "1");
    auto s = toy();
    const auto info = s.analyse(Position::initial(), AnalysisLimit::depth(2));
    EXPECT_EQ(info.depth, 2);
    EXPECT_EQ(info.kind, ScoreInfo::Kind::centipawns);
    EXPECT_NE(info.value, 77);
}

TEST(Engine, AnalysisTimeout) {
    ScopedEnv env("MDBENCH_TOY_HANG", "1");
    EngineOptions opts;
    opts.analysis_timeout = 200ms;
    auto s = toy(opts);
    try {
        s.analyse(Position::initial(), AnalysisLimit::movetime(10));
        FAIL();
    } catch (const EngineError& e) {
        EXPECT_EQ(e.code(), EngineErrc::timeout);
    }
}

TEST(Engine, InfoLineParsing) {
    auto a = parse_info_line("info depth 12 seldepth 18 multipv 1 score cp -35 nodes 1 pv e2e4");
    ASSERT_TRUE(a);
    EXPECT_EQ(a->value, -35);
    EXPECT_EQ(a->depth, 12);
    auto b = parse_info_line("info depth 5 score mate -3 upperbound pv a1a2");
    ASSERT_TRUE(b);
    EXPECT_EQ(b->kind, ScoreInfo::Kind::mate);
    EXPECT_EQ(b->value, -3);
    EXPECT_FALSE(parse_info_line("info string score cp 12"));
    EXPECT_FALSE(parse_info_line("info depth 3 currmove e2e4"));
    EXPECT_FALSE(parse_info_line("bestmove e2e4"));
    EXPECT_FALSE(parse_info_line("info score cp"));
    EXPECT_FALSE(parse_info_line("info score cp 99999999999999999999"));
}

TEST(Engine, InfoParserNeverThrowsOnGarbage) {
    std::mt19937_64 rng(1);
    const std::vector<std::string> pieces = {"info", "score", "cp", "mate", "depth", "-", "12", "x", "string", " ",
                                             "\t", "-0", "+5", "pv", "9999999999", ""};
    for (int i = 0; i < 20000; ++i) {
        std::string line;
        const int n = static_cast<int>(rng() % 10);
        for (int k = 0; k < n; ++k) {
            if (rng() % 4 == 0) line += static_cast<char>(rng() & 0xff);
            else line += pieces[rng() % pieces.size()] + " ";
        }
        EXPECT_NO_THROW(parse_info_line(line));
    }
}

TEST(Engine, PoolServesConcurrentWorkers) {
    EnginePool pool(MDBENCH_TOY_ENGINE, 2);
    EXPECT_EQ(pool.size(), 2u);
    std::vector<int> scores(6);
    std::vector<std::thread> workers;
    for (int i = 0; i < 6; ++i) {
        workers.emplace_back([&, i] {
            auto session = pool.acquire();
            scores[i] = to_centipawns(session->analyse(Position::initial(), AnalysisLimit::depth(1)));
        });
    }
    for (auto& t : workers) t.join();
    for (int s : scores) EXPECT_EQ(s, scores[0]);
}
