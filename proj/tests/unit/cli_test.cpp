#include "mdbench/cli.hpp"
#include "mdbench/dataset.hpp"
#include "mdbench/pgn.hpp"
#include "mdbench/reports.hpp"
#include "support/games.hpp"

#include <gtest/gtest.h>
#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace mdbench;

namespace {

struct Result {
    int code;
    std::string out;
    std::string err;
};

Result mdbench_run(std::vector<std::string> args, const std::string& input = "") {
    std::istringstream in(input);
    std::ostringstream out, err;
    const int code = cli::run(args, in, out, err);
    return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void spit(const fs::path& p, const std::string& text) {
    fs::create_directories(p.parent_path());
    std::ofstream(p, std::ios::binary) << text;
}

class Cli : public ::testing::Test {
protected:
    void SetUp() override {
        std::random_device rd;
        root_ = fs::temp_directory_path() / ("mdbench_cli_" + std::to_string(rd()));
        fs::create_directories(root_);
        cli::interrupt_flag().store(false);
    }
    void TearDown() override {
        cli::interrupt_flag().store(false);
        fs::remove_all(root_);
    }

    std::string path(const std::string& rel) const { return (root_ / rel).string(); }

    // Two PGN files of random games plus one game with an illegal move.
    void write_pgn_corpus(int games) {
        for (int f = 0; f < 2; ++f) {
            std::string text;
            for (int i = f; i < games; i += 2) {
                auto g = mdbench::testing::random_game(static_cast<std::uint64_t>(i) + 1, 60);
                g.tags.emplace_back("WhiteElo", i % 3 == 0 ? "1500" : "2300");
                g.tags.emplace_back("BlackElo", "2400");
                text += corpus::to_pgn(g) + "\n";
            }
            if (f == 1) text += "[Event \"broken\"]\n\n1. e4 e5 2. Ke3 *\n\n";
            spit(root_ / "pgn" / ("part" + std::to_string(f) + ".pgn"), text);
        }
        spit(root_ / "pgn" / "notes.txt", "ignored\n");
    }

    // Datasets, tokenizer and reference model for the evaluation tests.
    void build_chess_model() {
        write_pgn_corpus(40);
        ASSERT_EQ(mdbench_run({"ingest", "pgn", path("pgn"), "--out", path("data"), "--test-fraction", "0.2",
                               "--opening-plies", "4"})
                      .code,
                  0);
        const auto r = mdbench_run({"refmodel", "train", "--dataset", path("data/move-gen.train.jsonl"), "--order",
                                    "4", "--vocab-size", "300", "--out", path("chess.ngram")});
        ASSERT_EQ(r.code, 0) << r.err;
        spit(root_ / "mdbench.conf", "[models]\nchess = \"" + path("chess.ngram") + "\"\n");
    }

    std::vector<std::string> eval_args(const std::string& out_dir) const {
        return {"--config", path("mdbench.conf"), "eval", "run", "--task", "move-gen", "--adapter", "refmodel:chess",
                "--dataset", path("data/move-gen.test.jsonl"), "--out", path(out_dir), "--batch-size", "3"};
    }

    fs::path root_;
};

}  // namespace

TEST_F(Cli, HelpAndUsageErrors) {
    EXPECT_EQ(mdbench_run({"--help"}).code, cli::kExitOk);
    EXPECT_EQ(mdbench_run({}).code, cli::kExitUsage);
    EXPECT_EQ(mdbench_run({"frobnicate"}).code, cli::kExitUsage);
    EXPECT_EQ(mdbench_run({"eval", "run", "--task", "move-gen"}).code, cli::kExitUsage);
    spit(root_ / "bad.conf", "this is not a config\n");
    const auto r = mdbench_run({"--config", path("bad.conf"), "report", root_.string()});
    EXPECT_EQ(r.code, cli::kExitUsage);
    EXPECT_NE(r.err.find(":1:"), std::string::npos) << r.err;
}

TEST_F(Cli, IngestPgnManifestAndDeterminism) {
    write_pgn_corpus(30);
    const std::vector<std::string> args{"ingest", "pgn", path("pgn"), "--out", path("a"), "--test-fraction", "0.2",
                                        "--seed", "11", "--min-elo", "2000"};
    const auto r = mdbench_run(args);
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_NE(r.err.find("skipped game"), std::string::npos);

    const auto m = json::parse(slurp(path("a/move-gen.manifest.json")));
    EXPECT_EQ(m["seed"], 11);
    EXPECT_EQ(m["sources"].size(), 2u);
    EXPECT_EQ(m["games"]["parsed"], 30);
    EXPECT_EQ(m["games"]["skipped"], 1);
    EXPECT_EQ(m["games"]["below_min_elo"], 10);
    EXPECT_EQ(m["games"]["kept"], 20);
    EXPECT_EQ(m["samples"]["train"], 16);
    EXPECT_EQ(m["samples"]["test"], 4);
    EXPECT_EQ(m["config_hash"].get<std::string>().size(), 16u);

    const auto test = corpus::read_dataset(fs::path(path("a/move-gen.test.jsonl")));
    ASSERT_EQ(test.size(), 4u);
    for (const auto& s : test) {
        EXPECT_EQ(s.task, corpus::TaskKind::move_gen);
        EXPECT_TRUE(s.input.empty());
    }

    auto again = args;
    again[4] = path("b");
    ASSERT_EQ(mdbench_run(again).code, 0);
    for (const auto* f : {"move-gen.train.jsonl", "move-gen.test.jsonl"})
        EXPECT_EQ(slurp(root_ / "a" / f), slurp(root_ / "b" / f)) << f;
    // The manifest names its sources by path, which differs only in the output dir here.
    EXPECT_EQ(slurp(path("a/move-gen.manifest.json")), slurp(path("b/move-gen.manifest.json")));

    auto reseeded = args;
    reseeded[4] = path("c");
    reseeded[8] = "12";
    ASSERT_EQ(mdbench_run(reseeded).code, 0);
    EXPECT_NE(json::parse(slurp(path("c/move-gen.manifest.json")))["config_hash"], m["config_hash"]);
}

TEST_F(Cli, IngestEvalHistogram) {
    spit(root_ / "evals.csv",
         "moves,eval\n"
         "e4,0.3\n"
         "e4 e5,1.6\n"
         "d4,-1.6\n"
         "f3 e5 g4,#-1\n"
         "e4 c5,25\n"
         "c4,#+3\n"
         "Nf3,0.31\n"
         "g3,#-1\n");
    const auto r = mdbench_run({"ingest", "eval", path("evals.csv"), "--out", path("d"), "--test-fraction", "0.25"});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto m = json::parse(slurp(path("d/board-eval.manifest.json")));
    EXPECT_EQ(m["positions"], 8);
    ASSERT_EQ(m["bin_histogram"].size(), 44u);
    std::uint64_t numeric = 0;
    for (const auto& b : m["bin_histogram"]) numeric += b["count"].get<std::uint64_t>();
    EXPECT_EQ(numeric, 5u);
    EXPECT_EQ(m["bin_histogram"][22]["count"], 2);  // 0.3 and 0.31
    EXPECT_EQ(m["bin_histogram"][43]["count"], 1);  // clamped 25
    EXPECT_EQ(m["non_numeric_tokens"]["#-1"], 2);
    EXPECT_EQ(m["non_numeric_tokens"]["#+3"], 1);
    EXPECT_EQ(m["samples"]["train"], 6);
    EXPECT_EQ(m["samples"]["test"], 2);
}

TEST_F(Cli, IngestCodeSplitsPairsOnce) {
    std::string text;
    for (int i = 0; i < 40; ++i)
        text += json{{"code", "def f" + std::to_string(i) + "():\n    return " + std::to_string(i)},
                     {"docstring", "Returns   " + std::to_string(i) + "."}}
                    .dump() +
                "\n";
    text += json{{"code", "   "}, {"docstring", "empty code"}}.dump() + "\n";
    spit(root_ / "code" / "pairs.jsonl", text);
    const auto r = mdbench_run({"ingest", "code", path("code"), "--out", path("d")});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto m = json::parse(slurp(path("d/code.manifest.json")));
    EXPECT_EQ(m["pairs"]["dropped_empty"], 1);
    EXPECT_EQ(m["samples"]["code-summarize"]["test"], 4);

    const auto sum_test = corpus::read_dataset(fs::path(path("d/code-summarize.test.jsonl")));
    const auto gen_train = corpus::read_dataset(fs::path(path("d/code-generate.train.jsonl")));
    const auto gen_test = corpus::read_dataset(fs::path(path("d/code-generate.test.jsonl")));
    std::set<std::string> held_out, gen_train_docs;
    for (const auto& s : sum_test) {
        EXPECT_EQ(s.input.rfind("summarize: ", 0), 0u);
        held_out.insert(s.target);
    }
    for (const auto& s : gen_train) gen_train_docs.insert(s.input.substr(10));
    for (const auto& d : held_out) EXPECT_EQ(gen_train_docs.count(d), 0u) << d;
    ASSERT_EQ(gen_test.size(), sum_test.size());
    EXPECT_EQ(gen_test[0].input, "generate: " + sum_test[0].target);
    EXPECT_EQ(sum_test[0].target.find("  "), std::string::npos);
}

TEST_F(Cli, TokenizerTrainWritesMetadata) {
    spit(root_ / "corpus.txt", "the cat sat on the mat\nthe cat ate the rat\n");
    const auto r = mdbench_run(
        {"tokenizer", "train", "--corpus", path("corpus.txt"), "--vocab-size", "270", "--out", path("vocab.bpe")});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto meta = json::parse(slurp(path("vocab.bpe.meta.json")));
    EXPECT_EQ(meta["kind"], "tokenizer");
    EXPECT_GT(meta["merges"].get<int>(), 0);
    EXPECT_TRUE(fs::exists(path("vocab.bpe")));
    EXPECT_EQ(mdbench_run({"tokenizer", "train", "--corpus", path("corpus.txt"), "--vocab-size", "100", "--out",
                           path("v2.bpe")})
                  .code,
              cli::kExitFailure);
}

TEST_F(Cli, EvalRunIsReproducibleAndResumable) {
    build_chess_model();
    const auto first = mdbench_run(eval_args("run1"));
    ASSERT_EQ(first.code, 0) << first.err;
    const auto reports_text = slurp(path("run1/move-gen.jsonl"));
    const auto summary_text = slurp(path("run1/move-gen.summary.json"));
    const auto summary = json::parse(summary_text);
    EXPECT_EQ(summary["status"], "complete");
    EXPECT_EQ(summary["seed"], 0);
    EXPECT_EQ(summary["samples"], 8);
    EXPECT_EQ(summary["completed"], 8);
    EXPECT_EQ(summary["move_cap"], 70);
    EXPECT_TRUE(summary["engine"].is_null());
    EXPECT_TRUE(summary["capped"].contains("illegal_move_pct"));
    EXPECT_EQ(reports::read_game_reports(fs::path(path("run1/move-gen.jsonl"))).size(), 8u);

    ASSERT_EQ(mdbench_run(eval_args("run2")).code, 0);
    EXPECT_EQ(slurp(path("run2/move-gen.jsonl")), reports_text);
    EXPECT_EQ(slurp(path("run2/move-gen.summary.json")), summary_text);

    // Crash mid-write: three whole lines and a torn fourth.
    std::istringstream lines(reports_text);
    std::string kept, line;
    for (int i = 0; i < 3 && std::getline(lines, line); ++i) kept += line + "\n";
    std::getline(lines, line);
    kept += line.substr(0, line.size() / 2);
    spit(path("run2/move-gen.jsonl"), kept);
    auto resume = eval_args("run2");
    resume.push_back("--resume");
    const auto resumed = mdbench_run(resume);
    ASSERT_EQ(resumed.code, 0) << resumed.err;
    EXPECT_NE(resumed.out.find("3 resumed"), std::string::npos) << resumed.out;
    EXPECT_EQ(slurp(path("run2/move-gen.jsonl")), reports_text);
    EXPECT_EQ(slurp(path("run2/move-gen.summary.json")), summary_text);

    // A different seed is a different configuration.
    auto reseeded = resume;
    reseeded.insert(reseeded.end(), {"--seed", "5"});
    const auto refused = mdbench_run(reseeded);
    EXPECT_EQ(refused.code, cli::kExitFailure);
    EXPECT_NE(refused.err.find("different configuration"), std::string::npos);
}

TEST_F(Cli, InterruptedRunFlushesAndResumes) {
    build_chess_model();
    ASSERT_EQ(mdbench_run(eval_args("full")).code, 0);

    cli::interrupt_flag().store(true);
    const auto stopped = mdbench_run(eval_args("part"));
    cli::interrupt_flag().store(false);
    EXPECT_EQ(stopped.code, cli::kExitFailure);
    EXPECT_NE(stopped.err.find("--resume"), std::string::npos);
    EXPECT_EQ(json::parse(slurp(path("part/move-gen.summary.json")))["status"], "running");
    const auto rank = mdbench_run(
        {"rank", "--competitor", "a=" + path("full"), "--competitor", "b=" + path("part"), "--out", path("lb")});
    EXPECT_EQ(rank.code, cli::kExitFailure);
    EXPECT_NE(rank.err.find("not finished"), std::string::npos);

    auto resume = eval_args("part");
    resume.push_back("--resume");
    ASSERT_EQ(mdbench_run(resume).code, 0);
    EXPECT_EQ(slurp(path("part/move-gen.jsonl")), slurp(path("full/move-gen.jsonl")));
    EXPECT_EQ(slurp(path("part/move-gen.summary.json")), slurp(path("full/move-gen.summary.json")));
}

TEST_F(Cli, CentipawnNeedsAnEngine) {
    build_chess_model();
    ::unsetenv("MDBENCH_ENGINE");
    auto args = eval_args("cp");
    args.push_back("--centipawn");
    const auto r = mdbench_run(args);
    EXPECT_EQ(r.code, cli::kExitUsage);
    EXPECT_NE(r.err.find("engine"), std::string::npos);

    ::setenv("MDBENCH_ENGINE", MDBENCH_TOY_ENGINE, 1);
    args.insert(args.end(), {"--engine-depth", "2", "--jobs", "2"});
    const auto ok = mdbench_run(args);
    ::unsetenv("MDBENCH_ENGINE");
    ASSERT_EQ(ok.code, 0) << ok.err;
    const auto s = json::parse(slurp(path("cp/move-gen.summary.json")));
    EXPECT_EQ(s["engine"]["depth"], 2);
    EXPECT_EQ(s["settings"]["engine"], MDBENCH_TOY_ENGINE);
    const auto games = reports::read_game_reports(fs::path(path("cp/move-gen.jsonl")));
    std::size_t scored = 0;
    for (const auto& g : games) scored += g.centipawn_losses.size();
    EXPECT_GT(scored, 0u);
}

TEST_F(Cli, ConfigFileSuppliesDefaults) {
    build_chess_model();
    spit(root_ / "mdbench.conf",
         "[models]\nchess = \"" + path("chess.ngram") + "\"\n[run]\nmove_cap = 5\nseed = 9\n");
    ASSERT_EQ(mdbench_run(eval_args("cfg")).code, 0);
    auto s = json::parse(slurp(path("cfg/move-gen.summary.json")));
    EXPECT_EQ(s["move_cap"], 5);
    EXPECT_EQ(s["seed"], 9);

    auto args = eval_args("flag");
    args.insert(args.end(), {"--move-cap", "7", "--seed", "none"});
    ASSERT_EQ(mdbench_run(args).code, 0);
    s = json::parse(slurp(path("flag/move-gen.summary.json")));
    EXPECT_EQ(s["move_cap"], 7);
    EXPECT_TRUE(s["seed"].is_null());
}

TEST_F(Cli, RankAndReport) {
    build_chess_model();
    ASSERT_EQ(mdbench_run(eval_args("ref")).code, 0);
    auto echo = eval_args("echo");
    echo[7] = "echo";
    ASSERT_EQ(mdbench_run(echo).code, 0);

    const auto one = mdbench_run({"rank", "--competitor", "ref=" + path("ref"), "--out", path("lb")});
    EXPECT_EQ(one.code, cli::kExitUsage);
    EXPECT_NE(one.err.find("at least 2 competitors"), std::string::npos);
    const auto dup = mdbench_run(
        {"rank", "--competitor", "x=" + path("ref"), "--competitor", "x=" + path("echo"), "--out", path("lb")});
    EXPECT_EQ(dup.code, cli::kExitUsage);

    const std::vector<std::string> args{"rank", "--competitor", "ref=" + path("ref"), "--competitor",
                                        "echo=" + path("echo"), "--out", path("lb")};
    const auto r = mdbench_run(args);
    ASSERT_EQ(r.code, 0) << r.err;
    const auto text = slurp(path("lb/leaderboard.txt"));
    EXPECT_EQ(r.out, text);
    EXPECT_EQ(text.rfind("config ", 0), 0u);
    const auto board = json::parse(slurp(path("lb/leaderboard.json")));
    EXPECT_EQ(board["runs"]["ref"]["move-gen"]["seed"], 0);
    EXPECT_EQ(board["move_cap"], 70);
    const auto json_text = slurp(path("lb/leaderboard.json"));
    ASSERT_EQ(mdbench_run(args).code, 0);
    EXPECT_EQ(slurp(path("lb/leaderboard.json")), json_text);

    // The same runs found by directory scan.
    fs::create_directories(path("all"));
    fs::copy(path("ref"), path("all/ref"));
    fs::copy(path("echo"), path("all/echo"));
    const auto scanned = mdbench_run({"rank", "--reports", path("all"), "--out", path("lb2")});
    ASSERT_EQ(scanned.code, 0) << scanned.err;

    const auto rep = mdbench_run({"report", path("ref")});
    ASSERT_EQ(rep.code, 0) << rep.err;
    EXPECT_NE(rep.out.find("illegal_move_pct"), std::string::npos);
    EXPECT_NE(rep.out.find("uncapped"), std::string::npos);
}

TEST_F(Cli, ProbeSummaryCarriesMdls) {
    build_chess_model();
    std::string code;
    for (int i = 0; i < 6; ++i)
        code += json{{"code", "def g" + std::to_string(i) + "(x):\n    return x." + std::to_string(i)},
                     {"docstring", "Scales x."}}
                    .dump() +
                "\n";
    spit(root_ / "pairs.jsonl", code);
    ASSERT_EQ(mdbench_run({"ingest", "code", path("pairs.jsonl"), "--out", path("data"), "--test-fraction", "0.5"})
                  .code,
              0);
    const auto r = mdbench_run({"--config", path("mdbench.conf"), "probe", "--adapter", "refmodel:chess", "--chess",
                                path("data/move-gen.test.jsonl"), "--code", path("data/code-summarize.test.jsonl"),
                                "--tuned", "chess", "--out", path("probe")});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto s = json::parse(slurp(path("probe/probe.summary.json")));
    EXPECT_EQ(s["attempts"], 3);
    EXPECT_TRUE(s.contains("nmr"));
    EXPECT_TRUE(s.contains("mdls"));
    EXPECT_EQ(mdbench_run({"probe", "--adapter", "echo", "--chess", path("data/move-gen.test.jsonl"), "--code",
                           path("data/code-summarize.test.jsonl"), "--tuned", "ambiguous", "--out", path("p2")})
                  .code,
              cli::kExitUsage);
}

TEST_F(Cli, RefmodelServeSpeaksTheWireProtocol) {
    build_chess_model();
    const auto gen = mdbench_run({"refmodel", "generate", "--model", path("chess.ngram"), "--prompt", "",
                                  "--max-new-tokens", "20", "--seed", "1"});
    ASSERT_EQ(gen.code, 0) << gen.err;

    const std::string input = "{\"id\":\"a\",\"task\":\"move-gen\",\"prompt\":\"\",\"max_new_tokens\":20,\"seed\":1}\n"
                              "not json \"id\":\"b\"\n"
                              "{\"id\":\"c\",\"task\":\"move-gen\",\"prompt\":\"\",\"max_new_tokens\":20}\n";
    const auto r = mdbench_run({"refmodel", "serve", "--model", path("chess.ngram")}, input);
    ASSERT_EQ(r.code, 0) << r.err;
    std::istringstream lines(r.out);
    std::string banner, a, b, c;
    std::getline(lines, banner);
    std::getline(lines, a);
    std::getline(lines, b);
    std::getline(lines, c);
    EXPECT_EQ(banner, "mdbench-adapter v1");
    EXPECT_EQ(json::parse(a)["id"], "a");
    EXPECT_EQ(json::parse(a)["output"].get<std::string>() + "\n", gen.out);
    EXPECT_EQ(json::parse(b)["id"], "b");
    EXPECT_TRUE(json::parse(b).contains("error"));
    EXPECT_EQ(json::parse(c)["id"], "c");
}

TEST_F(Cli, ConformanceAgainstSubprocessServe) {
    build_chess_model();
    const std::string serve = std::string(MDBENCH_TOOL) + " refmodel serve --model " + path("chess.ngram");
    const auto r = mdbench_run({"conformance", "--adapter", serve});
    EXPECT_EQ(r.code, 0) << r.out << r.err;
    EXPECT_NE(r.out.find("PASS"), std::string::npos);
    EXPECT_NE(r.out.find("seeded requests reproduced"), std::string::npos);

    const auto echo = mdbench_run({"conformance", "--adapter", "echo", "--expect-echo"});
    EXPECT_EQ(echo.code, 0) << echo.out;
    EXPECT_EQ(echo.out.find("FAIL"), std::string::npos);
}
