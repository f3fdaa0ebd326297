#include "mdbench/cli.hpp"

#include "mdbench/adapter.hpp"
#include "mdbench/bpe.hpp"
#include "mdbench/config.hpp"
#include "mdbench/corpus.hpp"
#include "mdbench/dataset.hpp"
#include "mdbench/engine.hpp"
#include "mdbench/leaderboard.hpp"
#include "mdbench/metrics.hpp"
#include "mdbench/pgn.hpp"
#include "mdbench/refmodel.hpp"
#include "mdbench/reports.hpp"
#include "mdbench/runners.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace mdbench::cli {

std::atomic<bool>& interrupt_flag() {
    static std::atomic<bool> flag{false};
    return flag;
}

namespace {

using json = nlohmann::ordered_json;
namespace fs = std::filesystem;

class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

std::optional<std::string> given(const CLI::Option* opt, const std::string& value) {
    if (opt->count() == 0) return std::nullopt;
    return value;
}

std::int64_t to_int(const std::string& text, const std::string& what) {
    std::int64_t v = 0;
    const char* end = text.data() + text.size();
    const auto [p, ec] = std::from_chars(text.data(), end, v);
    if (ec != std::errc() || p != end) throw UsageError(what + ": expected an integer, got '" + text + "'");
    return v;
}

struct Settings {
    config::ConfigFile file;

    std::int64_t integer(const std::optional<std::string>& flag, const char* env, std::string_view key,
                         std::int64_t fallback, std::int64_t min) const {
        const auto r = config::resolve(flag, env, file, key);
        if (!r) return fallback;
        const auto v = to_int(r->value, std::string(key));
        if (v < min) throw UsageError(std::string(key) + " must be at least " + std::to_string(min));
        return v;
    }

    std::optional<std::string> text(const std::optional<std::string>& flag, const char* env,
                                    std::string_view key) const {
        const auto r = config::resolve(flag, env, file, key);
        if (!r) return std::nullopt;
        return r->value;
    }
};

std::string dump(const json& j) { return j.dump(2) + "\n"; }

std::string real_text(double v) { return json(v).dump(); }

void write_file(const fs::path& path, const std::string& content) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << content;
    out.flush();
    if (!out) throw std::runtime_error("write failed: " + path.string());
}

json read_json_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + path.string());
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw std::runtime_error(path.string() + ": " + e.what());
    }
}

std::string file_hash(const fs::path& path) { return config::hex64(config::fnv1a64_file(path)); }

json opt_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

// ---------------------------------------------------------------- ingest

std::vector<fs::path> expand_sources(const std::vector<std::string>& inputs, const std::set<std::string>& exts) {
    std::vector<fs::path> files;
    for (const auto& in : inputs) {
        const fs::path p(in);
        if (fs::is_directory(p)) {
            std::vector<fs::path> found;
            for (const auto& e : fs::directory_iterator(p))
                if (e.is_regular_file() && exts.count(e.path().extension().string())) found.push_back(e.path());
            std::sort(found.begin(), found.end());
            files.insert(files.end(), found.begin(), found.end());
        } else if (fs::is_regular_file(p)) {
            files.push_back(p);
        } else {
            throw std::runtime_error("source not found: " + in);
        }
    }
    if (files.empty()) throw std::runtime_error("no input files");
    return files;
}

struct Sources {
    json entries = json::array();
    std::string hashes;

    void add(const fs::path& p) {
        const auto h = file_hash(p);
        entries.push_back({{"path", p.generic_string()}, {"bytes", fs::file_size(p)}, {"fnv1a64", h}});
        hashes += h + ",";
    }
};

struct IngestArgs {
    std::vector<std::string> inputs;
    std::string out;
    double test_fraction = 0.0;
    std::uint64_t seed = 0;
    int min_elo = 0;
    std::size_t opening_plies = 0;
    bool no_validate = false;
};

json split_json(std::size_t train, std::size_t test) { return {{"train", train}, {"test", test}}; }

void write_split(const fs::path& dir, std::string_view stem, const std::vector<corpus::TaskSample>& train,
                 const std::vector<corpus::TaskSample>& test) {
    fs::create_directories(dir);
    corpus::write_dataset(dir / (std::string(stem) + ".train.jsonl"), train);
    corpus::write_dataset(dir / (std::string(stem) + ".test.jsonl"), test);
}

int cmd_ingest_pgn(const IngestArgs& a, std::ostream& out, std::ostream& err) {
    const auto files = expand_sources(a.inputs, {".pgn"});
    Sources sources;
    std::vector<corpus::PgnGame> games;
    std::size_t parsed = 0, skipped = 0;
    for (const auto& f : files) {
        sources.add(f);
        std::ifstream in(f, std::ios::binary);
        if (!in) throw std::runtime_error("cannot read " + f.string());
        corpus::PgnReader reader(in, {!a.no_validate});
        while (auto g = reader.next()) games.push_back(std::move(*g));
        parsed += reader.games_read();
        skipped += reader.games_skipped();
        const auto& diags = reader.diagnostics();
        for (std::size_t i = 0; i < diags.size() && i < 5; ++i)
            err << f.generic_string() << ":" << diags[i].line << ": skipped game: " << diags[i].message << "\n";
        if (diags.size() > 5) err << f.generic_string() << ": " << diags.size() - 5 << " more games skipped\n";
    }
    const std::size_t before_elo = games.size();
    if (a.min_elo > 0) games = corpus::filter_by_min_elo(std::move(games), a.min_elo);
    if (games.empty()) throw std::runtime_error("no usable games in the input");

    const auto [train, test] = corpus::split(games, a.test_fraction, a.seed);
    const auto train_samples = corpus::make_task_samples(train, a.opening_plies);
    const auto test_samples = corpus::make_task_samples(test, a.opening_plies);
    const fs::path dir(a.out);
    write_split(dir, "move-gen", train_samples, test_samples);

    const std::map<std::string, std::string> eff{{"kind", "pgn"},
                                                 {"sources", sources.hashes},
                                                 {"min_elo", std::to_string(a.min_elo)},
                                                 {"opening_plies", std::to_string(a.opening_plies)},
                                                 {"test_fraction", real_text(a.test_fraction)},
                                                 {"seed", std::to_string(a.seed)},
                                                 {"validate", a.no_validate ? "false" : "true"}};
    json m;
    m["task"] = "move-gen";
    m["config_hash"] = config::config_hash(eff);
    m["seed"] = a.seed;
    m["test_fraction"] = a.test_fraction;
    m["min_elo"] = a.min_elo;
    m["opening_plies"] = a.opening_plies;
    m["validated"] = !a.no_validate;
    m["sources"] = sources.entries;
    m["games"] = {{"parsed", parsed},
                  {"skipped", skipped},
                  {"below_min_elo", before_elo - games.size()},
                  {"kept", games.size()}};
    m["samples"] = split_json(train_samples.size(), test_samples.size());
    write_file(dir / "move-gen.manifest.json", dump(m));
    out << "move-gen: " << train_samples.size() << " train, " << test_samples.size() << " test (" << skipped
        << " games skipped)\n";
    return kExitOk;
}

int cmd_ingest_eval(const IngestArgs& a, std::ostream& out) {
    const auto files = expand_sources(a.inputs, {".csv", ".jsonl"});
    Sources sources;
    std::vector<corpus::EvalRecord> records;
    for (const auto& f : files) {
        sources.add(f);
        std::ifstream in(f, std::ios::binary);
        if (!in) throw std::runtime_error("cannot read " + f.string());
        try {
            auto part = f.extension() == ".csv" ? corpus::read_eval_csv(in) : corpus::read_eval_jsonl(in);
            records.insert(records.end(), std::make_move_iterator(part.begin()), std::make_move_iterator(part.end()));
        } catch (const std::exception& e) {
            throw std::runtime_error(f.generic_string() + ": " + e.what());
        }
    }
    if (records.empty()) throw std::runtime_error("no evaluated positions in the input");

    std::vector<std::uint64_t> bins(corpus::kEvalBins, 0);
    std::map<std::string, std::uint64_t> tokens;
    for (const auto& r : records) {
        const auto t = corpus::make_eval_target(r.eval);
        if (t.kind == corpus::EvalTarget::Kind::numeric_bin)
            ++bins[static_cast<std::size_t>(t.bin)];
        else
            ++tokens[t.token];
    }

    const auto [train, test] = corpus::split(records, a.test_fraction, a.seed);
    const auto train_samples = corpus::make_task_samples(train);
    const auto test_samples = corpus::make_task_samples(test);
    const fs::path dir(a.out);
    write_split(dir, "board-eval", train_samples, test_samples);

    const std::map<std::string, std::string> eff{{"kind", "eval"},
                                                 {"sources", sources.hashes},
                                                 {"test_fraction", real_text(a.test_fraction)},
                                                 {"seed", std::to_string(a.seed)}};
    json m;
    m["task"] = "board-eval";
    m["config_hash"] = config::config_hash(eff);
    m["seed"] = a.seed;
    m["test_fraction"] = a.test_fraction;
    m["sources"] = sources.entries;
    m["positions"] = records.size();
    m["samples"] = split_json(train_samples.size(), test_samples.size());
    json hist = json::array();
    for (int b = 0; b < corpus::kEvalBins; ++b)
        hist.push_back({{"bin", b}, {"center", corpus::bin_center(b)}, {"count", bins[static_cast<std::size_t>(b)]}});
    m["bin_histogram"] = hist;
    json tok = json::object();
    for (const auto& [t, n] : tokens) tok[t] = n;
    m["non_numeric_tokens"] = tok;
    write_file(dir / "board-eval.manifest.json", dump(m));
    out << "board-eval: " << train_samples.size() << " train, " << test_samples.size() << " test\n";
    return kExitOk;
}

int cmd_ingest_code(const IngestArgs& a, std::ostream& out) {
    const auto files = expand_sources(a.inputs, {".jsonl"});
    Sources sources;
    std::vector<corpus::CodePair> pairs;
    std::size_t read = 0;
    for (const auto& f : files) {
        sources.add(f);
        std::ifstream in(f, std::ios::binary);
        if (!in) throw std::runtime_error("cannot read " + f.string());
        std::vector<corpus::CodePair> part;
        try {
            part = corpus::read_code_pairs_jsonl(in);
        } catch (const std::exception& e) {
            throw std::runtime_error(f.generic_string() + ": " + e.what());
        }
        read += part.size();
        for (auto& p : part)
            if (auto n = corpus::normalize(std::move(p))) pairs.push_back(std::move(*n));
    }
    if (pairs.empty()) throw std::runtime_error("no usable code pairs in the input");

    // One split for both directions, so a test docstring never appears in
    // the other task's training data.
    const auto [train, test] = corpus::split(pairs, a.test_fraction, a.seed);
    const fs::path dir(a.out);
    json samples;
    for (auto task : {corpus::TaskKind::code_summarize, corpus::TaskKind::code_generate}) {
        const auto tr = corpus::make_task_samples(task, train);
        const auto te = corpus::make_task_samples(task, test);
        write_split(dir, corpus::task_name(task), tr, te);
        samples[std::string(corpus::task_name(task))] = split_json(tr.size(), te.size());
    }

    const std::map<std::string, std::string> eff{{"kind", "code"},
                                                 {"sources", sources.hashes},
                                                 {"test_fraction", real_text(a.test_fraction)},
                                                 {"seed", std::to_string(a.seed)}};
    json m;
    m["task"] = "code";
    m["config_hash"] = config::config_hash(eff);
    m["seed"] = a.seed;
    m["test_fraction"] = a.test_fraction;
    m["sources"] = sources.entries;
    m["pairs"] = {{"read", read}, {"dropped_empty", read - pairs.size()}, {"kept", pairs.size()}};
    m["samples"] = samples;
    write_file(dir / "code.manifest.json", dump(m));
    out << "code: " << train.size() << " train, " << test.size() << " test pairs\n";
    return kExitOk;
}

// ------------------------------------------------------------- tokenizer

// Documents mirror how the reference model encodes a sample: the input and
// the space-prefixed target are encoded separately.
void add_documents(const corpus::TaskSample& s, std::vector<std::string>& docs) {
    if (!s.input.empty()) docs.push_back(s.input);
    docs.push_back(s.input.empty() ? s.target : " " + s.target);
}

std::vector<std::string> load_documents(const std::vector<fs::path>& files) {
    std::vector<std::string> docs;
    for (const auto& f : files) {
        if (f.extension() == ".jsonl") {
            for (const auto& s : corpus::read_dataset(f)) add_documents(s, docs);
            continue;
        }
        std::ifstream in(f, std::ios::binary);
        if (!in) throw std::runtime_error("cannot read " + f.string());
        std::string line;
        while (std::getline(in, line))
            if (!line.empty()) docs.push_back(line);
    }
    return docs;
}

struct TokenizerArgs {
    std::vector<std::string> corpus;
    std::size_t vocab_size = 0;
    std::string out;
    std::int64_t min_pair_count = 2;
    std::string jobs;
    CLI::Option* jobs_opt = nullptr;
};

json sidecar(const std::string& kind, const std::map<std::string, std::string>& eff, const Sources& sources) {
    json m;
    m["kind"] = kind;
    m["config_hash"] = config::config_hash(eff);
    m["seed"] = nullptr;
    m["sources"] = sources.entries;
    return m;
}

int cmd_tokenizer_train(const TokenizerArgs& a, const Settings& s, std::ostream& out) {
    const auto files = expand_sources(a.corpus, {".jsonl", ".txt"});
    Sources sources;
    for (const auto& f : files) sources.add(f);
    const auto docs = load_documents(files);
    const auto jobs = static_cast<unsigned>(s.integer(given(a.jobs_opt, a.jobs), "MDBENCH_JOBS", "run.jobs", 1, 1));
    const auto vocab = bpe::train(docs, a.vocab_size, {a.min_pair_count, jobs});
    bpe::save(vocab, fs::path(a.out));
    auto m = sidecar("tokenizer",
                     {{"sources", sources.hashes},
                      {"vocab_size", std::to_string(a.vocab_size)},
                      {"min_pair_count", std::to_string(a.min_pair_count)}},
                     sources);
    m["vocab_size"] = a.vocab_size;
    m["merges"] = vocab.merges().size();
    m["fnv1a64"] = file_hash(a.out);
    write_file(a.out + ".meta.json", dump(m));
    out << "tokenizer: " << vocab.size() << " tokens (" << vocab.merges().size() << " merges) -> " << a.out << "\n";
    return kExitOk;
}

// -------------------------------------------------------------- refmodel

struct RefTrainArgs {
    std::vector<std::string> datasets;
    int order = 6;
    std::string tokenizer;
    std::size_t vocab_size = 0;
    std::string out;
    std::string jobs;
    CLI::Option* jobs_opt = nullptr;
};

int cmd_refmodel_train(const RefTrainArgs& a, const Settings& s, std::ostream& out) {
    if (a.tokenizer.empty() == (a.vocab_size == 0))
        throw UsageError("refmodel train needs exactly one of --tokenizer and --vocab-size");
    const auto files = expand_sources(a.datasets, {".jsonl"});
    Sources sources;
    std::vector<corpus::TaskSample> samples;
    for (const auto& f : files) {
        sources.add(f);
        auto part = corpus::read_dataset(f);
        samples.insert(samples.end(), std::make_move_iterator(part.begin()), std::make_move_iterator(part.end()));
    }
    std::map<std::string, std::string> eff{{"sources", sources.hashes}, {"order", std::to_string(a.order)}};
    bpe::Vocabulary vocab;
    if (!a.tokenizer.empty()) {
        vocab = bpe::load(fs::path(a.tokenizer));
        eff["tokenizer"] = file_hash(a.tokenizer);
    } else {
        std::vector<std::string> docs;
        for (const auto& smp : samples) add_documents(smp, docs);
        const auto jobs = static_cast<unsigned>(s.integer(given(a.jobs_opt, a.jobs), "MDBENCH_JOBS", "run.jobs", 1, 1));
        vocab = bpe::train(docs, a.vocab_size, {2, jobs});
        eff["vocab_size"] = std::to_string(a.vocab_size);
    }
    const auto model = refmodel::NgramModel::train(samples, a.order, std::move(vocab));
    model.save(fs::path(a.out));
    auto m = sidecar("refmodel", eff, sources);
    m["order"] = a.order;
    m["samples"] = samples.size();
    m["vocab_size"] = model.vocabulary().size();
    m["fnv1a64"] = file_hash(a.out);
    write_file(a.out + ".meta.json", dump(m));
    out << "refmodel: order " << a.order << " over " << samples.size() << " samples -> " << a.out << "\n";
    return kExitOk;
}

struct RefGenerateArgs {
    std::string model;
    std::string prompt;
    int max_new_tokens = 256;
    std::int64_t seed = 0;
    bool sample = false;
};

int cmd_refmodel_generate(const RefGenerateArgs& a, std::ostream& out) {
    const auto model = refmodel::NgramModel::load(fs::path(a.model));
    refmodel::GenerateOptions g;
    g.max_new_tokens = a.max_new_tokens;
    g.seed = static_cast<std::uint64_t>(a.seed);
    g.sample = a.sample;
    out << model.generate(a.prompt, g) << "\n";
    return kExitOk;
}

struct RefServeArgs {
    std::string model;
    std::string name = "refmodel";
    bool sample = false;
};

// Stdio adapter: banner, then one response line per request line.
int cmd_refmodel_serve(const RefServeArgs& a, std::istream& in, std::ostream& out, std::ostream& err) {
    auto model = std::make_shared<const refmodel::NgramModel>(refmodel::NgramModel::load(fs::path(a.model)));
    refmodel::RefModelAdapter session(model, a.name, a.sample);
    out << adapter::kBanner << "\n" << std::flush;
    std::string line;
    while (std::getline(in, line)) {
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        std::optional<std::string> id;
        std::string problem;
        try {
            const auto req = adapter::parse_request_line(line);
            id = req.id;
            const auto outcome = session.generate_batch({req});
            if (outcome.front().ok()) {
                out << adapter::response_line(*outcome.front().response) << "\n" << std::flush;
                continue;
            }
            problem = outcome.front().message;
        } catch (const std::exception& e) {
            problem = e.what();
            if (!id) id = adapter::salvage_id(line);
        }
        err << "refmodel serve: " << problem << "\n";
        if (id) out << json{{"id", *id}, {"error", problem}}.dump() << "\n" << std::flush;
    }
    session.close();
    return kExitOk;
}

// ------------------------------------------------------------ evaluation

struct OpenedAdapter {
    std::unique_ptr<adapter::AdapterSession> session;
    std::string spec;
    std::optional<std::string> model_hash;
};

// Spec forms: a name from the [adapters] config section, "echo",
// "refmodel:<name from [models] or path>", an http:// URL, or a shell command.
OpenedAdapter open_spec(const std::string& raw, const Settings& s, const adapter::AdapterOptions& options) {
    std::string spec = s.file.get("adapters." + raw).value_or(raw);
    if (spec.empty()) throw UsageError("empty adapter spec");
    if (spec == "echo") return {adapter::make_echo_adapter(), spec, std::nullopt};
    if (spec.rfind("refmodel:", 0) == 0) {
        const std::string name = spec.substr(9);
        const std::string path = s.file.get("models." + name).value_or(name);
        if (!fs::is_regular_file(path))
            throw std::runtime_error("reference model not found: " + path + " (set models." + name +
                                     " in the config file or pass a path)");
        auto model = std::make_shared<const refmodel::NgramModel>(refmodel::NgramModel::load(fs::path(path)));
        return {std::make_unique<refmodel::RefModelAdapter>(model, spec), spec, file_hash(path)};
    }
    return {adapter::open_adapter(spec, options), spec, std::nullopt};
}

struct RunFlags {
    std::string adapter;
    std::string out;
    std::string name;
    bool resume = false;
    std::size_t limit = 0;
    std::string seed, jobs, batch, max_new, timeout;
    CLI::Option *seed_opt = nullptr, *jobs_opt = nullptr, *batch_opt = nullptr, *max_new_opt = nullptr,
                *timeout_opt = nullptr;

    void add(CLI::App* sub) {
        sub->add_option("--adapter", adapter, "echo, refmodel:<model>, http://host:port, a command, or a config alias")
            ->required();
        sub->add_option("--out", out, "Output directory")->required();
        sub->add_option("--name", name, "Competitor name (default: the adapter spec)");
        sub->add_flag("--resume", resume, "Keep finished reports in the output and run the rest");
        sub->add_option("--limit", limit, "Use only the first N samples (0 = all)");
        seed_opt = sub->add_option("--seed", seed, "Base request seed, or 'none' (config run.seed, default 0)");
        jobs_opt = sub->add_option("--jobs", jobs, "Worker threads (MDBENCH_JOBS, config run.jobs)");
        batch_opt = sub->add_option("--batch-size", batch, "Requests per adapter batch (config run.batch_size)");
        max_new_opt =
            sub->add_option("--max-new-tokens", max_new, "Generation budget (config run.max_new_tokens)");
        timeout_opt =
            sub->add_option("--timeout-ms", timeout, "Per-request adapter timeout (config adapter.timeout_ms)");
    }
};

struct RunSettings {
    adapter::AdapterOptions adapter_options;
    runners::RunOptions run;
};

RunSettings resolve_run(const RunFlags& f, const Settings& s) {
    RunSettings r;
    r.run.jobs = static_cast<unsigned>(s.integer(given(f.jobs_opt, f.jobs), "MDBENCH_JOBS", "run.jobs", 1, 1));
    r.run.batch_size =
        static_cast<std::size_t>(s.integer(given(f.batch_opt, f.batch), nullptr, "run.batch_size", 64, 1));
    r.run.max_new_tokens =
        static_cast<int>(s.integer(given(f.max_new_opt, f.max_new), nullptr, "run.max_new_tokens", 256, 1));
    const auto seed = s.text(given(f.seed_opt, f.seed), nullptr, "run.seed").value_or("0");
    if (seed != "none") r.run.seed = to_int(seed, "run.seed");
    r.adapter_options.request_timeout = std::chrono::milliseconds(
        s.integer(given(f.timeout_opt, f.timeout), nullptr, "adapter.timeout_ms", 120000, 1));
    r.run.cancelled = [] { return interrupt_flag().load(); };
    return r;
}

// Drops a torn final line left by a crash mid-write.
void trim_partial_line(const fs::path& path) {
    std::string content;
    {
        std::ifstream in(path, std::ios::binary);
        std::ostringstream ss;
        ss << in.rdbuf();
        content = ss.str();
    }
    if (content.empty() || content.back() == '\n') return;
    const auto cut = content.rfind('\n');
    content.resize(cut == std::string::npos ? 0 : cut + 1);
    write_file(path, content);
}

template <typename Report>
struct TaskIo {
    std::function<std::vector<Report>(const fs::path&)> read;
    std::function<std::string(const Report&)> line;
    std::function<json(const std::vector<Report>&)> summarize;
    std::function<void(const runners::RunOptions&, const runners::Sink<Report>&)> execute;
};

struct RunContext {
    fs::path dir;
    std::string stem;
    std::string competitor;
    std::map<std::string, std::string> effective;
    std::optional<std::int64_t> seed;
    bool resume = false;
    std::size_t samples = 0;
};

json summary_head(const RunContext& c, const std::string& status) {
    json j;
    j["task"] = c.stem;
    j["competitor"] = c.competitor;
    j["status"] = status;
    j["config_hash"] = config::config_hash(c.effective);
    j["seed"] = c.seed ? json(*c.seed) : json(nullptr);
    json settings = json::object();
    for (const auto& [k, v] : c.effective) settings[k] = v;
    j["settings"] = settings;
    j["samples"] = c.samples;
    return j;
}

template <typename Report>
int run_task(const RunContext& c, runners::RunOptions options, const TaskIo<Report>& io, std::ostream& out,
             std::ostream& err) {
    const fs::path reports = c.dir / (c.stem + ".jsonl");
    const fs::path summary = c.dir / (c.stem + ".summary.json");
    const auto hash = config::config_hash(c.effective);
    fs::create_directories(c.dir);

    std::size_t kept = 0;
    if (c.resume && fs::exists(reports)) {
        if (fs::exists(summary)) {
            const auto prev = read_json_file(summary);
            if (prev.value("config_hash", std::string()) != hash)
                throw std::runtime_error("cannot resume: " + reports.string() +
                                         " was produced with a different configuration");
        }
        trim_partial_line(reports);
        for (const auto& r : io.read(reports)) options.skip.insert(r.index);
        kept = options.skip.size();
    }
    write_file(summary, dump(summary_head(c, "running")));

    std::ofstream sink_file(reports, std::ios::binary | (kept > 0 ? std::ios::app : std::ios::trunc));
    if (!sink_file) throw std::runtime_error("cannot write " + reports.string());
    const runners::Sink<Report> sink = [&](const Report& r) {
        sink_file << io.line(r) << "\n";
        sink_file.flush();
        if (!sink_file) throw std::runtime_error("write failed: " + reports.string());
    };
    try {
        io.execute(options, sink);
    } catch (const runners::Interrupted& e) {
        sink_file.close();
        err << "mdbench: " << e.what() << "; rerun with --resume to continue\n";
        return kExitFailure;
    }
    sink_file.close();

    const auto all = io.read(reports);
    auto j = summary_head(c, "complete");
    j["completed"] = all.size();
    const auto details = io.summarize(all);
    for (const auto& [k, v] : details.items()) j[k] = v;
    write_file(summary, dump(j));
    out << c.stem << ": " << all.size() << " reports (" << kept << " resumed) -> " << reports.generic_string()
        << "\n";
    return kExitOk;
}

json aggregates_json(const reports::GameAggregates& a) {
    json j;
    j["games"] = a.games;
    j["errored"] = a.errored;
    j["move_tokens"] = a.move_tokens;
    j["illegal_moves"] = a.illegal_moves;
    j["moves_accepted"] = a.moves_accepted;
    j["moves_scored"] = a.moves_scored;
    j[std::string(metrics::kIllegalMovePct)] = opt_json(a.illegal_move_pct);
    j[std::string(metrics::kIllegalMoveNumber)] = opt_json(a.avg_illegal_move_number);
    j[std::string(metrics::kCentipawnLoss)] = opt_json(a.avg_centipawn_loss);
    j[std::string(metrics::kMissedEndState)] = opt_json(a.missed_end_state_pct);
    j[std::string(metrics::kGameLength)] = opt_json(a.avg_game_length);
    return j;
}

json eval_json(const reports::EvalReport& r) {
    json j;
    j["true_numeric"] = r.true_numeric;
    j["predicted_numeric"] = r.predicted_numeric;
    j["true_non_numeric"] = r.true_non_numeric;
    j["predicted_non_numeric"] = r.predicted_non_numeric;
    j["correct_non_numeric"] = r.correct_non_numeric;
    j[std::string(metrics::kRatioNumeric)] = opt_json(r.ratio_numeric());
    j[std::string(metrics::kRatioNonNumeric)] = opt_json(r.ratio_non_numeric());
    j[std::string(metrics::kMse)] = opt_json(r.mse());
    j[std::string(metrics::kAccuracy)] = opt_json(r.accuracy());
    return j;
}

std::optional<double> bleu_of(const std::vector<reports::TranslationPair>& pairs) {
    if (pairs.empty()) return std::nullopt;
    std::vector<std::string> cand, ref;
    for (const auto& p : pairs) {
        cand.push_back(p.candidate);
        ref.push_back(p.reference);
    }
    return metrics::corpus_bleu(cand, ref);
}

json probe_json(const reports::ProbeReport& r) {
    const double n = metrics::nmr(r.chess_output_tokens, r.code_output_tokens);
    const double c = metrics::crr(r.successes, r.attempts);
    json j;
    j["attempts"] = r.attempts;
    j["successes"] = r.successes;
    j["nmr"] = n;
    j["crr"] = c;
    j["mdls"] = metrics::mdls(n, c);
    return j;
}

template <typename Report>
std::size_t count_errors(const std::vector<Report>& rs) {
    return static_cast<std::size_t>(std::count_if(rs.begin(), rs.end(), [](const Report& r) { return r.error.has_value(); }));
}

std::vector<corpus::TaskSample> load_task_samples(const std::string& path, corpus::TaskKind task, std::size_t limit) {
    auto samples = corpus::read_dataset(fs::path(path));
    if (limit > 0 && samples.size() > limit) samples.resize(limit);
    if (samples.empty()) throw std::runtime_error("dataset is empty: " + path);
    for (std::size_t i = 0; i < samples.size(); ++i)
        if (samples[i].task != task)
            throw std::runtime_error(path + ":" + std::to_string(i + 1) + ": sample is " +
                                     std::string(corpus::task_name(samples[i].task)) + ", expected " +
                                     std::string(corpus::task_name(task)));
    return samples;
}

struct EvalArgs {
    RunFlags run;
    std::string task;
    std::string dataset;
    std::string engine;
    std::string depth;
    std::string move_cap;
    bool centipawn = false;
    CLI::Option *engine_opt = nullptr, *depth_opt = nullptr, *move_cap_opt = nullptr;
};

int cmd_eval_run(const EvalArgs& a, const Settings& s, std::ostream& out, std::ostream& err) {
    const auto task = corpus::parse_task(a.task);
    if (!task) throw UsageError("unknown task '" + a.task + "'");
    auto rs = resolve_run(a.run, s);
    const bool centipawn = a.centipawn || a.engine_opt->count() > 0;
    const auto engine_path = s.text(given(a.engine_opt, a.engine), "MDBENCH_ENGINE", "engine.path");
    if (centipawn && *task != corpus::TaskKind::move_gen)
        throw UsageError("centipawn loss only applies to --task move-gen");
    if (centipawn && !engine_path)
        throw UsageError("centipawn loss needs a UCI engine: pass --engine, set MDBENCH_ENGINE, or set engine.path");
    const int depth = static_cast<int>(s.integer(given(a.depth_opt, a.depth), nullptr, "engine.depth", 12, 1));
    const int cap = static_cast<int>(s.integer(given(a.move_cap_opt, a.move_cap), nullptr, "run.move_cap",
                                               runners::kDefaultMoveCap, 1));

    const auto samples = load_task_samples(a.dataset, *task, a.run.limit);
    auto opened = open_spec(a.run.adapter, s, rs.adapter_options);

    RunContext c;
    c.dir = a.run.out;
    c.stem = std::string(corpus::task_name(*task));
    c.competitor = a.run.name.empty() ? a.run.adapter : a.run.name;
    c.seed = rs.run.seed;
    c.resume = a.run.resume;
    c.samples = samples.size();
    c.effective = {{"task", c.stem},
                   {"adapter", opened.spec},
                   {"dataset", file_hash(a.dataset)},
                   {"limit", std::to_string(a.run.limit)},
                   {"seed", rs.run.seed ? std::to_string(*rs.run.seed) : "none"},
                   {"max_new_tokens", std::to_string(rs.run.max_new_tokens)}};
    if (opened.model_hash) c.effective["model"] = *opened.model_hash;

    int code = kExitOk;
    auto& session = *opened.session;
    switch (*task) {
    case corpus::TaskKind::move_gen: {
        c.effective["move_cap"] = std::to_string(cap);
        c.effective["centipawn"] = centipawn ? "true" : "false";
        std::unique_ptr<engine::EnginePool> pool;
        runners::MoveGenOptions g;
        g.move_cap = cap;
        g.limit = engine::AnalysisLimit::depth(depth);
        if (centipawn) {
            c.effective["engine"] = *engine_path;
            c.effective["engine.depth"] = std::to_string(depth);
            pool = std::make_unique<engine::EnginePool>(*engine_path, rs.run.jobs);
            g.engines = pool.get();
        }
        std::vector<std::string> prompts;
        for (const auto& smp : samples) prompts.push_back(smp.input);
        TaskIo<reports::GameReport> io;
        io.read = [](const fs::path& p) { return reports::read_game_reports(p); };
        io.line = [](const reports::GameReport& r) { return reports::to_jsonl(r); };
        io.summarize = [&](const std::vector<reports::GameReport>& games) {
            json j;
            j["errored"] = count_errors(games);
            j["move_cap"] = cap;
            j["engine"] = centipawn ? json{{"path", *engine_path}, {"depth", depth}} : json(nullptr);
            j["capped"] = aggregates_json(reports::aggregate_games(games, cap));
            j["uncapped"] = aggregates_json(reports::aggregate_games(games));
            return j;
        };
        io.execute = [&](const runners::RunOptions& o, const runners::Sink<reports::GameReport>& sink) {
            runners::run_move_generation(session, prompts, g, o, sink);
        };
        code = run_task(c, rs.run, io, out, err);
        break;
    }
    case corpus::TaskKind::board_eval: {
        TaskIo<reports::EvalOutcome> io;
        io.read = [](const fs::path& p) { return reports::read_eval_outcomes(p); };
        io.line = [](const reports::EvalOutcome& r) { return reports::to_jsonl(r); };
        io.summarize = [](const std::vector<reports::EvalOutcome>& rs2) {
            auto j = eval_json(reports::fold(rs2));
            j["errored"] = count_errors(rs2);
            return j;
        };
        io.execute = [&](const runners::RunOptions& o, const runners::Sink<reports::EvalOutcome>& sink) {
            runners::run_board_eval(session, samples, o, sink);
        };
        code = run_task(c, rs.run, io, out, err);
        break;
    }
    case corpus::TaskKind::code_summarize:
    case corpus::TaskKind::code_generate: {
        const auto dir = *task == corpus::TaskKind::code_summarize ? reports::Direction::code_to_summary
                                                                   : reports::Direction::summary_to_code;
        TaskIo<reports::TranslationPair> io;
        io.read = [](const fs::path& p) { return reports::read_translation_report(p).pairs; };
        io.line = [dir](const reports::TranslationPair& r) { return reports::to_jsonl(r, dir); };
        io.summarize = [dir](const std::vector<reports::TranslationPair>& pairs) {
            json j;
            j["direction"] = reports::direction_name(dir);
            j["errored"] = count_errors(pairs);
            j["bleu"] = opt_json(bleu_of(pairs));
            return j;
        };
        io.execute = [&](const runners::RunOptions& o, const runners::Sink<reports::TranslationPair>& sink) {
            runners::run_translation(session, samples, o, sink);
        };
        code = run_task(c, rs.run, io, out, err);
        break;
    }
    }
    session.close();
    return code;
}

struct ProbeArgs {
    RunFlags run;
    std::string chess;
    std::string code;
    std::string tuned = "none";
    double threshold = 0.5;
};

int cmd_probe(const ProbeArgs& a, const Settings& s, std::ostream& out, std::ostream& err) {
    runners::ProbeOptions p;
    p.success_threshold = a.threshold;
    if (a.tuned != "none") {
        p.tuned = reports::parse_domain(a.tuned);
        if (!p.tuned || *p.tuned == reports::Domain::ambiguous)
            throw UsageError("--tuned must be chess, code or none");
    }
    auto rs = resolve_run(a.run, s);

    std::vector<runners::ProbePrompt> prompts;
    for (const auto& [path, domain] :
         {std::pair{a.chess, reports::Domain::chess}, std::pair{a.code, reports::Domain::code}}) {
        auto samples = corpus::read_dataset(fs::path(path));
        if (a.run.limit > 0 && samples.size() > a.run.limit) samples.resize(a.run.limit);
        if (samples.empty()) throw std::runtime_error("dataset is empty: " + path);
        for (const auto& smp : samples) prompts.push_back({domain, smp.input});
    }
    auto opened = open_spec(a.run.adapter, s, rs.adapter_options);

    RunContext c;
    c.dir = a.run.out;
    c.stem = "probe";
    c.competitor = a.run.name.empty() ? a.run.adapter : a.run.name;
    c.seed = rs.run.seed;
    c.resume = a.run.resume;
    c.samples = prompts.size();
    c.effective = {{"task", "probe"},
                   {"adapter", opened.spec},
                   {"chess_dataset", file_hash(a.chess)},
                   {"code_dataset", file_hash(a.code)},
                   {"limit", std::to_string(a.run.limit)},
                   {"tuned", a.tuned},
                   {"threshold", real_text(a.threshold)},
                   {"seed", rs.run.seed ? std::to_string(*rs.run.seed) : "none"},
                   {"max_new_tokens", std::to_string(rs.run.max_new_tokens)}};
    if (opened.model_hash) c.effective["model"] = *opened.model_hash;

    auto& session = *opened.session;
    TaskIo<reports::ProbeOutcome> io;
    io.read = [](const fs::path& path) { return reports::read_probe_outcomes(path); };
    io.line = [](const reports::ProbeOutcome& r) { return reports::to_jsonl(r); };
    io.summarize = [&](const std::vector<reports::ProbeOutcome>& rs2) {
        auto j = probe_json(reports::fold(rs2));
        j["errored"] = count_errors(rs2);
        j["tuned"] = a.tuned;
        j["threshold"] = a.threshold;
        return j;
    };
    io.execute = [&](const runners::RunOptions& o, const runners::Sink<reports::ProbeOutcome>& sink) {
        runners::run_cross_domain_probe(session, prompts, p, o, sink);
    };
    const int code = run_task(c, rs.run, io, out, err);
    session.close();
    return code;
}

// ------------------------------------------------------- rank and report

const std::vector<std::string>& task_stems() {
    static const std::vector<std::string> stems{"move-gen", "board-eval", "code-summarize", "code-generate", "probe"};
    return stems;
}

struct LoadedCompetitor {
    metrics::CompetitorReports reports;
    json runs = json::object();
    std::string hashes;
};

LoadedCompetitor load_competitor(const std::string& name, const fs::path& dir) {
    LoadedCompetitor lc;
    lc.reports.name = name;
    bool any = false;
    for (const auto& stem : task_stems()) {
        const fs::path file = dir / (stem + ".jsonl");
        if (!fs::exists(file)) continue;
        any = true;
        const fs::path summary = dir / (stem + ".summary.json");
        json run{{"config_hash", nullptr}, {"seed", nullptr}};
        if (fs::exists(summary)) {
            const auto j = read_json_file(summary);
            if (j.value("status", std::string()) == "running")
                throw std::runtime_error("run not finished: " + summary.string() + " (resume it first)");
            run["config_hash"] = j.value("config_hash", json(nullptr));
            run["seed"] = j.value("seed", json(nullptr));
        }
        lc.runs[stem] = run;
        lc.hashes += stem + ":" + file_hash(file) + ",";
        if (stem == "move-gen") {
            lc.reports.games = reports::read_game_reports(file);
        } else if (stem == "board-eval") {
            lc.reports.eval = reports::fold(reports::read_eval_outcomes(file));
        } else if (stem == "probe") {
            lc.reports.probe = reports::fold(reports::read_probe_outcomes(file));
        } else {
            auto t = reports::read_translation_report(file);
            const auto expected = stem == "code-summarize" ? reports::Direction::code_to_summary
                                                           : reports::Direction::summary_to_code;
            if (!t.pairs.empty() && t.direction != expected)
                throw std::runtime_error(file.string() + ": reports are for " +
                                         std::string(reports::direction_name(t.direction)));
            t.direction = expected;
            lc.reports.translations[expected] = std::move(t);
        }
    }
    if (!any) throw std::runtime_error("no reports in " + dir.string());
    return lc;
}

struct RankArgs {
    std::vector<std::string> competitors;
    std::string reports_dir;
    std::string out;
    std::string move_cap;
    CLI::Option* move_cap_opt = nullptr;
};

int cmd_rank(const RankArgs& a, const Settings& s, std::ostream& out) {
    std::vector<std::pair<std::string, fs::path>> entries;
    for (const auto& c : a.competitors) {
        const auto eq = c.find('=');
        if (eq == std::string::npos || eq == 0 || eq + 1 == c.size())
            throw UsageError("--competitor expects NAME=DIR, got '" + c + "'");
        entries.emplace_back(c.substr(0, eq), c.substr(eq + 1));
    }
    if (!a.reports_dir.empty()) {
        if (!fs::is_directory(a.reports_dir)) throw std::runtime_error("not a directory: " + a.reports_dir);
        std::vector<std::pair<std::string, fs::path>> found;
        for (const auto& e : fs::directory_iterator(a.reports_dir))
            if (e.is_directory()) found.emplace_back(e.path().filename().string(), e.path());
        std::sort(found.begin(), found.end());
        entries.insert(entries.end(), found.begin(), found.end());
    }
    std::set<std::string> names;
    for (const auto& [n, d] : entries)
        if (!names.insert(n).second) throw UsageError("duplicate competitor name '" + n + "'");
    if (entries.size() < 2)
        throw UsageError("rank needs at least 2 competitors, got " + std::to_string(entries.size()));
    const int cap = static_cast<int>(s.integer(given(a.move_cap_opt, a.move_cap), nullptr, "run.move_cap",
                                               runners::kDefaultMoveCap, 1));

    std::vector<metrics::CompetitorReports> reps;
    std::map<std::string, std::string> eff{{"move_cap", std::to_string(cap)}};
    json runs = json::object();
    for (const auto& [name, dir] : entries) {
        auto lc = load_competitor(name, dir);
        eff["competitor." + name] = lc.hashes;
        runs[name] = lc.runs;
        reps.push_back(std::move(lc.reports));
    }
    const auto board = metrics::assemble_leaderboard(reps, {cap});
    const auto hash = config::config_hash(eff);

    json j;
    j["config_hash"] = hash;
    j["move_cap"] = cap;
    j["runs"] = runs;
    const auto body = json::parse(metrics::to_json(board));
    for (const auto& [k, v] : body.items()) j[k] = v;
    const std::string text = "config " + hash + "\n" + metrics::to_text(board);
    const fs::path dir(a.out);
    write_file(dir / "leaderboard.json", dump(j));
    write_file(dir / "leaderboard.txt", text);
    out << text;
    return kExitOk;
}

std::string fmt2(const std::optional<double>& v) {
    if (!v) return "-";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.2f", *v);
    return buf;
}

void print_rows(std::ostream& out, const std::vector<std::pair<std::string, std::optional<double>>>& rows) {
    for (const auto& [k, v] : rows) {
        out << "  " << k;
        for (std::size_t i = k.size(); i < 26; ++i) out << ' ';
        out << fmt2(v) << "\n";
    }
}

struct ReportArgs {
    std::string dir;
    std::string move_cap;
    CLI::Option* move_cap_opt = nullptr;
};

int cmd_report(const ReportArgs& a, const Settings& s, std::ostream& out) {
    const int cap = static_cast<int>(s.integer(given(a.move_cap_opt, a.move_cap), nullptr, "run.move_cap",
                                               runners::kDefaultMoveCap, 1));
    const auto lc = load_competitor(fs::path(a.dir).filename().string(), a.dir);
    const auto& r = lc.reports;
    if (r.games) {
        for (const auto& [label, view] :
             {std::pair{"move-gen (move cap " + std::to_string(cap) + ")", std::optional<int>(cap)},
              std::pair{std::string("move-gen (uncapped)"), std::optional<int>()}}) {
            const auto g = reports::aggregate_games(*r.games, view);
            out << label << ": " << g.games << " games, " << g.errored << " errored\n";
            print_rows(out, {{std::string(metrics::kIllegalMovePct), g.illegal_move_pct},
                             {std::string(metrics::kIllegalMoveNumber), g.avg_illegal_move_number},
                             {std::string(metrics::kCentipawnLoss), g.avg_centipawn_loss},
                             {std::string(metrics::kMissedEndState), g.missed_end_state_pct},
                             {std::string(metrics::kGameLength), g.avg_game_length}});
        }
    }
    if (r.eval) {
        out << "board-eval\n";
        print_rows(out, {{std::string(metrics::kRatioNumeric), r.eval->ratio_numeric()},
                         {std::string(metrics::kRatioNonNumeric), r.eval->ratio_non_numeric()},
                         {std::string(metrics::kMse), r.eval->mse()},
                         {std::string(metrics::kAccuracy), r.eval->accuracy()}});
    }
    for (const auto& [dir, t] : r.translations) {
        out << reports::direction_name(dir) << "\n";
        print_rows(out, {{"bleu", bleu_of(t.pairs)}});
    }
    if (r.probe) {
        const double n = metrics::nmr(r.probe->chess_output_tokens, r.probe->code_output_tokens);
        const double c = metrics::crr(r.probe->successes, r.probe->attempts);
        out << "probe: " << r.probe->successes << " of " << r.probe->attempts << " cross-domain prompts answered\n";
        print_rows(out, {{"nmr", n}, {"crr", c}, {"mdls", metrics::mdls(n, c)}});
    }
    return kExitOk;
}

struct ConformanceArgs {
    std::string adapter;
    bool expect_echo = false;
    std::string timeout;
    CLI::Option* timeout_opt = nullptr;
};

int cmd_conformance(const ConformanceArgs& a, const Settings& s, std::ostream& out) {
    adapter::AdapterOptions options;
    options.request_timeout = std::chrono::milliseconds(
        s.integer(given(a.timeout_opt, a.timeout), nullptr, "adapter.timeout_ms", 120000, 1));
    auto opened = open_spec(a.adapter, s, options);
    const auto report = adapter::run_conformance(*opened.session, a.expect_echo);
    opened.session->close();
    for (const auto& c : report.checks) {
        out << (c.passed ? "PASS " : "FAIL ") << c.name;
        if (!c.detail.empty()) out << ": " << c.detail;
        out << "\n";
    }
    out << "note: seeded requests " << (report.seeded_reproducible ? "reproduced" : "did not reproduce")
        << " (informational)\n";
    return report.passed() ? kExitOk : kExitFailure;
}

}  // namespace

int run(const std::vector<std::string>& args, std::istream& in, std::ostream& out, std::ostream& err) {
    CLI::App app{"mdbench: chess and code text-to-text evaluation harness", "mdbench"};
    app.require_subcommand(1);
    app.fallthrough();
    std::string config_path;
    app.add_option("--config", config_path, "Key/value config file")->check(CLI::ExistingFile);

    // ingest
    auto* ingest = app.add_subcommand("ingest", "Build task datasets from raw corpora");
    ingest->require_subcommand(1);
    IngestArgs pgn_args, eval_args, code_args;
    auto ingest_common = [](CLI::App* sub, IngestArgs& a, double fraction) {
        a.test_fraction = fraction;
        sub->add_option("inputs", a.inputs, "Files or directories")->required();
        sub->add_option("--out", a.out, "Output directory")->required();
        sub->add_option("--test-fraction", a.test_fraction, "Share of records held out")
            ->check(CLI::Range(1e-9, 0.999999))
            ->capture_default_str();
        sub->add_option("--seed", a.seed, "Split seed")->capture_default_str();
    };
    auto* ingest_pgn = ingest->add_subcommand("pgn", "PGN games -> move-gen datasets");
    ingest_common(ingest_pgn, pgn_args, 0.01);
    ingest_pgn->add_option("--min-elo", pgn_args.min_elo, "Keep games where both players are rated at least this");
    ingest_pgn->add_option("--opening-plies", pgn_args.opening_plies, "Plies moved from target to prompt");
    ingest_pgn->add_flag("--no-validate", pgn_args.no_validate, "Skip replaying games through the rules");
    auto* ingest_eval = ingest->add_subcommand("eval", "Evaluated positions (csv/jsonl) -> board-eval datasets");
    ingest_common(ingest_eval, eval_args, 0.01);
    auto* ingest_code = ingest->add_subcommand("code", "Code/docstring pairs -> code-summarize and code-generate");
    ingest_common(ingest_code, code_args, 0.1);

    // tokenizer
    auto* tokenizer = app.add_subcommand("tokenizer", "Byte-pair tokenizer");
    tokenizer->require_subcommand(1);
    auto* tok_train = tokenizer->add_subcommand("train", "Train a vocabulary");
    TokenizerArgs tok_args;
    tok_train->add_option("--corpus", tok_args.corpus, "Dataset .jsonl files or text files (one document per line)")
        ->required();
    tok_train->add_option("--vocab-size", tok_args.vocab_size, "Total tokens including the 256 bytes")->required();
    tok_train->add_option("--out", tok_args.out, "Vocabulary file")->required();
    tok_train->add_option("--min-pair-count", tok_args.min_pair_count, "Rarest pair that may be merged")
        ->capture_default_str();
    tok_args.jobs_opt = tok_train->add_option("--jobs", tok_args.jobs, "Counting threads");

    // refmodel
    auto* ref = app.add_subcommand("refmodel", "Token n-gram reference model");
    ref->require_subcommand(1);
    auto* ref_train = ref->add_subcommand("train", "Train a model on task datasets");
    RefTrainArgs rt;
    ref_train->add_option("--dataset", rt.datasets, "Dataset .jsonl files or directories")->required();
    ref_train->add_option("--order", rt.order, "n-gram order")->check(CLI::Range(1, 64))->capture_default_str();
    ref_train->add_option("--tokenizer", rt.tokenizer, "Existing vocabulary file");
    ref_train->add_option("--vocab-size", rt.vocab_size, "Train a vocabulary of this size on the datasets");
    ref_train->add_option("--out", rt.out, "Model file")->required();
    rt.jobs_opt = ref_train->add_option("--jobs", rt.jobs, "Tokenizer counting threads");
    auto* ref_gen = ref->add_subcommand("generate", "Continue one prompt");
    RefGenerateArgs rg;
    ref_gen->add_option("--model", rg.model)->required()->check(CLI::ExistingFile);
    ref_gen->add_option("--prompt", rg.prompt)->required();
    ref_gen->add_option("--max-new-tokens", rg.max_new_tokens)->check(CLI::PositiveNumber)->capture_default_str();
    ref_gen->add_option("--seed", rg.seed)->capture_default_str();
    ref_gen->add_flag("--sample", rg.sample, "Sample from the distribution instead of greedy decoding");
    auto* ref_serve = ref->add_subcommand("serve", "Serve the model as a stdio adapter");
    RefServeArgs rsv;
    ref_serve->add_option("--model", rsv.model)->required()->check(CLI::ExistingFile);
    ref_serve->add_option("--name", rsv.name)->capture_default_str();
    ref_serve->add_flag("--sample", rsv.sample);

    // eval
    auto* eval = app.add_subcommand("eval", "Evaluation runs");
    eval->require_subcommand(1);
    auto* eval_run = eval->add_subcommand("run", "Run one task against an adapter");
    EvalArgs ea;
    ea.run.add(eval_run);
    eval_run->add_option("--task", ea.task, "move-gen, board-eval, code-summarize or code-generate")->required();
    eval_run->add_option("--dataset", ea.dataset, "Task dataset (.jsonl)")->required()->check(CLI::ExistingFile);
    ea.engine_opt = eval_run->add_option("--engine", ea.engine, "UCI engine (MDBENCH_ENGINE, config engine.path)");
    ea.depth_opt = eval_run->add_option("--engine-depth", ea.depth, "Search depth (config engine.depth, default 12)");
    ea.move_cap_opt = eval_run->add_option("--move-cap", ea.move_cap, "Move cap (config run.move_cap, default 70)");
    eval_run->add_flag("--centipawn", ea.centipawn, "Score centipawn loss with the engine");

    // probe
    auto* probe = app.add_subcommand("probe", "Cross-domain probe for the multi-domain learning score");
    ProbeArgs pa;
    pa.run.add(probe);
    probe->add_option("--chess", pa.chess, "Chess prompts (dataset .jsonl)")->required()->check(CLI::ExistingFile);
    probe->add_option("--code", pa.code, "Code prompts (dataset .jsonl)")->required()->check(CLI::ExistingFile);
    probe->add_option("--tuned", pa.tuned, "Domain the model was tuned on: chess, code or none")
        ->capture_default_str();
    probe->add_option("--threshold", pa.threshold, "Share of decided tokens that must match the prompt domain")
        ->check(CLI::Range(1e-9, 1.0))
        ->capture_default_str();

    // rank
    auto* rank = app.add_subcommand("rank", "Build a leaderboard from competitors' reports");
    RankArgs ra;
    rank->add_option("--competitor", ra.competitors, "NAME=DIR (repeatable)");
    rank->add_option("--reports", ra.reports_dir, "Directory with one subdirectory of reports per competitor");
    rank->add_option("--out", ra.out, "Output directory")->required();
    ra.move_cap_opt = rank->add_option("--move-cap", ra.move_cap, "Move cap (config run.move_cap, default 70)");

    // report
    auto* report = app.add_subcommand("report", "Print one competitor's sub-metrics");
    ReportArgs rpa;
    report->add_option("dir", rpa.dir, "Run output directory")->required()->check(CLI::ExistingDirectory);
    rpa.move_cap_opt = report->add_option("--move-cap", rpa.move_cap, "Move cap (config run.move_cap, default 70)");

    // conformance
    auto* conf = app.add_subcommand("conformance", "Check an adapter against the wire protocol");
    ConformanceArgs ca;
    conf->add_option("--adapter", ca.adapter, "Adapter spec or config alias")->required();
    conf->add_flag("--expect-echo", ca.expect_echo, "Outputs must equal prompts");
    ca.timeout_opt = conf->add_option("--timeout-ms", ca.timeout, "Per-request timeout");

    std::vector<std::string> storage{"mdbench"};
    storage.insert(storage.end(), args.begin(), args.end());
    std::vector<char*> argv;
    for (auto& s : storage) argv.push_back(s.data());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        return app.exit(e, out, err) == 0 ? kExitOk : kExitUsage;
    }

    Settings settings;
    try {
        if (!config_path.empty()) settings.file = config::ConfigFile::load(config_path);
    } catch (const config::ConfigError& e) {
        err << "mdbench: " << e.what() << "\n";
        return kExitUsage;
    }

    try {
        if (ingest_pgn->parsed()) return cmd_ingest_pgn(pgn_args, out, err);
        if (ingest_eval->parsed()) return cmd_ingest_eval(eval_args, out);
        if (ingest_code->parsed()) return cmd_ingest_code(code_args, out);
        if (tok_train->parsed()) return cmd_tokenizer_train(tok_args, settings, out);
        if (ref_train->parsed()) return cmd_refmodel_train(rt, settings, out);
        if (ref_gen->parsed()) return cmd_refmodel_generate(rg, out);
        if (ref_serve->parsed()) return cmd_refmodel_serve(rsv, in, out, err);
        if (eval_run->parsed()) return cmd_eval_run(ea, settings, out, err);
        if (probe->parsed()) return cmd_probe(pa, settings, out, err);
        if (rank->parsed()) return cmd_rank(ra, settings, out);
        if (report->parsed()) return cmd_report(rpa, settings, out);
        if (conf->parsed()) return cmd_conformance(ca, settings, out);
    } catch (const UsageError& e) {
        err << "mdbench: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        err << "mdbench: error: " << e.what() << "\n";
        return kExitFailure;
    }
    err << "mdbench: no command\n";
    return kExitUsage;
}

}  // namespace mdbench::cli
