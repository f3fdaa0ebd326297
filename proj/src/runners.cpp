#include "mdbench/runners.hpp"

#include "mdbench/pgn.hpp"

#include <atomic>
#include <cctype>
#include <exception>
#include <mutex>
#include <regex>
#include <thread>

namespace mdbench::runners {

using adapter::GenerationRequest;
using adapter::Outcome;
using reports::Domain;

namespace {

std::string outcome_error(const Outcome& o) {
    return std::string(adapter::to_string(*o.error)) + (o.message.empty() ? "" : ": " + o.message);
}

// Runs fn(0..n-1) on up to `jobs` threads; rethrows the first exception.
template <typename Fn>
void parallel_for(std::size_t n, unsigned jobs, Fn fn) {
    if (jobs <= 1 || n <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex mu;
    std::vector<std::thread> workers;
    for (unsigned t = 0; t < std::min<std::size_t>(jobs, n); ++t) {
        workers.emplace_back([&] {
            for (std::size_t i; (i = next.fetch_add(1)) < n;) {
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard lock(mu);
                    if (!failure) failure = std::current_exception();
                    next = n;
                }
            }
        });
    }
    for (auto& w : workers) w.join();
    if (failure) std::rethrow_exception(failure);
}

template <typename Report, typename MakeRequest, typename Finish>
std::vector<Report> run_batched(adapter::AdapterSession& session, std::size_t n, const RunOptions& options,
                                MakeRequest make_request, Finish finish, const Sink<Report>& sink) {
    std::vector<std::size_t> todo;
    for (std::size_t i = 0; i < n; ++i)
        if (!options.skip.count(i)) todo.push_back(i);
    const std::size_t batch = std::max<std::size_t>(1, options.batch_size);

    std::vector<Report> out;
    out.reserve(todo.size());
    for (std::size_t start = 0; start < todo.size(); start += batch) {
        if (options.cancelled && options.cancelled())
            throw Interrupted("interrupted after " + std::to_string(out.size()) + " of " + std::to_string(todo.size()) +
                              " samples");
        const std::size_t end = std::min(todo.size(), start + batch);
        std::vector<GenerationRequest> requests;
        for (std::size_t k = start; k < end; ++k) {
            GenerationRequest r = make_request(todo[k]);
            r.max_new_tokens = options.max_new_tokens;
            if (options.seed) r.seed = *options.seed + static_cast<std::int64_t>(todo[k]);
            requests.push_back(std::move(r));
        }
        const auto outcomes = session.generate_batch(requests);
        if (outcomes.size() != requests.size())
            throw RunnerError("adapter returned " + std::to_string(outcomes.size()) + " outcomes for " +
                              std::to_string(requests.size()) + " requests");
        std::vector<Report> done(requests.size());
        parallel_for(requests.size(), options.jobs, [&](std::size_t k) { done[k] = finish(todo[start + k], outcomes[k]); });
        for (auto& r : done) {
            if (sink) sink(r);
            out.push_back(std::move(r));
        }
    }
    return out;
}

std::string request_id(std::string_view task, std::size_t index) {
    return std::string(task) + "-" + std::to_string(index);
}

}  // namespace

reports::GameReport adjudicate_game(std::string_view prompt, std::string_view output, int move_cap,
                                    std::vector<std::pair<chess::Position, chess::Move>>* moves) {
    reports::GameReport g;
    chess::Position pos = chess::Position::initial();
    for (const auto& raw : reports::whitespace_tokens(prompt)) {
        const auto tok = corpus::strip_move_number(raw);
        if (tok.empty()) continue;
        if (corpus::is_result_token(tok)) break;
        try {
            pos = chess::apply_move(pos, chess::parse_san(pos, tok));
        } catch (const chess::ChessError& e) {
            throw RunnerError("prompt move " + std::to_string(g.prompt_plies + 1) + " '" + std::string(tok) +
                              "' does not replay: " + e.what());
        }
        ++g.prompt_plies;
    }

    auto term = chess::terminal_state(pos);
    for (const auto& raw : reports::whitespace_tokens(output)) {
        const auto tok = corpus::strip_move_number(raw);
        if (tok.empty()) continue;
        if (corpus::is_result_token(tok)) {
            g.declared_result = std::string(tok);
            break;
        }
        if (term) {
            g.missed_end_state = true;
            break;
        }
        if (g.game_length() >= move_cap) g.capped = true;
        chess::Move m;
        try {
            m = chess::parse_san(pos, tok);
        } catch (const chess::ChessError&) {
            g.illegal_move_number = g.moves_accepted + 1;
            g.illegal_token = std::string(tok);
            break;
        }
        if (moves) moves->emplace_back(pos, m);
        pos = chess::apply_move(pos, m);
        ++g.moves_accepted;
        term = chess::terminal_state(pos);
    }
    g.termination = term;
    return g;
}

std::vector<reports::GameReport> run_move_generation(adapter::AdapterSession& session,
                                                     const std::vector<std::string>& prompts,
                                                     const MoveGenOptions& game_options, const RunOptions& options,
                                                     const Sink<reports::GameReport>& sink) {
    // Reject unreplayable prompts before spending any adapter time.
    for (std::size_t i = 0; i < prompts.size(); ++i) {
        if (options.skip.count(i)) continue;
        try {
            adjudicate_game(prompts[i], "", game_options.move_cap);
        } catch (const RunnerError& e) {
            throw RunnerError("prompt " + std::to_string(i) + ": " + e.what());
        }
    }
    return run_batched<reports::GameReport>(
        session, prompts.size(), options,
        [&](std::size_t i) {
            return GenerationRequest{request_id("move-gen", i), "move-gen", prompts[i], options.max_new_tokens, {}};
        },
        [&](std::size_t i, const Outcome& o) {
            reports::GameReport g;
            if (!o.ok()) {
                g = adjudicate_game(prompts[i], "", game_options.move_cap);
                g.termination.reset();
                g.error = outcome_error(o);
            } else {
                std::vector<std::pair<chess::Position, chess::Move>> moves;
                g = adjudicate_game(prompts[i], o.response->output, game_options.move_cap,
                                    game_options.engines ? &moves : nullptr);
                if (game_options.engines) {
                    auto engine = game_options.engines->acquire();
                    for (const auto& [pos, move] : moves)
                        g.centipawn_losses.push_back(engine::centipawn_loss(*engine, pos, move, game_options.limit));
                }
            }
            g.index = i;
            return g;
        },
        sink);
}

std::vector<reports::EvalOutcome> run_board_eval(adapter::AdapterSession& session,
                                                 const std::vector<corpus::TaskSample>& samples,
                                                 const RunOptions& options, const Sink<reports::EvalOutcome>& sink) {
    for (const auto& s : samples)
        if (s.task != corpus::TaskKind::board_eval) throw RunnerError("board-eval runner given a non board-eval sample");
    return run_batched<reports::EvalOutcome>(
        session, samples.size(), options,
        [&](std::size_t i) {
            return GenerationRequest{request_id("board-eval", i), "board-eval", samples[i].input, options.max_new_tokens, {}};
        },
        [&](std::size_t i, const Outcome& o) {
            reports::EvalOutcome e;
            e.index = i;
            e.target = samples[i].target;
            if (o.ok()) e.prediction = o.response->output;
            else e.error = outcome_error(o);
            return e;
        },
        sink);
}

reports::TranslationReport run_translation(adapter::AdapterSession& session,
                                           const std::vector<corpus::TaskSample>& samples, const RunOptions& options,
                                           const Sink<reports::TranslationPair>& sink) {
    if (samples.empty()) throw RunnerError("translation runner: empty input");
    const auto task = samples.front().task;
    if (task != corpus::TaskKind::code_summarize && task != corpus::TaskKind::code_generate)
        throw RunnerError("translation runner needs code-summarize or code-generate samples");
    for (const auto& s : samples)
        if (s.task != task) throw RunnerError("translation runner: samples mix code-summarize and code-generate");
    const std::string tag(corpus::task_name(task));

    reports::TranslationReport report;
    report.direction = task == corpus::TaskKind::code_summarize ? reports::Direction::code_to_summary
                                                                : reports::Direction::summary_to_code;
    report.pairs = run_batched<reports::TranslationPair>(
        session, samples.size(), options,
        [&](std::size_t i) { return GenerationRequest{request_id(tag, i), tag, samples[i].input, options.max_new_tokens, {}}; },
        [&](std::size_t i, const Outcome& o) {
            reports::TranslationPair p;
            p.index = i;
            p.reference = samples[i].target;
            if (o.ok()) p.candidate = o.response->output;
            else p.error = outcome_error(o);
            return p;
        },
        sink);
    return report;
}

namespace {

bool is_word_char(unsigned char c) { return std::isalnum(c) || c == '_'; }

bool is_san(std::string_view tok) {
    static const std::regex san(
        R"((O-O(-O)?|0-0(-0)?|[KQRBN][a-h]?[1-8]?x?[a-h][1-8]|[a-h](x[a-h])?[1-8](=?[QRBN])?)[+#]?[!?]*)");
    return std::regex_match(tok.begin(), tok.end(), san);
}

bool is_move_number(std::string_view tok) {
    std::size_t i = 0;
    while (i < tok.size() && std::isdigit(static_cast<unsigned char>(tok[i]))) ++i;
    if (i == 0 || i == tok.size()) return false;
    return tok.substr(i) == "." || tok.substr(i) == "...";
}

}  // namespace

Domain classify_token_domain(std::string_view tok) {
    if (tok.empty()) return Domain::ambiguous;
    if (corpus::is_result_token(tok) && tok != "*") return Domain::chess;
    if (is_move_number(tok)) return Domain::chess;
    const auto stripped = corpus::strip_move_number(tok);
    if (!stripped.empty() && is_san(stripped)) return Domain::chess;

    bool ascii = true, digits_only = true, has_word = false, has_alpha = false, has_code_punct = false;
    for (unsigned char c : tok) {
        if (c < 0x21 || c > 0x7e) ascii = false;
        if (!std::isdigit(c)) digits_only = false;
        if (is_word_char(c)) has_word = true;
        if (std::isalpha(c) || c == '_') has_alpha = true;
        if (std::string_view("()[]{}=.:,;\"'<>+-*/%&|!^~@").find(static_cast<char>(c)) != std::string_view::npos)
            has_code_punct = true;
    }
    if (!ascii || digits_only) return Domain::ambiguous;
    // Identifiers and keywords (dotted names included).
    static const std::regex ident(R"([A-Za-z_][A-Za-z0-9_]*(\.[A-Za-z_][A-Za-z0-9_]*)*)");
    if (std::regex_match(tok.begin(), tok.end(), ident)) return Domain::code;
    static const std::regex number(R"([-+]?(\d+\.\d*|\.\d+|\d+[eE][-+]?\d+|0[xX][0-9a-fA-F]+)[jJlLuUfF]*)");
    if (std::regex_match(tok.begin(), tok.end(), number)) return Domain::code;
    if (!has_word) return has_code_punct ? Domain::code : Domain::ambiguous;  // operator runs
    if (has_alpha && has_code_punct) return Domain::code;
    return Domain::ambiguous;
}

bool probe_success(std::string_view output, Domain prompted, double threshold, std::size_t* chess_tokens,
                   std::size_t* code_tokens) {
    std::size_t chess = 0, code = 0;
    for (const auto& t : reports::whitespace_tokens(output)) {
        const auto d = classify_token_domain(t);
        if (d == Domain::chess) ++chess;
        else if (d == Domain::code) ++code;
    }
    if (chess_tokens) *chess_tokens = chess;
    if (code_tokens) *code_tokens = code;
    const std::size_t decided = chess + code;
    if (decided == 0 || prompted == Domain::ambiguous) return false;
    const std::size_t hits = prompted == Domain::chess ? chess : code;
    return static_cast<double>(hits) >= threshold * static_cast<double>(decided);
}

std::vector<reports::ProbeOutcome> run_cross_domain_probe(adapter::AdapterSession& session,
                                                          const std::vector<ProbePrompt>& prompts,
                                                          const ProbeOptions& probe_options, const RunOptions& options,
                                                          const Sink<reports::ProbeOutcome>& sink) {
    if (!(probe_options.success_threshold > 0.0 && probe_options.success_threshold <= 1.0))
        throw RunnerError("probe success threshold must lie in (0, 1]");
    for (const auto& p : prompts)
        if (p.domain == Domain::ambiguous) throw RunnerError("probe prompts must be chess or code");
    return run_batched<reports::ProbeOutcome>(
        session, prompts.size(), options,
        [&](std::size_t i) { return GenerationRequest{request_id("probe", i), "probe", prompts[i].prompt, options.max_new_tokens, {}}; },
        [&](std::size_t i, const Outcome& o) {
            reports::ProbeOutcome p;
            p.index = i;
            p.prompted = prompts[i].domain;
            p.cross_domain = !probe_options.tuned || *probe_options.tuned != p.prompted;
            if (!o.ok()) {
                p.error = outcome_error(o);
                return p;
            }
            p.output = o.response->output;
            p.success = probe_success(p.output, p.prompted, probe_options.success_threshold, &p.chess_tokens,
                                      &p.code_tokens);
            return p;
        },
        sink);
}

}  // namespace mdbench::runners
