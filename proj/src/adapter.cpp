#include "mdbench/adapter.hpp"
#include "mdbench/subprocess.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <condition_variable>
#include <limits>
#include <map>
#include <mutex>
#include <regex>
#include <set>
#include <thread>

namespace mdbench::adapter {

using json = nlohmann::ordered_json;
using Clock = std::chrono::steady_clock;
using std::chrono::milliseconds;

std::string_view to_string(AdapterErrc code) {
    switch (code) {
        case AdapterErrc::spawn_failed: return "spawn-failed";
        case AdapterErrc::connect_failed: return "connect-failed";
        case AdapterErrc::bad_banner: return "bad-banner";
        case AdapterErrc::invalid_request: return "invalid-request";
        case AdapterErrc::timeout: return "timeout";
        case AdapterErrc::malformed_response: return "malformed-response";
        case AdapterErrc::id_mismatch: return "id-mismatch";
        case AdapterErrc::session_closed: return "session-closed";
        case AdapterErrc::adapter_died: return "adapter-died";
        case AdapterErrc::http_error: return "http-error";
    }
    return "unknown";
}

Outcome Outcome::success(GenerationResponse r) {
    Outcome o;
    o.id = r.id;
    o.response = std::move(r);
    return o;
}

Outcome Outcome::failure(std::string id, AdapterErrc code, std::string message) {
    Outcome o;
    o.id = std::move(id);
    o.error = code;
    o.message = std::move(message);
    return o;
}

namespace {

std::string dump_strict(const json& j) {
    try {
        return j.dump(-1, ' ', false, json::error_handler_t::strict);
    } catch (const json::exception& e) {
        throw AdapterError(AdapterErrc::invalid_request, std::string("text is not valid UTF-8: ") + e.what());
    }
}

json request_json(const GenerationRequest& r) {
    json j;
    j["id"] = r.id;
    j["task"] = r.task;
    j["prompt"] = r.prompt;
    j["max_new_tokens"] = r.max_new_tokens;
    j["seed"] = r.seed ? json(*r.seed) : json(nullptr);
    return j;
}

GenerationResponse response_from_json(const json& j) {
    if (!j.is_object()) throw AdapterError(AdapterErrc::malformed_response, "response is not an object");
    auto id = j.find("id");
    auto out = j.find("output");
    if (id == j.end() || !id->is_string())
        throw AdapterError(AdapterErrc::malformed_response, "response has no string \"id\"");
    if (out == j.end() || !out->is_string())
        throw AdapterError(AdapterErrc::malformed_response, "response has no string \"output\"");
    GenerationResponse r;
    r.id = id->get<std::string>();
    r.output = out->get<std::string>();
    if (auto l = j.find("latency_ms"); l != j.end() && l->is_number()) r.latency_ms = l->get<double>();
    if (auto t = j.find("token_count"); t != j.end() && t->is_number_integer()) r.token_count = t->get<std::int64_t>();
    return r;
}

}  // namespace

std::string request_line(const GenerationRequest& r) { return dump_strict(request_json(r)); }

std::string response_line(const GenerationResponse& r) {
    json j;
    j["id"] = r.id;
    j["output"] = r.output;
    return dump_strict(j);
}

GenerationRequest parse_request_line(std::string_view line) {
    json j;
    try {
        j = json::parse(line);
    } catch (const json::exception& e) {
        throw AdapterError(AdapterErrc::invalid_request, e.what());
    }
    auto str = [&](const char* key) {
        auto it = j.find(key);
        if (it == j.end() || !it->is_string())
            throw AdapterError(AdapterErrc::invalid_request, std::string("request field \"") + key + "\" missing");
        return it->get<std::string>();
    };
    if (!j.is_object()) throw AdapterError(AdapterErrc::invalid_request, "request is not an object");
    GenerationRequest r;
    r.id = str("id");
    r.task = str("task");
    r.prompt = str("prompt");
    auto n = j.find("max_new_tokens");
    if (n == j.end() || !n->is_number_integer() || n->get<std::int64_t>() < 1 ||
        n->get<std::int64_t>() > std::numeric_limits<int>::max())
        throw AdapterError(AdapterErrc::invalid_request, "max_new_tokens must be a positive integer");
    r.max_new_tokens = n->get<int>();
    if (auto s = j.find("seed"); s != j.end() && !s->is_null()) {
        if (!s->is_number_integer()) throw AdapterError(AdapterErrc::invalid_request, "seed must be an integer");
        r.seed = s->get<std::int64_t>();
    }
    return r;
}

GenerationResponse parse_response_line(std::string_view line) {
    json j;
    try {
        j = json::parse(line);
    } catch (const json::exception& e) {
        throw AdapterError(AdapterErrc::malformed_response, e.what());
    }
    return response_from_json(j);
}

std::optional<std::string> salvage_id(std::string_view line) {
    static const std::regex re(R"re("id"\s*:\s*"((?:[^"\\]|\\.)*)")re");
    std::match_results<std::string_view::const_iterator> m;
    if (!std::regex_search(line.begin(), line.end(), m, re)) return std::nullopt;
    try {
        return json::parse("\"" + m[1].str() + "\"").get<std::string>();
    } catch (const json::exception&) {
        return std::nullopt;
    }
}

void validate_batch(const std::vector<GenerationRequest>& requests) {
    std::set<std::string_view> seen;
    for (const auto& r : requests) {
        if (!seen.insert(r.id).second) throw AdapterError(AdapterErrc::invalid_request, "duplicate request id '" + r.id + "'");
        if (r.max_new_tokens < 1)
            throw AdapterError(AdapterErrc::invalid_request, "request '" + r.id + "': max_new_tokens must be >= 1");
    }
}

// ---------------------------------------------------------------------------

namespace {

class SubprocessSession : public AdapterSession {
public:
    SubprocessSession(std::string command, const AdapterOptions& options)
        : command_(std::move(command)), options_(options) {
        if (options_.max_in_flight == 0) options_.max_in_flight = 1;
        try {
            proc_.emplace(process::Subprocess::shell(command_));
        } catch (const process::ProcessError& e) {
            throw AdapterError(AdapterErrc::spawn_failed, e.what());
        }
        std::string line;
        const auto st = proc_->read_line(line, options_.open_timeout);
        if (st == process::ReadStatus::line && line == kBanner) return;
        proc_->close_stdin();
        proc_->wait(milliseconds(200));
        if (st == process::ReadStatus::timeout)
            throw AdapterError(AdapterErrc::bad_banner, "adapter '" + command_ + "' sent no banner");
        if (st == process::ReadStatus::eof)
            throw AdapterError(AdapterErrc::spawn_failed, "adapter '" + command_ + "' exited before its banner");
        throw AdapterError(AdapterErrc::bad_banner, "adapter '" + command_ + "' sent banner '" + line + "'");
    }

    ~SubprocessSession() override { close(); }

    std::vector<Outcome> generate_batch(const std::vector<GenerationRequest>& requests) override;

    void close() override {
        std::unique_lock lock(mu_);
        if (closed_) return;
        closed_ = true;
        // Let a running batch fail its pending requests and return first.
        idle_.wait(lock, [&] { return !busy_; });
        if (proc_) {
            proc_->close_stdin();
            proc_->wait(options_.close_grace);
        }
    }

    std::string describe() const override { return command_; }

private:
    std::string command_;
    AdapterOptions options_;
    std::optional<process::Subprocess> proc_;
    std::mutex mu_;
    std::condition_variable idle_;
    bool busy_ = false;
    bool closed_ = false;
    bool dead_ = false;
};

std::vector<Outcome> SubprocessSession::generate_batch(const std::vector<GenerationRequest>& requests) {
    validate_batch(requests);
    const std::size_t n = requests.size();
    std::vector<std::optional<Outcome>> out(n);
    std::vector<std::string> lines(n);
    for (std::size_t i = 0; i < n; ++i) {
        try {
            lines[i] = request_line(requests[i]);
        } catch (const AdapterError& e) {
            out[i] = Outcome::failure(requests[i].id, e.code(), e.what());
        }
    }
    auto finish = [&] {
        std::vector<Outcome> result;
        result.reserve(n);
        for (auto& o : out) result.push_back(std::move(*o));
        return result;
    };

    {
        std::lock_guard lock(mu_);
        if (closed_ || dead_) {
            const auto code = closed_ ? AdapterErrc::session_closed : AdapterErrc::adapter_died;
            for (std::size_t i = 0; i < n; ++i)
                if (!out[i]) out[i] = Outcome::failure(requests[i].id, code, std::string(to_string(code)));
            return finish();
        }
        busy_ = true;
    }

    // Shared with the writer thread.
    struct InFlight {
        std::size_t index;
        Clock::time_point deadline;
    };
    std::mutex state_mu;
    std::condition_variable window;
    std::map<std::string, InFlight, std::less<>> in_flight;
    bool stop = false;
    bool writer_done = false;
    std::optional<std::string> write_error;

    std::thread writer([&] {
        for (std::size_t i = 0; i < n; ++i) {
            if (out[i]) continue;  // failed encoding; never sent
            {
                std::unique_lock lock(state_mu);
                window.wait(lock, [&] { return stop || in_flight.size() < options_.max_in_flight; });
                if (stop) break;
                in_flight.emplace(requests[i].id, InFlight{i, Clock::now() + options_.request_timeout});
            }
            try {
                proc_->write_line(lines[i], options_.request_timeout);
            } catch (const process::ProcessError& e) {
                std::lock_guard lock(state_mu);
                write_error = e.what();
                break;
            }
        }
        std::lock_guard lock(state_mu);
        writer_done = true;
        window.notify_all();
    });

    auto resolve = [&](const std::string& id, Outcome o) {
        // Caller holds state_mu.
        auto it = in_flight.find(id);
        if (it == in_flight.end()) return false;
        out[it->second.index] = std::move(o);
        in_flight.erase(it);
        window.notify_all();
        return true;
    };
    auto fail_everything = [&](AdapterErrc code, const std::string& why) {
        std::unique_lock lock(state_mu);
        stop = true;
        window.notify_all();
        for (auto& [id, f] : in_flight) out[f.index] = Outcome::failure(id, code, why);
        in_flight.clear();
    };

    const milliseconds tick(50);
    for (;;) {
        Clock::time_point next_deadline = Clock::now() + tick;
        {
            std::unique_lock lock(state_mu);
            // Expire overdue requests.
            const auto now = Clock::now();
            for (auto it = in_flight.begin(); it != in_flight.end();) {
                if (it->second.deadline <= now) {
                    out[it->second.index] = Outcome::failure(it->first, AdapterErrc::timeout, "no response within timeout");
                    it = in_flight.erase(it);
                    window.notify_all();
                } else {
                    next_deadline = std::min(next_deadline, it->second.deadline);
                    ++it;
                }
            }
            if (write_error) {
                lock.unlock();
                fail_everything(AdapterErrc::adapter_died, "write failed: " + *write_error);
                break;
            }
            if (writer_done && in_flight.empty()) break;
        }
        bool closing;
        {
            std::lock_guard lock(mu_);
            closing = closed_;
        }
        if (closing) {
            fail_everything(AdapterErrc::session_closed, "session closed");
            break;
        }

        std::string line;
        const auto wait = std::max(milliseconds(0), std::chrono::duration_cast<milliseconds>(next_deadline - Clock::now()));
        process::ReadStatus st;
        try {
            st = proc_->read_line(line, wait);
        } catch (const process::ProcessError& e) {
            fail_everything(AdapterErrc::adapter_died, e.what());
            break;
        }
        if (st == process::ReadStatus::timeout) continue;
        if (st == process::ReadStatus::eof) {
            fail_everything(AdapterErrc::adapter_died, "adapter closed its output");
            std::lock_guard lock(mu_);
            dead_ = true;
            break;
        }
        if (line.empty()) continue;
        std::lock_guard lock(state_mu);
        try {
            auto r = parse_response_line(line);
            const std::string id = r.id;
            resolve(id, Outcome::success(std::move(r)));  // unknown or late ids are dropped
        } catch (const AdapterError& e) {
            if (auto id = salvage_id(line)) resolve(*id, Outcome::failure(*id, AdapterErrc::malformed_response, e.what()));
        }
    }

    {
        std::lock_guard lock(state_mu);
        stop = true;
        window.notify_all();
    }
    writer.join();
    bool died;
    {
        std::lock_guard lock(mu_);
        died = dead_;
    }
    for (std::size_t i = 0; i < n; ++i) {
        if (out[i]) continue;
        if (died) out[i] = Outcome::failure(requests[i].id, AdapterErrc::adapter_died, "adapter closed its output");
        else out[i] = Outcome::failure(requests[i].id, AdapterErrc::session_closed, "session closed before send");
    }
    {
        std::lock_guard lock(mu_);
        busy_ = false;
    }
    idle_.notify_all();
    return finish();
}

}  // namespace

std::unique_ptr<AdapterSession> open_subprocess_adapter(const std::string& command, const AdapterOptions& options) {
    return std::make_unique<SubprocessSession>(command, options);
}

std::unique_ptr<AdapterSession> open_adapter(const std::string& spec, const AdapterOptions& options) {
    if (spec.rfind("http://", 0) == 0 || spec.rfind("https://", 0) == 0) return open_http_adapter(spec, options);
    return open_subprocess_adapter(spec, options);
}

// ---------------------------------------------------------------------------

std::vector<Outcome> FunctionAdapter::generate_batch(const std::vector<GenerationRequest>& requests) {
    validate_batch(requests);
    std::vector<Outcome> out;
    out.reserve(requests.size());
    for (const auto& r : requests) {
        if (closed_) {
            out.push_back(Outcome::failure(r.id, AdapterErrc::session_closed, "session closed"));
            continue;
        }
        const auto start = Clock::now();
        try {
            GenerationResponse resp;
            resp.id = r.id;
            resp.output = generate_(r);
            resp.latency_ms = std::chrono::duration<double, std::milli>(Clock::now() - start).count();
            out.push_back(Outcome::success(std::move(resp)));
        } catch (const std::exception& e) {
            out.push_back(Outcome::failure(r.id, AdapterErrc::adapter_died, e.what()));
        }
    }
    return out;
}

std::unique_ptr<AdapterSession> make_echo_adapter() {
    return std::make_unique<FunctionAdapter>("echo", [](const GenerationRequest& r) { return r.prompt; });
}

// ---------------------------------------------------------------------------

bool ConformanceReport::passed() const {
    return std::all_of(checks.begin(), checks.end(), [](const ConformanceCheck& c) { return c.passed; });
}

ConformanceReport run_conformance(AdapterSession& session, bool expect_echo) {
    ConformanceReport rep;
    auto req = [](std::string id, std::string prompt, std::optional<std::int64_t> seed = 7) {
        return GenerationRequest{std::move(id), "conformance", std::move(prompt), 16, seed};
    };
    auto check = [&](std::string name, const std::vector<GenerationRequest>& batch, bool echo_required) {
        std::string detail;
        bool ok = true;
        std::vector<Outcome> got;
        try {
            got = session.generate_batch(batch);
        } catch (const std::exception& e) {
            rep.checks.push_back({std::move(name), false, e.what()});
            return got;
        }
        if (got.size() != batch.size()) {
            ok = false;
            detail = "expected " + std::to_string(batch.size()) + " outcomes, got " + std::to_string(got.size());
        }
        for (std::size_t i = 0; ok && i < got.size(); ++i) {
            if (got[i].id != batch[i].id) {
                ok = false;
                detail = "outcome " + std::to_string(i) + " has id '" + got[i].id + "'";
            } else if (!got[i].ok()) {
                ok = false;
                detail = "request '" + batch[i].id + "' failed: " + got[i].message;
            } else if (got[i].response->id != batch[i].id) {
                ok = false;
                detail = "response id mismatch for '" + batch[i].id + "'";
            } else if (echo_required && got[i].response->output != batch[i].prompt) {
                ok = false;
                detail = "request '" + batch[i].id + "' not echoed";
            }
        }
        rep.checks.push_back({std::move(name), ok, detail});
        return got;
    };

    check("single request", {req("conf-1", "abc")}, expect_echo);

    std::vector<GenerationRequest> wide;
    for (int i = 0; i < 80; ++i) wide.push_back(req("conf-wide-" + std::to_string(i), "prompt " + std::to_string(i)));
    check("batch wider than in-flight window", wide, expect_echo);

    check("escapes and unicode",
          {req("conf-\"quoted\"", "line\nbreak\ttab \"q\" \\ back"), req("conf-utf8", "\xc3\xa9\xe2\x99\x9e \xf0\x9f\x98\x80"),
           req("conf-empty", "")},
          expect_echo);

    check("unseeded request", {req("conf-unseeded", "1. e4", std::nullopt)}, false);

    const auto dup = check("duplicate seeded requests", {req("conf-dup-a", "1. d4 d5"), req("conf-dup-b", "1. d4 d5")}, expect_echo);
    rep.seeded_reproducible = dup.size() == 2 && dup[0].ok() && dup[1].ok() &&
                              dup[0].response->output == dup[1].response->output;

    bool rejected = false;
    try {
        session.generate_batch({req("conf-same", "x"), req("conf-same", "y")});
    } catch (const AdapterError& e) {
        rejected = e.code() == AdapterErrc::invalid_request;
    }
    rep.checks.push_back({"duplicate ids rejected", rejected, rejected ? "" : "batch with duplicate ids was accepted"});
    return rep;
}

}  // namespace mdbench::adapter
