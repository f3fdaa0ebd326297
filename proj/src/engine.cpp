#include "mdbench/engine.hpp"

#include <algorithm>
#include <charconv>
#include <sstream>

namespace mdbench::engine {

using process::ReadStatus;
using Clock = std::chrono::steady_clock;
using std::chrono::milliseconds;

std::string AnalysisLimit::go_command() const {
    if (value <= 0) throw EngineError(EngineErrc::protocol, "analysis limit must be positive");
    return (mode == Mode::depth ? "go depth " : "go movetime ") + std::to_string(value);
}

namespace {

std::optional<int> to_int(std::string_view s) {
    int v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || p != s.data() + s.size()) return std::nullopt;
    return v;
}

std::vector<std::string_view> words(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t i = 0;
    while (i < line.size()) {
        while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
        std::size_t j = i;
        while (j < line.size() && line[j] != ' ' && line[j] != '\t') ++j;
        if (j > i) out.push_back(line.substr(i, j - i));
        i = j;
    }
    return out;
}

}  // namespace

std::optional<InfoScore> parse_info_line(std::string_view line) {
    const auto w = words(line);
    if (w.empty() || w[0] != "info") return std::nullopt;
    std::optional<int> depth;
    std::optional<InfoScore> score;
    for (std::size_t i = 1; i < w.size(); ++i) {
        if (w[i] == "string") break;  // free text follows
        if (w[i] == "depth" && i + 1 < w.size()) {
            depth = to_int(w[i + 1]);
            ++i;
        } else if (w[i] == "score" && i + 2 < w.size()) {
            const auto v = to_int(w[i + 2]);
            if (v && w[i + 1] == "cp") score = InfoScore{ScoreInfo::Kind::centipawns, *v, std::nullopt};
            else if (v && w[i + 1] == "mate") score = InfoScore{ScoreInfo::Kind::mate, *v, std::nullopt};
            i += 2;
        }
    }
    if (!score) return std::nullopt;
    score->depth = depth;
    return score;
}

EngineSession EngineSession::spawn(const std::string& path, const EngineOptions& options) {
    process::Subprocess proc = [&] {
        try {
            return process::Subprocess::exec({path});
        } catch (const process::ProcessError& e) {
            throw EngineError(EngineErrc::spawn_failed, e.what());
        }
    }();
    EngineSession s(std::move(proc), options);
    const auto deadline = Clock::now() + options.handshake_timeout;
    auto left = [&] { return std::max(milliseconds(0), std::chrono::duration_cast<milliseconds>(deadline - Clock::now())); };

    s.send("uci");
    for (;;) {
        std::string line;
        const auto st = s.proc_->read_line(line, left());
        if (st == ReadStatus::timeout) throw EngineError(EngineErrc::handshake_timeout, "engine did not answer 'uci'");
        if (st == ReadStatus::eof) throw EngineError(EngineErrc::engine_died, "engine exited during handshake");
        if (line.rfind("id name ", 0) == 0) s.name_ = line.substr(8);
        if (line == "uciok") break;
    }
    for (const auto& [k, v] : options.options) s.send("setoption name " + k + " value " + v);
    s.send("isready");
    s.expect("readyok", left(), EngineErrc::handshake_timeout);
    return s;
}

EngineSession::~EngineSession() {
    if (proc_) {
        try {
            quit();
        } catch (...) {
        }
    }
}

void EngineSession::send(const std::string& command) {
    sent_.push_back(command);
    try {
        proc_->write_line(command, milliseconds(5000));
    } catch (const process::ProcessError& e) {
        throw EngineError(EngineErrc::engine_died, e.what());
    }
}

std::string EngineSession::expect(std::string_view prefix, milliseconds timeout, EngineErrc on_timeout) {
    const auto deadline = Clock::now() + timeout;
    for (;;) {
        std::string line;
        const auto left = std::max(milliseconds(0), std::chrono::duration_cast<milliseconds>(deadline - Clock::now()));
        const auto st = proc_->read_line(line, left);
        if (st == ReadStatus::timeout)
            throw EngineError(on_timeout, "timed out waiting for '" + std::string(prefix) + "'");
        if (st == ReadStatus::eof) throw EngineError(EngineErrc::engine_died, "engine exited");
        if (line.rfind(prefix, 0) == 0) return line;
    }
}

ScoreInfo EngineSession::analyse(const chess::Position& p, const AnalysisLimit& limit) {
    if (!proc_) throw EngineError(EngineErrc::engine_died, "session closed");
    send("position fen " + p.fen());
    send(limit.go_command());
    auto budget = options_.analysis_timeout;
    if (limit.mode == AnalysisLimit::Mode::movetime) budget += milliseconds(limit.value);
    const auto deadline = Clock::now() + budget;

    std::optional<InfoScore> last;
    for (;;) {
        std::string line;
        const auto left = std::max(milliseconds(0), std::chrono::duration_cast<milliseconds>(deadline - Clock::now()));
        const auto st = proc_->read_line(line, left);
        if (st == ReadStatus::eof) throw EngineError(EngineErrc::engine_died, "engine exited during analysis");
        if (st == ReadStatus::timeout) {
            // Resynchronise so the session stays usable, then report the timeout.
            send("stop");
            try {
                expect("bestmove", milliseconds(2000), EngineErrc::timeout);
            } catch (const EngineError&) {
            }
            throw EngineError(EngineErrc::timeout, "analysis timed out");
        }
        if (auto s = parse_info_line(line)) {
            last = s;
            continue;
        }
        const auto w = words(line);
        if (w.empty() || w[0] != "bestmove") continue;
        if (!last) throw EngineError(EngineErrc::protocol, "engine sent bestmove without a score");
        ScoreInfo out;
        out.kind = last->kind;
        out.value = last->value;
        if (out.kind == ScoreInfo::Kind::mate && out.value == 0) {
            // "mate 0": the side to move is already mated.
            out.kind = ScoreInfo::Kind::centipawns;
            out.value = -kMateCentipawns;
        }
        out.depth = std::max(1, last->depth.value_or(1));
        if (w.size() < 2) throw EngineError(EngineErrc::protocol, "malformed bestmove line: " + line);
        if (w[1] != "(none)" && w[1] != "0000") out.best_move = std::string(w[1]);
        return out;
    }
}

void EngineSession::quit() {
    if (!proc_) return;
    try {
        send("quit");
    } catch (const EngineError&) {
    }
    proc_->close_stdin();
    proc_->wait(milliseconds(1000));
    proc_.reset();
}

int to_centipawns(const ScoreInfo& s) {
    if (s.kind == ScoreInfo::Kind::centipawns) return std::clamp(s.value, -kMateCentipawns, kMateCentipawns);
    return s.value > 0 ? kMateCentipawns : -kMateCentipawns;
}

double centipawn_loss(EngineSession& session, const chess::Position& p, const chess::Move& played,
                      const AnalysisLimit& limit) {
    const chess::Position after = chess::apply_move(p, played);
    const int best = to_centipawns(session.analyse(p, limit));
    int mover_after = 0;
    if (auto term = chess::terminal_state(after)) {
        mover_after = term->cause == chess::TerminationCause::checkmate ? kMateCentipawns : 0;
    } else {
        mover_after = -to_centipawns(session.analyse(after, limit));
    }
    return std::max(0, best - mover_after) / 100.0;
}

EnginePool::EnginePool(const std::string& path, std::size_t size, const EngineOptions& options) {
    if (size == 0) size = 1;
    for (std::size_t i = 0; i < size; ++i) sessions_.push_back(EngineSession::spawn(path, options));
    busy_.assign(size, false);
}

EnginePool::Lease EnginePool::acquire() {
    std::unique_lock lock(mu_);
    for (;;) {
        for (std::size_t i = 0; i < busy_.size(); ++i) {
            if (!busy_[i]) {
                busy_[i] = true;
                return Lease(*this, i);
            }
        }
        cv_.wait(lock);
    }
}

EnginePool::Lease::~Lease() {
    if (!pool_) return;
    {
        std::lock_guard lock(pool_->mu_);
        pool_->busy_[slot_] = false;
    }
    pool_->cv_.notify_one();
}

}  // namespace mdbench::engine
