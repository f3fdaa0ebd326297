#pragma once

// UCI engine client used to score played moves.

#include "mdbench/chess.hpp"
#include "mdbench/subprocess.hpp"

#include <chrono>
#include <condition_variable>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace mdbench::engine {

enum class EngineErrc { spawn_failed, handshake_timeout, engine_died, protocol, timeout };

class EngineError : public std::runtime_error {
public:
    EngineError(EngineErrc code, const std::string& what) : std::runtime_error(what), code_(code) {}
    EngineErrc code() const noexcept { return code_; }

private:
    EngineErrc code_;
};

struct ScoreInfo {
    enum class Kind { centipawns, mate };
    Kind kind = Kind::centipawns;
    int value = 0;  // side-to-move perspective; mate value is moves to mate, negative when being mated
    int depth = 1;
    std::string best_move;  // UCI; empty when the engine reports "(none)"
    bool operator==(const ScoreInfo&) const = default;
};

struct AnalysisLimit {
    enum class Mode { depth, movetime };
    Mode mode = Mode::depth;
    int value = 12;

    static AnalysisLimit depth(int plies) { return {Mode::depth, plies}; }
    static AnalysisLimit movetime(int ms) { return {Mode::movetime, ms}; }
    std::string go_command() const;
};

/// Mate scores count as this many centipawns for differencing.
inline constexpr int kMateCentipawns = 10000;

struct EngineOptions {
    std::vector<std::pair<std::string, std::string>> options{{"Threads", "1"}};
    std::chrono::milliseconds handshake_timeout{10000};
    // Added to the movetime (or used alone for depth searches).
    std::chrono::milliseconds analysis_timeout{120000};
};

/// Score fields of one "info" line. Never throws; nullopt for lines
/// without a usable score.
struct InfoScore {
    ScoreInfo::Kind kind;
    int value;
    std::optional<int> depth;
};
std::optional<InfoScore> parse_info_line(std::string_view line);

class EngineSession {
public:
    /// Starts the engine binary and completes the uci / setoption / isready handshake.
    static EngineSession spawn(const std::string& path, const EngineOptions& options = {});

    EngineSession(EngineSession&&) noexcept = default;
    EngineSession& operator=(EngineSession&&) noexcept = default;
    ~EngineSession();

    const std::string& name() const { return name_; }
    /// Every command sent to the engine, in order.
    const std::vector<std::string>& sent() const { return sent_; }

    ScoreInfo analyse(const chess::Position& p, const AnalysisLimit& limit);
    void quit();

private:
    EngineSession(process::Subprocess proc, EngineOptions options)
        : proc_(std::make_unique<process::Subprocess>(std::move(proc))), options_(std::move(options)) {}
    void send(const std::string& command);
    std::string expect(std::string_view prefix, std::chrono::milliseconds timeout, EngineErrc on_timeout);

    std::unique_ptr<process::Subprocess> proc_;
    EngineOptions options_;
    std::string name_;
    std::vector<std::string> sent_;
};

/// Centipawn value of a score, mates mapped to ±kMateCentipawns.
int to_centipawns(const ScoreInfo& s);

/// max(0, best − value after played, negated) in pawns. Terminal positions
/// after the played move are scored without asking the engine.
double centipawn_loss(EngineSession& session, const chess::Position& p, const chess::Move& played,
                      const AnalysisLimit& limit);

/// Fixed set of sessions shared by worker threads; one request per session at a time.
class EnginePool {
public:
    EnginePool(const std::string& path, std::size_t size, const EngineOptions& options = {});

    class Lease {
    public:
        Lease(EnginePool& pool, std::size_t slot) : pool_(&pool), slot_(slot) {}
        Lease(Lease&& o) noexcept : pool_(std::exchange(o.pool_, nullptr)), slot_(o.slot_) {}
        Lease(const Lease&) = delete;
        ~Lease();
        EngineSession& operator*() const { return pool_->sessions_[slot_]; }
        EngineSession* operator->() const { return &pool_->sessions_[slot_]; }

    private:
        EnginePool* pool_;
        std::size_t slot_;
    };

    Lease acquire();
    std::size_t size() const { return sessions_.size(); }

private:
    std::vector<EngineSession> sessions_;
    std::vector<bool> busy_;
    std::mutex mu_;
    std::condition_variable cv_;
};

}  // namespace mdbench::engine
