#include "mdbench/subprocess.hpp"

#include <cerrno>
#include <csignal>
#include <cstring>
#include <fcntl.h>
#include <mutex>
#include <poll.h>
#include <spawn.h>
#include <sys/wait.h>
#include <thread>
#include <unistd.h>

extern char** environ;

namespace mdbench::process {

namespace {

using Clock = std::chrono::steady_clock;

// A child that exits early must not kill the harness with SIGPIPE; write()
// reports EPIPE instead.
void ignore_sigpipe() {
    static std::once_flag once;
    std::call_once(once, [] { std::signal(SIGPIPE, SIG_IGN); });
}

int remaining_ms(Clock::time_point deadline) {
    const auto left = std::chrono::duration_cast<Millis>(deadline - Clock::now()).count();
    return left <= 0 ? 0 : static_cast<int>(std::min<long long>(left, 1 << 30));
}

std::string errno_text(const char* what, int err) { return std::string(what) + ": " + std::strerror(err); }

}  // namespace

Subprocess Subprocess::shell(const std::string& command) { return start({"/bin/sh", "-c", command}, false); }

Subprocess Subprocess::exec(const std::vector<std::string>& argv) {
    if (argv.empty()) throw ProcessError("empty command");
    return start(argv, true);
}

Subprocess Subprocess::start(const std::vector<std::string>& argv, bool use_path) {
    ignore_sigpipe();
    int to_child[2], from_child[2];
    if (pipe2(to_child, O_CLOEXEC) != 0) throw ProcessError(errno_text("pipe", errno));
    if (pipe2(from_child, O_CLOEXEC) != 0) {
        const int err = errno;
        ::close(to_child[0]);
        ::close(to_child[1]);
        throw ProcessError(errno_text("pipe", err));
    }

    posix_spawn_file_actions_t actions;
    posix_spawn_file_actions_init(&actions);
    posix_spawn_file_actions_adddup2(&actions, to_child[0], STDIN_FILENO);
    posix_spawn_file_actions_adddup2(&actions, from_child[1], STDOUT_FILENO);

    std::vector<char*> args;
    for (const auto& a : argv) args.push_back(const_cast<char*>(a.c_str()));
    args.push_back(nullptr);

    pid_t pid = -1;
    const int rc = use_path ? posix_spawnp(&pid, args[0], &actions, nullptr, args.data(), environ)
                            : posix_spawn(&pid, args[0], &actions, nullptr, args.data(), environ);
    posix_spawn_file_actions_destroy(&actions);
    ::close(to_child[0]);
    ::close(from_child[1]);
    if (rc != 0) {
        ::close(to_child[1]);
        ::close(from_child[0]);
        throw ProcessError(errno_text(("cannot start '" + argv[0] + "'").c_str(), rc));
    }

    Subprocess p;
    p.pid_ = pid;
    p.in_fd_ = to_child[1];
    p.out_fd_ = from_child[0];
    fcntl(p.in_fd_, F_SETFL, fcntl(p.in_fd_, F_GETFL) | O_NONBLOCK);
    fcntl(p.out_fd_, F_SETFL, fcntl(p.out_fd_, F_GETFL) | O_NONBLOCK);
    return p;
}

Subprocess::Subprocess(Subprocess&& o) noexcept
    : pid_(o.pid_), in_fd_(o.in_fd_), out_fd_(o.out_fd_), buffer_(std::move(o.buffer_)), eof_(o.eof_),
      status_(o.status_) {
    o.pid_ = -1;
    o.in_fd_ = o.out_fd_ = -1;
}

Subprocess& Subprocess::operator=(Subprocess&& o) noexcept {
    if (this != &o) {
        release();
        pid_ = o.pid_;
        in_fd_ = o.in_fd_;
        out_fd_ = o.out_fd_;
        buffer_ = std::move(o.buffer_);
        eof_ = o.eof_;
        status_ = o.status_;
        o.pid_ = -1;
        o.in_fd_ = o.out_fd_ = -1;
    }
    return *this;
}

Subprocess::~Subprocess() { release(); }

void Subprocess::release() {
    close_stdin();
    if (out_fd_ >= 0) {
        ::close(out_fd_);
        out_fd_ = -1;
    }
    if (pid_ > 0 && !status_) wait(Millis(0));
    pid_ = -1;
}

void Subprocess::write(std::string_view data, Millis timeout) {
    if (in_fd_ < 0) throw ProcessError("write to closed stdin");
    const auto deadline = Clock::now() + timeout;
    while (!data.empty()) {
        const ssize_t n = ::write(in_fd_, data.data(), data.size());
        if (n > 0) {
            data.remove_prefix(static_cast<std::size_t>(n));
            continue;
        }
        if (n < 0 && errno == EINTR) continue;
        if (n < 0 && errno != EAGAIN && errno != EWOULDBLOCK) throw ProcessError(errno_text("write", errno));
        pollfd pfd{in_fd_, POLLOUT, 0};
        const int r = ::poll(&pfd, 1, remaining_ms(deadline));
        if (r == 0) throw ProcessError("write timed out");
        if (r < 0 && errno != EINTR) throw ProcessError(errno_text("poll", errno));
        if (r > 0 && (pfd.revents & (POLLERR | POLLHUP)) && !(pfd.revents & POLLOUT))
            throw ProcessError("write: child closed its stdin");
    }
}

void Subprocess::write_line(std::string_view line, Millis timeout) {
    std::string buf;
    buf.reserve(line.size() + 1);
    buf.append(line);
    buf.push_back('\n');
    write(buf, timeout);
}

ReadStatus Subprocess::read_line(std::string& line, Millis timeout) {
    const auto deadline = Clock::now() + timeout;
    for (;;) {
        if (auto nl = buffer_.find('\n'); nl != std::string::npos) {
            line.assign(buffer_, 0, nl);
            if (!line.empty() && line.back() == '\r') line.pop_back();
            buffer_.erase(0, nl + 1);
            return ReadStatus::line;
        }
        if (eof_ || out_fd_ < 0) {
            if (!buffer_.empty()) {
                line = std::move(buffer_);
                buffer_.clear();
                return ReadStatus::line;
            }
            return ReadStatus::eof;
        }
        char chunk[4096];
        const ssize_t n = ::read(out_fd_, chunk, sizeof chunk);
        if (n > 0) {
            buffer_.append(chunk, static_cast<std::size_t>(n));
            continue;
        }
        if (n == 0) {
            eof_ = true;
            continue;
        }
        if (errno == EINTR) continue;
        if (errno != EAGAIN && errno != EWOULDBLOCK) throw ProcessError(errno_text("read", errno));
        pollfd pfd{out_fd_, POLLIN, 0};
        const int r = ::poll(&pfd, 1, remaining_ms(deadline));
        if (r == 0) return ReadStatus::timeout;
        if (r < 0 && errno != EINTR) throw ProcessError(errno_text("poll", errno));
    }
}

void Subprocess::close_stdin() {
    if (in_fd_ >= 0) {
        ::close(in_fd_);
        in_fd_ = -1;
    }
}

bool Subprocess::running() {
    if (pid_ <= 0 || status_) return false;
    int st = 0;
    const pid_t r = ::waitpid(pid_, &st, WNOHANG);
    if (r == pid_) {
        status_ = st;
        return false;
    }
    return r == 0;
}

int Subprocess::wait(Millis grace) {
    if (status_) return *status_;
    if (pid_ <= 0) throw ProcessError("no child to wait for");
    const auto deadline = Clock::now() + grace;
    int st = 0;
    for (;;) {
        const pid_t r = ::waitpid(pid_, &st, WNOHANG);
        if (r == pid_) break;
        if (r < 0 && errno != EINTR) throw ProcessError(errno_text("waitpid", errno));
        if (Clock::now() >= deadline) {
            ::kill(pid_, SIGKILL);
            while (::waitpid(pid_, &st, 0) < 0 && errno == EINTR) {
            }
            break;
        }
        std::this_thread::sleep_for(Millis(5));
    }
    status_ = st;
    return st;
}

}  // namespace mdbench::process
