#pragma once

// Child process with line-oriented pipes on stdin/stdout. stderr is inherited.

#include <chrono>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <sys/types.h>
#include <vector>

namespace mdbench::process {

class ProcessError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

using Millis = std::chrono::milliseconds;

enum class ReadStatus { line, eof, timeout };

class Subprocess {
public:
    /// Runs `command` through /bin/sh -c.
    static Subprocess shell(const std::string& command);
    /// Runs argv[0] directly (PATH lookup). Throws ProcessError if it cannot be started.
    static Subprocess exec(const std::vector<std::string>& argv);

    Subprocess(Subprocess&& other) noexcept;
    Subprocess& operator=(Subprocess&& other) noexcept;
    Subprocess(const Subprocess&) = delete;
    Subprocess& operator=(const Subprocess&) = delete;
    /// Closes pipes and kills the child if it is still running.
    ~Subprocess();

    /// Writes all of `data`. Throws ProcessError on a closed pipe or timeout.
    void write(std::string_view data, Millis timeout);
    void write_line(std::string_view line, Millis timeout);

    /// Next line without its terminator ("\r\n" or "\n").
    ReadStatus read_line(std::string& line, Millis timeout);

    void close_stdin();
    bool stdin_open() const { return in_fd_ >= 0; }

    /// Reaps the child, sending SIGKILL if it has not exited within `grace`.
    /// Returns the raw wait status.
    int wait(Millis grace);
    bool running();
    pid_t pid() const { return pid_; }

private:
    Subprocess() = default;
    static Subprocess start(const std::vector<std::string>& argv, bool use_path);
    void release();

    pid_t pid_ = -1;
    int in_fd_ = -1;
    int out_fd_ = -1;
    std::string buffer_;
    bool eof_ = false;
    std::optional<int> status_;
};

}  // namespace mdbench::process
