#pragma once

// Run configuration: a flat key/value file with optional [section] headers
// (keys inside a section become "section.key"), layered under environment
// variables and command-line flags.

#include <cstdint>
#include <filesystem>
#include <istream>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace mdbench::config {

class ConfigError : public std::runtime_error {
public:
    ConfigError(const std::string& what, std::size_t line = 0) : std::runtime_error(what), line_(line) {}
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

inline constexpr std::uint64_t kFnvOffset = 0xcbf29ce484222325ULL;

std::uint64_t fnv1a64(std::string_view data, std::uint64_t state = kFnvOffset);
/// Hash of a whole file, streamed.
std::uint64_t fnv1a64_file(const std::filesystem::path& path);
std::string hex64(std::uint64_t v);

class ConfigFile {
public:
    ConfigFile() = default;
    /// `key = value`; values may be double-quoted with \" \\ \n \t escapes.
    /// '#' starts a comment outside quotes.
    static ConfigFile parse(std::istream& in);
    static ConfigFile load(const std::filesystem::path& path);

    std::optional<std::string> get(std::string_view key) const;
    const std::map<std::string, std::string, std::less<>>& values() const { return values_; }
    void set(std::string key, std::string value) { values_[std::move(key)] = std::move(value); }

private:
    std::map<std::string, std::string, std::less<>> values_;
};

enum class Source { flag, env, file, fallback };

struct Resolved {
    std::string value;
    Source source;
};

/// Flag beats environment beats file. Empty environment variables are ignored.
std::optional<Resolved> resolve(const std::optional<std::string>& flag, const char* env_var, const ConfigFile& file,
                                std::string_view key);

/// Stable hash of the settings that determine a run's outputs.
std::string config_hash(const std::map<std::string, std::string>& effective);

}  // namespace mdbench::config
