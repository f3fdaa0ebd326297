#include "mdbench/config.hpp"

#include <cstdlib>
#include <fstream>

namespace mdbench::config {

std::uint64_t fnv1a64(std::string_view data, std::uint64_t state) {
    for (unsigned char c : data) {
        state ^= c;
        state *= 0x100000001b3ULL;
    }
    return state;
}

std::uint64_t fnv1a64_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot read " + path.string());
    std::uint64_t h = kFnvOffset;
    char buf[1 << 16];
    while (in.read(buf, sizeof buf) || in.gcount() > 0) h = fnv1a64(std::string_view(buf, static_cast<std::size_t>(in.gcount())), h);
    return h;
}

std::string hex64(std::uint64_t v) {
    static const char* digits = "0123456789abcdef";
    std::string s(16, '0');
    for (int i = 15; i >= 0; --i, v >>= 4) s[static_cast<std::size_t>(i)] = digits[v & 0xf];
    return s;
}

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

bool valid_key(std::string_view k) {
    if (k.empty()) return false;
    for (char c : k)
        if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == '.')) return false;
    return true;
}

}  // namespace

ConfigFile ConfigFile::parse(std::istream& in) {
    ConfigFile cfg;
    std::string section;
    std::string raw;
    for (std::size_t line_no = 1; std::getline(in, raw); ++line_no) {
        std::string_view line = trim(raw);
        if (line.empty() || line.front() == '#') continue;
        if (line.front() == '[') {
            if (line.back() != ']') throw ConfigError("unterminated section header", line_no);
            const auto name = trim(line.substr(1, line.size() - 2));
            if (!valid_key(name)) throw ConfigError("bad section name '" + std::string(name) + "'", line_no);
            section = std::string(name) + ".";
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string_view::npos) throw ConfigError("expected 'key = value'", line_no);
        const auto key = trim(line.substr(0, eq));
        if (!valid_key(key)) throw ConfigError("bad key '" + std::string(key) + "'", line_no);
        std::string_view rest = trim(line.substr(eq + 1));
        std::string value;
        if (!rest.empty() && rest.front() == '"') {
            std::size_t i = 1;
            bool closed = false;
            for (; i < rest.size(); ++i) {
                const char c = rest[i];
                if (c == '"') {
                    closed = true;
                    ++i;
                    break;
                }
                if (c == '\\' && i + 1 < rest.size()) {
                    const char e = rest[++i];
                    value += e == 'n' ? '\n' : e == 't' ? '\t' : e;
                } else {
                    value += c;
                }
            }
            if (!closed) throw ConfigError("unterminated string", line_no);
            const auto tail = trim(rest.substr(i));
            if (!tail.empty() && tail.front() != '#') throw ConfigError("text after quoted value", line_no);
        } else {
            value = std::string(trim(rest.substr(0, rest.find('#'))));
        }
        cfg.values_[section + std::string(key)] = std::move(value);
    }
    return cfg;
}

ConfigFile ConfigFile::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config file " + path.string());
    try {
        return parse(in);
    } catch (const ConfigError& e) {
        throw ConfigError(path.string() + ":" + std::to_string(e.line()) + ": " + e.what(), e.line());
    }
}

std::optional<std::string> ConfigFile::get(std::string_view key) const {
    auto it = values_.find(key);
    if (it == values_.end()) return std::nullopt;
    return it->second;
}

std::optional<Resolved> resolve(const std::optional<std::string>& flag, const char* env_var, const ConfigFile& file,
                                std::string_view key) {
    if (flag) return Resolved{*flag, Source::flag};
    if (env_var) {
        if (const char* v = std::getenv(env_var); v && *v) return Resolved{v, Source::env};
    }
    if (auto v = file.get(key)) return Resolved{*v, Source::file};
    return std::nullopt;
}

std::string config_hash(const std::map<std::string, std::string>& effective) {
    std::uint64_t h = kFnvOffset;
    for (const auto& [k, v] : effective) {
        h = fnv1a64(k, h);
        h = fnv1a64(std::string_view("\0", 1), h);
        h = fnv1a64(v, h);
        h = fnv1a64(std::string_view("\n", 1), h);
    }
    return hex64(h);
}

}  // namespace mdbench::config
