#pragma once

// Byte-level byte-pair encoding. Token ids 0..255 are the raw bytes; every
// merge appends one id. No pre-tokenization and no special tokens.

#include <cstdint>
#include <filesystem>
#include <istream>
#include <optional>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace mdbench::bpe {

using TokenId = std::uint32_t;

inline constexpr std::size_t kByteTokens = 256;

struct Merge {
    TokenId left;
    TokenId right;
    bool operator==(const Merge&) const = default;
};

enum class BpeErrc { empty_corpus, bad_vocab_size, unknown_id, malformed, io };

class BpeError : public std::runtime_error {
public:
    BpeError(BpeErrc code, const std::string& what, std::size_t line = 0)
        : std::runtime_error(what), code_(code), line_(line) {}
    BpeErrc code() const noexcept { return code_; }
    std::size_t line() const noexcept { return line_; }

private:
    BpeErrc code_;
    std::size_t line_;
};

class Vocabulary {
public:
    explicit Vocabulary(std::size_t vocab_size = kByteTokens);

    std::size_t size() const { return table_.size(); }
    std::size_t vocab_size() const { return vocab_size_; }
    const std::vector<Merge>& merges() const { return merges_; }

    /// Byte content of a token. Throws BpeError(unknown_id).
    const std::string& bytes(TokenId id) const;
    bool contains(TokenId id) const { return id < table_.size(); }

    /// Id produced by merging (left, right), if that merge exists.
    std::optional<TokenId> merged(TokenId left, TokenId right) const;

    /// Appends a merge; both ids must already exist.
    TokenId add_merge(TokenId left, TokenId right);

    bool operator==(const Vocabulary& o) const { return vocab_size_ == o.vocab_size_ && merges_ == o.merges_; }

private:
    static std::uint64_t key(TokenId l, TokenId r) { return (std::uint64_t{l} << 32) | r; }

    std::size_t vocab_size_;
    std::vector<std::string> table_;
    std::vector<Merge> merges_;
    std::unordered_map<std::uint64_t, TokenId> by_pair_;
};

struct TrainOptions {
    // Pairs seen fewer times than this are never merged.
    std::int64_t min_pair_count = 2;
    // Worker threads for the initial pair count.
    unsigned threads = 1;
};

/// Greedy BPE over the documents (pairs never span two documents). Ties on
/// frequency go to the lexicographically smaller left token bytes, then right.
Vocabulary train(const std::vector<std::string>& documents, std::size_t vocab_size, TrainOptions options = {});

/// Applies the merges in training order to the UTF-8 bytes of `text`.
std::vector<TokenId> encode(const Vocabulary& vocab, std::string_view text);

std::string decode(const Vocabulary& vocab, std::span<const TokenId> ids);

void save(const Vocabulary& vocab, std::ostream& out);
void save(const Vocabulary& vocab, const std::filesystem::path& path);
Vocabulary load(std::istream& in);
Vocabulary load(const std::filesystem::path& path);

}  // namespace mdbench::bpe
