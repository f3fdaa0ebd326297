#pragma once

// Order-k token n-gram model over BPE ids with plain backoff (no smoothing).
//
// Each sample is counted as the stream
//     [0] enc(input) enc(" " target) [0]
// where id 0 (the NUL byte) marks sample boundaries. The separating space is
// dropped when the input is empty. Generation starts from [0] enc(prompt) and
// stops at the next 0, which is never emitted.

#include "mdbench/adapter.hpp"
#include "mdbench/bpe.hpp"
#include "mdbench/corpus.hpp"

#include <cstdint>
#include <filesystem>
#include <istream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace mdbench::refmodel {

using bpe::TokenId;

inline constexpr TokenId kBoundary = 0;

enum class RefModelErrc { empty_corpus, bad_order, malformed, io };

class RefModelError : public std::runtime_error {
public:
    RefModelError(RefModelErrc code, const std::string& what) : std::runtime_error(what), code_(code) {}
    RefModelErrc code() const noexcept { return code_; }

private:
    RefModelErrc code_;
};

struct GenerateOptions {
    int max_new_tokens = 256;
    std::optional<std::uint64_t> seed;
    // Draw proportionally to counts instead of taking the most frequent token.
    bool sample = false;
};

class NgramModel {
public:
    using Context = std::vector<TokenId>;
    using Counts = std::map<TokenId, std::uint64_t>;
    using Table = std::map<Context, Counts>;

    static NgramModel train(const std::vector<corpus::TaskSample>& samples, int order, bpe::Vocabulary vocab);

    int order() const { return order_; }
    const bpe::Vocabulary& vocabulary() const { return vocab_; }
    /// Contexts of length j-1 for order j (1-based).
    const Table& table(int order) const;

    std::uint64_t count(std::span<const TokenId> context, TokenId next) const;
    /// Maximum-likelihood estimate at the longest suffix of `context` that was observed.
    double probability(std::span<const TokenId> context, TokenId next) const;

    /// Token stream used for counting one sample.
    std::vector<TokenId> sample_stream(const corpus::TaskSample& s) const;

    std::vector<TokenId> generate_ids(std::string_view prompt, const GenerateOptions& options) const;
    /// Decoded continuation with leading spaces removed.
    std::string generate(std::string_view prompt, const GenerateOptions& options) const;

    void save(std::ostream& out) const;
    void save(const std::filesystem::path& path) const;
    static NgramModel load(std::istream& in);
    static NgramModel load(const std::filesystem::path& path);

    bool operator==(const NgramModel& o) const {
        return order_ == o.order_ && vocab_ == o.vocab_ && tables_ == o.tables_;
    }

private:
    NgramModel(int order, bpe::Vocabulary vocab) : order_(order), vocab_(std::move(vocab)), tables_(order) {}
    const Counts* longest_match(std::span<const TokenId> history) const;

    int order_;
    bpe::Vocabulary vocab_;
    std::vector<Table> tables_;  // tables_[j-1] holds order j
};

/// In-process adapter over a shared model. Requests without a seed are
/// answered with seed 0 and their ids recorded.
class RefModelAdapter : public adapter::AdapterSession {
public:
    RefModelAdapter(std::shared_ptr<const NgramModel> model, std::string name = "refmodel", bool sample = false);

    std::vector<adapter::Outcome> generate_batch(const std::vector<adapter::GenerationRequest>& requests) override;
    void close() override;
    std::string describe() const override { return name_; }

    std::vector<std::string> unseeded_requests() const;

private:
    std::shared_ptr<const NgramModel> model_;
    std::string name_;
    bool sample_;
    mutable std::mutex mu_;
    bool closed_ = false;
    std::vector<std::string> unseeded_;
};

std::unique_ptr<RefModelAdapter> serve_adapter(std::shared_ptr<const NgramModel> model, std::string name = "refmodel",
                                               bool sample = false);

}  // namespace mdbench::refmodel
