#include "mdbench/bpe.hpp"

#include <algorithm>
#include <fstream>
#include <limits>
#include <queue>
#include <sstream>
#include <thread>

namespace mdbench::bpe {

Vocabulary::Vocabulary(std::size_t vocab_size) : vocab_size_(vocab_size) {
    if (vocab_size < kByteTokens)
        throw BpeError(BpeErrc::bad_vocab_size, "vocab size must be at least 256");
    table_.reserve(kByteTokens);
    for (std::size_t b = 0; b < kByteTokens; ++b) table_.emplace_back(1, static_cast<char>(b));
}

const std::string& Vocabulary::bytes(TokenId id) const {
    if (id >= table_.size()) throw BpeError(BpeErrc::unknown_id, "unknown token id " + std::to_string(id));
    return table_[id];
}

std::optional<TokenId> Vocabulary::merged(TokenId left, TokenId right) const {
    auto it = by_pair_.find(key(left, right));
    if (it == by_pair_.end()) return std::nullopt;
    return it->second;
}

TokenId Vocabulary::add_merge(TokenId left, TokenId right) {
    if (!contains(left) || !contains(right))
        throw BpeError(BpeErrc::unknown_id, "merge references undefined id");
    if (table_.size() >= vocab_size_) throw BpeError(BpeErrc::bad_vocab_size, "vocabulary is full");
    const auto id = static_cast<TokenId>(table_.size());
    table_.push_back(table_[left] + table_[right]);
    merges_.push_back({left, right});
    by_pair_.emplace(key(left, right), id);
    return id;
}

namespace {

constexpr TokenId kDead = ~TokenId{0};

struct Symbol {
    TokenId id;
    std::int32_t prev;
    std::int32_t next;
    std::uint32_t doc;
};

std::uint64_t pair_key(TokenId l, TokenId r) { return (std::uint64_t{l} << 32) | r; }
TokenId left_of(std::uint64_t k) { return static_cast<TokenId>(k >> 32); }
TokenId right_of(std::uint64_t k) { return static_cast<TokenId>(k & 0xffffffffu); }

class Trainer {
public:
    Trainer(const std::vector<std::string>& documents, std::size_t vocab_size, TrainOptions options)
        : vocab_(vocab_size), options_(options) {
        // Identical documents share one symbol run and carry a weight.
        std::unordered_map<std::string_view, std::size_t> seen;
        for (const auto& d : documents) {
            if (d.empty()) continue;
            auto [it, fresh] = seen.emplace(d, weights_.size());
            if (fresh) {
                docs_.push_back(d);
                weights_.push_back(1);
            } else {
                ++weights_[it->second];
            }
        }
        if (docs_.empty()) throw BpeError(BpeErrc::empty_corpus, "cannot train on an empty corpus");

        std::size_t total = 0;
        for (auto d : docs_) total += d.size();
        if (total > static_cast<std::size_t>(std::numeric_limits<std::int32_t>::max()))
            throw BpeError(BpeErrc::empty_corpus, "corpus too large for a single training run");
        symbols_.reserve(total);
        for (std::uint32_t di = 0; di < docs_.size(); ++di) {
            const auto base = static_cast<std::int32_t>(symbols_.size());
            const auto n = static_cast<std::int32_t>(docs_[di].size());
            for (std::int32_t i = 0; i < n; ++i) {
                symbols_.push_back({static_cast<unsigned char>(docs_[di][i]), i == 0 ? -1 : base + i - 1,
                                    i + 1 == n ? -1 : base + i + 1, di});
            }
        }
    }

    Vocabulary run() {
        count_initial();
        for (const auto& [k, c] : counts_) heap_.push({c, k});
        while (vocab_.size() < vocab_.vocab_size()) {
            auto best = pop_best();
            if (!best) break;
            merge(*best);
        }
        return std::move(vocab_);
    }

private:
    struct Entry {
        std::int64_t count;
        std::uint64_t key;
    };

    // Heap order: higher count first, then smaller left bytes, then smaller right bytes.
    struct Worse {
        const Vocabulary* vocab;
        bool operator()(const Entry& a, const Entry& b) const {
            if (a.count != b.count) return a.count < b.count;
            const auto& al = vocab->bytes(left_of(a.key));
            const auto& bl = vocab->bytes(left_of(b.key));
            if (al != bl) return al > bl;
            return vocab->bytes(right_of(a.key)) > vocab->bytes(right_of(b.key));
        }
    };

    void count_initial() {
        const unsigned threads = std::max(1u, options_.threads);
        std::vector<std::unordered_map<std::uint64_t, std::int64_t>> partial(threads);
        std::vector<std::unordered_map<std::uint64_t, std::vector<std::int32_t>>> partial_pos(threads);
        const std::size_t n = symbols_.size();
        auto work = [&](unsigned t) {
            const std::size_t lo = n * t / threads;
            const std::size_t hi = n * (t + 1) / threads;
            for (std::size_t i = lo; i < hi; ++i) {
                const Symbol& s = symbols_[i];
                if (s.next < 0) continue;
                const auto k = pair_key(s.id, symbols_[s.next].id);
                partial[t][k] += weights_[s.doc];
                partial_pos[t][k].push_back(static_cast<std::int32_t>(i));
            }
        };
        if (threads == 1) {
            work(0);
        } else {
            std::vector<std::jthread> pool;
            for (unsigned t = 0; t < threads; ++t) pool.emplace_back(work, t);
        }
        // Shards are merged in shard order so position lists stay ascending.
        for (unsigned t = 0; t < threads; ++t) {
            for (const auto& [k, c] : partial[t]) counts_[k] += c;
            for (auto& [k, v] : partial_pos[t]) {
                auto& dst = positions_[k];
                dst.insert(dst.end(), v.begin(), v.end());
            }
        }
    }

    std::optional<std::uint64_t> pop_best() {
        while (!heap_.empty()) {
            const Entry top = heap_.top();
            heap_.pop();
            auto it = counts_.find(top.key);
            const std::int64_t current = it == counts_.end() ? 0 : it->second;
            if (current != top.count) {
                if (current > 0) heap_.push({current, top.key});
                continue;
            }
            if (current < options_.min_pair_count) return std::nullopt;
            return top.key;
        }
        return std::nullopt;
    }

    void add(std::uint64_t k, std::int64_t w, std::int32_t pos) {
        auto& c = counts_[k];
        c += w;
        positions_[k].push_back(pos);
        heap_.push({c, k});
    }

    void sub(std::uint64_t k, std::int64_t w) {
        auto it = counts_.find(k);
        if (it == counts_.end()) return;
        it->second -= w;
        if (it->second <= 0) counts_.erase(it);
    }

    void merge(std::uint64_t k) {
        const TokenId l = left_of(k);
        const TokenId r = right_of(k);
        const TokenId fresh = vocab_.add_merge(l, r);
        std::vector<std::int32_t> where = std::move(positions_[k]);
        positions_.erase(k);
        std::sort(where.begin(), where.end());
        where.erase(std::unique(where.begin(), where.end()), where.end());

        for (const std::int32_t pos : where) {
            Symbol& s = symbols_[pos];
            if (s.id != l || s.next < 0 || symbols_[s.next].id != r) continue;
            const std::int32_t nb = s.next;
            const std::int32_t after = symbols_[nb].next;
            const std::int64_t w = weights_[s.doc];
            if (s.prev >= 0) sub(pair_key(symbols_[s.prev].id, l), w);
            sub(k, w);
            if (after >= 0) sub(pair_key(r, symbols_[after].id), w);

            s.id = fresh;
            s.next = after;
            if (after >= 0) symbols_[after].prev = pos;
            symbols_[nb].id = kDead;

            if (s.prev >= 0) add(pair_key(symbols_[s.prev].id, fresh), w, s.prev);
            if (after >= 0) add(pair_key(fresh, symbols_[after].id), w, pos);
        }
    }

    Vocabulary vocab_;
    TrainOptions options_;
    std::vector<std::string_view> docs_;
    std::vector<std::int64_t> weights_;
    std::vector<Symbol> symbols_;
    std::unordered_map<std::uint64_t, std::int64_t> counts_;
    std::unordered_map<std::uint64_t, std::vector<std::int32_t>> positions_;
    std::priority_queue<Entry, std::vector<Entry>, Worse> heap_{Worse{&vocab_}};
};

}  // namespace

Vocabulary train(const std::vector<std::string>& documents, std::size_t vocab_size, TrainOptions options) {
    if (vocab_size <= kByteTokens) throw BpeError(BpeErrc::bad_vocab_size, "vocab size must exceed 256 for training");
    return Trainer(documents, vocab_size, options).run();
}

std::vector<TokenId> encode(const Vocabulary& vocab, std::string_view text) {
    std::vector<TokenId> ids;
    ids.reserve(text.size());
    for (char c : text) ids.push_back(static_cast<unsigned char>(c));
    if (vocab.merges().empty()) return ids;

    // Repeatedly apply the earliest-learned merge present. Any merge that
    // consumes a freshly created id was learned after it, so this matches
    // applying the merge list in order.
    for (;;) {
        TokenId best = kDead;
        for (std::size_t i = 0; i + 1 < ids.size(); ++i) {
            if (auto m = vocab.merged(ids[i], ids[i + 1]); m && *m < best) best = *m;
        }
        if (best == kDead) break;
        const Merge mg = vocab.merges()[best - kByteTokens];
        std::size_t out = 0;
        for (std::size_t i = 0; i < ids.size();) {
            if (i + 1 < ids.size() && ids[i] == mg.left && ids[i + 1] == mg.right) {
                ids[out++] = best;
                i += 2;
            } else {
                ids[out++] = ids[i++];
            }
        }
        ids.resize(out);
    }
    return ids;
}

std::string decode(const Vocabulary& vocab, std::span<const TokenId> ids) {
    std::string out;
    for (TokenId id : ids) out += vocab.bytes(id);
    return out;
}

void save(const Vocabulary& vocab, std::ostream& out) {
    out << "mdbench-bpe v1\n";
    out << "vocab_size " << vocab.vocab_size() << '\n';
    out << "merges " << vocab.merges().size() << '\n';
    for (const auto& m : vocab.merges()) out << m.left << ' ' << m.right << '\n';
    if (!out) throw BpeError(BpeErrc::io, "vocabulary write failed");
}

void save(const Vocabulary& vocab, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw BpeError(BpeErrc::io, "cannot open '" + path.string() + "' for writing");
    save(vocab, out);
}

Vocabulary load(std::istream& in) {
    std::string line;
    std::size_t line_no = 0;
    auto next_line = [&](const char* what) {
        if (!std::getline(in, line))
            throw BpeError(BpeErrc::malformed, std::string("truncated vocabulary: missing ") + what + " at line " +
                                                   std::to_string(line_no + 1),
                           line_no + 1);
        ++line_no;
    };
    auto bad = [&](const std::string& why) {
        return BpeError(BpeErrc::malformed, "malformed vocabulary line " + std::to_string(line_no) + ": " + why,
                        line_no);
    };

    next_line("header");
    if (line != "mdbench-bpe v1") throw bad("expected 'mdbench-bpe v1'");

    auto keyed = [&](const char* key) {
        next_line(key);
        std::istringstream ls(line);
        std::string k;
        std::size_t v = 0;
        std::string extra;
        if (!(ls >> k >> v) || k != key || (ls >> extra)) throw bad(std::string("expected '") + key + " <n>'");
        return v;
    };
    const std::size_t vocab_size = keyed("vocab_size");
    const std::size_t merge_count = keyed("merges");
    if (vocab_size < kByteTokens || merge_count > vocab_size - kByteTokens) throw bad("merge count exceeds vocab size");

    Vocabulary vocab(vocab_size);
    for (std::size_t i = 0; i < merge_count; ++i) {
        next_line("merge");
        std::istringstream ls(line);
        long long l = -1, r = -1;
        std::string extra;
        if (!(ls >> l >> r) || (ls >> extra)) throw bad("expected '<left> <right>'");
        if (l < 0 || r < 0 || !vocab.contains(static_cast<TokenId>(l)) || !vocab.contains(static_cast<TokenId>(r)))
            throw bad("merge references an undefined id");
        vocab.add_merge(static_cast<TokenId>(l), static_cast<TokenId>(r));
    }
    return vocab;
}

Vocabulary load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw BpeError(BpeErrc::io, "cannot open '" + path.string() + "'");
    return load(in);
}

}  // namespace mdbench::bpe
