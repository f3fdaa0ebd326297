#include "mdbench/refmodel.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <fstream>
#include <random>

namespace mdbench::refmodel {

namespace {

constexpr std::array<char, 8> kMagic = {'M', 'D', 'N', 'G', 'R', 'A', 'M', '\0'};
constexpr std::uint32_t kFormatVersion = 1;

void put_u32(std::ostream& out, std::uint32_t v) {
    char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
    out.write(b, 4);
}

void put_u64(std::ostream& out, std::uint64_t v) {
    char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
    out.write(b, 8);
}

std::uint64_t get_bytes(std::istream& in, int n) {
    unsigned char b[8];
    if (!in.read(reinterpret_cast<char*>(b), n)) throw RefModelError(RefModelErrc::malformed, "model file is truncated");
    std::uint64_t v = 0;
    for (int i = n - 1; i >= 0; --i) v = (v << 8) | b[i];
    return v;
}

std::uint32_t get_u32(std::istream& in) { return static_cast<std::uint32_t>(get_bytes(in, 4)); }
std::uint64_t get_u64(std::istream& in) { return get_bytes(in, 8); }

}  // namespace

NgramModel NgramModel::train(const std::vector<corpus::TaskSample>& samples, int order, bpe::Vocabulary vocab) {
    if (order < 1) throw RefModelError(RefModelErrc::bad_order, "n-gram order must be at least 1");
    if (samples.empty()) throw RefModelError(RefModelErrc::empty_corpus, "no training samples");
    NgramModel m(order, std::move(vocab));
    Context ctx;
    for (const auto& s : samples) {
        const auto stream = m.sample_stream(s);
        for (std::size_t i = 1; i < stream.size(); ++i) {
            for (int j = 1; j <= order; ++j) {
                const std::size_t len = static_cast<std::size_t>(j - 1);
                if (len > i) break;
                ctx.assign(stream.begin() + static_cast<std::ptrdiff_t>(i - len), stream.begin() + static_cast<std::ptrdiff_t>(i));
                ++m.tables_[len][ctx][stream[i]];
            }
        }
    }
    return m;
}

const NgramModel::Table& NgramModel::table(int order) const {
    if (order < 1 || order > order_) throw RefModelError(RefModelErrc::bad_order, "no table for order " + std::to_string(order));
    return tables_[order - 1];
}

std::vector<TokenId> NgramModel::sample_stream(const corpus::TaskSample& s) const {
    std::vector<TokenId> out{kBoundary};
    const auto in = bpe::encode(vocab_, s.input);
    out.insert(out.end(), in.begin(), in.end());
    const auto tgt = bpe::encode(vocab_, s.input.empty() ? s.target : " " + s.target);
    out.insert(out.end(), tgt.begin(), tgt.end());
    out.push_back(kBoundary);
    return out;
}

std::uint64_t NgramModel::count(std::span<const TokenId> context, TokenId next) const {
    if (context.size() >= tables_.size()) return 0;
    const auto& t = tables_[context.size()];
    auto it = t.find(Context(context.begin(), context.end()));
    if (it == t.end()) return 0;
    auto c = it->second.find(next);
    return c == it->second.end() ? 0 : c->second;
}

const NgramModel::Counts* NgramModel::longest_match(std::span<const TokenId> history) const {
    for (int j = order_; j >= 1; --j) {
        const std::size_t len = static_cast<std::size_t>(j - 1);
        if (len > history.size()) continue;
        const auto& t = tables_[len];
        auto it = t.find(Context(history.end() - static_cast<std::ptrdiff_t>(len), history.end()));
        if (it != t.end() && !it->second.empty()) return &it->second;
    }
    return nullptr;
}

double NgramModel::probability(std::span<const TokenId> context, TokenId next) const {
    const Counts* counts = longest_match(context);
    if (!counts) return 0.0;
    std::uint64_t total = 0;
    for (const auto& [tok, c] : *counts) total += c;
    auto it = counts->find(next);
    return it == counts->end() ? 0.0 : static_cast<double>(it->second) / static_cast<double>(total);
}

std::vector<TokenId> NgramModel::generate_ids(std::string_view prompt, const GenerateOptions& options) const {
    std::vector<TokenId> history{kBoundary};
    const auto enc = bpe::encode(vocab_, prompt);
    history.insert(history.end(), enc.begin(), enc.end());
    std::mt19937_64 rng(options.seed.value_or(0));
    std::vector<TokenId> out;
    std::vector<TokenId> ties;
    for (int step = 0; step < options.max_new_tokens; ++step) {
        const Counts* counts = longest_match(history);
        if (!counts) break;
        TokenId next = kBoundary;
        if (options.sample) {
            std::uint64_t total = 0;
            for (const auto& [tok, c] : *counts) total += c;
            std::uint64_t r = corpus::uniform_index(rng, total);
            for (const auto& [tok, c] : *counts) {
                if (r < c) {
                    next = tok;
                    break;
                }
                r -= c;
            }
        } else {
            std::uint64_t best = 0;
            ties.clear();
            for (const auto& [tok, c] : *counts) {
                if (c > best) {
                    best = c;
                    ties.assign(1, tok);
                } else if (c == best) {
                    ties.push_back(tok);
                }
            }
            next = ties.size() == 1 ? ties[0] : ties[corpus::uniform_index(rng, ties.size())];
        }
        if (next == kBoundary) break;
        out.push_back(next);
        history.push_back(next);
    }
    return out;
}

std::string NgramModel::generate(std::string_view prompt, const GenerateOptions& options) const {
    std::string text = bpe::decode(vocab_, generate_ids(prompt, options));
    const auto start = text.find_first_not_of(' ');
    return start == std::string::npos ? std::string() : text.substr(start);
}

void NgramModel::save(std::ostream& out) const {
    out.write(kMagic.data(), kMagic.size());
    put_u32(out, kFormatVersion);
    put_u32(out, static_cast<std::uint32_t>(order_));
    put_u32(out, static_cast<std::uint32_t>(vocab_.vocab_size()));
    put_u32(out, static_cast<std::uint32_t>(vocab_.merges().size()));
    for (const auto& m : vocab_.merges()) {
        put_u32(out, m.left);
        put_u32(out, m.right);
    }
    for (const auto& t : tables_) {
        put_u64(out, t.size());
        for (const auto& [ctx, counts] : t) {
            for (TokenId id : ctx) put_u32(out, id);
            put_u32(out, static_cast<std::uint32_t>(counts.size()));
            for (const auto& [tok, c] : counts) {
                put_u32(out, tok);
                put_u64(out, c);
            }
        }
    }
    if (!out) throw RefModelError(RefModelErrc::io, "failed to write model");
}

void NgramModel::save(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw RefModelError(RefModelErrc::io, "cannot open " + path.string() + " for writing");
    save(out);
}

NgramModel NgramModel::load(std::istream& in) {
    std::array<char, 8> magic{};
    if (!in.read(magic.data(), magic.size()) || magic != kMagic)
        throw RefModelError(RefModelErrc::malformed, "not an n-gram model file");
    const auto version = get_u32(in);
    if (version != kFormatVersion)
        throw RefModelError(RefModelErrc::malformed, "unsupported model format version " + std::to_string(version));
    const auto order = get_u32(in);
    if (order < 1 || order > 64) throw RefModelError(RefModelErrc::malformed, "implausible order " + std::to_string(order));
    const auto vocab_size = get_u32(in);
    const auto merges = get_u32(in);
    if (vocab_size < bpe::kByteTokens || merges > vocab_size - bpe::kByteTokens)
        throw RefModelError(RefModelErrc::malformed, "inconsistent vocabulary header");
    bpe::Vocabulary vocab(vocab_size);
    for (std::uint32_t i = 0; i < merges; ++i) {
        const auto l = get_u32(in);
        const auto r = get_u32(in);
        try {
            vocab.add_merge(l, r);
        } catch (const bpe::BpeError& e) {
            throw RefModelError(RefModelErrc::malformed, std::string("bad merge: ") + e.what());
        }
    }
    NgramModel m(static_cast<int>(order), std::move(vocab));
    auto token = [&](std::uint32_t id) {
        if (!m.vocab_.contains(id)) throw RefModelError(RefModelErrc::malformed, "token id out of range");
        return id;
    };
    for (std::uint32_t j = 0; j < order; ++j) {
        const auto contexts = get_u64(in);
        for (std::uint64_t c = 0; c < contexts; ++c) {
            Context ctx(j);
            for (auto& id : ctx) id = token(get_u32(in));
            const auto n = get_u32(in);
            if (n == 0) throw RefModelError(RefModelErrc::malformed, "context without continuations");
            Counts counts;
            for (std::uint32_t k = 0; k < n; ++k) {
                const auto tok = token(get_u32(in));
                const auto cnt = get_u64(in);
                if (cnt == 0) throw RefModelError(RefModelErrc::malformed, "zero count");
                counts[tok] = cnt;
            }
            m.tables_[j].emplace(std::move(ctx), std::move(counts));
        }
    }
    if (in.peek() != std::char_traits<char>::eof()) throw RefModelError(RefModelErrc::malformed, "trailing bytes after model");
    return m;
}

NgramModel NgramModel::load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw RefModelError(RefModelErrc::io, "cannot open " + path.string());
    return load(in);
}

RefModelAdapter::RefModelAdapter(std::shared_ptr<const NgramModel> model, std::string name, bool sample)
    : model_(std::move(model)), name_(std::move(name)), sample_(sample) {
    if (!model_) throw RefModelError(RefModelErrc::io, "no model");
}

std::vector<adapter::Outcome> RefModelAdapter::generate_batch(const std::vector<adapter::GenerationRequest>& requests) {
    adapter::validate_batch(requests);
    std::vector<adapter::Outcome> out;
    out.reserve(requests.size());
    for (const auto& r : requests) {
        {
            std::lock_guard lock(mu_);
            if (closed_) {
                out.push_back(adapter::Outcome::failure(r.id, adapter::AdapterErrc::session_closed, "session closed"));
                continue;
            }
            if (!r.seed) unseeded_.push_back(r.id);
        }
        const auto start = std::chrono::steady_clock::now();
        GenerateOptions opts;
        opts.max_new_tokens = r.max_new_tokens;
        if (r.seed) opts.seed = static_cast<std::uint64_t>(*r.seed);
        opts.sample = sample_;
        const auto ids = model_->generate_ids(r.prompt, opts);
        adapter::GenerationResponse resp;
        resp.id = r.id;
        resp.output = bpe::decode(model_->vocabulary(), ids);
        resp.output.erase(0, std::min(resp.output.size(), resp.output.find_first_not_of(' ')));
        resp.token_count = static_cast<std::int64_t>(ids.size());
        resp.latency_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
        out.push_back(adapter::Outcome::success(std::move(resp)));
    }
    return out;
}

void RefModelAdapter::close() {
    std::lock_guard lock(mu_);
    closed_ = true;
}

std::vector<std::string> RefModelAdapter::unseeded_requests() const {
    std::lock_guard lock(mu_);
    return unseeded_;
}

std::unique_ptr<RefModelAdapter> serve_adapter(std::shared_ptr<const NgramModel> model, std::string name, bool sample) {
    return std::make_unique<RefModelAdapter>(std::move(model), std::move(name), sample);
}

}  // namespace mdbench::refmodel
