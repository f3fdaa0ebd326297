#pragma once

// Line-delimited JSON protocol between the harness and a model under test.
//
//   banner    mdbench-adapter v1
//   request   {"id":"<s>","task":"<s>","prompt":"<s>","max_new_tokens":<n>,"seed":<n|null>}
//   response  {"id":"<s>","output":"<s>"}
//
// The HTTP variant posts a JSON array of requests to /generate and expects
// an array of responses; GET /healthz must return 200.

#include <chrono>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace mdbench::adapter {

inline constexpr std::string_view kBanner = "mdbench-adapter v1";

struct GenerationRequest {
    std::string id;
    std::string task;
    std::string prompt;
    int max_new_tokens = 256;
    std::optional<std::int64_t> seed;
    bool operator==(const GenerationRequest&) const = default;
};

struct GenerationResponse {
    std::string id;
    std::string output;
    std::optional<double> latency_ms;
    std::optional<std::int64_t> token_count;
};

enum class AdapterErrc {
    spawn_failed,
    connect_failed,
    bad_banner,
    invalid_request,
    timeout,
    malformed_response,
    id_mismatch,
    session_closed,
    adapter_died,
    http_error,
};

std::string_view to_string(AdapterErrc code);

class AdapterError : public std::runtime_error {
public:
    AdapterError(AdapterErrc code, const std::string& what) : std::runtime_error(what), code_(code) {}
    AdapterErrc code() const noexcept { return code_; }

private:
    AdapterErrc code_;
};

/// Terminal outcome of one request: a response or an error, never both.
struct Outcome {
    std::string id;
    std::optional<GenerationResponse> response;
    std::optional<AdapterErrc> error;
    std::string message;

    bool ok() const { return response.has_value(); }
    static Outcome success(GenerationResponse r);
    static Outcome failure(std::string id, AdapterErrc code, std::string message);
};

struct AdapterOptions {
    std::chrono::milliseconds request_timeout{120000};
    std::chrono::milliseconds open_timeout{30000};
    std::chrono::milliseconds close_grace{2000};
    std::size_t max_in_flight = 32;
};

class AdapterSession {
public:
    virtual ~AdapterSession() = default;
    /// One outcome per request, in request order. Request ids must be unique
    /// within the batch (AdapterError invalid_request otherwise).
    virtual std::vector<Outcome> generate_batch(const std::vector<GenerationRequest>& requests) = 0;
    /// Idempotent. Requests still in flight fail with session_closed.
    virtual void close() = 0;
    virtual std::string describe() const = 0;
};

// Wire encoding. Throws AdapterError(invalid_request) for text that is not valid UTF-8.
std::string request_line(const GenerationRequest& r);
std::string response_line(const GenerationResponse& r);
/// Throw AdapterError(malformed_response / invalid_request).
GenerationRequest parse_request_line(std::string_view line);
GenerationResponse parse_response_line(std::string_view line);
/// Best-effort id extraction from a line that failed to parse.
std::optional<std::string> salvage_id(std::string_view line);

void validate_batch(const std::vector<GenerationRequest>& requests);

/// "http://host:port[/prefix]" opens an HTTP session; anything else is a shell command.
std::unique_ptr<AdapterSession> open_adapter(const std::string& spec, const AdapterOptions& options = {});
std::unique_ptr<AdapterSession> open_subprocess_adapter(const std::string& command,
                                                        const AdapterOptions& options = {});
std::unique_ptr<AdapterSession> open_http_adapter(const std::string& base_url, const AdapterOptions& options = {});

/// In-process session backed by a function; exceptions become per-request errors.
class FunctionAdapter : public AdapterSession {
public:
    using Generate = std::function<std::string(const GenerationRequest&)>;
    FunctionAdapter(std::string name, Generate generate) : name_(std::move(name)), generate_(std::move(generate)) {}

    std::vector<Outcome> generate_batch(const std::vector<GenerationRequest>& requests) override;
    void close() override { closed_ = true; }
    std::string describe() const override { return name_; }

private:
    std::string name_;
    Generate generate_;
    bool closed_ = false;
};

std::unique_ptr<AdapterSession> make_echo_adapter();

struct ConformanceCheck {
    std::string name;
    bool passed;
    std::string detail;
};

struct ConformanceReport {
    std::vector<ConformanceCheck> checks;
    // Duplicate seeded requests produced identical output. Informational.
    bool seeded_reproducible = false;
    bool passed() const;
};

/// Protocol contract checks against an open session: id matching, one
/// outcome per request, batches larger than the in-flight window, unicode
/// and escape handling. With `expect_echo`, outputs must equal prompts.
ConformanceReport run_conformance(AdapterSession& session, bool expect_echo);

}  // namespace mdbench::adapter
