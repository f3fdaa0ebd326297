#include "mdbench/adapter.hpp"

#include <httplib.h>
#include <json.hpp>

#include <map>

namespace mdbench::adapter {

using json = nlohmann::ordered_json;

namespace {

struct Url {
    std::string origin;  // scheme://host[:port]
    std::string prefix;  // path without trailing slash
};

Url split_url(const std::string& url) {
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) throw AdapterError(AdapterErrc::connect_failed, "not a URL: " + url);
    if (url.compare(0, scheme_end, "http") != 0)
        throw AdapterError(AdapterErrc::connect_failed, "only http:// adapters are supported: " + url);
    const auto path = url.find('/', scheme_end + 3);
    Url u;
    u.origin = url.substr(0, path);
    if (path != std::string::npos) u.prefix = url.substr(path);
    while (!u.prefix.empty() && u.prefix.back() == '/') u.prefix.pop_back();
    return u;
}

class HttpSession : public AdapterSession {
public:
    HttpSession(std::string url, const AdapterOptions& options)
        : url_(std::move(url)), parts_(split_url(url_)), client_(parts_.origin), options_(options) {
        if (options_.max_in_flight == 0) options_.max_in_flight = 1;
        client_.set_connection_timeout(options_.open_timeout);
        client_.set_read_timeout(options_.request_timeout);
        client_.set_write_timeout(options_.request_timeout);
        auto res = client_.Get(parts_.prefix + "/healthz");
        if (!res)
            throw AdapterError(AdapterErrc::connect_failed,
                               "cannot reach " + url_ + ": " + httplib::to_string(res.error()));
        if (res->status != 200)
            throw AdapterError(AdapterErrc::connect_failed,
                               url_ + "/healthz returned HTTP " + std::to_string(res->status));
    }

    std::vector<Outcome> generate_batch(const std::vector<GenerationRequest>& requests) override {
        validate_batch(requests);
        std::vector<Outcome> out;
        out.reserve(requests.size());
        for (std::size_t start = 0; start < requests.size(); start += options_.max_in_flight) {
            const std::size_t end = std::min(requests.size(), start + options_.max_in_flight);
            post_chunk(requests, start, end, out);
        }
        return out;
    }

    void close() override { closed_ = true; }
    std::string describe() const override { return url_; }

private:
    void post_chunk(const std::vector<GenerationRequest>& requests, std::size_t start, std::size_t end,
                    std::vector<Outcome>& out) {
        std::map<std::string, std::size_t> slot;
        std::vector<std::optional<Outcome>> chunk(end - start);
        std::string body = "[";
        for (std::size_t i = start; i < end; ++i) {
            if (closed_) {
                chunk[i - start] = Outcome::failure(requests[i].id, AdapterErrc::session_closed, "session closed");
                continue;
            }
            try {
                const auto line = request_line(requests[i]);
                if (body.size() > 1) body += ',';
                body += line;
                slot.emplace(requests[i].id, i - start);
            } catch (const AdapterError& e) {
                chunk[i - start] = Outcome::failure(requests[i].id, e.code(), e.what());
            }
        }
        body += ']';

        auto fail_sent = [&](AdapterErrc code, const std::string& why) {
            for (const auto& [id, k] : slot)
                if (!chunk[k]) chunk[k] = Outcome::failure(id, code, why);
        };
        if (!slot.empty()) {
            auto res = client_.Post(parts_.prefix + "/generate", body, "application/json");
            if (!res) {
                const auto err = res.error();
                fail_sent(err == httplib::Error::Read ? AdapterErrc::timeout : AdapterErrc::connect_failed,
                          httplib::to_string(err));
            } else if (res->status != 200) {
                fail_sent(AdapterErrc::http_error, "HTTP " + std::to_string(res->status));
            } else {
                json arr;
                try {
                    arr = json::parse(res->body);
                } catch (const json::exception&) {
                    arr = nullptr;
                }
                if (!arr.is_array()) {
                    fail_sent(AdapterErrc::malformed_response, "response body is not a JSON array");
                } else {
                    for (const auto& item : arr) {
                        std::optional<GenerationResponse> r;
                        std::string why;
                        try {
                            r = parse_response_line(item.dump());
                        } catch (const AdapterError& e) {
                            why = e.what();
                        }
                        std::optional<std::string> id;
                        if (r) id = r->id;
                        else if (item.is_object() && item.contains("id") && item["id"].is_string())
                            id = item["id"].get<std::string>();
                        auto it = id ? slot.find(*id) : slot.end();
                        if (it == slot.end() || chunk[it->second]) continue;  // unknown or repeated id
                        chunk[it->second] = r ? Outcome::success(std::move(*r))
                                              : Outcome::failure(*id, AdapterErrc::malformed_response, why);
                    }
                    fail_sent(AdapterErrc::id_mismatch, "no response with this id");
                }
            }
        }
        for (auto& o : chunk) out.push_back(std::move(*o));
    }

    std::string url_;
    Url parts_;
    httplib::Client client_;
    AdapterOptions options_;
    bool closed_ = false;
};

}  // namespace

std::unique_ptr<AdapterSession> open_http_adapter(const std::string& base_url, const AdapterOptions& options) {
    return std::make_unique<HttpSession>(base_url, options);
}

}  // namespace mdbench::adapter
