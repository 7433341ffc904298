#include "msqa/http.hpp"

#include <httplib.h>

#include <atomic>

#include "msqa/errors.hpp"

namespace msqa::http {

Url parse_url(const std::string& url) {
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) throw ValidationError("URL without scheme: '" + url + "'");
    const std::string scheme = url.substr(0, scheme_end);
    if (scheme != "http" && scheme != "https") throw ValidationError("unsupported URL scheme in '" + url + "'");
    const auto path_start = url.find('/', scheme_end + 3);
    Url out;
    out.scheme_host_port = url.substr(0, path_start);
    out.path = path_start == std::string::npos ? "/" : url.substr(path_start);
    if (out.scheme_host_port.size() <= scheme_end + 3) throw ValidationError("URL without host: '" + url + "'");
    return out;
}

namespace {

httplib::Client make_client(const Url& url, std::chrono::milliseconds timeout) {
    httplib::Client client(url.scheme_host_port);
    const auto secs = static_cast<time_t>(timeout.count() / 1000);
    const auto usecs = static_cast<time_t>((timeout.count() % 1000) * 1000);
    client.set_connection_timeout(secs, usecs);
    client.set_read_timeout(secs, usecs);
    client.set_write_timeout(secs, usecs);
    return client;
}

std::atomic<std::size_t> g_requests{0};

}  // namespace

std::size_t request_count() noexcept { return g_requests.load(); }

Response post_json(const std::string& url, const std::string& body, const std::map<std::string, std::string>& headers,
                   std::chrono::milliseconds timeout) {
    const Url parsed = parse_url(url);
    ++g_requests;
    auto client = make_client(parsed, timeout);
    httplib::Headers h;
    for (const auto& [k, v] : headers) h.emplace(k, v);
    auto result = client.Post(parsed.path, h, body, "application/json");
    if (!result) throw TransientBackendError("POST " + url + " failed: " + httplib::to_string(result.error()));
    return {result->status, result->body};
}

Response get(const std::string& url, std::chrono::milliseconds timeout) {
    const Url parsed = parse_url(url);
    ++g_requests;
    auto client = make_client(parsed, timeout);
    auto result = client.Get(parsed.path);
    if (!result) throw TransientBackendError("GET " + url + " failed: " + httplib::to_string(result.error()));
    return {result->status, result->body};
}

}  // namespace msqa::http
