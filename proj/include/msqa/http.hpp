#pragma once

#include <chrono>
#include <map>
#include <string>

namespace msqa::http {

struct Response {
    int status = 0;
    std::string body;
};

struct Url {
    std::string scheme_host_port;  // "http://host:port"
    std::string path;              // "/v1/chat", defaults to "/"
};

// Throws ValidationError for anything but http:// or https:// URLs.
Url parse_url(const std::string& url);

/// POSTs a JSON body. Connection-level failures throw TransientBackendError;
/// any HTTP status is returned to the caller.
Response post_json(const std::string& url, const std::string& body, const std::map<std::string, std::string>& headers,
                   std::chrono::milliseconds timeout);

Response get(const std::string& url, std::chrono::milliseconds timeout);

// Requests attempted by this process so far.
std::size_t request_count() noexcept;

}  // namespace msqa::http
