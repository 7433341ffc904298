#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace msqa {

enum class BackendRole { llm, expert, judge };

std::string_view to_string(BackendRole role) noexcept;

struct Endpoint {
    std::string base_url;  // full URL the request is POSTed to
    std::string model;
    std::string auth_env;  // name of the environment variable holding a bearer token; may be empty
};

struct Decoding {
    double temperature = 0.0;
    int max_tokens = 1024;
};

/// Stateless descriptor of one generation endpoint.
struct GenBackend {
    Endpoint endpoint;
    BackendRole role = BackendRole::llm;
    Decoding decoding;
    std::chrono::milliseconds timeout{120000};

    // Identifies (url, model, role, decoding); part of every cache key.
    std::string fingerprint() const;
};

struct ChatMessage {
    std::string role;
    std::string content;
};

/// {model, messages:[{role, content}], temperature, max_tokens}
nlohmann::json make_chat_request(const GenBackend& backend, const std::vector<ChatMessage>& messages);

/// Extracts the "content" string from a reply body; throws ProtocolError otherwise.
std::string parse_chat_reply(std::string_view body);

/// Moves one chat request to a backend and returns the generated text.
/// Throws TransientBackendError (retriable), BackendError or ProtocolError.
class ChatTransport {
public:
    virtual ~ChatTransport() = default;
    virtual std::string complete(const GenBackend& backend, const std::vector<ChatMessage>& messages) = 0;
};

class HttpChatTransport final : public ChatTransport {
public:
    std::string complete(const GenBackend& backend, const std::vector<ChatMessage>& messages) override;
};

/// In-process transport driven by a callback; counts every call it receives.
class MockChatTransport final : public ChatTransport {
public:
    using Handler = std::function<std::string(const std::vector<ChatMessage>&)>;

    explicit MockChatTransport(Handler handler) : handler_(std::move(handler)) {}

    std::string complete(const GenBackend& backend, const std::vector<ChatMessage>& messages) override;
    std::size_t calls() const noexcept { return calls_.load(); }

private:
    Handler handler_;
    std::atomic<std::size_t> calls_{0};
};

struct RetryPolicy {
    int max_retries = 2;  // attempts = max_retries + 1
    std::chrono::milliseconds initial_backoff{1000};
    double multiplier = 2.0;
};

using Sleeper = std::function<void(std::chrono::milliseconds)>;

struct GenerationOutcome {
    bool ok = false;
    std::string text;
    std::string error;
    int attempts = 0;
    std::int64_t latency_ms = 0;
};

/// A backend plus the transport and retry policy used to reach it. Only
/// TransientBackendError is retried, with exponential backoff.
class GenClient {
public:
    GenClient(GenBackend backend, std::shared_ptr<ChatTransport> transport, RetryPolicy retry = {}, Sleeper sleeper = {});

    GenerationOutcome generate(std::string_view prompt) const;

    const GenBackend& backend() const noexcept { return backend_; }
    std::size_t transport_calls() const noexcept { return calls_->load(); }

private:
    GenBackend backend_;
    std::shared_ptr<ChatTransport> transport_;
    RetryPolicy retry_;
    Sleeper sleeper_;
    std::shared_ptr<std::atomic<std::size_t>> calls_ = std::make_shared<std::atomic<std::size_t>>(0);
};

}  // namespace msqa
