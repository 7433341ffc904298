#include "msqa/backend.hpp"

#include <cstdlib>
#include <sstream>
#include <thread>

#include "msqa/errors.hpp"
#include "msqa/hashing.hpp"
#include "msqa/http.hpp"

namespace msqa {

std::string_view to_string(BackendRole role) noexcept {
    switch (role) {
        case BackendRole::llm: return "LLM";
        case BackendRole::expert: return "EXPERT";
        case BackendRole::judge: return "JUDGE";
    }
    return "UNKNOWN";
}

std::string GenBackend::fingerprint() const {
    std::ostringstream desc;
    desc << to_string(role) << '|' << endpoint.base_url << '|' << endpoint.model << '|' << decoding.temperature << '|'
         << decoding.max_tokens;
    return endpoint.model + "@" + sha256_hex(desc.str()).substr(0, 16);
}

nlohmann::json make_chat_request(const GenBackend& backend, const std::vector<ChatMessage>& messages) {
    nlohmann::json msgs = nlohmann::json::array();
    for (const auto& m : messages) msgs.push_back({{"role", m.role}, {"content", m.content}});
    return nlohmann::json{{"model", backend.endpoint.model},
                          {"messages", msgs},
                          {"temperature", backend.decoding.temperature},
                          {"max_tokens", backend.decoding.max_tokens}};
}

std::string parse_chat_reply(std::string_view body) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(body);
    } catch (const nlohmann::json::exception&) {
        throw ProtocolError("backend reply is not JSON");
    }
    if (!j.is_object() || !j.contains("content") || !j["content"].is_string())
        throw ProtocolError("backend reply lacks a string 'content' field");
    return j["content"].get<std::string>();
}

std::string HttpChatTransport::complete(const GenBackend& backend, const std::vector<ChatMessage>& messages) {
    std::map<std::string, std::string> headers;
    if (!backend.endpoint.auth_env.empty()) {
        if (const char* token = std::getenv(backend.endpoint.auth_env.c_str())) headers["Authorization"] = std::string("Bearer ") + token;
    }
    const auto response = http::post_json(backend.endpoint.base_url, make_chat_request(backend, messages).dump(), headers, backend.timeout);
    if (response.status == 429 || response.status >= 500)
        throw TransientBackendError("backend returned HTTP " + std::to_string(response.status));
    if (response.status != 200) throw BackendError("backend returned HTTP " + std::to_string(response.status));
    return parse_chat_reply(response.body);
}

std::string MockChatTransport::complete(const GenBackend&, const std::vector<ChatMessage>& messages) {
    ++calls_;
    return handler_(messages);
}

GenClient::GenClient(GenBackend backend, std::shared_ptr<ChatTransport> transport, RetryPolicy retry, Sleeper sleeper)
    : backend_(std::move(backend)), transport_(std::move(transport)), retry_(retry), sleeper_(std::move(sleeper)) {
    if (!transport_) throw ValidationError("generation client needs a transport");
    if (backend_.decoding.temperature < 0.0) throw ValidationError("temperature must be non-negative");
    if (retry_.max_retries < 0) throw ValidationError("max_retries must be non-negative");
    if (!sleeper_) sleeper_ = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
}

GenerationOutcome GenClient::generate(std::string_view prompt) const {
    const std::vector<ChatMessage> messages{{"user", std::string(prompt)}};
    GenerationOutcome outcome;
    const auto start = std::chrono::steady_clock::now();
    auto backoff = retry_.initial_backoff;
    for (int attempt = 0; attempt <= retry_.max_retries; ++attempt) {
        ++outcome.attempts;
        ++*calls_;
        try {
            outcome.text = transport_->complete(backend_, messages);
            outcome.ok = true;
            break;
        } catch (const TransientBackendError& e) {
            outcome.error = e.what();
            if (attempt < retry_.max_retries) {
                sleeper_(backoff);
                backoff = std::chrono::milliseconds(static_cast<std::int64_t>(static_cast<double>(backoff.count()) * retry_.multiplier));
            }
        } catch (const ProtocolError& e) {
            outcome.error = std::string("protocol error: ") + e.what();
            break;
        } catch (const BackendError& e) {
            outcome.error = e.what();
            break;
        }
    }
    outcome.latency_ms =
        std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - start).count();
    return outcome;
}

}  // namespace msqa
