#include <doctest.h>

#include <httplib.h>

#include <cstdlib>
#include <thread>

#include "msqa/backend.hpp"
#include "msqa/errors.hpp"
#include "msqa/http.hpp"
#include "msqa/worker_pool.hpp"

using namespace msqa;
using namespace std::chrono_literals;

namespace {

GenBackend backend(std::string url = "http://127.0.0.1:1/chat", BackendRole role = BackendRole::llm) {
    GenBackend b;
    b.endpoint = {std::move(url), "toy-model", ""};
    b.role = role;
    b.timeout = 2000ms;
    return b;
}

struct RecordingSleeper {
    std::shared_ptr<std::vector<std::chrono::milliseconds>> waits = std::make_shared<std::vector<std::chrono::milliseconds>>();
    Sleeper fn() {
        return [w = waits](std::chrono::milliseconds d) { w->push_back(d); };
    }
};

// Local chat server on an ephemeral port, stopped on scope exit.
class ChatServer {
public:
    ChatServer() {
        server_.Post("/chat", [this](const httplib::Request& req, httplib::Response& res) {
            last_body = req.body;
            last_auth = req.get_header_value("Authorization");
            const auto j = nlohmann::json::parse(req.body);
            res.set_content(nlohmann::json{{"content", "echo: " + j["messages"][0]["content"].get<std::string>()}}.dump(),
                            "application/json");
        });
        server_.Post("/busy", [](const httplib::Request&, httplib::Response& res) { res.status = 503; });
        server_.Post("/throttle", [](const httplib::Request&, httplib::Response& res) { res.status = 429; });
        server_.Post("/deny", [](const httplib::Request&, httplib::Response& res) { res.status = 401; });
        server_.Post("/garbled", [](const httplib::Request&, httplib::Response& res) {
            res.set_content("{\"text\": \"no content field\"}", "application/json");
        });
        port_ = server_.bind_to_any_port("127.0.0.1");
        thread_ = std::thread([this] { server_.listen_after_bind(); });
        server_.wait_until_ready();
    }
    ~ChatServer() {
        server_.stop();
        thread_.join();
    }
    std::string url(const std::string& path) const { return "http://127.0.0.1:" + std::to_string(port_) + path; }

    std::string last_body;
    std::string last_auth;

private:
    httplib::Server server_;
    int port_ = 0;
    std::thread thread_;
};

}  // namespace

TEST_SUITE("backend") {
    TEST_CASE("chat request carries model, messages and decoding") {
        auto b = backend();
        b.decoding = {0.0, 256};
        const auto j = make_chat_request(b, {{"user", "hi"}});
        CHECK(j["model"] == "toy-model");
        CHECK(j["messages"][0]["role"] == "user");
        CHECK(j["messages"][0]["content"] == "hi");
        CHECK(j["temperature"] == 0.0);
        CHECK(j["max_tokens"] == 256);
    }

    TEST_CASE("reply parsing") {
        CHECK(parse_chat_reply(R"({"content":"ok"})") == "ok");
        CHECK_THROWS_AS(parse_chat_reply("not json"), ProtocolError);
        CHECK_THROWS_AS(parse_chat_reply(R"({"content":5})"), ProtocolError);
        CHECK_THROWS_AS(parse_chat_reply(R"(["content"])"), ProtocolError);
    }

    TEST_CASE("fingerprint tracks model, url, role and decoding") {
        const auto a = backend();
        auto b = a;
        CHECK(a.fingerprint() == b.fingerprint());
        b.decoding.max_tokens = 7;
        CHECK(a.fingerprint() != b.fingerprint());
        b = a;
        b.role = BackendRole::expert;
        CHECK(a.fingerprint() != b.fingerprint());
        b = a;
        b.endpoint.model = "other";
        CHECK(a.fingerprint() != b.fingerprint());
        CHECK(a.fingerprint().rfind("toy-model@", 0) == 0);
    }

    TEST_CASE("transient errors are retried with exponential backoff") {
        int failures_left = 2;
        auto transport = std::make_shared<MockChatTransport>([&](const std::vector<ChatMessage>&) -> std::string {
            if (failures_left-- > 0) throw TransientBackendError("HTTP 503");
            return "fine";
        });
        RecordingSleeper sleeper;
        GenClient client(backend(), transport, RetryPolicy{2, 100ms, 2.0}, sleeper.fn());
        const auto out = client.generate("q");
        CHECK(out.ok);
        CHECK(out.text == "fine");
        CHECK(out.attempts == 3);
        CHECK(client.transport_calls() == 3);
        REQUIRE(sleeper.waits->size() == 2);
        CHECK((*sleeper.waits)[0] == 100ms);
        CHECK((*sleeper.waits)[1] == 200ms);
    }

    TEST_CASE("persistent transient failure gives up after max_retries") {
        auto transport = std::make_shared<MockChatTransport>(
            [](const std::vector<ChatMessage>&) -> std::string { throw TransientBackendError("timeout"); });
        RecordingSleeper sleeper;
        GenClient client(backend(), transport, RetryPolicy{3, 10ms, 2.0}, sleeper.fn());
        const auto out = client.generate("q");
        CHECK_FALSE(out.ok);
        CHECK(out.attempts == 4);
        CHECK(out.error == "timeout");
        CHECK(sleeper.waits->size() == 3);
    }

    TEST_CASE("protocol and permanent errors are not retried") {
        auto proto = std::make_shared<MockChatTransport>(
            [](const std::vector<ChatMessage>&) -> std::string { throw ProtocolError("no content"); });
        RecordingSleeper sleeper;
        GenClient a(backend(), proto, {}, sleeper.fn());
        const auto out = a.generate("q");
        CHECK_FALSE(out.ok);
        CHECK(out.attempts == 1);
        CHECK(out.error.rfind("protocol error:", 0) == 0);

        auto denied = std::make_shared<MockChatTransport>(
            [](const std::vector<ChatMessage>&) -> std::string { throw BackendError("HTTP 401"); });
        GenClient b(backend(), denied, {}, sleeper.fn());
        CHECK(b.generate("q").attempts == 1);
        CHECK(sleeper.waits->empty());
    }

    TEST_CASE("client validation") {
        CHECK_THROWS_AS(GenClient(backend(), nullptr), ValidationError);
        auto b = backend();
        b.decoding.temperature = -1;
        auto t = std::make_shared<MockChatTransport>([](const auto&) { return std::string(); });
        CHECK_THROWS_AS(GenClient(b, t), ValidationError);
        CHECK_THROWS_AS(GenClient(backend(), t, RetryPolicy{-1, 1ms, 2.0}), ValidationError);
    }

    TEST_CASE("http transport against a local server") {
        ChatServer server;
        HttpChatTransport http;
        RecordingSleeper sleeper;

        SUBCASE("success and wire format") {
            ::setenv("MSQA_TEST_TOKEN", "sekrit", 1);
            auto b = backend(server.url("/chat"));
            b.endpoint.auth_env = "MSQA_TEST_TOKEN";
            CHECK(http.complete(b, {{"user", "ping"}}) == "echo: ping");
            const auto sent = nlohmann::json::parse(server.last_body);
            CHECK(sent["model"] == "toy-model");
            CHECK(sent["max_tokens"] == 1024);
            CHECK(server.last_auth == "Bearer sekrit");
            ::unsetenv("MSQA_TEST_TOKEN");
        }
        SUBCASE("5xx and 429 are transient") {
            CHECK_THROWS_AS(http.complete(backend(server.url("/busy")), {{"user", "x"}}), TransientBackendError);
            CHECK_THROWS_AS(http.complete(backend(server.url("/throttle")), {{"user", "x"}}), TransientBackendError);
            GenClient client(backend(server.url("/busy")), std::make_shared<HttpChatTransport>(), RetryPolicy{2, 1ms, 2.0},
                             sleeper.fn());
            const auto out = client.generate("x");
            CHECK_FALSE(out.ok);
            CHECK(out.attempts == 3);
        }
        SUBCASE("4xx is permanent") {
            CHECK_THROWS_AS(http.complete(backend(server.url("/deny")), {{"user", "x"}}), BackendError);
        }
        SUBCASE("missing content is a protocol error") {
            CHECK_THROWS_AS(http.complete(backend(server.url("/garbled")), {{"user", "x"}}), ProtocolError);
        }
    }

    TEST_CASE("unreachable endpoint is transient") {
        HttpChatTransport http;
        auto b = backend("http://127.0.0.1:1/chat");
        b.timeout = 500ms;
        CHECK_THROWS_AS(http.complete(b, {{"user", "x"}}), TransientBackendError);
    }

    TEST_CASE("url parsing") {
        const auto u = http::parse_url("https://example.com:8443/v1/chat?x=1");
        CHECK(u.scheme_host_port == "https://example.com:8443");
        CHECK(u.path == "/v1/chat?x=1");
        CHECK(http::parse_url("http://h").path == "/");
        CHECK_THROWS_AS(http::parse_url("ftp://h/x"), ValidationError);
    }
}

TEST_SUITE("worker_pool") {
    TEST_CASE("every index is visited exactly once") {
        for (std::size_t width : {1u, 2u, 8u}) {
            std::vector<std::atomic<int>> seen(257);
            parallel_for(seen.size(), width, [&](std::size_t i) { ++seen[i]; });
            for (const auto& s : seen) CHECK(s.load() == 1);
        }
        parallel_for(0, 4, [](std::size_t) { FAIL("called"); });
    }

    TEST_CASE("exceptions propagate") {
        CHECK_THROWS_AS(parallel_for(50, 4,
                                     [](std::size_t i) {
                                         if (i == 17) throw ValidationError("boom");
                                     }),
                        ValidationError);
    }
}
