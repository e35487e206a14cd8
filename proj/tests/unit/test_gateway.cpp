#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <doctest.h>
#include <httplib.h>
#include <json.hpp>

#include <atomic>
#include <cmath>
#include <thread>

#include "fixtures.hpp"
#include "nrep/gateway.hpp"
#include "nrep/http_backend.hpp"
#include "nrep/log.hpp"

using namespace nrep;
using namespace nrep::testing;

namespace {

ChatRequest request(const std::string& model, const std::string& user) {
    return {model, {{"system", "be brief"}, {"user", user}}};
}

// Local chat-completions server for the HTTP client tests.
class LocalServer {
public:
    LocalServer() {
        port_ = server_.bind_to_any_port("127.0.0.1");
        thread_ = std::thread([this] { server_.listen_after_bind(); });
        server_.wait_until_ready();
    }
    ~LocalServer() {
        server_.stop();
        thread_.join();
    }
    httplib::Server& server() { return server_; }
    HttpOptions options() const {
        HttpOptions options;
        options.base_url = "http://127.0.0.1:" + std::to_string(port_) + "/v1";
        options.api_key = "test-key";
        options.initial_backoff = std::chrono::milliseconds(1);
        options.max_retries = 2;
        return options;
    }

private:
    httplib::Server server_;
    int port_ = 0;
    std::thread thread_;
};

const char* kReply = R"({"choices":[{"message":{"role":"assistant","content":"SELECT 1"}}],)"
                     R"("usage":{"prompt_tokens":12,"completion_tokens":3}})";

}  // namespace

TEST_CASE("fixture keys depend on model and every message") {
    const std::string base = fixture_key(request("m", "q"));
    CHECK(base.size() == 64);
    CHECK(fixture_key(request("m", "q")) == base);
    CHECK(fixture_key(request("m2", "q")) != base);
    CHECK(fixture_key(request("m", "q ")) != base);
    ChatRequest reordered{"m", {{"user", "q"}, {"system", "be brief"}}};
    CHECK(fixture_key(reordered) != base);
    ChatRequest warmer = request("m", "q");
    warmer.temperature = 0.7;
    CHECK(fixture_key(warmer) == base);
}

TEST_CASE("replay returns recorded responses verbatim") {
    const ChatRequest r = request("m", "hello");
    ReplayBackend replay(std::vector<FixtureEntry>{{fixture_key(r), "  exact text\n", 11, 7}});
    const ChatResponse response = replay.complete(r);
    CHECK(response.text == "  exact text\n");
    CHECK(response.usage == TokenUsage{11, 7});
}

TEST_CASE("a replay miss names the fixture key") {
    ReplayBackend replay(std::vector<FixtureEntry>{});
    const ChatRequest r = request("m", "unseen");
    try {
        replay.complete(r);
        FAIL("expected a miss");
    } catch (const BackendError& e) {
        CHECK(e.kind() == BackendError::Kind::ReplayMiss);
        CHECK(std::string(e.what()).find(fixture_key(r)) != std::string::npos);
    }
}

TEST_CASE("recording writes one line per distinct key and replays identically") {
    TempDir dir;
    std::atomic<int> upstream_calls{0};
    FunctionBackend upstream([&](const ChatRequest& r) {
        ++upstream_calls;
        return ChatResponse{"echo " + r.messages.back().content, {5, 2}};
    });
    const std::string path = dir.file("fx.jsonl");
    {
        RecordingBackend recorder(upstream, path);
        recorder.complete(request("m", "a"));
        recorder.complete(request("m", "b"));
        recorder.complete(request("m", "a"));
    }
    CHECK(upstream_calls == 2);
    CHECK(load_fixtures(path).size() == 2);
    {
        // Reopening keeps prior entries and does not duplicate them.
        RecordingBackend recorder(upstream, path);
        recorder.complete(request("m", "a"));
    }
    CHECK(upstream_calls == 2);
    ReplayBackend replay(path);
    CHECK(replay.size() == 2);
    CHECK(replay.complete(request("m", "b")).text == "echo b");
    CHECK(replay.complete(request("m", "a")).usage == TokenUsage{5, 2});
}

TEST_CASE("malformed fixture files are rejected with a location") {
    TempDir dir;
    write_file(dir.file("bad.jsonl"), "{\"key_hash\": \"x\", \"response_text\": \"y\"}\nnot json\n");
    try {
        load_fixtures(dir.file("bad.jsonl"));
        FAIL("expected an error");
    } catch (const BackendError& e) {
        CHECK(e.kind() == BackendError::Kind::Config);
        CHECK(std::string(e.what()).find(":2:") != std::string::npos);
    }
    CHECK_THROWS_AS(load_fixtures(dir.file("absent.jsonl")), BackendError);
}

TEST_CASE("mock embeddings are deterministic unit vectors") {
    MockEmbeddingBackend embedder(32);
    const auto a = embedder.embed({"how many users", "total revenue", "how many users"});
    REQUIRE(a.size() == 3);
    CHECK(a[0] == a[2]);
    CHECK(a[0] != a[1]);
    for (const auto& v : a) {
        CHECK(v.size() == 32);
        double norm = 0;
        for (double x : v) norm += x * x;
        CHECK(std::sqrt(norm) == doctest::Approx(1.0));
    }
    CHECK(MockEmbeddingBackend(32).embed({"total revenue"})[0] == a[1]);
}

TEST_CASE("cosine similarity recomputed by hand") {
    MockEmbeddingBackend embedder(16);
    const auto vectors = embedder.embed({"a", "b", "c", "d"});
    for (const auto& x : vectors) {
        for (const auto& y : vectors) {
            double dot = 0, nx = 0, ny = 0;
            for (size_t i = 0; i < x.size(); ++i) {
                dot += x[i] * y[i];
                nx += x[i] * x[i];
                ny += y[i] * y[i];
            }
            CHECK(cosine_similarity(x, y) == doctest::Approx(dot / std::sqrt(nx * ny)));
        }
    }
    CHECK(cosine_similarity({0, 0}, {1, 0}) == 0.0);
    CHECK(cosine_similarity({2, 0}, {5, 0}) == doctest::Approx(1.0));
    CHECK_THROWS(cosine_similarity({1}, {1, 2}));
    std::vector<double> zero{0, 0};
    normalize_in_place(zero);
    CHECK(zero == std::vector<double>{0, 0});
}

TEST_CASE("gateway books usage to the caller and its own ledger under concurrency") {
    FunctionBackend backend([](const ChatRequest&) { return ChatResponse{"ok", {3, 1}}; });
    Gateway gateway(backend, 2);
    CostLedger shared;
    std::vector<std::thread> threads;
    for (int t = 0; t < 6; ++t) {
        threads.emplace_back([&] {
            for (int i = 0; i < 50; ++i) gateway.complete(request("m", "x"), Stage::Generation, shared);
        });
    }
    for (auto& thread : threads) thread.join();
    CHECK(shared.total() == Tally{300, {900, 300}});
    CHECK(gateway.ledger() == shared);
    CHECK(shared.by_stage().count("generation") == 1);
}

TEST_CASE("gateway bounds calls in flight") {
    std::atomic<int> active{0}, peak{0};
    FunctionBackend backend([&](const ChatRequest&) {
        const int now = ++active;
        int seen = peak.load();
        while (now > seen && !peak.compare_exchange_weak(seen, now)) {
        }
        std::this_thread::sleep_for(std::chrono::milliseconds(2));
        --active;
        return ChatResponse{"ok", {}};
    });
    Gateway gateway(backend, 3);
    CostLedger ledger;
    std::vector<std::thread> threads;
    for (int t = 0; t < 8; ++t) {
        threads.emplace_back([&] {
            for (int i = 0; i < 5; ++i) gateway.complete(request("m", "x"), Stage::Linking, ledger);
        });
    }
    for (auto& thread : threads) thread.join();
    CHECK(peak.load() <= 3);
    CHECK(ledger.total().calls == 40);
}

TEST_CASE("chat request body and reply parsing") {
    const auto body = nlohmann::json::parse(chat_request_body(request("gpt-4o", "q")));
    CHECK(body["model"] == "gpt-4o");
    CHECK(body["messages"].size() == 2);
    CHECK(body["temperature"] == 0.0);
    const ChatResponse response = parse_chat_response(kReply);
    CHECK(response.text == "SELECT 1");
    CHECK(response.usage == TokenUsage{12, 3});
    CHECK(parse_chat_response(R"({"choices":[{"message":{"content":null}}]})").text.empty());
    CHECK_THROWS_AS(parse_chat_response("{}"), BackendError);
}

TEST_CASE("http backend retries server errors and fails fast on client errors") {
    ScopedLogCapture quiet;
    LocalServer local;
    std::atomic<int> hits{0};
    std::string auth;
    local.server().Post("/v1/chat/completions", [&](const httplib::Request& req, httplib::Response& res) {
        auth = req.get_header_value("Authorization");
        const auto body = nlohmann::json::parse(req.body);
        const std::string user = body["messages"].back()["content"];
        const int n = ++hits;
        if (user == "flaky" && n < 3) {
            res.status = 503;
            return;
        }
        if (user == "bad") {
            res.status = 400;
            res.set_content("{\"error\":\"nope\"}", "application/json");
            return;
        }
        res.set_content(kReply, "application/json");
    });
    HttpChatBackend backend(local.options());

    const ChatResponse response = backend.complete(request("m", "flaky"));
    CHECK(response.text == "SELECT 1");
    CHECK(hits == 3);
    CHECK(auth == "Bearer test-key");

    hits = 0;
    try {
        backend.complete(request("m", "bad"));
        FAIL("expected an error");
    } catch (const BackendError& e) {
        CHECK(e.kind() == BackendError::Kind::HttpStatus);
        CHECK(e.status() == 400);
        CHECK(e.body().find("nope") != std::string::npos);
    }
    CHECK(hits == 1);
}

TEST_CASE("http backend gives up after the retry budget") {
    ScopedLogCapture quiet;
    LocalServer local;
    std::atomic<int> hits{0};
    local.server().Post("/v1/chat/completions", [&](const httplib::Request&, httplib::Response& res) {
        ++hits;
        res.status = 429;
    });
    HttpChatBackend backend(local.options());
    CHECK_THROWS_AS(backend.complete(request("m", "x")), BackendError);
    CHECK(hits == 3);
}

TEST_CASE("http embeddings are reordered by index and normalized") {
    LocalServer local;
    local.server().Post("/v1/embeddings", [](const httplib::Request&, httplib::Response& res) {
        res.set_content(R"({"data":[{"index":1,"embedding":[0,2]},{"index":0,"embedding":[3,4]}]})",
                        "application/json");
    });
    HttpEmbeddingBackend embedder(local.options(), "e");
    const auto vectors = embedder.embed({"a", "b"});
    REQUIRE(vectors.size() == 2);
    CHECK(vectors[0][0] == doctest::Approx(0.6));
    CHECK(vectors[0][1] == doctest::Approx(0.8));
    CHECK(vectors[1] == std::vector<double>{0, 1});
    CHECK(embedder.embed({}).empty());
}
