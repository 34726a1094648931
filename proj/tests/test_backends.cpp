// Copyright (C) 2026 The mmdg Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <array>
#include <atomic>
#include <thread>

#include <json.hpp>

#include "mmdg/backends.hpp"
#include "mmdg/hashing.hpp"
#include "mmdg/mock_backends.hpp"
#include "mmdg/png.hpp"
#include "mmdg/qa_gate.hpp"
#include "support.hpp"

using namespace mmdg;
using json = nlohmann::json;

namespace {

ErrorCode code_of(const std::function<void()>& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.code();
    }
    FAIL("expected mmdg::Error");
    return ErrorCode::InvalidArgument;
}

EndpointConfig endpoint(const std::string& url) {
    EndpointConfig e;
    e.url = url;
    e.model = "m";
    e.timeout_ms = 5000;
    return e;
}

// Chat endpoint replying with scripted statuses in order, then 200.
struct ScriptedChatServer {
    explicit ScriptedChatServer(std::vector<int> statuses) : script(std::move(statuses)) {
        server.Post(std::string(routes::kChat), [this](const httplib::Request& req, httplib::Response& res) {
            const auto n = hits.fetch_add(1);
            last_auth = req.get_header_value("Authorization");
            if (static_cast<std::size_t>(n) < script.size()) {
                res.status = script[static_cast<std::size_t>(n)];
                return;
            }
            const json reply{{"choices", json::array({{{"message", {{"content", "ok"}}}}})}};
            res.set_content(reply.dump(), "application/json");
        });
    }

    std::vector<int> script;
    std::atomic<int> hits{0};
    std::string last_auth;
    httplib::Server server;
};

class FakeEmbed final : public EmbedBackend {
public:
    explicit FakeEmbed(std::vector<std::vector<double>> replies) : replies_(std::move(replies)) {}
    std::vector<double> embed_text(std::string_view) override { return replies_.at(next_++); }
    std::vector<double> embed_image(const ImagePayload&) override { return replies_.at(next_++); }

private:
    std::vector<std::vector<double>> replies_;
    std::size_t next_ = 0;
};

const RetryPolicy kFastRetry{3, std::chrono::milliseconds(1)};

}  // namespace

TEST_CASE("HTTP clients against the mock routes reproduce the in-process mocks") {
    test::QaFixture fx = test::qa_fixture();
    fx.fixture.dim = 32;
    auto mocks = std::make_shared<MockBackends>(fx.fixture);
    httplib::Server server;
    mount_mock_routes(server, mocks);
    test::ServerThread thread(server);

    ChatClient chat(make_http_chat_backend(endpoint(thread.url())), kFastRetry, 2);
    ChatRequest req;
    req.system_text = "sys";
    req.user_text = test::scanner_user_text(fx.dialogues[1]);
    req.prompt_kind = "zero_shot";
    req.seed = 9;
    CHECK(chat.chat_complete(req).completion_text == mocks->chat()->complete(req).completion_text);

    ImageClient image(make_http_image_backend(endpoint(thread.url())), kFastRetry, 2);
    ImageRequest ireq;
    ireq.description = "a bowl of ramen";
    ireq.seed = 3;
    ireq.backend_model_id = "m";
    const auto via_http = image.generate_image(ireq);
    CHECK(via_http == mocks->image()->generate(ireq));
    CHECK(png::is_png(via_http.bytes));

    EmbedClient embed(make_http_embed_backend(endpoint(thread.url())), kFastRetry, 2, 32);
    const auto text_vec = embed.embed_text("a bowl of ramen");
    const auto image_vec = embed.embed_image(via_http);
    CHECK(embed.dim() == 32);
    CHECK(text_vec.values().size() == 32);
    // The mock encodes its clip target as the image/text cosine.
    double cos = 0.0;
    for (std::size_t i = 0; i < 32; ++i) cos += text_vec.values()[i] * image_vec.values()[i];
    CHECK(cos == doctest::Approx(0.30).epsilon(1e-9));

    ImageRequest refused;
    refused.description = "";
    CHECK(code_of([&] { image.generate_image(refused); }) == ErrorCode::InvalidArgument);
}

TEST_CASE("HTTP status codes map to error kinds and retry budgets") {
    struct Case {
        std::vector<int> statuses;
        std::optional<ErrorCode> expected;
        int hits;
    };
    const std::vector<Case> cases = {
        {{}, std::nullopt, 1},
        {{503}, std::nullopt, 2},
        {{429, 502}, std::nullopt, 3},
        {{500, 500, 500}, ErrorCode::TransportError, 3},
        {{408, 408, 408}, ErrorCode::Timeout, 3},
        {{400}, ErrorCode::BackendRefusal, 1},
        {{401}, ErrorCode::BackendRefusal, 1},
        {{422}, ErrorCode::BackendRefusal, 1},
    };
    for (const auto& c : cases) {
        ScriptedChatServer s(c.statuses);
        test::ServerThread thread(s.server);
        auto ep = endpoint(thread.url());
        ep.api_key = "sk-test";
        ChatClient chat(make_http_chat_backend(ep), kFastRetry, 1);
        ChatRequest req;
        req.user_text = "u";
        if (c.expected) {
            CHECK(code_of([&] { chat.chat_complete(req); }) == *c.expected);
        } else {
            CHECK(chat.chat_complete(req).completion_text == "ok");
        }
        CHECK(s.hits.load() == c.hits);
        CHECK(s.last_auth == "Bearer sk-test");
    }
}

TEST_CASE("unreachable endpoints and malformed replies are transport errors") {
    ChatClient chat(make_http_chat_backend(endpoint("http://127.0.0.1:1")),
                    RetryPolicy{2, std::chrono::milliseconds(1)}, 1);
    CHECK(code_of([&] { chat.chat_complete(ChatRequest{}); }) == ErrorCode::TransportError);

    httplib::Server server;
    server.Post(std::string(routes::kChat),
                [](const httplib::Request&, httplib::Response& res) { res.set_content("{nope", "application/json"); });
    server.Post(std::string(routes::kEmbedText), [](const httplib::Request&, httplib::Response& res) {
        res.set_content(R"({"vector":[1]})", "application/json");
    });
    test::ServerThread thread(server);
    ChatClient bad_chat(make_http_chat_backend(endpoint(thread.url())), RetryPolicy{1, {}}, 1);
    CHECK(code_of([&] { bad_chat.chat_complete(ChatRequest{}); }) == ErrorCode::TransportError);
    EmbedClient bad_embed(make_http_embed_backend(endpoint(thread.url())), RetryPolicy{1, {}}, 1);
    CHECK(code_of([&] { bad_embed.embed_text("x"); }) == ErrorCode::TransportError);
}

TEST_CASE("in-flight limiter never exceeds its limit") {
    InFlightLimiter limiter(2);
    std::atomic<int> current{0};
    std::atomic<int> worst{0};
    std::vector<std::thread> threads;
    for (int t = 0; t < 8; ++t) {
        threads.emplace_back([&] {
            for (int k = 0; k < 5; ++k) {
                auto permit = limiter.acquire();
                const int now = ++current;
                int seen = worst.load();
                while (now > seen && !worst.compare_exchange_weak(seen, now)) {
                }
                std::this_thread::sleep_for(std::chrono::milliseconds(1));
                --current;
            }
        });
    }
    for (auto& t : threads) t.join();
    CHECK(worst.load() <= 2);
    CHECK(limiter.peak() <= 2);
    CHECK(limiter.peak() >= 1);
}

TEST_CASE("embed client normalizes and pins the dimension") {
    EmbedClient pinned(std::make_shared<FakeEmbed>(std::vector<std::vector<double>>{{3, 4}, {1, 0, 0}}), kFastRetry,
                       1);
    const auto e = pinned.embed_text("a");
    CHECK(e.values()[0] == doctest::Approx(0.6));
    CHECK(pinned.dim() == 2);
    CHECK(code_of([&] { pinned.embed_text("b"); }) == ErrorCode::DimensionMismatch);

    EmbedClient expected(std::make_shared<FakeEmbed>(std::vector<std::vector<double>>{{1, 0, 0}}), kFastRetry, 1, 4);
    CHECK(code_of([&] { expected.embed_text("a"); }) == ErrorCode::DimensionMismatch);
}

TEST_CASE("png writer produces a readable text chunk") {
    std::array<std::uint8_t, 2 * 2 * 3> rgb{};
    for (std::size_t i = 0; i < rgb.size(); ++i) rgb[i] = static_cast<std::uint8_t>(i * 20);
    const auto bytes = png::encode_rgb(2, 2, rgb, {{"k1", "v1"}, {"k2", "{\"x\":1}"}});
    CHECK(png::is_png(bytes));
    CHECK(bytes.substr(1, 3) == "PNG");
    CHECK(png::find_text(bytes, "k1") == std::optional<std::string>("v1"));
    CHECK(png::find_text(bytes, "k2") == std::optional<std::string>("{\"x\":1}"));
    CHECK_FALSE(png::find_text(bytes, "k3"));
    CHECK_FALSE(png::is_png("GIF89a"));
    CHECK_FALSE(png::find_text("garbage", "k1"));
    CHECK_FALSE(png::find_text(bytes.substr(0, 20), "k1"));
}

TEST_CASE("mock fixture JSON round-trips and scripted statuses fail") {
    auto fx = test::qa_fixture().fixture;
    fx.chat["dead"] = {"", 503};
    fx.images["blocked"] = {std::nullopt, std::nullopt, std::nullopt, 400};
    const auto again = MockFixture::parse(fx.dump());
    CHECK(again.dump() == fx.dump());
    CHECK(again.images.at("a knife fight").unsafe_concept == fx.images.at("a knife fight").unsafe_concept);

    MockBackends mocks(again);
    ImageRequest req;
    req.description = "blocked";
    CHECK(code_of([&] { mocks.image()->generate(req); }) == ErrorCode::BackendRefusal);
    CHECK(code_of([] { MockFixture::parse("{\"chat\": 3}"); }) == ErrorCode::ParseError);
}

TEST_CASE("mock chat keys and heuristic feedback rewrite") {
    const auto key = mock_chat_key("hello");
    CHECK(key.size() == 16);
    CHECK(key == hex64(fnv1a64("hello")));

    ChatRequest fb;
    fb.prompt_kind = "feedback";
    fb.user_text = "Utterance 0: x\nRewrite the image description for Utterance 3 ...\nPrevious description: a cat\n";
    CHECK(heuristic_completion(fb) ==
          "<result>Utterance: 3: a cat, clear photograph</result><reason>rewritten after failed quality checks</reason>");
}

TEST_CASE("unscripted mock images draw scores from the default ranges") {
    MockFixture fx;
    fx.dim = 64;
    fx.default_clip = {0.25, 0.26};
    fx.default_aesthetic = {0.55, 0.56};
    MockBackends mocks(fx);
    auto head = AestheticHead::axis_probe(64, 0);
    for (int s = 0; s < 10; ++s) {
        ImageRequest req;
        req.description = "thing " + std::to_string(s);
        req.seed = static_cast<std::uint64_t>(s);
        const auto img = mocks.image()->generate(req);
        auto t = Embedding::normalize(mocks.embed()->embed_text(req.description));
        auto e = Embedding::normalize(mocks.embed()->embed_image(img));
        const double clip = clip_score(e, t);
        CHECK(clip >= 0.25 - 1e-9);
        CHECK(clip <= 0.26 + 1e-9);
        const double aes = aesthetic_score(e, head);
        CHECK(aes >= 0.55 - 1e-9);
        CHECK(aes <= 0.56 + 1e-9);
    }
}
