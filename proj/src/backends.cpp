// Copyright (C) 2026 The mmdg Authors
// SPDX-License-Identifier: Apache-2.0

#include "mmdg/backends.hpp"

#include <chrono>
#include <random>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "mmdg/mock_backends.hpp"

namespace mmdg {

using json = nlohmann::json;

InFlightLimiter::InFlightLimiter(std::size_t limit) : limit_(limit == 0 ? 1 : limit) {}

InFlightLimiter::Permit::~Permit() {
    if (owner_) owner_->release();
}

InFlightLimiter::Permit InFlightLimiter::acquire() {
    std::unique_lock lock(mu_);
    cv_.wait(lock, [&] { return in_flight_ < limit_; });
    ++in_flight_;
    peak_ = std::max(peak_, in_flight_);
    return Permit(this);
}

void InFlightLimiter::release() {
    {
        std::lock_guard lock(mu_);
        --in_flight_;
    }
    cv_.notify_one();
}

std::size_t InFlightLimiter::peak() const {
    std::lock_guard lock(mu_);
    return peak_;
}

bool is_retryable(ErrorCode code) {
    return code == ErrorCode::TransportError || code == ErrorCode::Timeout;
}

namespace {

void backoff_sleep(const RetryPolicy& policy, int failed_attempts) {
    if (policy.backoff.count() <= 0) return;
    thread_local std::mt19937_64 rng{std::random_device{}()};
    std::uniform_real_distribution<double> jitter(0.5, 1.5);
    const double ms = static_cast<double>(policy.backoff.count()) *
                      static_cast<double>(1LL << std::min(failed_attempts - 1, 10)) * jitter(rng);
    std::this_thread::sleep_for(std::chrono::duration<double, std::milli>(ms));
}

template <typename Fn>
auto with_retry(const RetryPolicy& policy, InFlightLimiter& limiter, Fn&& fn) {
    const int attempts = std::max(1, policy.attempts);
    for (int attempt = 1;; ++attempt) {
        try {
            auto permit = limiter.acquire();
            return fn();
        } catch (const Error& e) {
            if (!is_retryable(e.code()) || attempt >= attempts) throw;
        }
        backoff_sleep(policy, attempt);
    }
}

}  // namespace

ChatClient::ChatClient(std::shared_ptr<ChatBackend> backend, RetryPolicy retry, std::size_t max_in_flight)
    : backend_(std::move(backend)), retry_(retry), limiter_(max_in_flight) {}

ChatResponse ChatClient::chat_complete(const ChatRequest& req) {
    return with_retry(retry_, limiter_, [&] { return backend_->complete(req); });
}

ImageClient::ImageClient(std::shared_ptr<ImageBackend> backend, RetryPolicy retry, std::size_t max_in_flight)
    : backend_(std::move(backend)), retry_(retry), limiter_(max_in_flight) {}

ImagePayload ImageClient::generate_image(const ImageRequest& req) {
    if (req.description.find_first_not_of(" \t\r\n") == std::string::npos) {
        throw Error(ErrorCode::InvalidArgument, "image description is empty");
    }
    if (req.width <= 0 || req.height <= 0) {
        throw Error(ErrorCode::InvalidArgument, "image size must be positive");
    }
    return with_retry(retry_, limiter_, [&] { return backend_->generate(req); });
}

EmbedClient::EmbedClient(std::shared_ptr<EmbedBackend> backend, RetryPolicy retry,
                         std::size_t max_in_flight, std::size_t expected_dim)
    : backend_(std::move(backend)), retry_(retry), limiter_(max_in_flight), dim_(expected_dim) {}

std::size_t EmbedClient::dim() const {
    std::lock_guard lock(dim_mu_);
    return dim_;
}

Embedding EmbedClient::finish(std::vector<double> raw) {
    {
        std::lock_guard lock(dim_mu_);
        if (dim_ == 0) dim_ = raw.size();
        if (raw.size() != dim_) {
            throw Error(ErrorCode::DimensionMismatch, "backend returned " + std::to_string(raw.size()) +
                                                          " dims, expected " + std::to_string(dim_));
        }
    }
    return Embedding::normalize(std::move(raw));
}

Embedding EmbedClient::embed_text(std::string_view text) {
    if (text.empty()) throw Error(ErrorCode::InvalidArgument, "cannot embed empty text");
    return finish(with_retry(retry_, limiter_, [&] { return backend_->embed_text(text); }));
}

Embedding EmbedClient::embed_image(const ImagePayload& image) {
    if (image.bytes.empty()) throw Error(ErrorCode::InvalidArgument, "cannot embed empty image");
    return finish(with_retry(retry_, limiter_, [&] { return backend_->embed_image(image); }));
}

// --- HTTP transports -------------------------------------------------------

namespace {

struct SplitUrl {
    std::string origin;  // scheme://host[:port]
    std::string prefix;  // path prefix without trailing '/'
};

SplitUrl split_url(const std::string& url) {
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) {
        throw Error(ErrorCode::ConfigError, "endpoint url '" + url + "' lacks a scheme");
    }
    const auto path_begin = url.find('/', scheme_end + 3);
    SplitUrl s;
    s.origin = url.substr(0, path_begin);
    if (path_begin != std::string::npos) s.prefix = url.substr(path_begin);
    while (!s.prefix.empty() && s.prefix.back() == '/') s.prefix.pop_back();
    return s;
}

class HttpTransport {
public:
    explicit HttpTransport(EndpointConfig endpoint) : endpoint_(std::move(endpoint)), url_(split_url(endpoint_.url)) {}

    httplib::Result post(std::string_view route, const std::string& body, const std::string& content_type) {
        httplib::Client client(url_.origin);
        const auto timeout = std::chrono::milliseconds(endpoint_.timeout_ms);
        client.set_connection_timeout(timeout);
        client.set_read_timeout(timeout);
        client.set_write_timeout(timeout);
        if (!endpoint_.api_key.empty()) client.set_bearer_token_auth(endpoint_.api_key);
        auto res = client.Post(url_.prefix + std::string(route), body, content_type);
        check(res, route);
        return res;
    }

    const EndpointConfig& endpoint() const noexcept { return endpoint_; }

private:
    void check(const httplib::Result& res, std::string_view route) const {
        const std::string where = endpoint_.url + std::string(route);
        if (!res) {
            const auto err = res.error();
            if (err == httplib::Error::ConnectionTimeout || err == httplib::Error::Read) {
                throw Error(ErrorCode::Timeout, where + ": " + httplib::to_string(err));
            }
            throw Error(ErrorCode::TransportError, where + ": " + httplib::to_string(err));
        }
        const int status = res->status;
        if (status >= 200 && status < 300) return;
        const std::string msg = where + ": HTTP " + std::to_string(status) + " " + res->body.substr(0, 200);
        if (status == 408) throw Error(ErrorCode::Timeout, msg);
        if (status == 429 || status >= 500) throw Error(ErrorCode::TransportError, msg);
        throw Error(ErrorCode::BackendRefusal, msg);
    }

    EndpointConfig endpoint_;
    SplitUrl url_;
};

json parse_json_body(const std::string& body, std::string_view what) {
    try {
        return json::parse(body);
    } catch (const json::exception& e) {
        throw Error(ErrorCode::TransportError, std::string(what) + ": malformed JSON response: " + e.what());
    }
}

std::vector<double> embedding_from_body(const std::string& body) {
    const auto j = parse_json_body(body, "embedding");
    if (!j.contains("embedding") || !j["embedding"].is_array()) {
        throw Error(ErrorCode::TransportError, "embedding response lacks an 'embedding' array");
    }
    return j["embedding"].get<std::vector<double>>();
}

class HttpChatBackend final : public ChatBackend {
public:
    explicit HttpChatBackend(EndpointConfig endpoint) : http_(std::move(endpoint)) {}

    ChatResponse complete(const ChatRequest& req) override {
        json body{
            {"model", http_.endpoint().model},
            {"messages", json::array({{{"role", "system"}, {"content", req.system_text}},
                                      {{"role", "user"}, {"content", req.user_text}}})},
            {"temperature", req.temperature},
            {"seed", req.seed},
            {"metadata", {{"prompt_kind", req.prompt_kind}}},
        };
        auto res = http_.post(routes::kChat, body.dump(), "application/json");
        const auto j = parse_json_body(res->body, "chat");
        ChatResponse out;
        try {
            out.completion_text = j.at("choices").at(0).at("message").at("content").get<std::string>();
        } catch (const json::exception&) {
            throw Error(ErrorCode::TransportError, "chat response lacks choices[0].message.content");
        }
        if (auto it = j.find("usage"); it != j.end() && it->is_object()) {
            for (const auto& [k, v] : it->items()) {
                if (v.is_number_integer()) out.usage[k] = v.get<long long>();
            }
        }
        return out;
    }

private:
    HttpTransport http_;
};

class HttpImageBackend final : public ImageBackend {
public:
    explicit HttpImageBackend(EndpointConfig endpoint) : http_(std::move(endpoint)) {}

    ImagePayload generate(const ImageRequest& req) override {
        json body{
            {"prompt", req.description},
            {"width", req.width},
            {"height", req.height},
            {"seed", req.seed},
            {"model", req.backend_model_id.empty() ? http_.endpoint().model : req.backend_model_id},
        };
        auto res = http_.post(routes::kImage, body.dump(), "application/json");
        ImagePayload out;
        out.bytes = res->body;
        out.media_type = res->get_header_value("Content-Type");
        if (out.media_type.empty()) out.media_type = "application/octet-stream";
        if (out.bytes.empty()) throw Error(ErrorCode::TransportError, "image backend returned no bytes");
        return out;
    }

private:
    HttpTransport http_;
};

class HttpEmbedBackend final : public EmbedBackend {
public:
    explicit HttpEmbedBackend(EndpointConfig endpoint) : http_(std::move(endpoint)) {}

    std::vector<double> embed_text(std::string_view text) override {
        json body{{"input", std::string(text)}, {"model", http_.endpoint().model}};
        return embedding_from_body(http_.post(routes::kEmbedText, body.dump(), "application/json")->body);
    }

    std::vector<double> embed_image(const ImagePayload& image) override {
        return embedding_from_body(http_.post(routes::kEmbedImage, image.bytes, image.media_type)->body);
    }

private:
    HttpTransport http_;
};

}  // namespace

std::shared_ptr<ChatBackend> make_http_chat_backend(const EndpointConfig& endpoint) {
    return std::make_shared<HttpChatBackend>(endpoint);
}

std::shared_ptr<ImageBackend> make_http_image_backend(const EndpointConfig& endpoint) {
    return std::make_shared<HttpImageBackend>(endpoint);
}

std::shared_ptr<EmbedBackend> make_http_embed_backend(const EndpointConfig& endpoint) {
    return std::make_shared<HttpEmbedBackend>(endpoint);
}

BackendSet wrap_backends(std::shared_ptr<ChatBackend> chat, std::shared_ptr<ImageBackend> image,
                         std::shared_ptr<EmbedBackend> embed, const PipelineConfig& cfg) {
    const RetryPolicy retry{cfg.backends.retries, std::chrono::milliseconds(cfg.backends.backoff_ms)};
    const auto limit = static_cast<std::size_t>(std::max(1, cfg.parallelism));
    BackendSet set;
    set.chat = std::make_shared<ChatClient>(std::move(chat), retry, limit);
    set.image = std::make_shared<ImageClient>(std::move(image), retry, limit);
    set.embed = std::make_shared<EmbedClient>(std::move(embed), retry, limit,
                                              cfg.backends.mode == "mock" ? cfg.backends.embedding_dim : 0);
    return set;
}

BackendSet make_backends(const PipelineConfig& cfg) {
    if (cfg.backends.mode == "mock") {
        auto fixture = cfg.backends.mock_fixture.empty() ? MockFixture{}
                                                         : MockFixture::load(cfg.backends.mock_fixture);
        fixture.dim = cfg.backends.embedding_dim;
        auto mocks = std::make_shared<MockBackends>(std::move(fixture));
        return wrap_backends(mocks->chat(), mocks->image(), mocks->embed(), cfg);
    }
    if (cfg.backends.mode == "http") {
        return wrap_backends(make_http_chat_backend(cfg.backends.chat),
                             make_http_image_backend(cfg.backends.image),
                             make_http_embed_backend(cfg.backends.embed), cfg);
    }
    throw Error(ErrorCode::ConfigError, "unknown backend mode '" + cfg.backends.mode + "'");
}

}  // namespace mmdg
