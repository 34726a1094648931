// Copyright (C) 2026 The mmdg Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <chrono>
#include <condition_variable>
#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "mmdg/core.hpp"

namespace mmdg {

struct ChatRequest {
    std::string system_text;
    std::string user_text;
    double temperature = 0.0;
    std::uint64_t seed = 0;
    std::string prompt_kind;  // zero_shot | few_shot | chain_of_thought | feedback
};

struct ChatResponse {
    std::string completion_text;  // raw, untrimmed
    std::map<std::string, long long> usage;
};

struct ImageRequest {
    std::string description;
    int width = 1024;
    int height = 1024;
    std::uint64_t seed = 0;
    std::string backend_model_id;
};

// Raw transports. Implementations throw Error with TransportError,
// BackendRefusal or Timeout; retry and rate limiting live in the clients.
class ChatBackend {
public:
    virtual ~ChatBackend() = default;
    virtual ChatResponse complete(const ChatRequest& req) = 0;
};

class ImageBackend {
public:
    virtual ~ImageBackend() = default;
    virtual ImagePayload generate(const ImageRequest& req) = 0;
};

class EmbedBackend {
public:
    virtual ~EmbedBackend() = default;
    virtual std::vector<double> embed_text(std::string_view text) = 0;
    virtual std::vector<double> embed_image(const ImagePayload& image) = 0;
};

struct RetryPolicy {
    int attempts = 3;
    std::chrono::milliseconds backoff{500};
};

/// Counting gate bounding concurrent requests through one client.
class InFlightLimiter {
public:
    explicit InFlightLimiter(std::size_t limit);

    class Permit {
    public:
        explicit Permit(InFlightLimiter* owner) : owner_(owner) {}
        Permit(Permit&& other) noexcept : owner_(std::exchange(other.owner_, nullptr)) {}
        Permit(const Permit&) = delete;
        Permit& operator=(const Permit&) = delete;
        Permit& operator=(Permit&&) = delete;
        ~Permit();

    private:
        InFlightLimiter* owner_;
    };

    Permit acquire();
    std::size_t limit() const noexcept { return limit_; }
    std::size_t peak() const;

private:
    void release();

    std::size_t limit_;
    mutable std::mutex mu_;
    std::condition_variable cv_;
    std::size_t in_flight_ = 0;
    std::size_t peak_ = 0;
};

/// Whether an error code is worth another attempt.
bool is_retryable(ErrorCode code);

class ChatClient {
public:
    ChatClient(std::shared_ptr<ChatBackend> backend, RetryPolicy retry, std::size_t max_in_flight);
    ChatResponse chat_complete(const ChatRequest& req);
    const InFlightLimiter& limiter() const noexcept { return limiter_; }

private:
    std::shared_ptr<ChatBackend> backend_;
    RetryPolicy retry_;
    InFlightLimiter limiter_;
};

class ImageClient {
public:
    ImageClient(std::shared_ptr<ImageBackend> backend, RetryPolicy retry, std::size_t max_in_flight);
    /// Throws InvalidArgument for an empty description or non-positive size.
    ImagePayload generate_image(const ImageRequest& req);
    const InFlightLimiter& limiter() const noexcept { return limiter_; }

private:
    std::shared_ptr<ImageBackend> backend_;
    RetryPolicy retry_;
    InFlightLimiter limiter_;
};

/// Normalizes every returned vector and pins the dimension: a response whose
/// length differs from `expected_dim` (or from the first response when
/// expected_dim is 0) raises DimensionMismatch.
class EmbedClient {
public:
    EmbedClient(std::shared_ptr<EmbedBackend> backend, RetryPolicy retry, std::size_t max_in_flight,
                std::size_t expected_dim = 0);

    Embedding embed_text(std::string_view text);
    Embedding embed_image(const ImagePayload& image);
    std::size_t dim() const;
    const InFlightLimiter& limiter() const noexcept { return limiter_; }

private:
    Embedding finish(std::vector<double> raw);

    std::shared_ptr<EmbedBackend> backend_;
    RetryPolicy retry_;
    InFlightLimiter limiter_;
    mutable std::mutex dim_mu_;
    std::size_t dim_;
};

// OpenAI-compatible chat, JSON-in/bytes-out images, JSON float-array
// embeddings. Each endpoint URL is a base ("http://host:port[/prefix]"); the
// route paths are fixed and listed in docs/backends.md.
std::shared_ptr<ChatBackend> make_http_chat_backend(const EndpointConfig& endpoint);
std::shared_ptr<ImageBackend> make_http_image_backend(const EndpointConfig& endpoint);
std::shared_ptr<EmbedBackend> make_http_embed_backend(const EndpointConfig& endpoint);

namespace routes {
inline constexpr std::string_view kChat = "/v1/chat/completions";
inline constexpr std::string_view kImage = "/v1/images/generations";
inline constexpr std::string_view kEmbedText = "/v1/embeddings/text";
inline constexpr std::string_view kEmbedImage = "/v1/embeddings/image";
}  // namespace routes

struct BackendSet {
    std::shared_ptr<ChatClient> chat;
    std::shared_ptr<ImageClient> image;
    std::shared_ptr<EmbedClient> embed;
};

/// Builds mock or HTTP clients per cfg.backends.mode, each limited to
/// cfg.parallelism in-flight requests.
BackendSet make_backends(const PipelineConfig& cfg);

/// Wraps raw transports in clients using cfg's retry budget and parallelism.
BackendSet wrap_backends(std::shared_ptr<ChatBackend> chat, std::shared_ptr<ImageBackend> image,
                         std::shared_ptr<EmbedBackend> embed, const PipelineConfig& cfg);

}  // namespace mmdg
