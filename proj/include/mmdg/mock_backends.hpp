// Copyright (C) 2026 The mmdg Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "mmdg/backends.hpp"

namespace httplib {
class Server;
}

namespace mmdg {

// Deterministic offline stand-ins for the three model services. Every reply
// is a pure function of the request and the fixture.
//
// Mock images are small PNGs carrying their own score targets in a tEXt
// chunk. The mock embedder builds the image vector from orthogonal parts
//
//   clip * text(description) + aesthetic * e0 + 0.6 * concept + rest * noise
//
// where text() never uses coordinate 0. So the cosine against the
// description embedding equals the clip target, and a head reading e0 with
// gain 10 (AestheticHead::axis_probe(dim, 0)) returns the aesthetic target.

struct ScriptedReply {
    std::string completion;
    int status = 200;
};

struct ImageProfile {
    std::optional<double> clip;
    std::optional<double> aesthetic;
    std::optional<std::string> unsafe_concept;  // concept text the image leans towards
    int status = 200;
};

struct MockFixture {
    std::size_t dim = 512;
    // Key "<prompt_kind>:<mock_chat_key>" is tried before "<mock_chat_key>".
    std::map<std::string, ScriptedReply> chat;
    // Keyed by exact image description.
    std::map<std::string, ImageProfile> images;
    // Ranges for unscripted images, drawn from a hash of (description, seed, model).
    std::pair<double, double> default_clip{0.12, 0.34};
    std::pair<double, double> default_aesthetic{0.40, 0.68};

    static MockFixture parse(std::string_view json_text);
    static MockFixture load(const std::filesystem::path& path);
    std::string dump() const;
};

/// Fixture key for a chat request: 16 hex digits of FNV-1a over the user text.
std::string mock_chat_key(std::string_view user_text);

/// Reply used when the fixture has no script for a request: selects turns
/// with visual cue words, or rewrites the prior description on feedback.
std::string heuristic_completion(const ChatRequest& req);

class MockBackends {
public:
    explicit MockBackends(MockFixture fixture);

    std::shared_ptr<ChatBackend> chat() const { return chat_; }
    std::shared_ptr<ImageBackend> image() const { return image_; }
    std::shared_ptr<EmbedBackend> embed() const { return embed_; }
    const MockFixture& fixture() const noexcept { return *fixture_; }

private:
    std::shared_ptr<const MockFixture> fixture_;
    std::shared_ptr<ChatBackend> chat_;
    std::shared_ptr<ImageBackend> image_;
    std::shared_ptr<EmbedBackend> embed_;
};

/// Unnormalized mock text vector (coordinate 0 is always zero).
std::vector<double> mock_text_vector(std::string_view text, std::size_t dim);

/// Serves the mocks over the documented HTTP wire shapes.
void mount_mock_routes(httplib::Server& server, std::shared_ptr<MockBackends> mocks);

}  // namespace mmdg
