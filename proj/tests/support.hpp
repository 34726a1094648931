// Copyright (C) 2026 The mmdg Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <atomic>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include <httplib.h>

#include "mmdg/backends.hpp"
#include "mmdg/core.hpp"
#include "mmdg/mock_backends.hpp"
#include "mmdg/orchestrator.hpp"

namespace mmdg::test {

namespace fs = std::filesystem;

class TempDir {
public:
    TempDir();
    ~TempDir();
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const fs::path& path() const noexcept { return path_; }
    fs::path operator/(const std::string& name) const { return path_ / name; }

private:
    fs::path path_;
};

fs::path source_dir();
fs::path prompts_dir();
fs::path tool_path();

void write_text(const fs::path& path, std::string_view text);
std::string read_text(const fs::path& path);

Dialogue make_dialogue(std::string id, const std::vector<std::string>& texts);

/// Mock-mode config with the repository prompts and a 1 ms retry backoff.
PipelineConfig mock_config();

/// User text the scanner sends for `d`, and the fixture key for it.
std::string scanner_user_text(const Dialogue& d);
std::string chat_key(const Dialogue& d);

/// Canonical JSON line of a plain dialogue, with gold images on `gold`.
std::string corpus_line(const Dialogue& d, const std::set<std::size_t>& gold = {});

// Wrappers that count or override calls to an inner backend.
class CountingChat final : public ChatBackend {
public:
    explicit CountingChat(std::shared_ptr<ChatBackend> inner) : inner_(std::move(inner)) {}
    ChatResponse complete(const ChatRequest& req) override;

    std::atomic<int> calls{0};
    std::atomic<int> feedback_calls{0};
    std::function<void(const ChatRequest&)> before;  // may throw

private:
    std::shared_ptr<ChatBackend> inner_;
};

class CountingImage final : public ImageBackend {
public:
    explicit CountingImage(std::shared_ptr<ImageBackend> inner) : inner_(std::move(inner)) {}
    ImagePayload generate(const ImageRequest& req) override;

    std::atomic<int> calls{0};
    std::function<void(const ImageRequest&)> before;  // may throw

    std::vector<ImageRequest> requests() const;

private:
    std::shared_ptr<ImageBackend> inner_;
    mutable std::mutex mu_;
    std::vector<ImageRequest> requests_;
};

struct Harness {
    std::shared_ptr<MockBackends> mocks;
    std::shared_ptr<CountingChat> chat;
    std::shared_ptr<CountingImage> image;
    PipelineDeps deps;
};

/// Deps over in-process mocks wrapped in counters.
Harness make_harness(const PipelineConfig& cfg, MockFixture fixture);

/// Ten small dialogues with a mix of visual and non-visual turns.
std::vector<Dialogue> fixture_dialogues();

/// Writes dialogues as a JSON-lines corpus.
void write_corpus(const fs::path& path, const std::vector<Dialogue>& dialogues,
                  const std::map<std::string, std::set<std::size_t>>& gold = {});

// Ablation fixture: gold selections plus one scripted completion per prompt
// kind, chain-of-thought matching gold exactly, few-shot and zero-shot
// progressively worse. Default image ranges all pass the QA gate.
struct AblationFixture {
    std::vector<Dialogue> dialogues;
    std::map<std::string, std::set<std::size_t>> gold;
    MockFixture fixture;
};
AblationFixture ablation_fixture();

// QA fixture: scripted completions whose descriptions get images that fail
// the gate; some recover through the feedback rewrite, some never do.
struct QaFixture {
    std::vector<Dialogue> dialogues;
    std::map<std::string, std::set<std::size_t>> gold;
    MockFixture fixture;
};
QaFixture qa_fixture();

/// Writes `fixture` as JSON and a config file pointing at it; returns the
/// config path.
fs::path write_mock_config(const fs::path& dir, const MockFixture& fixture);

struct ToolResult {
    int exit_code = -1;
    std::string out;
    std::string err;
};

/// Runs `server` on an ephemeral loopback port until destroyed.
class ServerThread {
public:
    explicit ServerThread(httplib::Server& server);
    ~ServerThread();
    ServerThread(const ServerThread&) = delete;
    ServerThread& operator=(const ServerThread&) = delete;

    int port() const noexcept { return port_; }
    std::string url() const { return "http://127.0.0.1:" + std::to_string(port_); }

private:
    httplib::Server& server_;
    int port_;
    std::thread thread_;
};

/// Answer texts of the exemplars in a few-shot or chain-of-thought asset.
std::vector<std::string> exemplar_answers(const fs::path& asset);

/// Collapses runs of spaces to one and trims trailing spaces on each line.
std::string squeeze_spaces(std::string_view text);

/// Runs the CLI in-process.
ToolResult run_tool(const std::vector<std::string>& args);

}  // namespace mmdg::test
