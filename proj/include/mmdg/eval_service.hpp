// Copyright (C) 2026 The mmdg Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "mmdg/core.hpp"
#include "mmdg/eval_metrics.hpp"

namespace httplib {
class Server;
}

namespace mmdg {

struct Question {
    const char* id;
    const char* text;
};

inline constexpr std::array<Question, 6> kQuestions = {{
    {"Q1", "Which dialogue appears more realistic?"},
    {"Q2", "Which dialogue's images convey greater knowledge?"},
    {"Q3", "In which dialogue is there better match between images and the immediately preceding text?"},
    {"Q4", "In which dialogue do the images more closely match with the overall conversation context?"},
    {"Q5", "Which dialogue is more engaging?"},
    {"Q6", "Which dialogue features higher quality images?"},
}};

struct PairSide {
    std::string label;
    AugmentedDialogue dialogue;
};

struct ComparisonPair {
    std::string pair_id;
    std::string comparison;  // groups pairs in the report, e.g. one per source dataset
    PairSide generated;
    PairSide source;
    Side generated_side = Side::A;  // server-side only
};

/// Reads `dir/pairs.jsonl`:
///   {"pair_id", "comparison"?, "generated": {"label", "dialogue"}, "source": {"label", "dialogue"}}
/// where each dialogue is an (augmented) dialogue object. Both sides must
/// carry the same utterance texts. The generated side is placed on A or B by
/// a hash of (seed, pair_id). Throws ParseError on malformed lines.
std::vector<ComparisonPair> load_pairs(const std::filesystem::path& dir, std::uint64_t seed);

struct EvalServiceOptions {
    std::filesystem::path pairs_dir;
    std::filesystem::path log_path;
    std::uint64_t seed = 0;
};

struct SubmitResult {
    bool replaced = false;  // an earlier submission for the same pair was overwritten
};

/// Blinded pair serving, annotation collection and the live report.
/// Annotations go to an append-only JSON-lines log replayed on startup.
/// Submissions are serialized by a mutex; readers work on immutable
/// snapshots.
class EvalService {
public:
    explicit EvalService(EvalServiceOptions opts);

    const std::vector<ComparisonPair>& pairs() const noexcept { return pairs_; }

    /// Client view of the annotator's next unanswered pair, or {"done": true}.
    /// Throws InvalidArgument for an empty id and NoPairsLoaded when empty.
    nlohmann::json next_pair(const std::string& annotator) const;

    /// `answers` must hold exactly Q1..Q6, each "A" or "B" (IncompleteAnswers
    /// otherwise); the pair must exist (UnknownPair).
    SubmitResult submit(const std::string& annotator, const std::string& pair_id,
                        const std::map<std::string, std::string>& answers);

    /// Per comparison: labels plus per-question means and AC1 ("null" when
    /// absent), and the rendered text table.
    nlohmann::json report() const;

    std::vector<AnnotationRecord> records() const;

    /// Log lines ignored during replay (unparseable or for unknown pairs).
    std::size_t skipped_log_lines() const noexcept { return skipped_log_lines_; }

    /// Bytes and media type of an image referenced by a client payload.
    std::optional<std::pair<std::string, std::string>> image(const std::string& name) const;

    /// Registers the /api routes; static UI files are served from `ui_dir`
    /// when given.
    void mount(httplib::Server& server, const std::optional<std::filesystem::path>& ui_dir = std::nullopt);

private:
    using Answers = std::map<std::string, Side>;
    struct State {
        std::map<std::string, std::map<std::string, Answers>> by_annotator;  // annotator -> pair -> answers
    };

    void replay();
    std::shared_ptr<const State> snapshot() const;
    nlohmann::json render_side(const AugmentedDialogue& d);

    EvalServiceOptions opts_;
    std::vector<ComparisonPair> pairs_;
    std::map<std::string, std::size_t> pair_index_;
    std::vector<std::pair<nlohmann::json, nlohmann::json>> views_;  // left, right per pair
    std::map<std::string, std::filesystem::path> images_;  // opaque name -> file
    std::mutex write_mu_;
    std::shared_ptr<const State> state_;
    std::size_t skipped_log_lines_ = 0;
};

}  // namespace mmdg
