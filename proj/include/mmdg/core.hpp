// Copyright (C) 2026 The mmdg Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace mmdg {

enum class ErrorCode {
    EmptyDialogue,
    NonContiguousIndices,
    EmptyUtterance,
    InvalidArgument,
    MissingTemplate,
    MalformedResult,
    TransportError,
    BackendRefusal,
    Timeout,
    DimensionMismatch,
    ShapeMismatch,
    EmptyBank,
    ScannerUnavailable,
    IOError,
    ParseError,
    DuplicateDialogueId,
    IndexOutOfRange,
    InsufficientRaters,
    DegeneratePe,
    NoMatchedPairs,
    UnknownPair,
    IncompleteAnswers,
    NoPairsLoaded,
    ConfigError,
};

std::string_view to_string(ErrorCode code);

// Single exception type for the whole library; callers branch on code().
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message);
    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

struct Utterance {
    std::size_t index = 0;
    std::string speaker;
    std::string text;
    std::optional<std::string> gold_image;

    bool operator==(const Utterance&) const = default;
};

struct Dialogue {
    std::string dialogue_id;
    std::vector<Utterance> utterances;

    bool operator==(const Dialogue&) const = default;
};

// Returns d unchanged when every invariant holds, otherwise throws
// EmptyDialogue / NonContiguousIndices / EmptyUtterance.
const Dialogue& validate_dialogue(const Dialogue& d);

struct ScannerDecision {
    std::size_t utterance_index = 0;
    std::string description;
    std::optional<std::string> reason;

    bool operator==(const ScannerDecision&) const = default;
};

/// Unit-norm embedding vector. The dimension is whatever the backend reports.
class Embedding {
public:
    Embedding() = default;

    /// Scales `values` to unit length. Throws InvalidArgument on a zero or
    /// non-finite vector.
    static Embedding normalize(std::vector<double> values);

    /// Wraps an already-normalized vector; throws InvalidArgument if the norm
    /// is off by more than 1e-6.
    static Embedding from_unit(std::vector<double> values);

    std::span<const double> values() const noexcept { return values_; }
    std::size_t dim() const noexcept { return values_.size(); }
    bool empty() const noexcept { return values_.empty(); }

    bool operator==(const Embedding&) const = default;

private:
    explicit Embedding(std::vector<double> v) : values_(std::move(v)) {}
    std::vector<double> values_;
};

struct ImagePayload {
    std::string bytes;
    std::string media_type = "image/png";

    bool operator==(const ImagePayload&) const = default;
};

enum class QaCheck { ImageTextMatch, Aesthetic, Safety };

std::string_view to_string(QaCheck check);

// passed() is derived from the failure set, so the two can never disagree.
class QAVerdict {
public:
    QAVerdict() = default;
    explicit QAVerdict(std::set<QaCheck> failed) : failed_(std::move(failed)) {}

    bool passed() const noexcept { return failed_.empty(); }
    const std::set<QaCheck>& failed_checks() const noexcept { return failed_; }
    void fail(QaCheck check) { failed_.insert(check); }

    bool operator==(const QAVerdict&) const = default;

private:
    std::set<QaCheck> failed_;
};

struct ImageCandidate {
    ImagePayload image;
    Embedding embedding;
    double clip_score = 0.0;
    double aesthetic_score = 0.0;
    bool safe = true;
    int attempt = 1;
};

struct Attachment {
    std::size_t utterance_index = 0;
    std::string image;  // path relative to the dataset directory
    std::string description;
    double clip_score = 0.0;
    double aesthetic_score = 0.0;
    int attempts = 1;
    std::optional<std::string> reason;

    bool operator==(const Attachment&) const = default;
};

class AugmentedDialogue {
public:
    AugmentedDialogue() = default;
    explicit AugmentedDialogue(Dialogue d) : dialogue_(std::move(d)) {}

    const Dialogue& dialogue() const noexcept { return dialogue_; }
    const std::vector<Attachment>& attachments() const noexcept { return attachments_; }

    /// Throws IndexOutOfRange for an index past the end, InvalidArgument for
    /// one that is already attached.
    void attach(Attachment a);

    bool operator==(const AugmentedDialogue&) const = default;

private:
    Dialogue dialogue_;
    std::vector<Attachment> attachments_;
};

enum class PromptStrategy { ZeroShot, FewShot, ChainOfThought };

std::string_view to_string(PromptStrategy s);
/// Accepts the long names and the zs/fs/cot abbreviations.
PromptStrategy parse_strategy(std::string_view text);
/// "zs", "fs" or "cot".
std::string_view short_name(PromptStrategy s);

enum class MatchTarget { Description, Utterance };

struct EndpointConfig {
    std::string url;
    std::string model;
    std::string api_key;
    int timeout_ms = 60000;
};

struct BackendConfig {
    std::string mode = "mock";  // "mock" or "http"
    std::filesystem::path mock_fixture;
    std::size_t embedding_dim = 512;
    EndpointConfig chat;
    EndpointConfig image;
    EndpointConfig embed;
    int retries = 3;
    int backoff_ms = 500;
    double temperature = 0.0;
};

struct PipelineConfig {
    PromptStrategy prompt_strategy = PromptStrategy::ChainOfThought;
    double clip_threshold = 0.21;
    double aesthetic_threshold = 0.51;
    double safety_threshold = 0.30;
    int max_tries_per_description = 2;
    int max_feedback_rounds = 1;
    int parallelism = 1;
    std::uint64_t seed = 0;
    bool qa_enabled = true;
    MatchTarget match_against = MatchTarget::Description;
    int image_width = 1024;
    int image_height = 1024;
    std::string image_model = "sdxl-1.0";
    std::filesystem::path prompts_dir;
    std::filesystem::path aesthetic_head;
    std::filesystem::path safety_concepts;
    BackendConfig backends;

    /// Throws ConfigError on out-of-range thresholds or budgets.
    void validate() const;
};

}  // namespace mmdg
