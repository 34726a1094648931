// Copyright (C) 2026 The mmdg Authors
// SPDX-License-Identifier: Apache-2.0

#include "mmdg/core.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>

#include "mmdg/hashing.hpp"

namespace mmdg {

std::string_view to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::EmptyDialogue: return "EmptyDialogue";
        case ErrorCode::NonContiguousIndices: return "NonContiguousIndices";
        case ErrorCode::EmptyUtterance: return "EmptyUtterance";
        case ErrorCode::InvalidArgument: return "InvalidArgument";
        case ErrorCode::MissingTemplate: return "MissingTemplate";
        case ErrorCode::MalformedResult: return "MalformedResult";
        case ErrorCode::TransportError: return "TransportError";
        case ErrorCode::BackendRefusal: return "BackendRefusal";
        case ErrorCode::Timeout: return "Timeout";
        case ErrorCode::DimensionMismatch: return "DimensionMismatch";
        case ErrorCode::ShapeMismatch: return "ShapeMismatch";
        case ErrorCode::EmptyBank: return "EmptyBank";
        case ErrorCode::ScannerUnavailable: return "ScannerUnavailable";
        case ErrorCode::IOError: return "IOError";
        case ErrorCode::ParseError: return "ParseError";
        case ErrorCode::DuplicateDialogueId: return "DuplicateDialogueId";
        case ErrorCode::IndexOutOfRange: return "IndexOutOfRange";
        case ErrorCode::InsufficientRaters: return "InsufficientRaters";
        case ErrorCode::DegeneratePe: return "DegeneratePe";
        case ErrorCode::NoMatchedPairs: return "NoMatchedPairs";
        case ErrorCode::UnknownPair: return "UnknownPair";
        case ErrorCode::IncompleteAnswers: return "IncompleteAnswers";
        case ErrorCode::NoPairsLoaded: return "NoPairsLoaded";
        case ErrorCode::ConfigError: return "ConfigError";
    }
    return "Unknown";
}

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

namespace {

bool is_blank(std::string_view s) {
    return std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c) != 0; });
}

}  // namespace

const Dialogue& validate_dialogue(const Dialogue& d) {
    if (d.utterances.empty()) {
        throw Error(ErrorCode::EmptyDialogue, "dialogue '" + d.dialogue_id + "' has no utterances");
    }
    for (std::size_t i = 0; i < d.utterances.size(); ++i) {
        const auto& u = d.utterances[i];
        if (u.index != i) {
            throw Error(ErrorCode::NonContiguousIndices,
                        "dialogue '" + d.dialogue_id + "': expected index " + std::to_string(i) +
                            ", found " + std::to_string(u.index));
        }
        if (is_blank(u.text)) {
            throw Error(ErrorCode::EmptyUtterance,
                        "dialogue '" + d.dialogue_id + "': utterance " + std::to_string(i) + " is empty");
        }
    }
    return d;
}

Embedding Embedding::normalize(std::vector<double> values) {
    double sq = 0.0;
    for (double v : values) sq += v * v;
    const double norm = std::sqrt(sq);
    if (values.empty() || !std::isfinite(norm) || norm == 0.0) {
        throw Error(ErrorCode::InvalidArgument, "cannot normalize a zero or non-finite vector");
    }
    for (double& v : values) v /= norm;
    return Embedding(std::move(values));
}

Embedding Embedding::from_unit(std::vector<double> values) {
    double sq = 0.0;
    for (double v : values) sq += v * v;
    if (values.empty() || !(std::abs(std::sqrt(sq) - 1.0) <= 1e-6)) {
        throw Error(ErrorCode::InvalidArgument, "embedding is not unit-norm");
    }
    return Embedding(std::move(values));
}

std::string_view to_string(QaCheck check) {
    switch (check) {
        case QaCheck::ImageTextMatch: return "ImageTextMatch";
        case QaCheck::Aesthetic: return "Aesthetic";
        case QaCheck::Safety: return "Safety";
    }
    return "Unknown";
}

void AugmentedDialogue::attach(Attachment a) {
    if (a.utterance_index >= dialogue_.utterances.size()) {
        throw Error(ErrorCode::IndexOutOfRange,
                    "attachment index " + std::to_string(a.utterance_index) + " out of range");
    }
    for (const auto& existing : attachments_) {
        if (existing.utterance_index == a.utterance_index) {
            throw Error(ErrorCode::InvalidArgument,
                        "utterance " + std::to_string(a.utterance_index) + " already has an image");
        }
    }
    attachments_.push_back(std::move(a));
}

std::string_view to_string(PromptStrategy s) {
    switch (s) {
        case PromptStrategy::ZeroShot: return "zero_shot";
        case PromptStrategy::FewShot: return "few_shot";
        case PromptStrategy::ChainOfThought: return "chain_of_thought";
    }
    return "unknown";
}

std::string_view short_name(PromptStrategy s) {
    switch (s) {
        case PromptStrategy::ZeroShot: return "zs";
        case PromptStrategy::FewShot: return "fs";
        case PromptStrategy::ChainOfThought: return "cot";
    }
    return "?";
}

PromptStrategy parse_strategy(std::string_view text) {
    if (text == "zs" || text == "zero_shot") return PromptStrategy::ZeroShot;
    if (text == "fs" || text == "few_shot") return PromptStrategy::FewShot;
    if (text == "cot" || text == "chain_of_thought") return PromptStrategy::ChainOfThought;
    throw Error(ErrorCode::ConfigError, "unknown prompt strategy '" + std::string(text) + "'");
}

void PipelineConfig::validate() const {
    auto in_unit = [](double v) { return v >= 0.0 && v <= 1.0; };
    if (!in_unit(clip_threshold) || !in_unit(aesthetic_threshold) || !in_unit(safety_threshold)) {
        throw Error(ErrorCode::ConfigError, "thresholds must lie in [0,1]");
    }
    if (max_tries_per_description < 1) {
        throw Error(ErrorCode::ConfigError, "max_tries_per_description must be >= 1");
    }
    if (max_feedback_rounds < 0) {
        throw Error(ErrorCode::ConfigError, "max_feedback_rounds must be >= 0");
    }
    if (parallelism < 1) throw Error(ErrorCode::ConfigError, "parallelism must be >= 1");
    if (image_width <= 0 || image_height <= 0) {
        throw Error(ErrorCode::ConfigError, "image dimensions must be positive");
    }
    if (backends.retries < 1) throw Error(ErrorCode::ConfigError, "retries must be >= 1");
    if (backends.embedding_dim < 8) throw Error(ErrorCode::ConfigError, "embedding_dim must be >= 8");
}

std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::string_view> parts) {
    std::uint64_t h = splitmix64(base);
    for (auto part : parts) {
        const std::uint64_t len = part.size();
        char len_bytes[8];
        for (int i = 0; i < 8; ++i) len_bytes[i] = static_cast<char>((len >> (8 * i)) & 0xff);
        h = fnv1a64(std::string_view(len_bytes, 8), h);
        h = fnv1a64(part, h);
    }
    return splitmix64(h);
}

std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

}  // namespace mmdg
