// Copyright (C) 2026 The mmdg Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>

#include "mmdg/core.hpp"

namespace mmdg {

enum class PromptKind { ZeroShot, FewShot, ChainOfThought, Feedback };

std::string_view to_string(PromptKind kind);
PromptKind prompt_kind_for(PromptStrategy s);

struct PromptBundle {
    std::string system_text;
    std::string user_text;
    PromptKind kind = PromptKind::ZeroShot;
};

/// Raw template text as read from a prompts directory:
/// zero_shot.txt, few_shot.txt, cot.txt, feedback.txt. Any file may be absent;
/// the builder reports MissingTemplate only when it actually needs one.
struct PromptAssets {
    std::optional<std::string> zero_shot;
    std::optional<std::string> few_shot;
    std::optional<std::string> chain_of_thought;
    std::optional<std::string> feedback;

    static PromptAssets load(const std::filesystem::path& dir);
};

/// Prompts directory used when none is configured: $MMDG_PROMPTS_DIR, else
/// the directory baked in at build time.
std::filesystem::path default_prompts_dir();

/// "Utterance {i}: {text}" per turn, newline-joined, with line breaks inside a
/// turn flattened to one space.
std::string serialize_dialogue(const Dialogue& d);

/// Zero-shot system text, optionally followed by the few-shot or
/// chain-of-thought exemplars; user text is the serialized dialogue.
PromptBundle build_scanner_prompt(const Dialogue& d, PromptStrategy strategy,
                                  const PromptAssets& assets);

/// Re-prompt for a description whose images kept failing QA. Each verdict in
/// `failure_report` is one failed attempt; the report must be non-empty.
PromptBundle build_feedback_prompt(const Dialogue& d, const ScannerDecision& failed,
                                   std::span<const QAVerdict> failure_report,
                                   const PromptAssets& assets);

}  // namespace mmdg
