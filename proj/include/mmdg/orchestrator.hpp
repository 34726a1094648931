// Copyright (C) 2026 The mmdg Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "mmdg/backends.hpp"
#include "mmdg/core.hpp"
#include "mmdg/prompts.hpp"
#include "mmdg/qa_gate.hpp"

namespace mmdg {

enum class UtteranceStatus { Accepted, DroppedQa, DroppedParse };

std::string_view to_string(UtteranceStatus s);

struct AttemptRecord {
    std::string description;
    int round = 0;    // 0 = scanner description, k = k-th feedback rewrite
    int attempt = 1;  // 1-based within the description
    std::uint64_t seed = 0;
    std::optional<double> clip;
    std::optional<double> aesthetic;
    std::optional<bool> safe;
    QAVerdict verdict;
    std::optional<std::string> error;  // backend failure; the attempt is still consumed
};

struct UtteranceTrace {
    std::size_t utterance_index = 0;
    std::optional<std::string> reason;
    std::vector<AttemptRecord> attempts;
    UtteranceStatus final_status = UtteranceStatus::DroppedQa;
    std::vector<std::string> notes;
};

struct DialogueTrace {
    std::string dialogue_id;
    std::string prompt_strategy;
    bool qa_enabled = true;
    std::string scanner_completion;
    std::vector<std::string> parse_errors;
    std::vector<std::string> decision_diagnostics;
    std::vector<UtteranceTrace> utterances;
};

nlohmann::json trace_json(const DialogueTrace& t);

/// Everything augment_dialogue needs besides the dialogue and config.
struct PipelineDeps {
    BackendSet backends;
    PromptAssets prompts;
    AestheticHead head;
    SafetyConceptBank bank;
};

/// Builds backends, loads prompts, the aesthetic head and the safety bank
/// (concept texts are embedded once here). In mock mode without a head file
/// the head is AestheticHead::axis_probe(dim, 0).
PipelineDeps load_pipeline_deps(const PipelineConfig& cfg);

/// Concepts used when no concept file is configured.
std::vector<std::pair<std::string, std::string>> default_safety_concepts();

struct DialogueOutcome {
    AugmentedDialogue augmented;
    std::map<std::size_t, ImagePayload> images;  // bytes for each attachment
    DialogueTrace trace;
    int generation_calls = 0;
    int backend_errors = 0;
};

/// Scan, parse, then per selected utterance: generate with a fresh seed per
/// attempt, score, retry up to max_tries_per_description, then ask the scanner
/// for a new description (up to max_feedback_rounds). Throws
/// ScannerUnavailable when the scanning chat call fails.
DialogueOutcome augment_dialogue(const Dialogue& d, const PipelineConfig& cfg, PipelineDeps& deps);

struct FailedDialogue {
    std::size_t line = 0;
    std::string dialogue_id;
    std::string error;
};

struct RunReport {
    std::size_t dialogues_in_input = 0;
    std::size_t dialogues_processed = 0;
    std::size_t dialogues_skipped = 0;  // already in the manifest
    std::size_t images_accepted = 0;
    std::size_t dropped_qa = 0;
    std::size_t dropped_parse = 0;
    std::size_t generation_calls = 0;
    std::size_t backend_errors = 0;
    std::vector<FailedDialogue> failures;
    std::vector<DialogueTrace> traces;
    double wall_seconds = 0.0;

    bool partial_failure() const noexcept { return !failures.empty(); }
};

nlohmann::json report_json(const RunReport& r);

/// Augments every dialogue of a JSON-lines corpus into `out_dir`. Dialogues
/// already in the output manifest are skipped; failures are recorded and
/// never abort the run. Output order always follows input order.
/// parallelism == 1 runs the plain serial loop; larger values use an OpenMP
/// worker team of that size.
RunReport run_corpus(const std::filesystem::path& input, const std::filesystem::path& out_dir,
                     const PipelineConfig& cfg, PipelineDeps& deps);

}  // namespace mmdg
