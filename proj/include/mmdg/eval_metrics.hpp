// Copyright (C) 2026 The mmdg Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "mmdg/core.hpp"

namespace mmdg {

class EmbedClient;
struct CorpusContents;

struct SelectionConfusion {
    std::size_t tp = 0;
    std::size_t fp = 0;
    std::size_t fn = 0;
    std::size_t tn = 0;

    std::size_t total() const noexcept { return tp + fp + fn + tn; }
    SelectionConfusion& operator+=(const SelectionConfusion& o) noexcept;
    bool operator==(const SelectionConfusion&) const = default;
};

/// Per-utterance "has image" classification of one dialogue with n turns.
/// Throws IndexOutOfRange if any index is >= n.
SelectionConfusion selection_confusion(const std::set<std::size_t>& predicted, const std::set<std::size_t>& gold,
                                       std::size_t n);

struct ConfusionMetrics {
    double accuracy = 0.0;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

/// Zero denominators give 0 (accuracy of an empty matrix is 0 as well).
/// F1 is computed as 2tp / (2tp + fp + fn), which equals the harmonic mean.
ConfusionMetrics confusion_metrics(const SelectionConfusion& c);

struct ScoreAggregate {
    std::optional<double> mean_clip;
    std::optional<double> mean_aesthetic;
    std::size_t images = 0;
};

ScoreAggregate aggregate_scores(const std::vector<Attachment>& attachments);

/// scale * mean cosine over (generated, gold) image embedding pairs; nullopt
/// when there are no pairs.
std::optional<double> mm_relevance(const std::vector<std::pair<Embedding, Embedding>>& pairs,
                                   double scale = 1000.0);

// ---- human evaluation ------------------------------------------------------

enum class Side { A, B };

struct AnnotationRecord {
    std::string pair_id;
    std::string question_id;  // Q1..Q6
    std::string annotator_id;
    Side choice = Side::A;
    Side generated_side = Side::A;  // which side showed the generated dialogue

    bool prefers_generated() const noexcept { return choice == generated_side; }
};

/// ratings[item][rater] in {0, 1}. Items with fewer than two ratings are
/// ignored. Throws InsufficientRaters when no item has two ratings and
/// DegeneratePe when chance agreement is 1.
double gwet_ac1(const std::vector<std::vector<int>>& ratings);

/// AC1 of one question, categories being "generated preferred" vs "other".
double gwet_ac1(const std::vector<AnnotationRecord>& records, const std::string& question_id);

struct PreferenceMeans {
    double generated_pct = 0.0;
    double other_pct = 0.0;
    std::size_t records = 0;
};

/// Per question id, percentage of records preferring the generated dialogue.
/// Questions without records are absent from the map.
std::map<std::string, PreferenceMeans> preference_means(const std::vector<AnnotationRecord>& records);

struct QuestionReport {
    std::string question_id;
    std::optional<PreferenceMeans> means;
    std::optional<double> ac1;
};

/// Rows for Q1..Q6 in order (plus any other question ids seen).
std::vector<QuestionReport> question_reports(const std::vector<AnnotationRecord>& records);

/// "# | Mean {label} | Mean Other | Gwet's AC1" table.
std::string render_preference_table(const std::string& generated_label, const std::vector<QuestionReport>& rows);

// ---- dataset evaluation ----------------------------------------------------

struct EvalReport {
    SelectionConfusion confusion;
    ConfusionMetrics metrics;
    ScoreAggregate scores;
    std::optional<double> mm_relevance;
    std::size_t dialogues_matched = 0;
    std::size_t dialogues_missing = 0;  // gold dialogues absent from the predictions
    std::vector<std::string> diagnostics;
};

/// Compares an augmented dataset with a gold corpus whose utterances carry
/// gold_image. Dialogues are matched by id; a gold dialogue without a
/// prediction counts as predicting no images. MM-Relevance needs `embed`
/// and the image files (relative to pred_dir / gold_dir); it is absent
/// otherwise. Throws NoMatchedPairs if no dialogue ids overlap.
EvalReport evaluate(const CorpusContents& pred, const CorpusContents& gold,
                    const std::filesystem::path& pred_dir, const std::filesystem::path& gold_dir,
                    EmbedClient* embed);

nlohmann::json eval_json(const EvalReport& r);

/// Column set shared by the main results table and the QA ablation.
inline constexpr const char* kResultColumns[] = {"Accuracy", "Precision", "Recall", "F1 score",
                                                 "CLIP score", "MM-Relevance", "Aesthetic", "#images"};
/// Column set of the prompt ablation.
inline constexpr const char* kPromptColumns[] = {"Accuracy", "Precision", "Recall", "F1 score"};

enum class TableShape { Results, Prompt };

/// Aligned text table, one row per run: "67.24%" style percentages, F1 and
/// scores with two decimals, "N/A" for absent values.
std::string render_table(const std::string& first_header,
                         const std::vector<std::pair<std::string, EvalReport>>& runs, TableShape shape);

/// Machine-readable rows keyed by the same column names.
nlohmann::json table_json(const std::vector<std::pair<std::string, EvalReport>>& runs, TableShape shape);

std::string format_percent(double fraction);
std::string format_fixed(const std::optional<double>& v, int decimals = 2);

}  // namespace mmdg
