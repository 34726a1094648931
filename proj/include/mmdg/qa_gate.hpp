// Copyright (C) 2026 The mmdg Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <filesystem>
#include <istream>
#include <string>
#include <utility>
#include <vector>

#include "mmdg/core.hpp"

namespace mmdg {

/// Two-layer MLP over an image embedding: W2 . relu(W1 e + b1) + b2.
class AestheticHead {
public:
    AestheticHead(std::size_t dim, std::size_t hidden, std::vector<double> w1, std::vector<double> b1,
                  std::vector<double> w2, double b2);

    /// Text format: "D H", then H rows of D floats (W1), one row of H floats
    /// (b1), one row of H floats (W2), and the scalar b2.
    static AestheticHead parse(std::istream& in);
    static AestheticHead load(const std::filesystem::path& path);

    /// Single hidden unit reading coordinate `axis` with gain `scale`; for a
    /// non-negative coordinate x the normalized score is clamp(scale*x/10).
    static AestheticHead axis_probe(std::size_t dim, std::size_t axis, double scale = 10.0);

    std::size_t dim() const noexcept { return dim_; }
    std::size_t hidden() const noexcept { return hidden_; }

    /// Unnormalized MLP output (predictor scale, roughly 0-10).
    double raw(const Embedding& e) const;

private:
    std::size_t dim_;
    std::size_t hidden_;
    std::vector<double> w1_, b1_, w2_;
    double b2_;
};

class SafetyConceptBank {
public:
    explicit SafetyConceptBank(double threshold = 0.30) : threshold_(threshold) {}

    void add(std::string label, const Embedding& concept_vector);

    double threshold() const noexcept { return threshold_; }
    std::size_t size() const noexcept { return labels_.size(); }
    bool empty() const noexcept { return labels_.empty(); }
    std::size_t dim() const noexcept { return dim_; }
    const std::vector<std::string>& labels() const noexcept { return labels_; }

    /// Highest cosine against any concept and the index of that concept.
    std::pair<double, std::size_t> max_similarity(const Embedding& e) const;

private:
    double threshold_;
    std::size_t dim_ = 0;
    std::vector<std::string> labels_;
    std::vector<double> vectors_;  // row-major, size() x dim_
};

/// Reads "label<TAB>concept text" lines; blank lines and '#' comments skipped.
std::vector<std::pair<std::string, std::string>> load_concept_texts(const std::filesystem::path& path);

double clip_score(const Embedding& image, const Embedding& text);

/// clamp(raw / 10, 0, 1)
double aesthetic_score(const Embedding& image, const AestheticHead& head);

/// true = safe. Unsafe iff the best concept cosine is >= the bank threshold.
bool safety_check(const Embedding& image, const SafetyConceptBank& bank);

/// Threshold decision on already-computed scores. A score equal to its
/// threshold passes. All checks are evaluated.
QAVerdict judge(double clip, double aesthetic, bool safe, const PipelineConfig& cfg);

/// Scores `candidate` in place (clip, aesthetic, safe) and judges it.
QAVerdict evaluate_candidate(ImageCandidate& candidate, const Embedding& text_embedding,
                             const PipelineConfig& cfg, const AestheticHead& head,
                             const SafetyConceptBank& bank);

}  // namespace mmdg
