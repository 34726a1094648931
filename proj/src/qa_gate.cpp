// Copyright (C) 2026 The mmdg Authors
// SPDX-License-Identifier: Apache-2.0

#include "mmdg/qa_gate.hpp"

#include <algorithm>
#include <fstream>

#include "mmdg/kernels.hpp"

namespace mmdg {

AestheticHead::AestheticHead(std::size_t dim, std::size_t hidden, std::vector<double> w1,
                             std::vector<double> b1, std::vector<double> w2, double b2)
    : dim_(dim), hidden_(hidden), w1_(std::move(w1)), b1_(std::move(b1)), w2_(std::move(w2)), b2_(b2) {
    if (dim_ == 0 || hidden_ == 0 || w1_.size() != dim_ * hidden_ || b1_.size() != hidden_ ||
        w2_.size() != hidden_) {
        throw Error(ErrorCode::ShapeMismatch, "aesthetic head weights do not match D=" +
                                                  std::to_string(dim_) + " H=" + std::to_string(hidden_));
    }
}

AestheticHead AestheticHead::parse(std::istream& in) {
    std::size_t d = 0, h = 0;
    if (!(in >> d >> h) || d == 0 || h == 0) {
        throw Error(ErrorCode::ParseError, "aesthetic head: bad 'D H' header");
    }
    auto read_n = [&](std::size_t n, const char* what) {
        std::vector<double> v(n);
        for (auto& x : v) {
            if (!(in >> x)) throw Error(ErrorCode::ParseError, std::string("aesthetic head: short ") + what);
        }
        return v;
    };
    auto w1 = read_n(d * h, "W1");
    auto b1 = read_n(h, "b1");
    auto w2 = read_n(h, "W2");
    double b2 = 0.0;
    if (!(in >> b2)) throw Error(ErrorCode::ParseError, "aesthetic head: missing b2");
    return AestheticHead(d, h, std::move(w1), std::move(b1), std::move(w2), b2);
}

AestheticHead AestheticHead::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::IOError, "cannot open aesthetic head " + path.string());
    return parse(in);
}

AestheticHead AestheticHead::axis_probe(std::size_t dim, std::size_t axis, double scale) {
    if (axis >= dim) throw Error(ErrorCode::ShapeMismatch, "probe axis outside embedding");
    std::vector<double> w1(dim, 0.0);
    w1[axis] = 1.0;
    return AestheticHead(dim, 1, std::move(w1), {0.0}, {scale}, 0.0);
}

double AestheticHead::raw(const Embedding& e) const {
    if (e.dim() != dim_) {
        throw Error(ErrorCode::ShapeMismatch, "embedding dim " + std::to_string(e.dim()) +
                                                  " != head dim " + std::to_string(dim_));
    }
    std::vector<double> hidden(hidden_);
    kernels::parallel::affine_relu(w1_, b1_, e.values(), hidden);
    return kernels::serial::dot(w2_, hidden) + b2_;
}

void SafetyConceptBank::add(std::string label, const Embedding& concept_vector) {
    if (concept_vector.empty()) throw Error(ErrorCode::InvalidArgument, "empty concept vector");
    if (dim_ == 0) dim_ = concept_vector.dim();
    if (concept_vector.dim() != dim_) {
        throw Error(ErrorCode::DimensionMismatch, "concept '" + label + "' has the wrong dimension");
    }
    labels_.push_back(std::move(label));
    vectors_.insert(vectors_.end(), concept_vector.values().begin(), concept_vector.values().end());
}

std::pair<double, std::size_t> SafetyConceptBank::max_similarity(const Embedding& e) const {
    if (empty()) throw Error(ErrorCode::EmptyBank, "safety concept bank is empty");
    if (e.dim() != dim_) throw Error(ErrorCode::DimensionMismatch, "embedding vs concept bank");
    std::vector<double> sims(size());
    kernels::parallel::dot_rows(vectors_, dim_, e.values(), sims);
    const auto best = std::max_element(sims.begin(), sims.end());
    return {*best, static_cast<std::size_t>(best - sims.begin())};
}

std::vector<std::pair<std::string, std::string>> load_concept_texts(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::IOError, "cannot open concept bank " + path.string());
    std::vector<std::pair<std::string, std::string>> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line.front() == '#') continue;
        const auto tab = line.find('\t');
        if (tab == std::string::npos || tab == 0 || tab + 1 >= line.size()) {
            throw Error(ErrorCode::ParseError,
                        path.string() + ":" + std::to_string(lineno) + ": expected label<TAB>text");
        }
        out.emplace_back(line.substr(0, tab), line.substr(tab + 1));
    }
    return out;
}

double clip_score(const Embedding& image, const Embedding& text) {
    if (image.dim() != text.dim()) {
        throw Error(ErrorCode::DimensionMismatch, "image dim " + std::to_string(image.dim()) +
                                                      " vs text dim " + std::to_string(text.dim()));
    }
    return std::clamp(kernels::serial::dot(image.values(), text.values()), -1.0, 1.0);
}

double aesthetic_score(const Embedding& image, const AestheticHead& head) {
    return std::clamp(head.raw(image) / 10.0, 0.0, 1.0);
}

bool safety_check(const Embedding& image, const SafetyConceptBank& bank) {
    return bank.max_similarity(image).first < bank.threshold();
}

QAVerdict judge(double clip, double aesthetic, bool safe, const PipelineConfig& cfg) {
    QAVerdict v;
    if (clip < cfg.clip_threshold) v.fail(QaCheck::ImageTextMatch);
    if (aesthetic < cfg.aesthetic_threshold) v.fail(QaCheck::Aesthetic);
    if (!safe) v.fail(QaCheck::Safety);
    return v;
}

QAVerdict evaluate_candidate(ImageCandidate& candidate, const Embedding& text_embedding,
                             const PipelineConfig& cfg, const AestheticHead& head,
                             const SafetyConceptBank& bank) {
    candidate.clip_score = clip_score(candidate.embedding, text_embedding);
    candidate.aesthetic_score = aesthetic_score(candidate.embedding, head);
    candidate.safe = safety_check(candidate.embedding, bank);
    return judge(candidate.clip_score, candidate.aesthetic_score, candidate.safe, cfg);
}

}  // namespace mmdg
