// Copyright (C) 2026 The mmdg Authors
// SPDX-License-Identifier: Apache-2.0

#include "mmdg/eval_metrics.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <sstream>
#include <unordered_map>

#include "mmdg/backends.hpp"
#include "mmdg/dataset_io.hpp"
#include "mmdg/kernels.hpp"

namespace mmdg {

using json = nlohmann::json;
namespace fs = std::filesystem;

SelectionConfusion& SelectionConfusion::operator+=(const SelectionConfusion& o) noexcept {
    tp += o.tp;
    fp += o.fp;
    fn += o.fn;
    tn += o.tn;
    return *this;
}

SelectionConfusion selection_confusion(const std::set<std::size_t>& predicted, const std::set<std::size_t>& gold,
                                       std::size_t n) {
    auto check = [n](const std::set<std::size_t>& s, const char* what) {
        if (!s.empty() && *s.rbegin() >= n) {
            throw Error(ErrorCode::IndexOutOfRange, std::string(what) + " index " + std::to_string(*s.rbegin()) +
                                                        " out of range for " + std::to_string(n) + " turns");
        }
    };
    check(predicted, "predicted");
    check(gold, "gold");
    SelectionConfusion c;
    for (std::size_t i = 0; i < n; ++i) {
        const bool p = predicted.count(i) != 0;
        const bool g = gold.count(i) != 0;
        if (p && g) ++c.tp;
        else if (p) ++c.fp;
        else if (g) ++c.fn;
        else ++c.tn;
    }
    return c;
}

ConfusionMetrics confusion_metrics(const SelectionConfusion& c) {
    auto ratio = [](std::size_t num, std::size_t den) {
        return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
    };
    ConfusionMetrics m;
    m.accuracy = ratio(c.tp + c.tn, c.total());
    m.precision = ratio(c.tp, c.tp + c.fp);
    m.recall = ratio(c.tp, c.tp + c.fn);
    m.f1 = ratio(2 * c.tp, 2 * c.tp + c.fp + c.fn);
    return m;
}

ScoreAggregate aggregate_scores(const std::vector<Attachment>& attachments) {
    ScoreAggregate s;
    s.images = attachments.size();
    if (attachments.empty()) return s;
    double clip = 0.0, aesthetic = 0.0;
    for (const auto& a : attachments) {
        clip += a.clip_score;
        aesthetic += a.aesthetic_score;
    }
    const double n = static_cast<double>(attachments.size());
    s.mean_clip = clip / n;
    s.mean_aesthetic = aesthetic / n;
    return s;
}

std::optional<double> mm_relevance(const std::vector<std::pair<Embedding, Embedding>>& pairs, double scale) {
    if (pairs.empty()) return std::nullopt;
    const std::size_t dim = pairs.front().first.dim();
    std::vector<double> a, b;
    a.reserve(pairs.size() * dim);
    b.reserve(pairs.size() * dim);
    for (const auto& [gen, gold] : pairs) {
        if (gen.dim() != dim || gold.dim() != dim) {
            throw Error(ErrorCode::DimensionMismatch, "MM-Relevance pairs have mixed dimensions");
        }
        a.insert(a.end(), gen.values().begin(), gen.values().end());
        b.insert(b.end(), gold.values().begin(), gold.values().end());
    }
    return scale * kernels::parallel::mean_paired_dot(a, b, dim);
}

double gwet_ac1(const std::vector<std::vector<int>>& ratings) {
    double pa_sum = 0.0;
    std::size_t items = 0, ones = 0, total = 0;
    for (const auto& item : ratings) {
        const std::size_t r = item.size();
        if (r < 2) continue;
        std::size_t k = 0;
        for (int v : item) {
            if (v != 0 && v != 1) throw Error(ErrorCode::InvalidArgument, "ratings must be binary");
            k += static_cast<std::size_t>(v);
        }
        const double a = static_cast<double>(k), b = static_cast<double>(r - k), n = static_cast<double>(r);
        pa_sum += (a * (a - 1.0) + b * (b - 1.0)) / (n * (n - 1.0));
        ++items;
        ones += k;
        total += r;
    }
    if (items == 0) throw Error(ErrorCode::InsufficientRaters, "no item has two or more ratings");
    const double pa = pa_sum / static_cast<double>(items);
    const double pi = static_cast<double>(ones) / static_cast<double>(total);
    const double pe = 2.0 * pi * (1.0 - pi);
    if (pe >= 1.0) throw Error(ErrorCode::DegeneratePe, "chance agreement is 1");
    return (pa - pe) / (1.0 - pe);
}

double gwet_ac1(const std::vector<AnnotationRecord>& records, const std::string& question_id) {
    std::map<std::string, std::vector<int>> by_pair;
    for (const auto& r : records) {
        if (r.question_id == question_id) by_pair[r.pair_id].push_back(r.prefers_generated() ? 1 : 0);
    }
    std::vector<std::vector<int>> table;
    table.reserve(by_pair.size());
    for (auto& [_, v] : by_pair) table.push_back(std::move(v));
    return gwet_ac1(table);
}

std::map<std::string, PreferenceMeans> preference_means(const std::vector<AnnotationRecord>& records) {
    std::map<std::string, std::pair<std::size_t, std::size_t>> counts;  // generated, total
    for (const auto& r : records) {
        auto& c = counts[r.question_id];
        c.first += r.prefers_generated() ? 1 : 0;
        ++c.second;
    }
    std::map<std::string, PreferenceMeans> out;
    for (const auto& [q, c] : counts) {
        PreferenceMeans m;
        m.records = c.second;
        m.generated_pct = 100.0 * static_cast<double>(c.first) / static_cast<double>(c.second);
        m.other_pct = 100.0 * static_cast<double>(c.second - c.first) / static_cast<double>(c.second);
        out.emplace(q, m);
    }
    return out;
}

std::vector<QuestionReport> question_reports(const std::vector<AnnotationRecord>& records) {
    std::vector<std::string> ids = {"Q1", "Q2", "Q3", "Q4", "Q5", "Q6"};
    for (const auto& r : records) {
        if (std::find(ids.begin(), ids.end(), r.question_id) == ids.end()) ids.push_back(r.question_id);
    }
    const auto means = preference_means(records);
    std::vector<QuestionReport> out;
    for (const auto& q : ids) {
        QuestionReport row;
        row.question_id = q;
        if (auto it = means.find(q); it != means.end()) row.means = it->second;
        try {
            row.ac1 = gwet_ac1(records, q);
        } catch (const Error&) {
            row.ac1.reset();
        }
        out.push_back(std::move(row));
    }
    return out;
}

std::string format_percent(double fraction) {
    std::ostringstream o;
    o << std::fixed << std::setprecision(2) << fraction * 100.0 << '%';
    return o.str();
}

std::string format_fixed(const std::optional<double>& v, int decimals) {
    if (!v) return "N/A";
    std::ostringstream o;
    o << std::fixed << std::setprecision(decimals) << *v;
    return o.str();
}

namespace {

std::string render_rows(const std::vector<std::string>& header, const std::vector<std::vector<std::string>>& rows) {
    std::vector<std::size_t> width(header.size());
    for (std::size_t c = 0; c < header.size(); ++c) {
        width[c] = header[c].size();
        for (const auto& r : rows) width[c] = std::max(width[c], r[c].size());
    }
    std::ostringstream out;
    auto line = [&](const std::vector<std::string>& cells) {
        for (std::size_t c = 0; c < cells.size(); ++c) {
            if (c > 0) out << " | ";
            out << std::left << std::setw(static_cast<int>(width[c])) << cells[c];
        }
        out << '\n';
    };
    line(header);
    std::vector<std::string> rule;
    for (auto w : width) rule.emplace_back(w, '-');
    line(rule);
    for (const auto& r : rows) line(r);
    return out.str();
}

std::vector<std::string> table_cells(const EvalReport& r, TableShape shape) {
    std::vector<std::string> cells = {format_percent(r.metrics.accuracy), format_percent(r.metrics.precision),
                                      format_percent(r.metrics.recall), format_fixed(r.metrics.f1)};
    if (shape == TableShape::Results) {
        cells.push_back(format_fixed(r.scores.mean_clip));
        cells.push_back(format_fixed(r.mm_relevance));
        cells.push_back(format_fixed(r.scores.mean_aesthetic));
        cells.push_back(std::to_string(r.scores.images));
    }
    return cells;
}

json opt(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

}  // namespace

std::string render_preference_table(const std::string& generated_label, const std::vector<QuestionReport>& rows) {
    std::vector<std::vector<std::string>> cells;
    for (const auto& r : rows) {
        cells.push_back({r.question_id,
                         r.means ? format_fixed(r.means->generated_pct) + "%" : std::string("N/A"),
                         r.means ? format_fixed(r.means->other_pct) + "%" : std::string("N/A"),
                         format_fixed(r.ac1)});
    }
    return render_rows({"#", "Mean " + generated_label, "Mean Other", "Gwet's AC1"}, cells);
}

std::string render_table(const std::string& first_header,
                         const std::vector<std::pair<std::string, EvalReport>>& runs, TableShape shape) {
    std::vector<std::string> header = {first_header};
    if (shape == TableShape::Results) {
        header.insert(header.end(), std::begin(kResultColumns), std::end(kResultColumns));
    } else {
        header.insert(header.end(), std::begin(kPromptColumns), std::end(kPromptColumns));
    }
    std::vector<std::vector<std::string>> rows;
    for (const auto& [label, report] : runs) {
        auto cells = table_cells(report, shape);
        cells.insert(cells.begin(), label);
        rows.push_back(std::move(cells));
    }
    return render_rows(header, rows);
}

json eval_json(const EvalReport& r) {
    json diag = r.diagnostics;
    return json{{"confusion", {{"tp", r.confusion.tp}, {"fp", r.confusion.fp}, {"fn", r.confusion.fn},
                               {"tn", r.confusion.tn}}},
                {"Accuracy", r.metrics.accuracy},
                {"Precision", r.metrics.precision},
                {"Recall", r.metrics.recall},
                {"F1 score", r.metrics.f1},
                {"CLIP score", opt(r.scores.mean_clip)},
                {"MM-Relevance", opt(r.mm_relevance)},
                {"Aesthetic", opt(r.scores.mean_aesthetic)},
                {"#images", r.scores.images},
                {"dialogues_matched", r.dialogues_matched},
                {"dialogues_missing", r.dialogues_missing},
                {"diagnostics", diag}};
}

json table_json(const std::vector<std::pair<std::string, EvalReport>>& runs, TableShape shape) {
    json rows = json::array();
    for (const auto& [label, report] : runs) {
        const auto full = eval_json(report);
        json row{{"label", label}};
        for (const char* c : kPromptColumns) row[c] = full[c];
        if (shape == TableShape::Results) {
            for (const char* c : kResultColumns) row[c] = full[c];
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

namespace {

std::string media_type_for(const fs::path& p) {
    auto ext = p.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    if (ext == ".jpg" || ext == ".jpeg") return "image/jpeg";
    if (ext == ".webp") return "image/webp";
    return "image/png";
}

std::optional<Embedding> embed_file(EmbedClient& embed, const fs::path& path, std::vector<std::string>& diag) {
    try {
        ImagePayload p{read_file(path), media_type_for(path)};
        return embed.embed_image(p);
    } catch (const Error& e) {
        diag.push_back(std::string("MM-Relevance skipped ") + path.string() + ": " + e.what());
        return std::nullopt;
    }
}

}  // namespace

EvalReport evaluate(const CorpusContents& pred, const CorpusContents& gold, const fs::path& pred_dir,
                    const fs::path& gold_dir, EmbedClient* embed) {
    EvalReport report;
    std::unordered_map<std::string, const AugmentedDialogue*> predicted;
    for (const auto& r : pred.records) predicted.emplace(r.dialogue.dialogue().dialogue_id, &r.dialogue);

    std::vector<Attachment> attachments;
    std::vector<std::pair<Embedding, Embedding>> image_pairs;
    std::set<std::string> gold_ids;
    for (const auto& g : gold.records) {
        const auto& gd = g.dialogue.dialogue();
        gold_ids.insert(gd.dialogue_id);
        const std::size_t n = gd.utterances.size();
        std::set<std::size_t> gold_sel;
        for (const auto& u : gd.utterances) {
            if (u.gold_image) gold_sel.insert(u.index);
        }

        auto it = predicted.find(gd.dialogue_id);
        if (it == predicted.end()) {
            ++report.dialogues_missing;
            report.confusion += selection_confusion({}, gold_sel, n);
            continue;
        }
        const auto& pd = *it->second;
        if (pd.dialogue().utterances.size() != n) {
            report.diagnostics.push_back("dialogue '" + gd.dialogue_id + "': utterance count differs from gold");
        }
        std::set<std::size_t> pred_sel;
        for (const auto& a : pd.attachments()) pred_sel.insert(a.utterance_index);
        try {
            report.confusion += selection_confusion(pred_sel, gold_sel, n);
        } catch (const Error& e) {
            report.diagnostics.push_back("dialogue '" + gd.dialogue_id + "' skipped: " + e.what());
            continue;
        }
        ++report.dialogues_matched;
        attachments.insert(attachments.end(), pd.attachments().begin(), pd.attachments().end());

        if (embed == nullptr) continue;
        for (const auto& a : pd.attachments()) {
            const auto& gi = gd.utterances[a.utterance_index].gold_image;
            if (!gi) continue;
            auto ge = embed_file(*embed, pred_dir / a.image, report.diagnostics);
            auto go = embed_file(*embed, gold_dir / *gi, report.diagnostics);
            if (ge && go) image_pairs.emplace_back(std::move(*ge), std::move(*go));
        }
    }
    for (const auto& [id, _] : predicted) {
        if (!gold_ids.count(id)) report.diagnostics.push_back("dialogue '" + id + "' has no gold counterpart");
    }
    if (report.dialogues_matched == 0) {
        throw Error(ErrorCode::NoMatchedPairs, "no predicted dialogue id matches the gold corpus");
    }
    std::sort(report.diagnostics.begin(), report.diagnostics.end());
    report.metrics = confusion_metrics(report.confusion);
    report.scores = aggregate_scores(attachments);
    report.mm_relevance = mm_relevance(image_pairs);
    return report;
}

}  // namespace mmdg
