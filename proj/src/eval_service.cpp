// Copyright (C) 2026 The mmdg Authors
// SPDX-License-Identifier: Apache-2.0

#include "mmdg/eval_service.hpp"

#include <algorithm>
#include <fstream>
#include <set>

#include <httplib.h>

#include "mmdg/dataset_io.hpp"
#include "mmdg/hashing.hpp"
#include "mmdg/serialization.hpp"

namespace mmdg {

using json = nlohmann::json;
namespace fs = std::filesystem;

namespace {

Side parse_side(const std::string& s) {
    if (s == "A") return Side::A;
    if (s == "B") return Side::B;
    throw Error(ErrorCode::IncompleteAnswers, "answer must be \"A\" or \"B\", got \"" + s + "\"");
}

const char* side_name(Side s) { return s == Side::A ? "A" : "B"; }

PairSide parse_side_block(const json& j, const std::string& where) {
    if (!j.is_object()) throw Error(ErrorCode::ParseError, where + " must be an object");
    PairSide side;
    side.label = j.at("label").get<std::string>();
    side.dialogue = j.at("dialogue").get<AugmentedDialogue>();
    validate_dialogue(side.dialogue.dialogue());
    return side;
}

bool same_text(const Dialogue& a, const Dialogue& b) {
    if (a.utterances.size() != b.utterances.size()) return false;
    for (std::size_t i = 0; i < a.utterances.size(); ++i) {
        if (a.utterances[i].text != b.utterances[i].text) return false;
    }
    return true;
}

std::string media_type_of(const fs::path& p) {
    auto ext = p.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    if (ext == ".jpg" || ext == ".jpeg") return "image/jpeg";
    if (ext == ".webp") return "image/webp";
    if (ext == ".gif") return "image/gif";
    return "image/png";
}

int http_status(ErrorCode code) {
    switch (code) {
        case ErrorCode::UnknownPair: return 404;
        case ErrorCode::NoPairsLoaded: return 503;
        default: return 400;
    }
}

void send_json(httplib::Response& res, const json& body, int status = 200) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, const Error& e) {
    send_json(res, json{{"error", std::string(to_string(e.code()))}, {"message", e.what()}}, http_status(e.code()));
}

}  // namespace

std::vector<ComparisonPair> load_pairs(const fs::path& dir, std::uint64_t seed) {
    const fs::path file = dir / "pairs.jsonl";
    std::ifstream in(file, std::ios::binary);
    if (!in) throw Error(ErrorCode::IOError, "cannot open " + file.string());
    std::vector<ComparisonPair> out;
    std::set<std::string> ids;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        const std::string where = file.string() + ":" + std::to_string(line_no);
        ComparisonPair p;
        try {
            const auto j = json::parse(line);
            p.pair_id = j.at("pair_id").get<std::string>();
            p.generated = parse_side_block(j.at("generated"), where + " generated");
            p.source = parse_side_block(j.at("source"), where + " source");
            p.comparison = j.value("comparison", p.source.label);
        } catch (const json::exception& e) {
            throw Error(ErrorCode::ParseError, where + ": " + e.what());
        } catch (const Error& e) {
            throw Error(ErrorCode::ParseError, where + ": " + e.what());
        }
        if (p.pair_id.empty()) throw Error(ErrorCode::ParseError, where + ": empty pair_id");
        if (!ids.insert(p.pair_id).second) throw Error(ErrorCode::ParseError, where + ": duplicate pair_id");
        if (!same_text(p.generated.dialogue.dialogue(), p.source.dialogue.dialogue())) {
            throw Error(ErrorCode::ParseError, where + ": both sides must carry the same dialogue text");
        }
        p.generated_side = (derive_seed(seed, {p.pair_id, "side"}) & 1u) ? Side::B : Side::A;
        out.push_back(std::move(p));
    }
    return out;
}

EvalService::EvalService(EvalServiceOptions opts) : opts_(std::move(opts)), state_(std::make_shared<State>()) {
    pairs_ = load_pairs(opts_.pairs_dir, opts_.seed);
    for (std::size_t i = 0; i < pairs_.size(); ++i) {
        const auto& p = pairs_[i];
        pair_index_.emplace(p.pair_id, i);
        json gen = render_side(p.generated.dialogue);
        json src = render_side(p.source.dialogue);
        if (p.generated_side == Side::A) {
            views_.emplace_back(std::move(gen), std::move(src));
        } else {
            views_.emplace_back(std::move(src), std::move(gen));
        }
    }
    replay();
}

json EvalService::render_side(const AugmentedDialogue& d) {
    std::map<std::size_t, std::string> images;
    for (const auto& u : d.dialogue().utterances) {
        if (u.gold_image) images[u.index] = *u.gold_image;
    }
    for (const auto& a : d.attachments()) images[a.utterance_index] = a.image;

    const auto root = fs::weakly_canonical(opts_.pairs_dir);
    json utterances = json::array();
    for (const auto& u : d.dialogue().utterances) {
        json ju{{"speaker", u.speaker}, {"text", u.text}, {"image", nullptr}};
        if (auto it = images.find(u.index); it != images.end()) {
            const auto file = fs::weakly_canonical(opts_.pairs_dir / it->second);
            const auto rel = file.lexically_relative(root);
            if (!rel.empty() && *rel.begin() != "..") {
                const std::string name = hex64(fnv1a64(rel.generic_string())) + file.extension().string();
                images_.emplace(name, file);
                ju["image"] = "/api/images/" + name;
            }
        }
        utterances.push_back(std::move(ju));
    }
    return json{{"utterances", utterances}};
}

void EvalService::replay() {
    auto state = std::make_shared<State>();
    std::ifstream in(opts_.log_path, std::ios::binary);
    std::string line;
    std::size_t skipped = 0;
    while (in && std::getline(in, line)) {
        const auto j = json::parse(line, nullptr, false);
        if (!j.is_object() || j.value("event", "") != "annotation") {
            if (j.is_discarded()) ++skipped;
            continue;
        }
        try {
            const auto annotator = j.at("annotator").get<std::string>();
            const auto pair_id = j.at("pair_id").get<std::string>();
            if (!pair_index_.count(pair_id)) {
                ++skipped;
                continue;
            }
            Answers answers;
            for (const auto& [q, v] : j.at("answers").items()) answers[q] = parse_side(v.get<std::string>());
            state->by_annotator[annotator][pair_id] = std::move(answers);
        } catch (const std::exception&) {
            ++skipped;
        }
    }
    skipped_log_lines_ = skipped;
    std::atomic_store(&state_, std::shared_ptr<const State>(std::move(state)));
}

std::shared_ptr<const EvalService::State> EvalService::snapshot() const { return std::atomic_load(&state_); }

json EvalService::next_pair(const std::string& annotator) const {
    if (annotator.empty()) throw Error(ErrorCode::InvalidArgument, "annotator id is required");
    if (pairs_.empty()) throw Error(ErrorCode::NoPairsLoaded, "no comparison pairs loaded");
    const auto state = snapshot();
    const std::map<std::string, Answers>* done = nullptr;
    if (auto it = state->by_annotator.find(annotator); it != state->by_annotator.end()) done = &it->second;

    for (std::size_t i = 0; i < pairs_.size(); ++i) {
        if (done != nullptr && done->count(pairs_[i].pair_id)) continue;
        return json{{"done", false},
                    {"pair_id", pairs_[i].pair_id},
                    {"position", (done ? done->size() : 0) + 1},
                    {"total", pairs_.size()},
                    {"left", views_[i].first},
                    {"right", views_[i].second}};
    }
    return json{{"done", true}, {"answered", done ? done->size() : 0}, {"total", pairs_.size()}};
}

SubmitResult EvalService::submit(const std::string& annotator, const std::string& pair_id,
                                 const std::map<std::string, std::string>& answers) {
    if (annotator.empty()) throw Error(ErrorCode::InvalidArgument, "annotator id is required");
    if (!pair_index_.count(pair_id)) throw Error(ErrorCode::UnknownPair, "unknown pair '" + pair_id + "'");
    Answers parsed;
    for (const auto& q : kQuestions) {
        auto it = answers.find(q.id);
        if (it == answers.end()) throw Error(ErrorCode::IncompleteAnswers, std::string("missing answer for ") + q.id);
        parsed[q.id] = parse_side(it->second);
    }
    if (answers.size() != kQuestions.size()) {
        throw Error(ErrorCode::IncompleteAnswers, "answers must cover exactly Q1..Q6");
    }

    std::lock_guard lock(write_mu_);
    const auto current = snapshot();
    SubmitResult result;
    json answers_json = json::object();
    for (const auto& [q, s] : parsed) answers_json[q] = side_name(s);

    std::string entry;
    if (auto a = current->by_annotator.find(annotator); a != current->by_annotator.end()) {
        if (auto p = a->second.find(pair_id); p != a->second.end()) {
            result.replaced = true;
            json previous = json::object();
            for (const auto& [q, s] : p->second) previous[q] = side_name(s);
            entry += json{{"event", "resubmission"}, {"annotator", annotator}, {"pair_id", pair_id},
                          {"previous", previous}}.dump() + "\n";
        }
    }
    entry += json{{"event", "annotation"}, {"annotator", annotator}, {"pair_id", pair_id}, {"answers", answers_json}}
                 .dump() + "\n";
    {
        if (opts_.log_path.has_parent_path()) fs::create_directories(opts_.log_path.parent_path());
        std::ofstream out(opts_.log_path, std::ios::binary | std::ios::app);
        out << entry;
        out.flush();
        if (!out) throw Error(ErrorCode::IOError, "cannot append to " + opts_.log_path.string());
    }
    auto next = std::make_shared<State>(*current);
    next->by_annotator[annotator][pair_id] = std::move(parsed);
    std::atomic_store(&state_, std::shared_ptr<const State>(std::move(next)));
    return result;
}

std::vector<AnnotationRecord> EvalService::records() const {
    const auto state = snapshot();
    std::vector<AnnotationRecord> out;
    for (const auto& [annotator, by_pair] : state->by_annotator) {
        for (const auto& [pair_id, answers] : by_pair) {
            const auto& p = pairs_[pair_index_.at(pair_id)];
            for (const auto& [q, choice] : answers) {
                out.push_back(AnnotationRecord{pair_id, q, annotator, choice, p.generated_side});
            }
        }
    }
    return out;
}

json EvalService::report() const {
    const auto all = records();
    std::vector<std::string> order;
    std::map<std::string, std::pair<std::string, std::string>> labels;
    std::map<std::string, std::string> comparison_of;
    for (const auto& p : pairs_) {
        if (!labels.count(p.comparison)) {
            order.push_back(p.comparison);
            labels[p.comparison] = {p.generated.label, p.source.label};
        }
        comparison_of[p.pair_id] = p.comparison;
    }
    json comparisons = json::array();
    for (const auto& c : order) {
        std::vector<AnnotationRecord> subset;
        for (const auto& r : all) {
            if (comparison_of[r.pair_id] == c) subset.push_back(r);
        }
        const auto rows = question_reports(subset);
        json questions = json::array();
        for (const auto& row : rows) {
            json q{{"id", row.question_id}};
            for (const auto& known : kQuestions) {
                if (row.question_id == known.id) q["text"] = known.text;
            }
            q["mean_generated"] = row.means ? json(row.means->generated_pct) : json(nullptr);
            q["mean_other"] = row.means ? json(row.means->other_pct) : json(nullptr);
            q["ac1"] = row.ac1 ? json(*row.ac1) : json(nullptr);
            q["records"] = row.means ? row.means->records : 0;
            questions.push_back(std::move(q));
        }
        comparisons.push_back(json{{"comparison", c},
                                   {"generated_label", labels[c].first},
                                   {"source_label", labels[c].second},
                                   {"questions", questions},
                                   {"table", render_preference_table(labels[c].first, rows)}});
    }
    return json{{"comparisons", comparisons}, {"annotations", all.size()}};
}

std::optional<std::pair<std::string, std::string>> EvalService::image(const std::string& name) const {
    auto it = images_.find(name);
    if (it == images_.end()) return std::nullopt;
    try {
        return std::make_pair(read_file(it->second), media_type_of(it->second));
    } catch (const Error&) {
        return std::nullopt;
    }
}

void EvalService::mount(httplib::Server& server, const std::optional<fs::path>& ui_dir) {
    server.Get("/api/questions", [](const httplib::Request&, httplib::Response& res) {
        json qs = json::array();
        for (const auto& q : kQuestions) qs.push_back({{"id", q.id}, {"text", q.text}});
        send_json(res, qs);
    });
    server.Get("/api/pairs/next", [this](const httplib::Request& req, httplib::Response& res) {
        try {
            send_json(res, next_pair(req.get_param_value("annotator")));
        } catch (const Error& e) {
            send_error(res, e);
        }
    });
    server.Post("/api/annotations", [this](const httplib::Request& req, httplib::Response& res) {
        try {
            const auto body = json::parse(req.body, nullptr, false);
            if (!body.is_object()) throw Error(ErrorCode::ParseError, "body must be a JSON object");
            std::map<std::string, std::string> answers;
            if (auto it = body.find("answers"); it != body.end() && it->is_object()) {
                for (const auto& [q, v] : it->items()) {
                    if (!v.is_string()) throw Error(ErrorCode::IncompleteAnswers, "answer for " + q + " is not a string");
                    answers[q] = v.get<std::string>();
                }
            } else {
                throw Error(ErrorCode::IncompleteAnswers, "answers object is required");
            }
            const auto r = submit(body.value("annotator", ""), body.value("pair_id", ""), answers);
            send_json(res, json{{"ok", true}, {"replaced", r.replaced}});
        } catch (const Error& e) {
            send_error(res, e);
        } catch (const json::exception& e) {
            send_error(res, Error(ErrorCode::ParseError, e.what()));
        }
    });
    server.Get("/api/report", [this](const httplib::Request&, httplib::Response& res) { send_json(res, report()); });
    server.Get(R"(/api/images/([A-Za-z0-9._-]+))", [this](const httplib::Request& req, httplib::Response& res) {
        if (auto img = image(req.matches[1].str())) {
            res.set_content(img->first, img->second);
        } else {
            send_json(res, json{{"error", "NotFound"}}, 404);
        }
    });
    if (ui_dir) {
        if (!server.set_mount_point("/", ui_dir->string())) {
            throw Error(ErrorCode::IOError, "cannot serve UI from " + ui_dir->string());
        }
    }
}

}  // namespace mmdg
