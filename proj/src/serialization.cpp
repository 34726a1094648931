// Copyright (C) 2026 The mmdg Authors
// SPDX-License-Identifier: Apache-2.0

#include "mmdg/serialization.hpp"

namespace mmdg {

using json = nlohmann::json;

void to_json(json& j, const Utterance& u) {
    j = json{{"speaker", u.speaker}, {"text", u.text}};
    j["gold_image"] = u.gold_image ? json(*u.gold_image) : json(nullptr);
}

void from_json(const json& j, Utterance& u) {
    u.speaker = j.value("speaker", std::string{});
    u.text = j.at("text").get<std::string>();
    if (auto it = j.find("gold_image"); it != j.end() && !it->is_null()) {
        u.gold_image = it->get<std::string>();
    } else {
        u.gold_image.reset();
    }
}

void to_json(json& j, const Dialogue& d) {
    j = json{{"dialogue_id", d.dialogue_id}, {"utterances", d.utterances}};
}

void from_json(const json& j, Dialogue& d) {
    d.dialogue_id = j.at("dialogue_id").get<std::string>();
    d.utterances = j.at("utterances").get<std::vector<Utterance>>();
    for (std::size_t i = 0; i < d.utterances.size(); ++i) d.utterances[i].index = i;
}

void to_json(json& j, const ScannerDecision& d) {
    j = json{{"utterance_index", d.utterance_index}, {"description", d.description}};
    if (d.reason) j["reason"] = *d.reason;
}

void from_json(const json& j, ScannerDecision& d) {
    d.utterance_index = j.at("utterance_index").get<std::size_t>();
    d.description = j.at("description").get<std::string>();
    if (auto it = j.find("reason"); it != j.end() && !it->is_null()) {
        d.reason = it->get<std::string>();
    } else {
        d.reason.reset();
    }
}

QaCheck parse_qa_check(std::string_view name) {
    if (name == "ImageTextMatch") return QaCheck::ImageTextMatch;
    if (name == "Aesthetic") return QaCheck::Aesthetic;
    if (name == "Safety") return QaCheck::Safety;
    throw Error(ErrorCode::ParseError, "unknown QA check '" + std::string(name) + "'");
}

void to_json(json& j, const QAVerdict& v) {
    json failed = json::array();
    for (auto c : v.failed_checks()) failed.push_back(std::string(to_string(c)));
    j = json{{"passed", v.passed()}, {"failed_checks", failed}};
}

void from_json(const json& j, QAVerdict& v) {
    std::set<QaCheck> failed;
    for (const auto& c : j.at("failed_checks")) failed.insert(parse_qa_check(c.get<std::string>()));
    v = QAVerdict(std::move(failed));
}

void to_json(json& j, const Attachment& a) {
    j = json{{"utterance_index", a.utterance_index}, {"image", a.image},
             {"description", a.description}, {"clip_score", a.clip_score},
             {"aesthetic_score", a.aesthetic_score}, {"attempts", a.attempts}};
}

void from_json(const json& j, Attachment& a) {
    a.utterance_index = j.at("utterance_index").get<std::size_t>();
    a.image = j.at("image").get<std::string>();
    a.description = j.at("description").get<std::string>();
    a.clip_score = j.at("clip_score").get<double>();
    a.aesthetic_score = j.at("aesthetic_score").get<double>();
    a.attempts = j.at("attempts").get<int>();
    a.reason.reset();
}

void to_json(json& j, const AugmentedDialogue& a) {
    j = json(a.dialogue());
    j["schema_version"] = kSchemaVersion;
    j["attachments"] = a.attachments();
}

void from_json(const json& j, AugmentedDialogue& a) {
    AugmentedDialogue out(j.get<Dialogue>());
    if (auto it = j.find("attachments"); it != j.end()) {
        for (const auto& att : *it) out.attach(att.get<Attachment>());
    }
    a = std::move(out);
}

}  // namespace mmdg
