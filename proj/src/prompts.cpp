// Copyright (C) 2026 The mmdg Authors
// SPDX-License-Identifier: Apache-2.0

#include "mmdg/prompts.hpp"

#include <array>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>

namespace mmdg {

std::string_view to_string(PromptKind kind) {
    switch (kind) {
        case PromptKind::ZeroShot: return "zero_shot";
        case PromptKind::FewShot: return "few_shot";
        case PromptKind::ChainOfThought: return "chain_of_thought";
        case PromptKind::Feedback: return "feedback";
    }
    return "unknown";
}

PromptKind prompt_kind_for(PromptStrategy s) {
    switch (s) {
        case PromptStrategy::ZeroShot: return PromptKind::ZeroShot;
        case PromptStrategy::FewShot: return PromptKind::FewShot;
        case PromptStrategy::ChainOfThought: return PromptKind::ChainOfThought;
    }
    return PromptKind::ZeroShot;
}

namespace {

std::optional<std::string> read_optional(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) return std::nullopt;
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

const std::string& require(const std::optional<std::string>& t, std::string_view name) {
    if (!t) throw Error(ErrorCode::MissingTemplate, "prompt template '" + std::string(name) + "' not loaded");
    return *t;
}

std::string join_blocks(const std::string& head, const std::string& tail) {
    std::string out = head;
    while (!out.empty() && out.back() == '\n') out.pop_back();
    out += "\n\n";
    out += tail;
    return out;
}

// Replaces every {{key}} occurrence; unknown keys are left as-is.
std::string render(std::string_view tpl, const std::map<std::string, std::string>& vars) {
    std::string out;
    out.reserve(tpl.size());
    std::size_t pos = 0;
    while (pos < tpl.size()) {
        const auto open = tpl.find("{{", pos);
        if (open == std::string_view::npos) break;
        const auto close = tpl.find("}}", open + 2);
        if (close == std::string_view::npos) break;
        out.append(tpl.substr(pos, open - pos));
        const std::string key(tpl.substr(open + 2, close - open - 2));
        if (auto it = vars.find(key); it != vars.end()) {
            out += it->second;
        } else {
            out.append(tpl.substr(open, close + 2 - open));
        }
        pos = close + 2;
    }
    out.append(tpl.substr(pos));
    return out;
}

std::string_view check_explanation(QaCheck c) {
    switch (c) {
        case QaCheck::ImageTextMatch:
            return "the generated image did not match the description closely enough";
        case QaCheck::Aesthetic:
            return "the generated image had low aesthetic quality or visible artifacts";
        case QaCheck::Safety:
            return "the generated image was flagged as unsafe";
    }
    return "";
}

}  // namespace

std::filesystem::path default_prompts_dir() {
    if (const char* env = std::getenv("MMDG_PROMPTS_DIR"); env != nullptr && *env != '\0') return env;
#ifdef MMDG_DEFAULT_PROMPTS_DIR
    return MMDG_DEFAULT_PROMPTS_DIR;
#else
    return "prompts";
#endif
}

PromptAssets PromptAssets::load(const std::filesystem::path& dir) {
    PromptAssets a;
    a.zero_shot = read_optional(dir / "zero_shot.txt");
    a.few_shot = read_optional(dir / "few_shot.txt");
    a.chain_of_thought = read_optional(dir / "cot.txt");
    a.feedback = read_optional(dir / "feedback.txt");
    return a;
}

std::string serialize_dialogue(const Dialogue& d) {
    if (d.utterances.empty()) {
        throw Error(ErrorCode::EmptyDialogue, "cannot serialize dialogue '" + d.dialogue_id + "'");
    }
    std::string out;
    for (std::size_t i = 0; i < d.utterances.size(); ++i) {
        if (i) out += '\n';
        out += "Utterance ";
        out += std::to_string(d.utterances[i].index);
        out += ": ";
        bool in_break = false;
        for (char c : d.utterances[i].text) {
            if (c == '\n' || c == '\r') {
                if (!in_break) out += ' ';
                in_break = true;
            } else {
                out += c;
                in_break = false;
            }
        }
    }
    return out;
}

PromptBundle build_scanner_prompt(const Dialogue& d, PromptStrategy strategy,
                                  const PromptAssets& assets) {
    PromptBundle b;
    b.kind = prompt_kind_for(strategy);
    const std::string& base = require(assets.zero_shot, "zero_shot");
    switch (strategy) {
        case PromptStrategy::ZeroShot:
            b.system_text = base;
            break;
        case PromptStrategy::FewShot:
            b.system_text = join_blocks(base, require(assets.few_shot, "few_shot"));
            break;
        case PromptStrategy::ChainOfThought:
            b.system_text = join_blocks(base, require(assets.chain_of_thought, "cot"));
            break;
    }
    b.user_text = serialize_dialogue(d);
    return b;
}

PromptBundle build_feedback_prompt(const Dialogue& d, const ScannerDecision& failed,
                                   std::span<const QAVerdict> failure_report,
                                   const PromptAssets& assets) {
    if (failed.utterance_index >= d.utterances.size()) {
        throw Error(ErrorCode::InvalidArgument, "feedback decision refers to utterance " +
                                                    std::to_string(failed.utterance_index) +
                                                    " outside the dialogue");
    }
    if (failure_report.empty()) {
        throw Error(ErrorCode::InvalidArgument, "feedback prompt needs at least one failed verdict");
    }

    constexpr std::array kOrder{QaCheck::ImageTextMatch, QaCheck::Aesthetic, QaCheck::Safety};
    std::string failures;
    for (QaCheck c : kOrder) {
        std::size_t count = 0;
        for (const auto& v : failure_report) count += v.failed_checks().count(c);
        if (count == 0) continue;
        if (!failures.empty()) failures += '\n';
        failures += "- ";
        failures += to_string(c);
        failures += ": ";
        failures += check_explanation(c);
        failures += " (failed in " + std::to_string(count) + " of " +
                    std::to_string(failure_report.size()) + " attempts)";
    }
    if (failures.empty()) failures = "- none reported";

    PromptBundle b;
    b.kind = PromptKind::Feedback;
    b.system_text = require(assets.zero_shot, "zero_shot");
    const std::map<std::string, std::string> vars{
        {"utterance_index", std::to_string(failed.utterance_index)},
        {"prior_description", failed.description},
        {"failures", failures},
        {"attempts", std::to_string(failure_report.size())},
    };
    b.user_text = serialize_dialogue(d) + "\n\n" + render(require(assets.feedback, "feedback"), vars);
    return b;
}

}  // namespace mmdg
