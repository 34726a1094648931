// Copyright (C) 2026 The mmdg Authors
// SPDX-License-Identifier: Apache-2.0

#include "mmdg/scanner_parser.hpp"

#include <cctype>
#include <optional>
#include <set>

namespace mmdg {

namespace {

enum class TagType { Result, Reason };

struct Tag {
    TagType type;
    bool closing;
    std::size_t begin;  // offset of '<'
    std::size_t end;    // offset one past '>'
};

bool iequals_at(std::string_view text, std::size_t pos, std::string_view word) {
    if (pos + word.size() > text.size()) return false;
    for (std::size_t i = 0; i < word.size(); ++i) {
        if (std::tolower(static_cast<unsigned char>(text[pos + i])) != word[i]) return false;
    }
    return true;
}

std::vector<Tag> tokenize(std::string_view raw) {
    static constexpr struct {
        std::string_view text;
        TagType type;
        bool closing;
    } kTags[] = {
        {"<result>", TagType::Result, false},
        {"</result>", TagType::Result, true},
        {"<reason>", TagType::Reason, false},
        {"</reason>", TagType::Reason, true},
    };
    std::vector<Tag> tags;
    for (std::size_t pos = raw.find('<'); pos != std::string_view::npos; pos = raw.find('<', pos + 1)) {
        for (const auto& t : kTags) {
            if (iequals_at(raw, pos, t.text)) {
                tags.push_back({t.type, t.closing, pos, pos + t.text.size()});
                break;
            }
        }
    }
    return tags;
}

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

std::string_view trim(std::string_view s) {
    while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
    while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
    return s;
}

// Searches `body` for `Utterance\s*:?\s*(\d+)\s*:\s*(.+)`.
std::optional<ScannerDecision> match_utterance(std::string_view body) {
    constexpr std::string_view kWord = "utterance";
    for (std::size_t start = 0; start + kWord.size() <= body.size(); ++start) {
        if (!iequals_at(body, start, kWord)) continue;
        std::size_t p = start + kWord.size();
        while (p < body.size() && is_space(body[p])) ++p;
        if (p < body.size() && body[p] == ':') ++p;
        while (p < body.size() && is_space(body[p])) ++p;
        const std::size_t digits_begin = p;
        while (p < body.size() && std::isdigit(static_cast<unsigned char>(body[p]))) ++p;
        const std::size_t digit_count = p - digits_begin;
        if (digit_count == 0 || digit_count > 9) continue;
        while (p < body.size() && is_space(body[p])) ++p;
        if (p >= body.size() || body[p] != ':') continue;
        const auto description = trim(body.substr(p + 1));
        if (description.empty()) continue;
        ScannerDecision d;
        d.utterance_index = std::stoul(std::string(body.substr(digits_begin, digit_count)));
        d.description = std::string(description);
        return d;
    }
    return std::nullopt;
}

struct Block {
    TagType type;
    std::string_view body;
    std::size_t offset;
    int decision = -1;  // index into the decision list, results only
    bool has_reason = false;
};

}  // namespace

ParseOutcome parse_scanner_output(std::string_view raw) {
    ParseOutcome out;
    const auto tags = tokenize(raw);

    std::vector<Block> blocks;
    std::size_t i = 0;
    while (i < tags.size()) {
        const Tag& open = tags[i];
        if (open.closing) {
            ++i;  // stray close tag
            continue;
        }
        const bool closed = i + 1 < tags.size() && tags[i + 1].closing && tags[i + 1].type == open.type;
        if (!closed) {
            if (open.type == TagType::Result) {
                out.errors.push_back({ErrorCode::MalformedResult, open.begin, "unclosed <result> tag"});
            }
            ++i;
            continue;
        }
        const Tag& close = tags[i + 1];
        blocks.push_back({open.type, raw.substr(open.end, close.begin - open.end), open.begin});
        i += 2;
    }

    for (auto& b : blocks) {
        if (b.type != TagType::Result) continue;
        if (auto d = match_utterance(b.body)) {
            b.decision = static_cast<int>(out.decisions.size());
            out.decisions.push_back(std::move(*d));
        } else {
            out.errors.push_back({ErrorCode::MalformedResult, b.offset,
                                  "result block does not match 'Utterance i: description'"});
        }
    }

    const bool reason_first = !blocks.empty() && blocks.front().type == TagType::Reason;
    for (std::size_t k = 0; k < blocks.size(); ++k) {
        if (blocks[k].type != TagType::Reason) continue;
        const auto reason = trim(blocks[k].body);
        if (reason.empty()) continue;
        std::optional<std::size_t> prev, next;
        for (std::size_t j = k; j-- > 0;) {
            if (blocks[j].type == TagType::Result) {
                prev = j;
                break;
            }
        }
        for (std::size_t j = k + 1; j < blocks.size(); ++j) {
            if (blocks[j].type == TagType::Result) {
                next = j;
                break;
            }
        }
        const auto preferred = reason_first ? next : prev;
        const auto fallback = reason_first ? prev : next;
        for (const auto& target : {preferred, fallback}) {
            if (!target || blocks[*target].has_reason) continue;
            blocks[*target].has_reason = true;
            if (blocks[*target].decision >= 0) {
                out.decisions[static_cast<std::size_t>(blocks[*target].decision)].reason = std::string(reason);
            }
            break;
        }
    }
    return out;
}

ValidatedDecisions validate_decisions(std::span<const ScannerDecision> decisions, const Dialogue& d) {
    ValidatedDecisions out;
    std::set<std::size_t> seen;
    for (const auto& dec : decisions) {
        if (dec.utterance_index >= d.utterances.size()) {
            out.diagnostics.push_back("utterance " + std::to_string(dec.utterance_index) +
                                      " out of range for " + std::to_string(d.utterances.size()) +
                                      "-turn dialogue");
            continue;
        }
        if (!seen.insert(dec.utterance_index).second) {
            out.diagnostics.push_back("duplicate decision for utterance " +
                                      std::to_string(dec.utterance_index) + " dropped");
            continue;
        }
        out.kept.push_back(dec);
    }
    return out;
}

std::string emit_tagged(std::span<const ScannerDecision> decisions) {
    std::string out;
    for (const auto& d : decisions) {
        if (!out.empty()) out += '\n';
        out += "<result>Utterance: " + std::to_string(d.utterance_index) + ": " + d.description + "</result>";
        if (d.reason) out += " <reason>" + *d.reason + "</reason>";
    }
    return out;
}

}  // namespace mmdg
