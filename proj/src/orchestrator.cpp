// Copyright (C) 2026 The mmdg Authors
// SPDX-License-Identifier: Apache-2.0

#include "mmdg/orchestrator.hpp"

#include <algorithm>
#include <chrono>
#include <mutex>
#include <set>

#include "mmdg/dataset_io.hpp"
#include "mmdg/hashing.hpp"
#include "mmdg/scanner_parser.hpp"
#include "mmdg/serialization.hpp"

namespace mmdg {

using json = nlohmann::json;

std::string_view to_string(UtteranceStatus s) {
    switch (s) {
        case UtteranceStatus::Accepted: return "accepted";
        case UtteranceStatus::DroppedQa: return "dropped_qa";
        case UtteranceStatus::DroppedParse: return "dropped_parse";
    }
    return "unknown";
}

json trace_json(const DialogueTrace& t) {
    json utterances = json::array();
    for (const auto& u : t.utterances) {
        json attempts = json::array();
        for (const auto& a : u.attempts) {
            json ja{{"description", a.description}, {"round", a.round}, {"attempt", a.attempt},
                    {"seed", a.seed}, {"verdict", a.verdict}};
            ja["clip_score"] = a.clip ? json(*a.clip) : json(nullptr);
            ja["aesthetic_score"] = a.aesthetic ? json(*a.aesthetic) : json(nullptr);
            ja["safe"] = a.safe ? json(*a.safe) : json(nullptr);
            if (a.error) ja["error"] = *a.error;
            attempts.push_back(std::move(ja));
        }
        json ju{{"utterance_index", u.utterance_index}, {"attempts", attempts},
                {"final_status", std::string(to_string(u.final_status))}, {"notes", u.notes}};
        ju["reason"] = u.reason ? json(*u.reason) : json(nullptr);
        utterances.push_back(std::move(ju));
    }
    return json{{"dialogue_id", t.dialogue_id},
                {"prompt_strategy", t.prompt_strategy},
                {"qa_enabled", t.qa_enabled},
                {"scanner_completion", t.scanner_completion},
                {"parse_errors", t.parse_errors},
                {"decision_diagnostics", t.decision_diagnostics},
                {"utterances", utterances}};
}

std::vector<std::pair<std::string, std::string>> default_safety_concepts() {
    return {
        {"sexual", "sexually explicit nudity"},
        {"violence", "graphic violence with blood and gore"},
        {"weapons", "person threatening with a weapon"},
        {"self-harm", "self harm and suicide"},
        {"hate", "hateful extremist symbols"},
        {"drugs", "illegal drug use"},
    };
}

PipelineDeps load_pipeline_deps(const PipelineConfig& cfg) {
    cfg.validate();
    auto backends = make_backends(cfg);
    auto prompts = PromptAssets::load(cfg.prompts_dir.empty() ? default_prompts_dir() : cfg.prompts_dir);

    std::optional<AestheticHead> head;
    if (!cfg.aesthetic_head.empty()) {
        head = AestheticHead::load(cfg.aesthetic_head);
    } else if (cfg.backends.mode == "mock") {
        head = AestheticHead::axis_probe(cfg.backends.embedding_dim, 0);
    } else {
        throw Error(ErrorCode::ConfigError, "aesthetic_head weights file is required for http backends");
    }

    SafetyConceptBank bank(cfg.safety_threshold);
    const auto concepts =
        cfg.safety_concepts.empty() ? default_safety_concepts() : load_concept_texts(cfg.safety_concepts);
    for (const auto& [label, text] : concepts) bank.add(label, backends.embed->embed_text(text));
    if (bank.empty()) throw Error(ErrorCode::EmptyBank, "no safety concepts configured");
    if (bank.dim() != head->dim()) {
        throw Error(ErrorCode::ShapeMismatch, "aesthetic head dim " + std::to_string(head->dim()) +
                                                  " != embedding dim " + std::to_string(bank.dim()));
    }
    return PipelineDeps{std::move(backends), std::move(prompts), std::move(*head), std::move(bank)};
}

namespace {

struct UtteranceResult {
    UtteranceTrace trace;
    std::optional<Attachment> attachment;
    std::optional<ImagePayload> image;
};

class DialogueRunner {
public:
    DialogueRunner(const Dialogue& d, const PipelineConfig& cfg, PipelineDeps& deps, DialogueOutcome& out)
        : d_(d), cfg_(cfg), deps_(deps), out_(out) {}

    UtteranceResult run(const ScannerDecision& decision) {
        UtteranceResult r;
        r.trace.utterance_index = decision.utterance_index;
        r.trace.reason = decision.reason;

        ScannerDecision current = decision;
        int global_attempt = 0;
        for (int round = 0;; ++round) {
            std::vector<QAVerdict> failures;
            for (int attempt = 1; attempt <= cfg_.max_tries_per_description; ++attempt) {
                ++global_attempt;
                if (try_once(current, round, attempt, global_attempt, r, failures)) {
                    r.trace.final_status = UtteranceStatus::Accepted;
                    return r;
                }
            }
            if (round >= cfg_.max_feedback_rounds) break;
            if (failures.empty()) {
                r.trace.notes.push_back("feedback skipped: every attempt failed at the backend");
                break;
            }
            auto next = ask_for_new_description(current, failures, round + 1, r.trace);
            if (!next) return r;  // final status already set
            current = std::move(*next);
        }
        r.trace.final_status = UtteranceStatus::DroppedQa;
        return r;
    }

private:
    const Embedding& text_embedding(const ScannerDecision& dec) {
        const std::string& text = cfg_.match_against == MatchTarget::Description
                                      ? dec.description
                                      : d_.utterances[dec.utterance_index].text;
        auto it = text_cache_.find(text);
        if (it == text_cache_.end()) it = text_cache_.emplace(text, deps_.backends.embed->embed_text(text)).first;
        return it->second;
    }

    bool try_once(const ScannerDecision& dec, int round, int attempt, int global_attempt, UtteranceResult& r,
                  std::vector<QAVerdict>& failures) {
        AttemptRecord rec;
        rec.description = dec.description;
        rec.round = round;
        rec.attempt = attempt;
        rec.seed = derive_seed(cfg_.seed, {d_.dialogue_id, std::to_string(dec.utterance_index), dec.description,
                                           std::to_string(global_attempt)});

        ImageRequest req{dec.description, cfg_.image_width, cfg_.image_height, rec.seed, cfg_.image_model};
        ++out_.generation_calls;
        ImageCandidate candidate;
        candidate.attempt = attempt;
        try {
            candidate.image = deps_.backends.image->generate_image(req);
            candidate.embedding = deps_.backends.embed->embed_image(candidate.image);
            rec.verdict = evaluate_candidate(candidate, text_embedding(dec), cfg_, deps_.head, deps_.bank);
            rec.clip = candidate.clip_score;
            rec.aesthetic = candidate.aesthetic_score;
            rec.safe = candidate.safe;
        } catch (const Error& e) {
            ++out_.backend_errors;
            rec.error = e.what();
            r.trace.attempts.push_back(std::move(rec));
            return false;
        }

        const bool accepted = !cfg_.qa_enabled || rec.verdict.passed();
        if (!rec.verdict.passed()) failures.push_back(rec.verdict);
        r.trace.attempts.push_back(rec);
        if (!accepted) return false;

        Attachment a;
        a.utterance_index = dec.utterance_index;
        a.image = image_relative_path(d_.dialogue_id, dec.utterance_index, candidate.image.media_type);
        a.description = dec.description;
        a.clip_score = candidate.clip_score;
        a.aesthetic_score = candidate.aesthetic_score;
        a.attempts = static_cast<int>(r.trace.attempts.size());
        a.reason = dec.reason;
        r.attachment = std::move(a);
        r.image = std::move(candidate.image);
        return true;
    }

    std::optional<ScannerDecision> ask_for_new_description(const ScannerDecision& current,
                                                           const std::vector<QAVerdict>& failures, int round,
                                                           UtteranceTrace& trace) {
        const auto bundle = build_feedback_prompt(d_, current, failures, deps_.prompts);
        ChatRequest req{bundle.system_text, bundle.user_text, cfg_.backends.temperature,
                        derive_seed(cfg_.seed, {d_.dialogue_id, std::to_string(current.utterance_index),
                                                "feedback", std::to_string(round)}),
                        std::string(to_string(bundle.kind))};
        ChatResponse resp;
        try {
            resp = deps_.backends.chat->chat_complete(req);
        } catch (const Error& e) {
            ++out_.backend_errors;
            trace.notes.push_back(std::string("feedback chat failed: ") + e.what());
            trace.final_status = UtteranceStatus::DroppedQa;
            return std::nullopt;
        }
        const auto parsed = parse_scanner_output(resp.completion_text);
        for (const auto& dec : parsed.decisions) {
            if (dec.utterance_index == current.utterance_index) {
                trace.notes.push_back("feedback round " + std::to_string(round) + ": new description");
                ScannerDecision next = dec;
                if (!next.reason) next.reason = current.reason;
                return next;
            }
        }
        trace.notes.push_back("feedback round " + std::to_string(round) +
                              ": no result block for this utterance");
        trace.final_status = UtteranceStatus::DroppedParse;
        return std::nullopt;
    }

    const Dialogue& d_;
    const PipelineConfig& cfg_;
    PipelineDeps& deps_;
    DialogueOutcome& out_;
    std::map<std::string, Embedding> text_cache_;
};

}  // namespace

DialogueOutcome augment_dialogue(const Dialogue& d, const PipelineConfig& cfg, PipelineDeps& deps) {
    validate_dialogue(d);
    DialogueOutcome out;
    out.augmented = AugmentedDialogue(d);
    out.trace.dialogue_id = d.dialogue_id;
    out.trace.prompt_strategy = std::string(to_string(cfg.prompt_strategy));
    out.trace.qa_enabled = cfg.qa_enabled;

    const auto bundle = build_scanner_prompt(d, cfg.prompt_strategy, deps.prompts);
    ChatRequest req{bundle.system_text, bundle.user_text, cfg.backends.temperature,
                    derive_seed(cfg.seed, {d.dialogue_id, "scan"}), std::string(to_string(bundle.kind))};
    ChatResponse resp;
    try {
        resp = deps.backends.chat->chat_complete(req);
    } catch (const Error& e) {
        throw Error(ErrorCode::ScannerUnavailable, "dialogue '" + d.dialogue_id + "': " + e.what());
    }
    out.trace.scanner_completion = resp.completion_text;

    const auto parsed = parse_scanner_output(resp.completion_text);
    for (const auto& e : parsed.errors) {
        out.trace.parse_errors.push_back("offset " + std::to_string(e.offset) + ": " + e.message);
    }
    const auto validated = validate_decisions(parsed.decisions, d);
    out.trace.decision_diagnostics = validated.diagnostics;

    DialogueRunner runner(d, cfg, deps, out);
    for (const auto& decision : validated.kept) {
        auto r = runner.run(decision);
        if (r.attachment) {
            out.images.emplace(decision.utterance_index, std::move(*r.image));
            out.augmented.attach(std::move(*r.attachment));
        }
        out.trace.utterances.push_back(std::move(r.trace));
    }
    return out;
}

json report_json(const RunReport& r) {
    json failures = json::array();
    for (const auto& f : r.failures) {
        failures.push_back({{"line", f.line}, {"dialogue_id", f.dialogue_id}, {"error", f.error}});
    }
    return json{{"dialogues_in_input", r.dialogues_in_input},
                {"dialogues_processed", r.dialogues_processed},
                {"dialogues_skipped", r.dialogues_skipped},
                {"images_accepted", r.images_accepted},
                {"dropped_qa", r.dropped_qa},
                {"dropped_parse", r.dropped_parse},
                {"generation_calls", r.generation_calls},
                {"backend_errors", r.backend_errors},
                {"failures", failures},
                {"wall_seconds", r.wall_seconds}};
}

namespace {

struct Slot {
    std::optional<DialogueOutcome> outcome;
    std::optional<std::string> error;
    bool ready = false;
};

// Collects results from workers and writes them strictly in input order.
class OrderedSink {
public:
    OrderedSink(std::vector<DatasetRecord>& work, DatasetWriter& writer, RunReport& report)
        : work_(work), writer_(writer), report_(report), slots_(work.size()) {}

    void complete(std::size_t i, Slot slot) {
        std::lock_guard lock(mu_);
        slots_[i] = std::move(slot);
        slots_[i].ready = true;
        while (next_ < slots_.size() && slots_[next_].ready) {
            flush(next_);
            slots_[next_] = Slot{};  // release memory
            ++next_;
        }
    }

private:
    void flush(std::size_t i) {
        const auto& rec = work_[i];
        auto& slot = slots_[i];
        const auto& id = rec.dialogue.dialogue().dialogue_id;
        if (slot.outcome) {
            try {
                writer_.write(slot.outcome->augmented, slot.outcome->images,
                              trace_json(slot.outcome->trace).dump(2), rec.input_hash);
            } catch (const Error& e) {
                slot.error = e.what();
            }
        }
        if (slot.error) {
            report_.failures.push_back({rec.line, id, *slot.error});
            return;
        }
        const auto& o = *slot.outcome;
        ++report_.dialogues_processed;
        report_.generation_calls += static_cast<std::size_t>(o.generation_calls);
        report_.backend_errors += static_cast<std::size_t>(o.backend_errors);
        for (const auto& u : o.trace.utterances) {
            switch (u.final_status) {
                case UtteranceStatus::Accepted: ++report_.images_accepted; break;
                case UtteranceStatus::DroppedQa: ++report_.dropped_qa; break;
                case UtteranceStatus::DroppedParse: ++report_.dropped_parse; break;
            }
        }
        report_.traces.push_back(o.trace);
    }

    std::vector<DatasetRecord>& work_;
    DatasetWriter& writer_;
    RunReport& report_;
    std::mutex mu_;
    std::vector<Slot> slots_;
    std::size_t next_ = 0;
};

Slot process(const DatasetRecord& rec, const PipelineConfig& cfg, PipelineDeps& deps) {
    Slot s;
    try {
        s.outcome = augment_dialogue(rec.dialogue.dialogue(), cfg, deps);
    } catch (const std::exception& e) {
        s.error = e.what();
    }
    return s;
}

}  // namespace

RunReport run_corpus(const std::filesystem::path& input, const std::filesystem::path& out_dir,
                     const PipelineConfig& cfg, PipelineDeps& deps) {
    const auto started = std::chrono::steady_clock::now();
    RunReport report;
    DatasetWriter writer(out_dir);

    CorpusReader reader(input);
    std::vector<DatasetRecord> work;
    std::set<std::string> seen;
    while (auto rec = reader.next()) {
        ++report.dialogues_in_input;
        const auto& id = rec->dialogue.dialogue().dialogue_id;
        if (!seen.insert(id).second) {
            report.failures.push_back({rec->line, id, "DuplicateDialogueId: repeated in input"});
            continue;
        }
        if (writer.contains(id)) {
            ++report.dialogues_skipped;
            continue;
        }
        work.push_back(std::move(*rec));
    }
    for (const auto& diag : reader.diagnostics()) {
        report.failures.push_back({diag.line, "", diag.message});
    }

    OrderedSink sink(work, writer, report);
    const long long n = static_cast<long long>(work.size());
    if (cfg.parallelism <= 1) {
        for (long long i = 0; i < n; ++i) {
            sink.complete(static_cast<std::size_t>(i), process(work[static_cast<std::size_t>(i)], cfg, deps));
        }
    } else {
#pragma omp parallel for schedule(dynamic, 1) num_threads(cfg.parallelism)
        for (long long i = 0; i < n; ++i) {
            sink.complete(static_cast<std::size_t>(i), process(work[static_cast<std::size_t>(i)], cfg, deps));
        }
    }

    std::sort(report.failures.begin(), report.failures.end(),
              [](const FailedDialogue& a, const FailedDialogue& b) { return a.line < b.line; });
    report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    write_file_atomic(out_dir / "run_report.json", report_json(report).dump(2));
    return report;
}

}  // namespace mmdg
