// Copyright (C) 2026 The mmdg Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "mmdg/core.hpp"

namespace mmdg {

struct LineDiagnostic {
    std::size_t line = 0;  // 1-based
    std::string message;
};

/// One JSON line of a corpus or augmented dataset. Plain corpora simply have
/// no attachments.
struct DatasetRecord {
    std::size_t line = 0;
    AugmentedDialogue dialogue;
    std::string input_hash;  // hash of the canonical dialogue JSON
};

/// Streams dialogues from a JSON-lines file. Malformed lines become
/// diagnostics and the stream continues.
class CorpusReader {
public:
    explicit CorpusReader(const std::filesystem::path& path);

    /// Next well-formed record, or nullopt at end of file.
    std::optional<DatasetRecord> next();

    const std::vector<LineDiagnostic>& diagnostics() const noexcept { return diagnostics_; }

private:
    std::ifstream in_;
    std::size_t line_ = 0;
    std::vector<LineDiagnostic> diagnostics_;
};

struct CorpusContents {
    std::vector<DatasetRecord> records;
    std::vector<LineDiagnostic> diagnostics;
};

CorpusContents read_corpus(const std::filesystem::path& path);

/// Parses one line. Throws ParseError (bad JSON / schema) or one of the
/// validate_dialogue errors.
AugmentedDialogue parse_dataset_line(std::string_view line);

std::string dataset_line(const AugmentedDialogue& d);

/// Stable hash of the dialogue's canonical JSON, 16 hex digits.
std::string dialogue_hash(const Dialogue& d);

/// Dialogue ids restricted to [A-Za-z0-9._-] for use in file names.
std::string file_safe_id(std::string_view dialogue_id);

/// "images/{id}_{index}.png" (extension follows the media type).
std::string image_relative_path(std::string_view dialogue_id, std::size_t utterance_index,
                                std::string_view media_type = "image/png");

struct ManifestEntry {
    std::string dialogue_id;
    std::string input_hash;
    std::string output_hash;
    std::size_t attachments = 0;
};

// Output directory layout:
//   dataset.jsonl      one augmented dialogue per line
//   manifest.jsonl     one entry per completed dialogue (resume index)
//   images/            accepted images
//   traces/{id}.json   per-dialogue run trace
//
// Opening an existing directory reloads the manifest. Dataset lines without a
// manifest entry (a crash between the two writes) are dropped; a consistent
// directory is left untouched.
class DatasetWriter {
public:
    explicit DatasetWriter(std::filesystem::path out_dir);

    bool contains(const std::string& dialogue_id) const { return done_.count(dialogue_id) != 0; }
    const std::vector<ManifestEntry>& manifest() const noexcept { return manifest_; }
    const std::filesystem::path& dir() const noexcept { return dir_; }

    /// Writes images, trace, dataset line and manifest entry, in that order.
    /// `images` maps utterance index to payload for every attachment.
    /// Throws DuplicateDialogueId or IOError.
    const ManifestEntry& write(const AugmentedDialogue& d, const std::map<std::size_t, ImagePayload>& images,
                               std::string_view trace_json, std::string_view input_hash);

private:
    void recover();

    std::filesystem::path dir_;
    std::vector<ManifestEntry> manifest_;
    std::set<std::string> done_;
    std::ofstream dataset_;
    std::ofstream manifest_out_;
};

struct CorpusStats {
    std::size_t total_dialogues = 0;
    std::optional<double> avg_dialogue_length;  // utterances per dialogue
    std::optional<double> avg_sentence_length;  // whitespace tokens per utterance
    std::size_t total_images = 0;
};

/// Statistics over a corpus or dataset file. Images are counted from
/// attachments; lines without an "attachments" field count gold images instead.
CorpusStats corpus_stats(const std::filesystem::path& path);

/// Four-row "Total dialogues / Avg length of dialogues / Avg length of
/// sentences / Total images" table.
std::string render_stats(const CorpusStats& s);
std::string stats_json(const CorpusStats& s);

/// Writes `bytes` to `path` via a temporary file and rename.
void write_file_atomic(const std::filesystem::path& path, std::string_view bytes);
std::string read_file(const std::filesystem::path& path);

}  // namespace mmdg
