// Copyright (C) 2026 The mmdg Authors
// SPDX-License-Identifier: Apache-2.0

#include "mmdg/dataset_io.hpp"

#include <cctype>
#include <iomanip>
#include <sstream>

#include "mmdg/hashing.hpp"
#include "mmdg/serialization.hpp"

namespace mmdg {

using json = nlohmann::json;
namespace fs = std::filesystem;

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::IOError, "cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file_atomic(const fs::path& path, std::string_view bytes) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        out.flush();
        if (!out) throw Error(ErrorCode::IOError, "cannot write " + tmp.string());
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) throw Error(ErrorCode::IOError, "cannot rename into " + path.string() + ": " + ec.message());
}

AugmentedDialogue parse_dataset_line(std::string_view line) {
    json j;
    try {
        j = json::parse(line);
    } catch (const json::exception& e) {
        throw Error(ErrorCode::ParseError, std::string("invalid JSON: ") + e.what());
    }
    AugmentedDialogue out;
    try {
        if (!j.is_object()) throw Error(ErrorCode::ParseError, "line is not a JSON object");
        if (auto v = j.find("schema_version"); v != j.end() && v->get<int>() > kSchemaVersion) {
            throw Error(ErrorCode::ParseError, "unsupported schema_version " + v->dump());
        }
        out = j.get<AugmentedDialogue>();
    } catch (const json::exception& e) {
        throw Error(ErrorCode::ParseError, std::string("schema mismatch: ") + e.what());
    } catch (const Error& e) {
        if (e.code() == ErrorCode::InvalidArgument || e.code() == ErrorCode::IndexOutOfRange) {
            throw Error(ErrorCode::ParseError, e.what());
        }
        throw;
    }
    validate_dialogue(out.dialogue());
    return out;
}

std::string dataset_line(const AugmentedDialogue& d) { return json(d).dump(); }

std::string dialogue_hash(const Dialogue& d) { return hex64(fnv1a64(json(d).dump())); }

std::string file_safe_id(std::string_view dialogue_id) {
    std::string out;
    out.reserve(dialogue_id.size());
    for (char c : dialogue_id) {
        const bool ok = std::isalnum(static_cast<unsigned char>(c)) || c == '.' || c == '_' || c == '-';
        out += ok ? c : '_';
    }
    if (out.empty() || out == "." || out == "..") out = "_" + out;
    return out;
}

std::string image_relative_path(std::string_view dialogue_id, std::size_t utterance_index,
                                std::string_view media_type) {
    std::string_view ext = ".png";
    if (media_type == "image/jpeg") ext = ".jpg";
    if (media_type == "image/webp") ext = ".webp";
    return "images/" + file_safe_id(dialogue_id) + "_" + std::to_string(utterance_index) + std::string(ext);
}

CorpusReader::CorpusReader(const fs::path& path) : in_(path, std::ios::binary) {
    if (!in_) throw Error(ErrorCode::IOError, "cannot open corpus " + path.string());
}

std::optional<DatasetRecord> CorpusReader::next() {
    std::string line;
    while (std::getline(in_, line)) {
        ++line_;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.find_first_not_of(" \t") == std::string::npos) continue;
        try {
            DatasetRecord r;
            r.line = line_;
            r.dialogue = parse_dataset_line(line);
            r.input_hash = dialogue_hash(r.dialogue.dialogue());
            return r;
        } catch (const Error& e) {
            diagnostics_.push_back({line_, e.what()});
        }
    }
    return std::nullopt;
}

CorpusContents read_corpus(const fs::path& path) {
    CorpusReader reader(path);
    CorpusContents out;
    while (auto r = reader.next()) out.records.push_back(std::move(*r));
    out.diagnostics = reader.diagnostics();
    return out;
}

namespace {

json manifest_json(const ManifestEntry& m) {
    return json{{"dialogue_id", m.dialogue_id}, {"input_hash", m.input_hash},
                {"output_hash", m.output_hash}, {"attachments", m.attachments}};
}

std::vector<std::string> read_lines(const fs::path& path, bool& trailing_partial) {
    std::vector<std::string> lines;
    trailing_partial = false;
    if (!fs::exists(path)) return lines;
    const auto text = read_file(path);
    std::size_t pos = 0;
    while (pos < text.size()) {
        const auto nl = text.find('\n', pos);
        if (nl == std::string::npos) {
            trailing_partial = true;  // interrupted write
            break;
        }
        lines.push_back(text.substr(pos, nl - pos));
        pos = nl + 1;
    }
    return lines;
}

}  // namespace

DatasetWriter::DatasetWriter(fs::path out_dir) : dir_(std::move(out_dir)) {
    std::error_code ec;
    fs::create_directories(dir_ / "images", ec);
    fs::create_directories(dir_ / "traces", ec);
    if (ec) throw Error(ErrorCode::IOError, "cannot create output directory " + dir_.string());
    recover();
    dataset_.open(dir_ / "dataset.jsonl", std::ios::binary | std::ios::app);
    manifest_out_.open(dir_ / "manifest.jsonl", std::ios::binary | std::ios::app);
    if (!dataset_ || !manifest_out_) throw Error(ErrorCode::IOError, "cannot open outputs in " + dir_.string());
}

void DatasetWriter::recover() {
    bool manifest_partial = false;
    bool manifest_dirty = false;
    std::string manifest_text;
    for (const auto& line : read_lines(dir_ / "manifest.jsonl", manifest_partial)) {
        const auto j = json::parse(line, nullptr, false);
        if (!j.is_object() || !j.contains("dialogue_id")) {
            manifest_dirty = true;
            continue;
        }
        ManifestEntry m;
        m.dialogue_id = j["dialogue_id"].get<std::string>();
        m.input_hash = j.value("input_hash", std::string{});
        m.output_hash = j.value("output_hash", std::string{});
        m.attachments = j.value("attachments", std::size_t{0});
        if (!done_.insert(m.dialogue_id).second) {
            manifest_dirty = true;
            continue;
        }
        manifest_text += line + "\n";
        manifest_.push_back(std::move(m));
    }
    if (manifest_partial || manifest_dirty) write_file_atomic(dir_ / "manifest.jsonl", manifest_text);

    bool dataset_partial = false;
    bool dataset_dirty = false;
    std::set<std::string> kept;
    std::string dataset_text;
    for (const auto& line : read_lines(dir_ / "dataset.jsonl", dataset_partial)) {
        const auto j = json::parse(line, nullptr, false);
        const bool ok = j.is_object() && j.contains("dialogue_id") && j["dialogue_id"].is_string();
        const auto id = ok ? j["dialogue_id"].get<std::string>() : std::string{};
        if (!ok || !done_.count(id) || !kept.insert(id).second) {
            dataset_dirty = true;
            continue;
        }
        dataset_text += line + "\n";
    }
    if (dataset_partial || dataset_dirty) write_file_atomic(dir_ / "dataset.jsonl", dataset_text);
}

const ManifestEntry& DatasetWriter::write(const AugmentedDialogue& d,
                                          const std::map<std::size_t, ImagePayload>& images,
                                          std::string_view trace_json, std::string_view input_hash) {
    const auto& id = d.dialogue().dialogue_id;
    if (done_.count(id)) throw Error(ErrorCode::DuplicateDialogueId, "dialogue '" + id + "' already written");

    for (const auto& a : d.attachments()) {
        auto it = images.find(a.utterance_index);
        if (it == images.end()) {
            throw Error(ErrorCode::InvalidArgument, "no image bytes for '" + id + "' utterance " +
                                                        std::to_string(a.utterance_index));
        }
        write_file_atomic(dir_ / a.image, it->second.bytes);
    }
    write_file_atomic(dir_ / "traces" / (file_safe_id(id) + ".json"), trace_json);

    const auto line = dataset_line(d);
    dataset_ << line << '\n';
    dataset_.flush();
    if (!dataset_) throw Error(ErrorCode::IOError, "failed writing dataset.jsonl");

    ManifestEntry m{id, std::string(input_hash), hex64(fnv1a64(line)), d.attachments().size()};
    manifest_out_ << manifest_json(m).dump() << '\n';
    manifest_out_.flush();
    if (!manifest_out_) throw Error(ErrorCode::IOError, "failed writing manifest.jsonl");

    done_.insert(id);
    manifest_.push_back(std::move(m));
    return manifest_.back();
}

CorpusStats corpus_stats(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::IOError, "cannot open " + path.string());
    CorpusStats s;
    std::size_t utterances = 0, tokens = 0;
    std::string line;
    while (std::getline(in, line)) {
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        const auto j = json::parse(line, nullptr, false);
        if (!j.is_object() || !j.contains("utterances") || !j["utterances"].is_array()) continue;
        ++s.total_dialogues;
        for (const auto& u : j["utterances"]) {
            ++utterances;
            std::istringstream words(u.value("text", std::string{}));
            std::string w;
            while (words >> w) ++tokens;
            if (!j.contains("attachments") && u.contains("gold_image") && !u["gold_image"].is_null()) {
                ++s.total_images;
            }
        }
        if (auto it = j.find("attachments"); it != j.end() && it->is_array()) s.total_images += it->size();
    }
    if (s.total_dialogues > 0) {
        s.avg_dialogue_length = static_cast<double>(utterances) / static_cast<double>(s.total_dialogues);
    }
    if (utterances > 0) s.avg_sentence_length = static_cast<double>(tokens) / static_cast<double>(utterances);
    return s;
}

std::string render_stats(const CorpusStats& s) {
    auto fmt = [](const std::optional<double>& v) {
        if (!v) return std::string("N/A");
        std::ostringstream o;
        o << std::fixed << std::setprecision(2) << *v;
        return o.str();
    };
    std::ostringstream out;
    out << std::left << std::setw(26) << "Total dialogues" << s.total_dialogues << '\n'
        << std::setw(26) << "Avg length of dialogues" << fmt(s.avg_dialogue_length) << '\n'
        << std::setw(26) << "Avg length of sentences" << fmt(s.avg_sentence_length) << '\n'
        << std::setw(26) << "Total images" << s.total_images << '\n';
    return out.str();
}

std::string stats_json(const CorpusStats& s) {
    json j{{"Total dialogues", s.total_dialogues}, {"Total images", s.total_images}};
    j["Avg length of dialogues"] = s.avg_dialogue_length ? json(*s.avg_dialogue_length) : json(nullptr);
    j["Avg length of sentences"] = s.avg_sentence_length ? json(*s.avg_sentence_length) : json(nullptr);
    return j.dump(2);
}

}  // namespace mmdg
