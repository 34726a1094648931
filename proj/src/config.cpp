// Copyright (C) 2026 The mmdg Authors
// SPDX-License-Identifier: Apache-2.0

#include "mmdg/config.hpp"

#include <charconv>
#include <cstdlib>
#include <fstream>
#include <set>

namespace mmdg {

using json = nlohmann::json;
namespace fs = std::filesystem;

EnvLookup process_env() {
    return [](const std::string& name) -> std::optional<std::string> {
        const char* v = std::getenv(name.c_str());
        if (v == nullptr) return std::nullopt;
        return std::string(v);
    };
}

namespace {

void reject_unknown(const json& j, const std::set<std::string>& known, const std::string& where) {
    for (const auto& [key, _] : j.items()) {
        if (!known.count(key)) throw Error(ErrorCode::ConfigError, "unknown key '" + key + "' in " + where);
    }
}

fs::path resolve(const fs::path& base, const std::string& p) {
    if (p.empty()) return {};
    fs::path path(p);
    return path.is_absolute() ? path : base / path;
}

MatchTarget parse_match(const std::string& s) {
    if (s == "description") return MatchTarget::Description;
    if (s == "utterance") return MatchTarget::Utterance;
    throw Error(ErrorCode::ConfigError, "match_against must be 'description' or 'utterance'");
}

bool parse_on_off(const std::string& s, const std::string& what) {
    if (s == "on" || s == "1" || s == "true") return true;
    if (s == "off" || s == "0" || s == "false") return false;
    throw Error(ErrorCode::ConfigError, what + " must be on or off, got '" + s + "'");
}

template <typename T>
T parse_number(const std::string& s, const std::string& what) {
    T v{};
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size()) {
        throw Error(ErrorCode::ConfigError, what + ": not a number: '" + s + "'");
    }
    return v;
}

void read_endpoint(const json& j, EndpointConfig& e, const std::string& where) {
    if (j.contains("api_key")) {
        throw Error(ErrorCode::ConfigError, where + ".api_key: credentials are read from the environment only");
    }
    reject_unknown(j, {"url", "model", "timeout_ms"}, where);
    e.url = j.value("url", e.url);
    e.model = j.value("model", e.model);
    e.timeout_ms = j.value("timeout_ms", e.timeout_ms);
}

json endpoint_json(const EndpointConfig& e) {
    return json{{"url", e.url}, {"model", e.model}, {"timeout_ms", e.timeout_ms}};
}

}  // namespace

PipelineConfig config_from_json(const json& j, const fs::path& base_dir) {
    if (!j.is_object()) throw Error(ErrorCode::ConfigError, "config must be a JSON object");
    reject_unknown(j,
                   {"prompt_strategy", "clip_threshold", "aesthetic_threshold", "safety_threshold",
                    "max_tries_per_description", "max_feedback_rounds", "parallelism", "seed", "qa_enabled",
                    "match_against", "image_width", "image_height", "image_model", "prompts_dir",
                    "aesthetic_head", "safety_concepts", "backends"},
                   "config");
    PipelineConfig c;
    try {
        if (j.contains("prompt_strategy")) c.prompt_strategy = parse_strategy(j["prompt_strategy"].get<std::string>());
        c.clip_threshold = j.value("clip_threshold", c.clip_threshold);
        c.aesthetic_threshold = j.value("aesthetic_threshold", c.aesthetic_threshold);
        c.safety_threshold = j.value("safety_threshold", c.safety_threshold);
        c.max_tries_per_description = j.value("max_tries_per_description", c.max_tries_per_description);
        c.max_feedback_rounds = j.value("max_feedback_rounds", c.max_feedback_rounds);
        c.parallelism = j.value("parallelism", c.parallelism);
        c.seed = j.value("seed", c.seed);
        c.qa_enabled = j.value("qa_enabled", c.qa_enabled);
        if (j.contains("match_against")) c.match_against = parse_match(j["match_against"].get<std::string>());
        c.image_width = j.value("image_width", c.image_width);
        c.image_height = j.value("image_height", c.image_height);
        c.image_model = j.value("image_model", c.image_model);
        c.prompts_dir = resolve(base_dir, j.value("prompts_dir", std::string{}));
        c.aesthetic_head = resolve(base_dir, j.value("aesthetic_head", std::string{}));
        c.safety_concepts = resolve(base_dir, j.value("safety_concepts", std::string{}));

        if (auto it = j.find("backends"); it != j.end()) {
            const json& b = *it;
            reject_unknown(b,
                           {"mode", "mock_fixture", "embedding_dim", "chat", "image", "embed", "retries",
                            "backoff_ms", "temperature"},
                           "backends");
            auto& bc = c.backends;
            bc.mode = b.value("mode", bc.mode);
            bc.mock_fixture = resolve(base_dir, b.value("mock_fixture", std::string{}));
            bc.embedding_dim = b.value("embedding_dim", bc.embedding_dim);
            bc.retries = b.value("retries", bc.retries);
            bc.backoff_ms = b.value("backoff_ms", bc.backoff_ms);
            bc.temperature = b.value("temperature", bc.temperature);
            if (b.contains("chat")) read_endpoint(b["chat"], bc.chat, "backends.chat");
            if (b.contains("image")) read_endpoint(b["image"], bc.image, "backends.image");
            if (b.contains("embed")) read_endpoint(b["embed"], bc.embed, "backends.embed");
        }
    } catch (const json::exception& e) {
        throw Error(ErrorCode::ConfigError, std::string("bad config value: ") + e.what());
    } catch (const Error& e) {
        if (e.code() == ErrorCode::ConfigError) throw;
        throw Error(ErrorCode::ConfigError, e.what());
    }
    if (c.backends.mode != "mock" && c.backends.mode != "http") {
        throw Error(ErrorCode::ConfigError, "backends.mode must be 'mock' or 'http'");
    }
    return c;
}

void apply_env(PipelineConfig& c, const EnvLookup& env) {
    auto get = [&](const char* name) { return env(name); };
    try {
        if (auto v = get("MMDG_STRATEGY")) c.prompt_strategy = parse_strategy(*v);
    } catch (const Error& e) {
        throw Error(ErrorCode::ConfigError, std::string("MMDG_STRATEGY: ") + e.what());
    }
    if (auto v = get("MMDG_SEED")) c.seed = parse_number<std::uint64_t>(*v, "MMDG_SEED");
    if (auto v = get("MMDG_PARALLELISM")) c.parallelism = parse_number<int>(*v, "MMDG_PARALLELISM");
    if (auto v = get("MMDG_QA")) c.qa_enabled = parse_on_off(*v, "MMDG_QA");
    if (auto v = get("MMDG_BACKEND_MODE")) c.backends.mode = *v;
    if (auto v = get("MMDG_MOCK_FIXTURE")) c.backends.mock_fixture = *v;
    struct Slot {
        const char* prefix;
        EndpointConfig* endpoint;
    };
    for (auto [prefix, e] : {Slot{"MMDG_CHAT_", &c.backends.chat}, Slot{"MMDG_IMAGE_", &c.backends.image},
                             Slot{"MMDG_EMBED_", &c.backends.embed}}) {
        const std::string p(prefix);
        if (auto v = env(p + "URL")) e->url = *v;
        if (auto v = env(p + "MODEL")) e->model = *v;
        if (auto v = env(p + "API_KEY")) e->api_key = *v;
    }
}

PipelineConfig load_config(const std::optional<fs::path>& file, const EnvLookup& env) {
    PipelineConfig c;
    if (file) {
        std::ifstream in(*file);
        if (!in) throw Error(ErrorCode::ConfigError, "cannot read config " + file->string());
        json j;
        try {
            j = json::parse(in);
        } catch (const json::exception& e) {
            throw Error(ErrorCode::ConfigError, file->string() + ": " + e.what());
        }
        c = config_from_json(j, fs::absolute(*file).parent_path());
    }
    apply_env(c, env);
    c.validate();
    return c;
}

json config_json(const PipelineConfig& c) {
    return json{{"prompt_strategy", std::string(short_name(c.prompt_strategy))},
                {"clip_threshold", c.clip_threshold},
                {"aesthetic_threshold", c.aesthetic_threshold},
                {"safety_threshold", c.safety_threshold},
                {"max_tries_per_description", c.max_tries_per_description},
                {"max_feedback_rounds", c.max_feedback_rounds},
                {"parallelism", c.parallelism},
                {"seed", c.seed},
                {"qa_enabled", c.qa_enabled},
                {"match_against", c.match_against == MatchTarget::Description ? "description" : "utterance"},
                {"image_width", c.image_width},
                {"image_height", c.image_height},
                {"image_model", c.image_model},
                {"prompts_dir", c.prompts_dir.string()},
                {"aesthetic_head", c.aesthetic_head.string()},
                {"safety_concepts", c.safety_concepts.string()},
                {"backends",
                 {{"mode", c.backends.mode},
                  {"mock_fixture", c.backends.mock_fixture.string()},
                  {"embedding_dim", c.backends.embedding_dim},
                  {"retries", c.backends.retries},
                  {"backoff_ms", c.backends.backoff_ms},
                  {"temperature", c.backends.temperature},
                  {"chat", endpoint_json(c.backends.chat)},
                  {"image", endpoint_json(c.backends.image)},
                  {"embed", endpoint_json(c.backends.embed)}}}};
}

}  // namespace mmdg
