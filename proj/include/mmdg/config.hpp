// Copyright (C) 2026 The mmdg Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <string>

#include <json.hpp>

#include "mmdg/core.hpp"

namespace mmdg {

using EnvLookup = std::function<std::optional<std::string>(const std::string&)>;

/// Reads the process environment.
EnvLookup process_env();

/// Builds a config from a JSON object. Relative paths are resolved against
/// `base_dir`. Unknown keys, and api_key anywhere, are rejected with
/// ConfigError.
PipelineConfig config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir);

/// Applies MMDG_* environment overrides:
///   MMDG_STRATEGY, MMDG_SEED, MMDG_PARALLELISM, MMDG_QA (on/off),
///   MMDG_BACKEND_MODE, MMDG_MOCK_FIXTURE,
///   MMDG_CHAT_URL, MMDG_CHAT_MODEL, MMDG_CHAT_API_KEY (and IMAGE_/EMBED_).
void apply_env(PipelineConfig& cfg, const EnvLookup& env);

/// Defaults, then the optional file, then the environment. Command-line flags
/// are applied by the caller afterwards. Validates the result.
PipelineConfig load_config(const std::optional<std::filesystem::path>& file, const EnvLookup& env);

/// JSON form accepted by config_from_json. API keys are never written.
nlohmann::json config_json(const PipelineConfig& cfg);

}  // namespace mmdg
