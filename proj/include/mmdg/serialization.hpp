// Copyright (C) 2026 The mmdg Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <json.hpp>

#include "mmdg/core.hpp"

// JSON mapping of the domain types. Utterance indices are implicit in array
// position; from_json(Dialogue) renumbers them 0..n-1.
namespace mmdg {

inline constexpr int kSchemaVersion = 1;

void to_json(nlohmann::json& j, const Utterance& u);
void from_json(const nlohmann::json& j, Utterance& u);

void to_json(nlohmann::json& j, const Dialogue& d);
void from_json(const nlohmann::json& j, Dialogue& d);

void to_json(nlohmann::json& j, const ScannerDecision& d);
void from_json(const nlohmann::json& j, ScannerDecision& d);

void to_json(nlohmann::json& j, const QAVerdict& v);
void from_json(const nlohmann::json& j, QAVerdict& v);

// Dataset form: reason is not written (it lives in the run traces).
void to_json(nlohmann::json& j, const Attachment& a);
void from_json(const nlohmann::json& j, Attachment& a);

void to_json(nlohmann::json& j, const AugmentedDialogue& a);
void from_json(const nlohmann::json& j, AugmentedDialogue& a);

QaCheck parse_qa_check(std::string_view name);

}  // namespace mmdg
