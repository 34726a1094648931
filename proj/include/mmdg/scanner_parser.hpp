// Copyright (C) 2026 The mmdg Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mmdg/core.hpp"

namespace mmdg {

struct ParseDiagnostic {
    ErrorCode code = ErrorCode::MalformedResult;
    std::size_t offset = 0;  // byte offset of the offending tag in the raw text
    std::string message;
};

struct ParseOutcome {
    std::vector<ScannerDecision> decisions;
    std::vector<ParseDiagnostic> errors;
};

// Extracts <result>/<reason> blocks from a raw completion. Tag names match
// case-insensitively and blocks never nest: an opening tag that meets another
// tag before its own close is reported as unclosed. Well-formed results are
// returned even when other blocks are malformed.
//
// Reasons attach to an adjacent result. If the first block in the text is a
// reason the completion is read as reason-then-result, otherwise as
// result-then-reason; the other neighbour is used when the preferred one is
// missing or already has a reason.
ParseOutcome parse_scanner_output(std::string_view raw);

struct ValidatedDecisions {
    std::vector<ScannerDecision> kept;
    std::vector<std::string> diagnostics;
};

/// Drops out-of-range indices and keeps only the first decision per index.
ValidatedDecisions validate_decisions(std::span<const ScannerDecision> decisions, const Dialogue& d);

/// Canonical tagged rendering: "<result>Utterance: i: desc</result>" plus an
/// optional "<reason>...</reason>" after each result.
std::string emit_tagged(std::span<const ScannerDecision> decisions);

}  // namespace mmdg
