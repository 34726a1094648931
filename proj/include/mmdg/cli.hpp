// Copyright (C) 2026 The mmdg Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <ostream>
#include <string>
#include <vector>

#include "mmdg/config.hpp"

namespace mmdg {

inline constexpr int kExitOk = 0;
inline constexpr int kExitPartial = 1;
inline constexpr int kExitFatal = 2;

/// Entry point of the `mmdg` tool. `args` excludes the program name.
/// Returns 0 on success, 1 when some dialogues failed, 2 on usage, config or
/// IO errors.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err,
            const EnvLookup& env = process_env());

}  // namespace mmdg
