// Copyright (C) 2026 The mmdg Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

// Minimal PNG writer/reader used by the mock image backend.
namespace mmdg::png {

/// 8-bit RGB image, `rgb` holds width*height*3 bytes. Each text pair becomes a
/// tEXt chunk placed before the image data.
std::string encode_rgb(int width, int height, std::span<const std::uint8_t> rgb,
                       const std::vector<std::pair<std::string, std::string>>& text = {});

bool is_png(std::string_view bytes);

/// Value of the first tEXt chunk with `keyword`, if any. Never throws.
std::optional<std::string> find_text(std::string_view bytes, std::string_view keyword);

}  // namespace mmdg::png
