// Copyright (C) 2026 The mmdg Authors
// SPDX-License-Identifier: Apache-2.0

#include "mmdg/png.hpp"

#include <stdexcept>

#include <zlib.h>

namespace mmdg::png {

namespace {

constexpr std::string_view kSignature("\x89PNG\r\n\x1a\n", 8);

void put_u32(std::string& out, std::uint32_t v) {
    out += static_cast<char>((v >> 24) & 0xff);
    out += static_cast<char>((v >> 16) & 0xff);
    out += static_cast<char>((v >> 8) & 0xff);
    out += static_cast<char>(v & 0xff);
}

std::uint32_t get_u32(std::string_view s, std::size_t pos) {
    return (static_cast<std::uint32_t>(static_cast<unsigned char>(s[pos])) << 24) |
           (static_cast<std::uint32_t>(static_cast<unsigned char>(s[pos + 1])) << 16) |
           (static_cast<std::uint32_t>(static_cast<unsigned char>(s[pos + 2])) << 8) |
           static_cast<std::uint32_t>(static_cast<unsigned char>(s[pos + 3]));
}

void put_chunk(std::string& out, std::string_view type, std::string_view data) {
    put_u32(out, static_cast<std::uint32_t>(data.size()));
    std::string body(type);
    body.append(data);
    out += body;
    const auto crc = ::crc32(0L, reinterpret_cast<const Bytef*>(body.data()), static_cast<uInt>(body.size()));
    put_u32(out, static_cast<std::uint32_t>(crc));
}

}  // namespace

std::string encode_rgb(int width, int height, std::span<const std::uint8_t> rgb,
                       const std::vector<std::pair<std::string, std::string>>& text) {
    if (width <= 0 || height <= 0 ||
        rgb.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height) * 3) {
        throw std::invalid_argument("png::encode_rgb: pixel buffer does not match size");
    }
    std::string out(kSignature);

    std::string ihdr;
    put_u32(ihdr, static_cast<std::uint32_t>(width));
    put_u32(ihdr, static_cast<std::uint32_t>(height));
    ihdr += '\x08';  // bit depth
    ihdr += '\x02';  // truecolour
    ihdr += '\x00';  // deflate
    ihdr += '\x00';  // adaptive filtering
    ihdr += '\x00';  // no interlace
    put_chunk(out, "IHDR", ihdr);

    for (const auto& [key, value] : text) {
        std::string data = key;
        data += '\0';
        data += value;
        put_chunk(out, "tEXt", data);
    }

    std::string raw;
    const std::size_t stride = static_cast<std::size_t>(width) * 3;
    raw.reserve((stride + 1) * static_cast<std::size_t>(height));
    for (int y = 0; y < height; ++y) {
        raw += '\0';  // filter: none
        raw.append(reinterpret_cast<const char*>(rgb.data()) + static_cast<std::size_t>(y) * stride, stride);
    }
    uLongf packed_size = compressBound(static_cast<uLong>(raw.size()));
    std::string packed(packed_size, '\0');
    if (compress2(reinterpret_cast<Bytef*>(packed.data()), &packed_size,
                  reinterpret_cast<const Bytef*>(raw.data()), static_cast<uLong>(raw.size()), 9) != Z_OK) {
        throw std::runtime_error("png::encode_rgb: deflate failed");
    }
    packed.resize(packed_size);
    put_chunk(out, "IDAT", packed);
    put_chunk(out, "IEND", {});
    return out;
}

bool is_png(std::string_view bytes) { return bytes.substr(0, kSignature.size()) == kSignature; }

std::optional<std::string> find_text(std::string_view bytes, std::string_view keyword) {
    if (!is_png(bytes)) return std::nullopt;
    std::size_t pos = kSignature.size();
    while (pos + 12 <= bytes.size()) {
        const std::uint32_t len = get_u32(bytes, pos);
        if (len > bytes.size() - pos - 12) return std::nullopt;
        const auto type = bytes.substr(pos + 4, 4);
        const auto data = bytes.substr(pos + 8, len);
        if (type == "tEXt") {
            const auto nul = data.find('\0');
            if (nul != std::string_view::npos && data.substr(0, nul) == keyword) {
                return std::string(data.substr(nul + 1));
            }
        }
        if (type == "IEND") break;
        pos += 12 + len;
    }
    return std::nullopt;
}

}  // namespace mmdg::png
