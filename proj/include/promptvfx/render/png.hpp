#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "promptvfx/render/raster.hpp"

namespace pvfx::render {

// Lossless RGBA8 PNG, filter 0 on every row, zlib level 6. Output bytes are
// a pure function of the pixels.
std::vector<std::uint8_t> encode_png(const Image& image);

// Decodes 8-bit RGB or RGBA, non-interlaced PNGs (any filter type).
// Throws FormatError on anything else.
Image decode_png(std::span<const std::uint8_t> bytes);

void write_png(const Image& image, const std::filesystem::path& path);
Image read_png(const std::filesystem::path& path);

// Writes frame_00000.png, frame_00001.png, ... into dir (created if
// missing). Throws IoError when dir is empty or not writable.
std::vector<std::filesystem::path> encode_sequence(std::span<const Image> images,
                                                   const std::filesystem::path& dir);
std::string frame_name(std::size_t index);

}  // namespace pvfx::render
