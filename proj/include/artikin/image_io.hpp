#pragma once

#include <filesystem>

#include "artikin/renderer.hpp"

namespace artikin {

/// Portable float map, little-endian, rows stored bottom-to-top.
void write_pfm(const std::filesystem::path& path, const ImageF& image);
void write_pfm(const std::filesystem::path& path, const ImageRGB& image);
ImageF read_pfm_gray(const std::filesystem::path& path);
ImageRGB read_pfm_rgb(const std::filesystem::path& path);

/// 8-bit PNG; values are clamped to [0, 1].
void write_png(const std::filesystem::path& path, const ImageRGB& image);
/// Min-max normalizes finite values before writing gray.
void write_png_normalized(const std::filesystem::path& path, const ImageF& image);

/// Writes `{prefix}_{channel}.pfm` and `.png` for color, alpha, distance,
/// depth, normal and seg (argmax part colored).
void write_render_maps(const std::filesystem::path& dir, const std::string& prefix,
                       const RenderMaps& maps);

}  // namespace artikin
