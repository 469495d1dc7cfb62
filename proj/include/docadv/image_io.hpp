// 8-bit lossless image files (PNG, binary PGM) and pixel hashing for
// corpus manifests.
#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "docadv/tensor.hpp"

namespace docadv {

struct ImageU8 {
    int height = 0;
    int width = 0;
    int channels = 0;  // 1 (gray) or 3 (RGB)
    std::vector<std::uint8_t> pixels;  // row-major, interleaved
};

void write_png(const std::filesystem::path& path, const ImageU8& image);
ImageU8 read_png(const std::filesystem::path& path);

void write_pgm(const std::filesystem::path& path, const ImageU8& image);
ImageU8 read_pgm(const std::filesystem::path& path);

// Dispatches on extension (.png, .pgm); anything else fails.
ImageU8 read_image(const std::filesystem::path& path);

// round(255*x) per channel; input values expected in [0,1]
ImageU8 to_u8(const Tensor& image, bool collapse_gray = true);
// /255 per channel; single-channel input replicated into three channels
Tensor from_u8(const ImageU8& image);

std::string sha256_hex(const std::uint8_t* data, std::size_t size);

}  // namespace docadv
