// Reactive input-transformation defenses: grayscale averaging and a JPEG
// compression round-trip (DCT + quantization, no entropy coding), composable
// into a pipeline applied ahead of the model backbone.
#pragma once

#include <array>
#include <string>
#include <vector>

#include "docadv/tensor.hpp"

namespace docadv {

enum class StageKind { Identity, Grey, Jpeg };

struct DefenseStage {
    StageKind kind = StageKind::Identity;
    int quality = 75;  // Jpeg only
};

struct DefensePipeline {
    std::vector<DefenseStage> stages;

    bool has_grey() const;
    bool has_jpeg() const;
    std::string describe() const;  // e.g. "none", "grey+jpeg(75)"
    static DefensePipeline parse(const std::string& text);
};

// Replaces each pixel's channels by their arithmetic mean, replicated to all
// three channels. Exact identity on equal-channel pixels.
Tensor grey(const Tensor& image);

// Compress-decompress cycle in YCbCr space: 8x8 DCT, quantization with the
// standard tables scaled by `quality`, inverse DCT, back to RGB, clipped to
// [0,1]. Entropy coding is lossless and therefore omitted.
Tensor jpeg_roundtrip(const Tensor& image, int quality);

Tensor apply_pipeline(const DefensePipeline& pipeline, const Tensor& image);

namespace jpeg {

// Quantization tables after quality scaling, row-major 8x8.
std::array<int, 64> luminance_table(int quality);
std::array<int, 64> chrominance_table(int quality);

// Orthonormal 8x8 block transforms (in/out may alias).
void dct8x8(const double* in, double* out);
void idct8x8(const double* in, double* out);

}  // namespace jpeg

}  // namespace docadv
