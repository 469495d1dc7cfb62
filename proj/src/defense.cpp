#include "docadv/defense.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <sstream>
#include <stdexcept>

namespace docadv {

namespace {

[[noreturn]] void fail(const std::string& msg) { throw std::invalid_argument(msg); }

void require_hwc(const Tensor& image, const char* who) {
    if (image.shape.size() != 3 || image.shape[2] != 3)
        fail(std::string(who) + ": expected an (H,W,3) image, got " + shape_str(image.shape));
}

// ITU-T T.81 Annex K example tables.
constexpr int kLuminanceBase[64] = {
    16, 11, 10, 16, 24,  40,  51,  61,   //
    12, 12, 14, 19, 26,  58,  60,  55,   //
    14, 13, 16, 24, 40,  57,  69,  56,   //
    14, 17, 22, 29, 51,  87,  80,  62,   //
    18, 22, 37, 56, 68,  109, 103, 77,   //
    24, 35, 55, 64, 81,  104, 113, 92,   //
    49, 64, 78, 87, 103, 121, 120, 101,  //
    72, 92, 95, 98, 112, 100, 103, 99};

constexpr int kChrominanceBase[64] = {
    17, 18, 24, 47, 99, 99, 99, 99,  //
    18, 21, 26, 66, 99, 99, 99, 99,  //
    24, 26, 56, 99, 99, 99, 99, 99,  //
    47, 66, 99, 99, 99, 99, 99, 99,  //
    99, 99, 99, 99, 99, 99, 99, 99,  //
    99, 99, 99, 99, 99, 99, 99, 99,  //
    99, 99, 99, 99, 99, 99, 99, 99,  //
    99, 99, 99, 99, 99, 99, 99, 99};

std::array<int, 64> scale_table(const int* base, int quality) {
    if (quality < 1 || quality > 100)
        fail("jpeg_roundtrip: quality " + std::to_string(quality) + " outside [1,100]");
    const int scale = quality < 50 ? 5000 / quality : 200 - 2 * quality;
    std::array<int, 64> out{};
    for (int i = 0; i < 64; ++i)
        out[i] = std::clamp((base[i] * scale + 50) / 100, 1, 255);
    return out;
}

// C[u][x] = alpha(u)/2 * cos((2x+1)u*pi/16); orthonormal rows.
const std::array<std::array<double, 8>, 8>& dct_matrix() {
    static const auto table = [] {
        std::array<std::array<double, 8>, 8> c{};
        const double pi = 3.14159265358979323846;
        for (int u = 0; u < 8; ++u) {
            const double alpha = u == 0 ? 1.0 / std::sqrt(2.0) : 1.0;
            for (int x = 0; x < 8; ++x)
                c[u][x] = 0.5 * alpha * std::cos((2 * x + 1) * u * pi / 16.0);
        }
        return c;
    }();
    return table;
}

int mirror_index(int i, int extent) {
    if (extent == 1) return 0;
    while (i < 0 || i >= extent) {
        if (i < 0) i = -i;
        if (i >= extent) i = 2 * extent - 2 - i;
    }
    return i;
}

}  // namespace

bool DefensePipeline::has_grey() const {
    for (const auto& s : stages)
        if (s.kind == StageKind::Grey) return true;
    return false;
}

bool DefensePipeline::has_jpeg() const {
    for (const auto& s : stages)
        if (s.kind == StageKind::Jpeg) return true;
    return false;
}

std::string DefensePipeline::describe() const {
    std::ostringstream os;
    bool first = true;
    for (const auto& s : stages) {
        if (s.kind == StageKind::Identity) continue;
        if (!first) os << '+';
        first = false;
        if (s.kind == StageKind::Grey) os << "grey";
        else os << "jpeg(" << s.quality << ")";
    }
    return first ? "none" : os.str();
}

DefensePipeline DefensePipeline::parse(const std::string& text) {
    DefensePipeline p;
    if (text.empty() || text == "none") return p;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const std::size_t next = text.find('+', pos);
        const std::string tok =
            text.substr(pos, next == std::string::npos ? std::string::npos : next - pos);
        if (tok == "grey") {
            p.stages.push_back({StageKind::Grey, 0});
        } else if (tok == "identity") {
            p.stages.push_back({StageKind::Identity, 0});
        } else if (tok.rfind("jpeg", 0) == 0) {
            int quality = 75;
            const std::size_t open = tok.find('(');
            if (open != std::string::npos) {
                const std::size_t close = tok.find(')', open);
                if (close == std::string::npos)
                    fail("defense pipeline: malformed stage '" + tok + "'");
                quality = std::stoi(tok.substr(open + 1, close - open - 1));
            }
            if (quality < 1 || quality > 100)
                fail("defense pipeline: jpeg quality " + std::to_string(quality) +
                     " outside [1,100]");
            p.stages.push_back({StageKind::Jpeg, quality});
        } else {
            fail("defense pipeline: unknown stage '" + tok +
                 "' (expected grey, jpeg(q), or identity)");
        }
        if (next == std::string::npos) break;
        pos = next + 1;
    }
    return p;
}

Tensor grey(const Tensor& image) {
    require_hwc(image, "grey");
    Tensor out = image;
    const int pixels = image.shape[0] * image.shape[1];
    for (int i = 0; i < pixels; ++i) {
        double* px = out.values.data() + static_cast<std::size_t>(i) * 3;
        // pivot on the first channel so equal-channel pixels pass through exactly
        const double m = px[0] + ((px[1] - px[0]) + (px[2] - px[0])) / 3.0;
        px[0] = px[1] = px[2] = m;
    }
    out.node_id.reset();
    return out;
}

namespace jpeg {

std::array<int, 64> luminance_table(int quality) { return scale_table(kLuminanceBase, quality); }

std::array<int, 64> chrominance_table(int quality) {
    return scale_table(kChrominanceBase, quality);
}

void dct8x8(const double* in, double* out) {
    const auto& c = dct_matrix();
    double tmp[64];
    for (int u = 0; u < 8; ++u)
        for (int x = 0; x < 8; ++x) {
            double acc = 0.0;
            for (int k = 0; k < 8; ++k) acc += c[u][k] * in[k * 8 + x];
            tmp[u * 8 + x] = acc;
        }
    for (int u = 0; u < 8; ++u)
        for (int v = 0; v < 8; ++v) {
            double acc = 0.0;
            for (int k = 0; k < 8; ++k) acc += tmp[u * 8 + k] * c[v][k];
            out[u * 8 + v] = acc;
        }
}

void idct8x8(const double* in, double* out) {
    const auto& c = dct_matrix();
    double tmp[64];
    for (int x = 0; x < 8; ++x)
        for (int v = 0; v < 8; ++v) {
            double acc = 0.0;
            for (int k = 0; k < 8; ++k) acc += c[k][x] * in[k * 8 + v];
            tmp[x * 8 + v] = acc;
        }
    for (int x = 0; x < 8; ++x)
        for (int y = 0; y < 8; ++y) {
            double acc = 0.0;
            for (int k = 0; k < 8; ++k) acc += tmp[x * 8 + k] * c[k][y];
            out[x * 8 + y] = acc;
        }
}

}  // namespace jpeg

Tensor jpeg_roundtrip(const Tensor& image, int quality) {
    require_hwc(image, "jpeg_roundtrip");
    const auto qy = jpeg::luminance_table(quality);
    const auto qc = jpeg::chrominance_table(quality);

    const int H = image.shape[0], W = image.shape[1];
    const int PH = (H + 7) / 8 * 8, PW = (W + 7) / 8 * 8;

    // padded YCbCr planes in 0..255 scale
    std::vector<double> plane[3];
    for (auto& p : plane) p.assign(static_cast<std::size_t>(PH) * PW, 0.0);
    for (int y = 0; y < PH; ++y) {
        const int sy = mirror_index(y, H);
        for (int x = 0; x < PW; ++x) {
            const int sx = mirror_index(x, W);
            const double* px = image.values.data() + (static_cast<std::size_t>(sy) * W + sx) * 3;
            const double r = px[0] * 255.0, g = px[1] * 255.0, b = px[2] * 255.0;
            const std::size_t i = static_cast<std::size_t>(y) * PW + x;
            plane[0][i] = 0.299 * r + 0.587 * g + 0.114 * b;
            plane[1][i] = 128.0 - 0.168736 * r - 0.331264 * g + 0.5 * b;
            plane[2][i] = 128.0 + 0.5 * r - 0.418688 * g - 0.081312 * b;
        }
    }

    for (int ch = 0; ch < 3; ++ch) {
        const auto& q = ch == 0 ? qy : qc;
        for (int by = 0; by < PH; by += 8)
            for (int bx = 0; bx < PW; bx += 8) {
                double block[64], coeff[64];
                for (int y = 0; y < 8; ++y)
                    for (int x = 0; x < 8; ++x)
                        block[y * 8 + x] =
                            plane[ch][static_cast<std::size_t>(by + y) * PW + bx + x] - 128.0;
                jpeg::dct8x8(block, coeff);
                for (int i = 0; i < 64; ++i) coeff[i] = std::round(coeff[i] / q[i]) * q[i];
                jpeg::idct8x8(coeff, block);
                for (int y = 0; y < 8; ++y)
                    for (int x = 0; x < 8; ++x)
                        plane[ch][static_cast<std::size_t>(by + y) * PW + bx + x] =
                            block[y * 8 + x] + 128.0;
            }
    }

    Tensor out = Tensor::zeros(image.shape);
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) {
            const std::size_t i = static_cast<std::size_t>(y) * PW + x;
            const double yv = plane[0][i], cb = plane[1][i] - 128.0, cr = plane[2][i] - 128.0;
            double* px = out.values.data() + (static_cast<std::size_t>(y) * W + x) * 3;
            px[0] = std::clamp((yv + 1.402 * cr) / 255.0, 0.0, 1.0);
            px[1] = std::clamp((yv - 0.344136 * cb - 0.714136 * cr) / 255.0, 0.0, 1.0);
            px[2] = std::clamp((yv + 1.772 * cb) / 255.0, 0.0, 1.0);
        }
    return out;
}

Tensor apply_pipeline(const DefensePipeline& pipeline, const Tensor& image) {
    Tensor out = image;
    for (const auto& stage : pipeline.stages) {
        switch (stage.kind) {
            case StageKind::Identity: break;
            case StageKind::Grey: out = grey(out); break;
            case StageKind::Jpeg: out = jpeg_roundtrip(out, stage.quality); break;
        }
    }
    return out;
}

}  // namespace docadv
