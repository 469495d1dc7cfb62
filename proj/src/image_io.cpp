#include "docadv/image_io.hpp"

#include <openssl/evp.h>
#include <zlib.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace docadv {

namespace {

[[noreturn]] void fail(const std::string& msg) { throw std::runtime_error(msg); }

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail("cannot open " + path.string());
    return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in),
                                     std::istreambuf_iterator<char>());
}

void write_file(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
    std::ofstream out(path, std::ios::binary);
    if (!out) fail("cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    if (!out) fail("short write to " + path.string());
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    out.push_back(static_cast<std::uint8_t>(v >> 24));
    out.push_back(static_cast<std::uint8_t>(v >> 16));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
    out.push_back(static_cast<std::uint8_t>(v));
}

std::uint32_t get_u32(const std::uint8_t* p) {
    return (static_cast<std::uint32_t>(p[0]) << 24) | (static_cast<std::uint32_t>(p[1]) << 16) |
           (static_cast<std::uint32_t>(p[2]) << 8) | p[3];
}

void put_chunk(std::vector<std::uint8_t>& out, const char type[4],
               const std::vector<std::uint8_t>& payload) {
    put_u32(out, static_cast<std::uint32_t>(payload.size()));
    const std::size_t start = out.size();
    out.insert(out.end(), type, type + 4);
    out.insert(out.end(), payload.begin(), payload.end());
    const auto crc = crc32(0, out.data() + start, static_cast<uInt>(out.size() - start));
    put_u32(out, static_cast<std::uint32_t>(crc));
}

int paeth(int a, int b, int c) {
    const int p = a + b - c;
    const int pa = std::abs(p - a), pb = std::abs(p - b), pc = std::abs(p - c);
    if (pa <= pb && pa <= pc) return a;
    if (pb <= pc) return b;
    return c;
}

}  // namespace

void write_png(const std::filesystem::path& path, const ImageU8& image) {
    if (image.channels != 1 && image.channels != 3)
        fail("write_png: " + std::to_string(image.channels) + " channels unsupported");
    const std::size_t row = static_cast<std::size_t>(image.width) * image.channels;
    if (image.pixels.size() != row * image.height) fail("write_png: pixel buffer size mismatch");

    // filter type 0 on every scanline
    std::vector<std::uint8_t> raw;
    raw.reserve((row + 1) * image.height);
    for (int y = 0; y < image.height; ++y) {
        raw.push_back(0);
        raw.insert(raw.end(), image.pixels.begin() + y * row, image.pixels.begin() + (y + 1) * row);
    }
    uLongf bound = compressBound(static_cast<uLong>(raw.size()));
    std::vector<std::uint8_t> packed(bound);
    if (compress2(packed.data(), &bound, raw.data(), static_cast<uLong>(raw.size()), 6) != Z_OK)
        fail("write_png: deflate failed for " + path.string());
    packed.resize(bound);

    std::vector<std::uint8_t> out = {0x89, 'P', 'N', 'G', 0x0d, 0x0a, 0x1a, 0x0a};
    std::vector<std::uint8_t> ihdr;
    put_u32(ihdr, static_cast<std::uint32_t>(image.width));
    put_u32(ihdr, static_cast<std::uint32_t>(image.height));
    ihdr.push_back(8);                            // bit depth
    ihdr.push_back(image.channels == 1 ? 0 : 2);  // color type
    ihdr.push_back(0);                            // compression
    ihdr.push_back(0);                            // filter method
    ihdr.push_back(0);                            // no interlace
    put_chunk(out, "IHDR", ihdr);
    put_chunk(out, "IDAT", packed);
    put_chunk(out, "IEND", {});
    write_file(path, out);
}

ImageU8 read_png(const std::filesystem::path& path) {
    const auto bytes = read_file(path);
    static const std::uint8_t sig[8] = {0x89, 'P', 'N', 'G', 0x0d, 0x0a, 0x1a, 0x0a};
    if (bytes.size() < 8 || std::memcmp(bytes.data(), sig, 8) != 0)
        fail(path.string() + ": not a PNG file");

    ImageU8 img;
    std::vector<std::uint8_t> idat;
    std::size_t pos = 8;
    bool saw_ihdr = false;
    while (pos + 8 <= bytes.size()) {
        const std::uint32_t len = get_u32(bytes.data() + pos);
        if (pos + 12 + len > bytes.size()) fail(path.string() + ": truncated PNG chunk");
        const std::string type(bytes.begin() + pos + 4, bytes.begin() + pos + 8);
        const std::uint8_t* payload = bytes.data() + pos + 8;
        if (type == "IHDR") {
            if (len != 13) fail(path.string() + ": bad IHDR");
            img.width = static_cast<int>(get_u32(payload));
            img.height = static_cast<int>(get_u32(payload + 4));
            const int depth = payload[8], color = payload[9], interlace = payload[12];
            if (depth != 8) fail(path.string() + ": only 8-bit PNGs supported");
            if (color != 0 && color != 2)
                fail(path.string() + ": only grayscale and RGB PNGs supported");
            if (interlace != 0) fail(path.string() + ": interlaced PNGs unsupported");
            img.channels = color == 0 ? 1 : 3;
            saw_ihdr = true;
        } else if (type == "IDAT") {
            idat.insert(idat.end(), payload, payload + len);
        } else if (type == "IEND") {
            break;
        }
        pos += 12 + len;
    }
    if (!saw_ihdr || img.width <= 0 || img.height <= 0) fail(path.string() + ": missing IHDR");

    const std::size_t row = static_cast<std::size_t>(img.width) * img.channels;
    const std::size_t raw_size = (row + 1) * img.height;
    std::vector<std::uint8_t> raw(raw_size);
    uLongf got = static_cast<uLongf>(raw_size);
    if (uncompress(raw.data(), &got, idat.data(), static_cast<uLong>(idat.size())) != Z_OK ||
        got != raw_size)
        fail(path.string() + ": corrupt PNG data");

    img.pixels.assign(row * img.height, 0);
    const std::size_t bpp = img.channels;
    for (int y = 0; y < img.height; ++y) {
        const std::uint8_t filter = raw[y * (row + 1)];
        const std::uint8_t* src = raw.data() + y * (row + 1) + 1;
        std::uint8_t* dst = img.pixels.data() + y * row;
        const std::uint8_t* up = y > 0 ? img.pixels.data() + (y - 1) * row : nullptr;
        for (std::size_t i = 0; i < row; ++i) {
            const int a = i >= bpp ? dst[i - bpp] : 0;
            const int b = up ? up[i] : 0;
            const int c = (up && i >= bpp) ? up[i - bpp] : 0;
            int v = src[i];
            switch (filter) {
                case 0: break;
                case 1: v += a; break;
                case 2: v += b; break;
                case 3: v += (a + b) / 2; break;
                case 4: v += paeth(a, b, c); break;
                default: fail(path.string() + ": unknown PNG filter type");
            }
            dst[i] = static_cast<std::uint8_t>(v);
        }
    }
    return img;
}

void write_pgm(const std::filesystem::path& path, const ImageU8& image) {
    if (image.channels != 1) fail("write_pgm: PGM is single-channel");
    std::vector<std::uint8_t> out;
    const std::string header =
        "P5\n" + std::to_string(image.width) + " " + std::to_string(image.height) + "\n255\n";
    out.insert(out.end(), header.begin(), header.end());
    out.insert(out.end(), image.pixels.begin(), image.pixels.end());
    write_file(path, out);
}

ImageU8 read_pgm(const std::filesystem::path& path) {
    const auto bytes = read_file(path);
    std::size_t pos = 0;
    auto token = [&]() -> std::string {
        while (pos < bytes.size()) {
            if (std::isspace(bytes[pos])) {
                ++pos;
            } else if (bytes[pos] == '#') {
                while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
            } else {
                break;
            }
        }
        std::string t;
        while (pos < bytes.size() && !std::isspace(bytes[pos])) t.push_back(bytes[pos++]);
        return t;
    };
    if (token() != "P5") fail(path.string() + ": not a binary PGM file");
    ImageU8 img;
    img.channels = 1;
    try {
        img.width = std::stoi(token());
        img.height = std::stoi(token());
        const int maxval = std::stoi(token());
        if (maxval != 255) fail(path.string() + ": only maxval 255 PGMs supported");
    } catch (const std::invalid_argument&) {
        fail(path.string() + ": malformed PGM header");
    }
    ++pos;  // single whitespace byte terminates the header
    const std::size_t need = static_cast<std::size_t>(img.width) * img.height;
    if (img.width <= 0 || img.height <= 0 || bytes.size() < pos + need)
        fail(path.string() + ": truncated PGM data");
    img.pixels.assign(bytes.begin() + pos, bytes.begin() + pos + need);
    return img;
}

ImageU8 read_image(const std::filesystem::path& path) {
    const auto ext = path.extension().string();
    if (ext == ".png") return read_png(path);
    if (ext == ".pgm") return read_pgm(path);
    fail(path.string() + ": unsupported image format (expected .png or .pgm)");
}

ImageU8 to_u8(const Tensor& image, bool collapse_gray) {
    if (image.shape.size() != 3 || image.shape[2] != 3)
        fail("to_u8: expected an (H,W,3) image, got " + shape_str(image.shape));
    const int H = image.shape[0], W = image.shape[1];
    bool gray = collapse_gray;
    for (int i = 0; i < H * W && gray; ++i)
        gray = image.values[i * 3] == image.values[i * 3 + 1] &&
               image.values[i * 3] == image.values[i * 3 + 2];
    ImageU8 out;
    out.height = H;
    out.width = W;
    out.channels = gray ? 1 : 3;
    out.pixels.resize(static_cast<std::size_t>(H) * W * out.channels);
    for (int i = 0; i < H * W; ++i)
        for (int c = 0; c < out.channels; ++c) {
            const double v = std::clamp(image.values[i * 3 + c], 0.0, 1.0);
            out.pixels[i * out.channels + c] = static_cast<std::uint8_t>(std::lround(v * 255.0));
        }
    return out;
}

Tensor from_u8(const ImageU8& image) {
    Tensor out = Tensor::zeros({image.height, image.width, 3});
    const int pixels = image.height * image.width;
    for (int i = 0; i < pixels; ++i)
        for (int c = 0; c < 3; ++c) {
            const std::uint8_t v = image.channels == 1 ? image.pixels[i] : image.pixels[i * 3 + c];
            out.values[i * 3 + c] = v / 255.0;
        }
    return out;
}

std::string sha256_hex(const std::uint8_t* data, std::size_t size) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(data, size, digest, &len, EVP_sha256(), nullptr) != 1)
        fail("sha256: digest failed");
    static const char* hex = "0123456789abcdef";
    std::string out;
    out.reserve(len * 2);
    for (unsigned int i = 0; i < len; ++i) {
        out.push_back(hex[digest[i] >> 4]);
        out.push_back(hex[digest[i] & 0xf]);
    }
    return out;
}

}  // namespace docadv
