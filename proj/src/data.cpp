#include "docadv/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

#include "docadv/image_io.hpp"
#include "docadv/rng.hpp"

namespace docadv {

namespace {

[[noreturn]] void fail(const std::string& msg) { throw std::invalid_argument(msg); }

const char* kBaseClassNames[8] = {"letter",     "two_column", "table", "memo_signature",
                                  "letterhead", "form",       "title_page", "stamp"};

// Single-channel page canvas; all draw calls share one jitter offset.
struct PageCanvas {
    int H, W;
    int off_y = 0, off_x = 0;
    std::vector<double> v;

    PageCanvas(int h, int w, double background) : H(h), W(w), v(static_cast<std::size_t>(h) * w, background) {}

    void rect(double y0, double x0, double y1, double x1, double ink) {
        int ry0 = static_cast<int>(std::lround(y0 * H)) + off_y;
        int ry1 = static_cast<int>(std::lround(y1 * H)) + off_y;
        int rx0 = static_cast<int>(std::lround(x0 * W)) + off_x;
        int rx1 = static_cast<int>(std::lround(x1 * W)) + off_x;
        ry0 = std::clamp(ry0, 0, H);
        ry1 = std::clamp(std::max(ry1, ry0 + 1), 0, H);
        rx0 = std::clamp(rx0, 0, W);
        rx1 = std::clamp(std::max(rx1, rx0 + 1), 0, W);
        for (int y = ry0; y < ry1; ++y)
            for (int x = rx0; x < rx1; ++x) v[static_cast<std::size_t>(y) * W + x] = ink;
    }

    // horizontal stroke `t` pixels thick
    void line(double y, double x0, double x1, int t, double ink) {
        rect(y, x0, y + static_cast<double>(t) / H, x1, ink);
    }

    void vline(double x, double y0, double y1, int t, double ink) {
        rect(y0, x, y1, x + static_cast<double>(t) / W, ink);
    }

    void box(double y0, double x0, double y1, double x1, int t, double ink) {
        line(y0, x0, x1, t, ink);
        rect(y1 - static_cast<double>(t) / H, x0, y1, x1, ink);
        vline(x0, y0, y1, t, ink);
        rect(y0, x1 - static_cast<double>(t) / W, y1, x1, ink);
    }

    void ellipse(double cy, double cx, double ry, double rx, double ink) {
        const int py0 = std::clamp(static_cast<int>(((cy - ry) * H)) + off_y, 0, H);
        const int py1 = std::clamp(static_cast<int>(((cy + ry) * H)) + off_y + 1, 0, H);
        const int px0 = std::clamp(static_cast<int>(((cx - rx) * W)) + off_x, 0, W);
        const int px1 = std::clamp(static_cast<int>(((cx + rx) * W)) + off_x + 1, 0, W);
        for (int y = py0; y < py1; ++y)
            for (int x = px0; x < px1; ++x) {
                const double dy = (static_cast<double>(y - off_y) / H - cy) / ry;
                const double dx = (static_cast<double>(x - off_x) / W - cx) / rx;
                if (dy * dy + dx * dx <= 1.0) v[static_cast<std::size_t>(y) * W + x] = ink;
            }
    }

    void diagonal(double y0, double x0, double y1, double x1, int t, double ink) {
        const int steps = 2 * std::max(H, W);
        const double r = static_cast<double>(t);
        for (int s = 0; s <= steps; ++s) {
            const double f = static_cast<double>(s) / steps;
            const int cy = static_cast<int>(std::lround((y0 + f * (y1 - y0)) * H)) + off_y;
            const int cx = static_cast<int>(std::lround((x0 + f * (x1 - x0)) * W)) + off_x;
            for (int y = std::max(0, cy - t); y <= std::min(H - 1, cy + t); ++y)
                for (int x = std::max(0, cx - t); x <= std::min(W - 1, cx + t); ++x) {
                    const double d2 = static_cast<double>(y - cy) * (y - cy) +
                                      static_cast<double>(x - cx) * (x - cx);
                    if (d2 <= r * r) v[static_cast<std::size_t>(y) * W + x] = ink;
                }
        }
    }

    void flip_horizontal() {
        for (int y = 0; y < H; ++y)
            for (int x = 0; x < W / 2; ++x)
                std::swap(v[static_cast<std::size_t>(y) * W + x],
                          v[static_cast<std::size_t>(y) * W + (W - 1 - x)]);
    }
};

// All classes share a letter-like base (header lines plus a text body); the
// class is carried by a smaller distinctive element on top of it, which
// keeps the corpus learnable but not trivially separated.
void draw_template(PageCanvas& page, int base_class, int thickness, Rng& rng) {
    auto ink = [&]() { return rng.uniform(0.1, 0.3); };
    const int t = thickness;

    page.line(0.08, 0.08, 0.42, t, ink());
    page.line(0.15, 0.08, 0.30, t, ink());
    for (int i = 0; i < 8; ++i)
        page.line(0.32 + 0.075 * i, 0.08, i == 7 ? 0.58 : 0.92, t, ink());

    switch (base_class) {
        case 0:  // plain letter: the base alone
            break;
        case 1: {  // two columns: a gutter carved through the body
            page.rect(0.30, 0.44, 0.92, 0.56, page.v[0]);
            break;
        }
        case 2: {  // table: column rules over the body
            const double v = ink();
            for (double x : {0.08, 0.36, 0.64, 0.90}) page.vline(x, 0.30, 0.92, t + 1, v);
            break;
        }
        case 3: {  // memo: signature blob over the lower body
            const double v = ink();
            page.ellipse(0.72, 0.64, 0.06, 0.15, v);
            page.ellipse(0.78, 0.72, 0.05, 0.11, v);
            page.ellipse(0.68, 0.74, 0.04, 0.08, v);
            break;
        }
        case 4: {  // letterhead: logo block in the top-right corner
            page.rect(0.04, 0.58, 0.20, 0.86, ink());
            break;
        }
        case 5: {  // form: checkbox column at the right margin
            for (int i = 0; i < 6; ++i)
                page.box(0.30 + 0.105 * i, 0.78, 0.37 + 0.105 * i, 0.90, t, ink());
            break;
        }
        case 6: {  // title page: centered block above the body
            page.rect(0.18, 0.28, 0.30, 0.72, ink());
            break;
        }
        case 7: {  // stamped: diagonal band across the body
            page.diagonal(0.32, 0.18, 0.82, 0.84, std::max(2, t + 1), ink());
            break;
        }
        default: fail("draw_template: bad class");
    }
}

// Every class also carries a faint blockwise halftone, the way scans from
// one document source share paper grain. The amplitude is a fraction of the
// stroke contrast, so templates stay visually dominant.
constexpr double kTextureAmplitude = 0.035;

Tensor render_image(const CorpusSpec& spec, int label, std::uint64_t seed) {
    Rng rng(seed);
    const int H = spec.height, W = spec.width;
    PageCanvas page(H, W, rng.uniform(0.92, 0.98));

    const int jitter = std::max(1, std::min(4, H / 16));
    page.off_y = rng.uniform_int(-jitter, jitter);
    page.off_x = rng.uniform_int(-jitter, jitter);
    const int base_thickness = std::max(1, (H + 16) / 32);
    const int t = std::max(1, base_thickness + rng.uniform_int(-1, 1));

    draw_template(page, label % 8, t, rng);
    if (label >= 8) page.flip_horizontal();

    // class-wide halftone grain, fixed per class given the corpus seed;
    // cell-sized so it survives the downsampling a classifier applies
    Rng texture(derive_seed(derive_seed(spec.seed, "texture"), static_cast<std::uint64_t>(label)));
    const int cell = std::max(1, std::min(H, W) / 16);
    const int cells_y = (H + cell - 1) / cell, cells_x = (W + cell - 1) / cell;
    std::vector<double> grain(static_cast<std::size_t>(cells_y) * cells_x);
    for (double& g : grain) g = kTextureAmplitude * texture.rademacher();

    Tensor out = Tensor::zeros({H, W, 3});
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) {
            const int i = y * W + x;
            double v = page.v[i] + grain[static_cast<std::size_t>(y / cell) * cells_x + x / cell];
            if (spec.noise_sigma > 0.0) v += spec.noise_sigma * rng.normal();
            v = std::clamp(v, 0.0, 1.0);
            v = std::lround(v * 255.0) / 255.0;  // 8-bit grid: reloads bit-exactly
            out.values[i * 3] = out.values[i * 3 + 1] = out.values[i * 3 + 2] = v;
        }
    return out;
}

std::string image_id(const char* split, int label, int index) {
    std::ostringstream os;
    os << split << "_c" << label << "_";
    os.width(4);
    os.fill('0');
    os << index;
    return os.str();
}

// weights for one output cell of a 1-D resample
void resample_axis(int src, int dst, std::vector<std::vector<std::pair<int, double>>>& taps) {
    taps.assign(dst, {});
    if (dst == src) {
        for (int j = 0; j < dst; ++j) taps[j] = {{j, 1.0}};
    } else if (dst < src) {  // area average
        const double r = static_cast<double>(src) / dst;
        for (int j = 0; j < dst; ++j) {
            const double sp = j * r, ep = (j + 1) * r;
            for (int k = static_cast<int>(sp); k < src && k < ep; ++k) {
                const double w = std::min(ep, static_cast<double>(k + 1)) - std::max(sp, static_cast<double>(k));
                if (w > 0) taps[j].push_back({k, w / r});
            }
        }
    } else {  // bilinear
        for (int j = 0; j < dst; ++j) {
            const double p = (j + 0.5) * src / dst - 0.5;
            const int k0 = std::clamp(static_cast<int>(std::floor(p)), 0, src - 1);
            const int k1 = std::min(k0 + 1, src - 1);
            const double f = std::clamp(p - k0, 0.0, 1.0);
            if (k0 == k1) {
                taps[j] = {{k0, 1.0}};
            } else {
                taps[j] = {{k0, 1.0 - f}, {k1, f}};
            }
        }
    }
}

}  // namespace

void CorpusSpec::validate() const {
    if (num_classes < 2 || num_classes > 16)
        fail("corpus: num_classes " + std::to_string(num_classes) + " outside [2,16]");
    if (train_per_class < 1 || val_per_class < 1 || test_per_class < 1)
        fail("corpus: every split needs at least one image per class");
    if (height < 16 || width < 16)
        fail("corpus: image size " + std::to_string(height) + "x" + std::to_string(width) +
             " below the 16x16 minimum");
    if (noise_sigma < 0.0 || noise_sigma > 0.2)
        fail("corpus: noise sigma " + std::to_string(noise_sigma) + " outside [0,0.2]");
}

std::vector<std::string> corpus_class_names(int num_classes) {
    std::vector<std::string> names;
    for (int c = 0; c < num_classes; ++c) {
        std::string n = kBaseClassNames[c % 8];
        if (c >= 8) n += "_flip";
        names.push_back(n);
    }
    return names;
}

DatasetSplit generate_synthetic_corpus(const CorpusSpec& spec) {
    spec.validate();
    const std::uint64_t corpus_seed = derive_seed(spec.seed, "corpus");
    DatasetSplit out;
    struct SplitDef {
        const char* name;
        int count;
        std::vector<LabeledImage>* images;
    };
    const SplitDef defs[3] = {{"train", spec.train_per_class, &out.train},
                              {"val", spec.val_per_class, &out.val},
                              {"test", spec.test_per_class, &out.test}};
    for (const auto& def : defs) {
        const std::uint64_t split_seed = derive_seed(corpus_seed, def.name);
        for (int c = 0; c < spec.num_classes; ++c) {
            const std::uint64_t class_seed = derive_seed(split_seed, static_cast<std::uint64_t>(c));
            for (int i = 0; i < def.count; ++i) {
                LabeledImage img;
                img.label = c;
                img.id = image_id(def.name, c, i);
                img.pixels = render_image(spec, c, derive_seed(class_seed, static_cast<std::uint64_t>(i)));
                def.images->push_back(std::move(img));
            }
        }
    }
    return out;
}

void save_corpus(const DatasetSplit& splits, const std::filesystem::path& dir, int num_classes) {
    const auto names = corpus_class_names(num_classes);
    std::ostringstream manifest;
    manifest << "id,split,class,path,sha256\n";
    struct Entry {
        const char* name;
        const std::vector<LabeledImage>* images;
    };
    const Entry entries[3] = {{"train", &splits.train}, {"val", &splits.val}, {"test", &splits.test}};
    for (const auto& e : entries) {
        for (const auto& img : *e.images) {
            if (img.label < 0 || img.label >= num_classes)
                fail("save_corpus: label " + std::to_string(img.label) + " out of range");
            const std::string rel =
                std::string(e.name) + "/" + names[img.label] + "/" + img.id + ".png";
            const std::filesystem::path path = dir / rel;
            std::filesystem::create_directories(path.parent_path());
            const ImageU8 u8 = to_u8(img.pixels);
            write_png(path, u8);
            manifest << img.id << ',' << e.name << ',' << names[img.label] << ',' << rel << ','
                     << sha256_hex(u8.pixels.data(), u8.pixels.size()) << '\n';
        }
    }
    std::ofstream mf(dir / "corpus.csv", std::ios::binary);
    if (!mf) fail("save_corpus: cannot write manifest under " + dir.string());
    mf << manifest.str();
}

DatasetSplit load_image_dir(const std::filesystem::path& dir,
                            const std::map<std::string, int>& class_map) {
    if (!std::filesystem::is_directory(dir)) fail("load_image_dir: " + dir.string() + " is not a directory");
    DatasetSplit out;
    struct Entry {
        const char* name;
        std::vector<LabeledImage>* images;
    };
    const Entry entries[3] = {{"train", &out.train}, {"val", &out.val}, {"test", &out.test}};
    for (const auto& e : entries) {
        const auto split_dir = dir / e.name;
        if (!std::filesystem::is_directory(split_dir))
            fail("load_image_dir: missing split directory " + split_dir.string());
        std::vector<std::filesystem::path> class_dirs;
        for (const auto& entry : std::filesystem::directory_iterator(split_dir))
            if (entry.is_directory()) class_dirs.push_back(entry.path());
        std::sort(class_dirs.begin(), class_dirs.end());
        for (const auto& cdir : class_dirs) {
            const std::string cname = cdir.filename().string();
            const auto it = class_map.find(cname);
            if (it == class_map.end()) {
                std::string known;
                for (const auto& [k, v] : class_map) known += (known.empty() ? "" : ", ") + k;
                fail("load_image_dir: unknown class directory '" + cname + "' (known: " + known +
                     ")");
            }
            std::vector<std::filesystem::path> files;
            for (const auto& f : std::filesystem::directory_iterator(cdir))
                if (f.is_regular_file()) files.push_back(f.path());
            std::sort(files.begin(), files.end());
            for (const auto& f : files) {
                LabeledImage img;
                img.label = it->second;
                img.id = std::string(e.name) + "/" + cname + "/" + f.stem().string();
                img.pixels = from_u8(read_image(f));
                e.images->push_back(std::move(img));
            }
        }
        if (e.images->empty()) fail("load_image_dir: no images under " + split_dir.string());
        std::sort(e.images->begin(), e.images->end(),
                  [](const LabeledImage& a, const LabeledImage& b) { return a.id < b.id; });
        std::set<int> seen;
        for (const auto& img : *e.images) seen.insert(img.label);
        for (const auto& [name, label] : class_map)
            if (!seen.count(label))
                fail("load_image_dir: class '" + name + "' has no images in split " + e.name);
    }
    return out;
}

Tensor to_model_input(const Tensor& image, int target_h, int target_w) {
    if (image.shape.size() != 3 || image.shape[2] != 3)
        fail("to_model_input: expected an (H,W,3) image, got " + shape_str(image.shape));
    if (target_h < 1 || target_w < 1)
        fail("to_model_input: degenerate target " + std::to_string(target_h) + "x" +
             std::to_string(target_w));
    const int H = image.shape[0], W = image.shape[1];
    if (H == target_h && W == target_w) return image;

    std::vector<std::vector<std::pair<int, double>>> taps;
    resample_axis(H, target_h, taps);
    Tensor rows = Tensor::zeros({target_h, W, 3});
    for (int y = 0; y < target_h; ++y)
        for (const auto& [k, w] : taps[y]) {
            const double* src = image.values.data() + static_cast<std::size_t>(k) * W * 3;
            double* dst = rows.values.data() + static_cast<std::size_t>(y) * W * 3;
            for (int i = 0; i < W * 3; ++i) dst[i] += w * src[i];
        }

    resample_axis(W, target_w, taps);
    Tensor out = Tensor::zeros({target_h, target_w, 3});
    for (int y = 0; y < target_h; ++y) {
        const double* src = rows.values.data() + static_cast<std::size_t>(y) * W * 3;
        double* dst = out.values.data() + static_cast<std::size_t>(y) * target_w * 3;
        for (int x = 0; x < target_w; ++x)
            for (const auto& [k, w] : taps[x])
                for (int c = 0; c < 3; ++c) dst[x * 3 + c] += w * src[k * 3 + c];
    }
    for (double& v : out.values) v = std::clamp(v, 0.0, 1.0);
    return out;
}

std::vector<LabeledImage> sample_eval_subset(const std::vector<LabeledImage>& split, int n,
                                             std::uint64_t seed) {
    if (n < 1) fail("sample_eval_subset: n must be positive");
    if (n > static_cast<int>(split.size()))
        fail("sample_eval_subset: requested " + std::to_string(n) + " of " +
             std::to_string(split.size()) + " images");
    Rng rng(seed);

    std::vector<int> chosen;
    if (n == static_cast<int>(split.size())) {
        chosen.resize(split.size());
        for (std::size_t i = 0; i < split.size(); ++i) chosen[i] = static_cast<int>(i);
    } else {
        std::map<int, std::vector<int>> by_class;
        for (std::size_t i = 0; i < split.size(); ++i)
            by_class[split[i].label].push_back(static_cast<int>(i));
        const int C = static_cast<int>(by_class.size());
        std::vector<int> labels;
        for (const auto& [label, idx] : by_class) labels.push_back(label);
        std::vector<int> extra_order = labels;
        shuffle(extra_order, rng);  // which classes absorb the remainder
        std::map<int, int> quota;
        for (int label : labels) quota[label] = n / C;
        for (int i = 0; i < n % C; ++i) quota[extra_order[i]] += 1;
        for (int label : labels) {
            auto& pool = by_class[label];
            if (quota[label] > static_cast<int>(pool.size()))
                fail("sample_eval_subset: class " + std::to_string(label) + " has only " +
                     std::to_string(pool.size()) + " images, need " + std::to_string(quota[label]));
            shuffle(pool, rng);
            chosen.insert(chosen.end(), pool.begin(), pool.begin() + quota[label]);
        }
    }
    shuffle(chosen, rng);
    std::vector<LabeledImage> out;
    out.reserve(chosen.size());
    for (int i : chosen) out.push_back(split[i]);
    return out;
}

}  // namespace docadv
