// Synthetic document-image corpus, external image ingestion, splits, and
// model-input shaping.
#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "docadv/tensor.hpp"

namespace docadv {

struct LabeledImage {
    Tensor pixels;   // (H,W,3), values in [0,1]
    int label = 0;
    std::string id;  // stable, unique across splits
};

struct CorpusSpec {
    int num_classes = 8;
    int train_per_class = 24;
    int val_per_class = 4;
    int test_per_class = 8;
    int height = 64;
    int width = 64;
    double noise_sigma = 0.02;
    std::uint64_t seed = 1;

    void validate() const;  // throws std::invalid_argument
};

struct DatasetSplit {
    std::vector<LabeledImage> train, val, test;
};

// Class names for the built-in layout templates; classes beyond the first
// eight are mirrored variants.
std::vector<std::string> corpus_class_names(int num_classes);

// Deterministic layout templates (dark strokes on a light page) with
// per-image seeded jitter and noise; channels replicated; pixels quantized
// to the 8-bit grid so saved corpora reload bit-identically.
DatasetSplit generate_synthetic_corpus(const CorpusSpec& spec);

// Writes <dir>/<split>/<class>/<id>.png plus a corpus.csv manifest with a
// sha256 of each image's pixel bytes.
void save_corpus(const DatasetSplit& splits, const std::filesystem::path& dir, int num_classes);

// Reads a <split>/<class>/*.png|*.pgm tree. Unknown class directories and
// undecodable files are errors.
DatasetSplit load_image_dir(const std::filesystem::path& dir,
                            const std::map<std::string, int>& class_map);

// Area-average downsampling / bilinear upsampling, per axis.
Tensor to_model_input(const Tensor& image, int target_h, int target_w);

// Class-balanced sample of n images (per-class counts differ by at most 1),
// deterministically shuffled. n == split size returns the whole split in
// seeded order.
std::vector<LabeledImage> sample_eval_subset(const std::vector<LabeledImage>& split, int n,
                                             std::uint64_t seed);

}  // namespace docadv
