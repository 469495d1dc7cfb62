#include <filesystem>
#include <fstream>
#include <map>
#include <stdexcept>
#include <string>

#include "docadv/data.hpp"
#include "docadv/image_io.hpp"
#include "docadv/rng.hpp"
#include "doctest.h"

using namespace docadv;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / ("docadv_test_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

CorpusSpec tiny_spec() {
    CorpusSpec spec;
    spec.num_classes = 4;
    spec.train_per_class = 3;
    spec.val_per_class = 1;
    spec.test_per_class = 2;
    spec.height = 32;
    spec.width = 32;
    spec.noise_sigma = 0.02;
    spec.seed = 99;
    return spec;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

}  // namespace

TEST_CASE("corpus generation is a pure function of the seed") {
    CorpusSpec spec = tiny_spec();
    spec.noise_sigma = 0.0;
    const DatasetSplit a = generate_synthetic_corpus(spec);
    const DatasetSplit b = generate_synthetic_corpus(spec);
    REQUIRE(a.train.size() == b.train.size());
    for (std::size_t i = 0; i < a.train.size(); ++i) {
        CHECK(a.train[i].id == b.train[i].id);
        CHECK(a.train[i].pixels.values == b.train[i].pixels.values);
    }
    spec.seed = 100;
    const DatasetSplit c = generate_synthetic_corpus(spec);
    CHECK(a.train[0].pixels.values != c.train[0].pixels.values);
}

TEST_CASE("generated documents stay light") {
    CorpusSpec spec;
    spec.num_classes = 16;  // exercise the mirrored templates too
    spec.train_per_class = 2;
    spec.val_per_class = 1;
    spec.test_per_class = 1;
    spec.seed = 5;
    const DatasetSplit splits = generate_synthetic_corpus(spec);
    for (const auto* part : {&splits.train, &splits.val, &splits.test})
        for (const auto& img : *part) {
            double mean = 0.0;
            for (double v : img.pixels.values) mean += v;
            mean /= img.pixels.size();
            CHECK(mean >= 0.6);
            for (double v : img.pixels.values) {
                CHECK(v >= 0.0);
                CHECK(v <= 1.0);
            }
        }
}

TEST_CASE("corpus spec validation") {
    CorpusSpec spec = tiny_spec();
    spec.noise_sigma = 0.5;
    CHECK_THROWS_AS(generate_synthetic_corpus(spec), std::invalid_argument);
    spec = tiny_spec();
    spec.num_classes = 1;
    CHECK_THROWS_AS(generate_synthetic_corpus(spec), std::invalid_argument);
    spec = tiny_spec();
    spec.height = 8;
    CHECK_THROWS_AS(generate_synthetic_corpus(spec), std::invalid_argument);
}

TEST_CASE("saved corpus reloads bit-identically") {
    const fs::path dir = scratch_dir("roundtrip");
    const CorpusSpec spec = tiny_spec();
    const DatasetSplit splits = generate_synthetic_corpus(spec);
    save_corpus(splits, dir, spec.num_classes);

    std::map<std::string, int> class_map;
    const auto names = corpus_class_names(spec.num_classes);
    for (int c = 0; c < spec.num_classes; ++c) class_map[names[c]] = c;
    const DatasetSplit loaded = load_image_dir(dir, class_map);

    REQUIRE(loaded.test.size() == splits.test.size());
    // loader sorts by id; match up by original id
    std::map<std::string, const LabeledImage*> by_id;
    for (const auto& img : loaded.test) by_id[img.id] = &img;
    for (const auto& img : splits.test) {
        const std::string full_id = "test/" + names[img.label] + "/" + img.id;
        REQUIRE(by_id.count(full_id));
        CHECK(by_id[full_id]->pixels.values == img.pixels.values);
        CHECK(by_id[full_id]->label == img.label);
    }
    fs::remove_all(dir);
}

TEST_CASE("manifest is stable across reruns") {
    const fs::path d1 = scratch_dir("manifest1");
    const fs::path d2 = scratch_dir("manifest2");
    const CorpusSpec spec = tiny_spec();
    save_corpus(generate_synthetic_corpus(spec), d1, spec.num_classes);
    save_corpus(generate_synthetic_corpus(spec), d2, spec.num_classes);
    const std::string m1 = slurp(d1 / "corpus.csv");
    const std::string m2 = slurp(d2 / "corpus.csv");
    CHECK(m1 == m2);
    CHECK(m1.rfind("id,split,class,path,sha256\n", 0) == 0);
    fs::remove_all(d1);
    fs::remove_all(d2);
}

TEST_CASE("load_image_dir rejects bad layouts") {
    const fs::path dir = scratch_dir("empty");
    std::map<std::string, int> class_map{{"letter", 0}};
    CHECK_THROWS_AS(load_image_dir(dir, class_map), std::invalid_argument);  // no split dirs

    fs::create_directories(dir / "train" / "unknown_class");
    fs::create_directories(dir / "val");
    fs::create_directories(dir / "test");
    CHECK_THROWS_WITH_AS(load_image_dir(dir, class_map), doctest::Contains("unknown_class"),
                         std::invalid_argument);
    fs::remove_all(dir);
}

TEST_CASE("pgm with value 255 becomes 1.0 in all channels") {
    const fs::path dir = scratch_dir("pgm");
    ImageU8 img;
    img.height = 2;
    img.width = 2;
    img.channels = 1;
    img.pixels = {255, 0, 128, 64};
    write_pgm(dir / "x.pgm", img);
    const Tensor t = from_u8(read_image(dir / "x.pgm"));
    CHECK(t.shape == Shape{2, 2, 3});
    for (int c = 0; c < 3; ++c) {
        CHECK(t.values[c] == 1.0);
        CHECK(t.values[3 + c] == 0.0);
        CHECK(t.values[6 + c] == doctest::Approx(128.0 / 255.0));
    }
    fs::remove_all(dir);
}

TEST_CASE("png round-trips all filter-relevant content") {
    const fs::path dir = scratch_dir("png");
    Rng rng(123);
    ImageU8 img;
    img.height = 9;
    img.width = 7;
    img.channels = 3;
    img.pixels.resize(9 * 7 * 3);
    for (auto& p : img.pixels) p = static_cast<std::uint8_t>(rng.next_u64() & 0xff);
    write_png(dir / "x.png", img);
    const ImageU8 back = read_png(dir / "x.png");
    CHECK(back.height == img.height);
    CHECK(back.width == img.width);
    CHECK(back.channels == img.channels);
    CHECK(back.pixels == img.pixels);
    fs::remove_all(dir);
}

TEST_CASE("sha256 matches the reference vector") {
    const std::string abc = "abc";
    CHECK(sha256_hex(reinterpret_cast<const std::uint8_t*>(abc.data()), abc.size()) ==
          "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST_CASE("to_model_input identity, constants, and block means") {
    Rng rng(7);
    Tensor img = Tensor::zeros({5, 4, 3});
    for (double& v : img.values) v = rng.uniform01();
    CHECK(to_model_input(img, 5, 4).values == img.values);  // same shape: untouched

    const Tensor constant = Tensor::full({2, 2, 3}, 0.37);
    for (const auto [h, w] : {std::pair{16, 16}, {3, 5}, {1, 1}, {7, 2}}) {
        const Tensor r = to_model_input(constant, h, w);
        CHECK(r.shape == Shape{h, w, 3});
        for (double v : r.values) CHECK(v == doctest::Approx(0.37).epsilon(1e-12));
    }

    Tensor checker = Tensor::zeros({4, 4, 3});
    for (int y = 0; y < 4; ++y)
        for (int x = 0; x < 4; ++x)
            for (int c = 0; c < 3; ++c) checker.values[(y * 4 + x) * 3 + c] = (x + y) % 2;
    const Tensor halved = to_model_input(checker, 2, 2);
    for (double v : halved.values) CHECK(v == doctest::Approx(0.5).epsilon(1e-12));

    CHECK_THROWS_AS(to_model_input(img, 0, 4), std::invalid_argument);
}

TEST_CASE("eval subsets are balanced and seeded") {
    CorpusSpec spec;
    spec.num_classes = 8;
    spec.train_per_class = 2;
    spec.val_per_class = 1;
    spec.test_per_class = 4;
    spec.seed = 17;
    const DatasetSplit splits = generate_synthetic_corpus(spec);

    const auto subset = sample_eval_subset(splits.test, 16, 42);
    REQUIRE(subset.size() == 16);
    std::map<int, int> counts;
    for (const auto& img : subset) counts[img.label]++;
    for (const auto& [label, count] : counts) CHECK(count == 2);

    const auto again = sample_eval_subset(splits.test, 16, 42);
    for (std::size_t i = 0; i < subset.size(); ++i) CHECK(subset[i].id == again[i].id);

    // remainder spread keeps counts within 1 of each other
    const auto uneven = sample_eval_subset(splits.test, 13, 7);
    counts.clear();
    for (const auto& img : uneven) counts[img.label]++;
    int lo = 1 << 20, hi = 0;
    for (const auto& [label, count] : counts) {
        lo = std::min(lo, count);
        hi = std::max(hi, count);
    }
    CHECK(hi - lo <= 1);

    // whole split comes back as a seeded permutation
    const auto whole = sample_eval_subset(splits.test, static_cast<int>(splits.test.size()), 3);
    CHECK(whole.size() == splits.test.size());

    CHECK_THROWS_AS(sample_eval_subset(splits.test, 1000, 1), std::invalid_argument);
    CHECK_THROWS_AS(sample_eval_subset(splits.test, 0, 1), std::invalid_argument);
}
