#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>

#include "docadv/cli.hpp"
#include "docadv/config.hpp"
#include "docadv/eval.hpp"
#include "docadv/model.hpp"
#include "doctest.h"

using namespace docadv;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / ("docadv_cli_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE(in.good());
    return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>{});
}

// small enough for command-level tests to stay fast
RunConfig tiny_config(const fs::path& out) {
    RunConfig cfg;
    cfg.seed = 77;
    cfg.out_dir = out.string();
    cfg.corpus.num_classes = 4;
    cfg.corpus.train_per_class = 8;
    cfg.corpus.val_per_class = 2;
    cfg.corpus.test_per_class = 4;
    cfg.corpus.height = 16;
    cfg.corpus.width = 16;
    cfg.presets = {"mini-convnet"};
    cfg.epochs = 6;
    cfg.batch_size = 8;
    cfg.lr = 0.25;
    cfg.lr_decay = 0.95;
    cfg.adv_steps = 2;
    cfg.eval_subset = 8;
    cfg.sweep_subset = 8;
    cfg.workers = 2;
    cfg.attack_steps = 5;
    cfg.spsa_batch = 2;
    cfg.eval_attacks = {"fgm-linf", "bim-linf"};
    cfg.defense_rows = {"none", "grey", "adversarial"};
    return cfg;
}

}  // namespace

TEST_CASE("config text parses and round-trips through the snapshot") {
    const std::string text =
        "# comment\n"
        "seed = 9\n"
        "corpus.classes = 5\n"
        "train.lr = 0.2   # inline comment\n"
        "eval.attacks = fgm-linf, spsa\n"
        "sweep.grid_linf = 0,0.1,0.2\n";
    const RunConfig cfg = parse_config_text(text);
    CHECK(cfg.seed == 9);
    CHECK(cfg.corpus.num_classes == 5);
    CHECK(cfg.lr == 0.2);
    CHECK(cfg.eval_attacks == std::vector<std::string>{"fgm-linf", "spsa"});
    CHECK(cfg.grid_linf == std::vector<double>{0, 0.1, 0.2});

    const RunConfig reparsed = parse_config_text(cfg.resolved_text());
    CHECK(reparsed.resolved_text() == cfg.resolved_text());
}

TEST_CASE("config rejects unknown keys and malformed values") {
    CHECK_THROWS_WITH_AS(parse_config_text("corpus.size = 3\n"), doctest::Contains("unknown key"),
                         std::invalid_argument);
    CHECK_THROWS_AS(parse_config_text("train.epochs = many\n"), std::invalid_argument);
    CHECK_THROWS_AS(parse_config_text("bad line\n"), std::invalid_argument);
}

TEST_CASE("invalid corpus noise exits with a configuration error") {
    const fs::path out = scratch_dir("badnoise");
    RunConfig cfg = tiny_config(out);
    cfg.corpus.noise_sigma = 0.5;
    CHECK(cmd_gen_data(cfg) == 2);
    fs::remove_all(out);
}

TEST_CASE("gen-data writes a corpus and identical manifests across reruns") {
    const fs::path out1 = scratch_dir("gen1");
    const fs::path out2 = scratch_dir("gen2");
    CHECK(cmd_gen_data(tiny_config(out1)) == 0);
    CHECK(cmd_gen_data(tiny_config(out2)) == 0);
    CHECK(fs::exists(out1 / "corpus" / "corpus.csv"));
    CHECK(fs::exists(out1 / "gen-data.resolved.cfg"));
    CHECK(slurp(out1 / "corpus" / "corpus.csv") == slurp(out2 / "corpus" / "corpus.csv"));
    fs::remove_all(out1);
    fs::remove_all(out2);
}

TEST_CASE("train without a corpus is a configuration error") {
    const fs::path out = scratch_dir("nocorpus");
    CHECK(cmd_train(tiny_config(out)) == 2);
    fs::remove_all(out);
}

TEST_CASE("the full command pipeline produces reports deterministically") {
    const fs::path out = scratch_dir("pipeline");
    RunConfig cfg = tiny_config(out);
    REQUIRE(cmd_gen_data(cfg) == 0);

    cfg.train_mode = "natural";
    REQUIRE(cmd_train(cfg) == 0);
    cfg.train_mode = "adversarial";
    REQUIRE(cmd_train(cfg) == 0);

    const fs::path nat = out / "checkpoints" / "mini-convnet-natural.ckpt";
    const fs::path adv = out / "checkpoints" / "mini-convnet-adversarial.ckpt";
    REQUIRE(fs::exists(nat));
    REQUIRE(fs::exists(adv));
    CHECK(load_checkpoint(nat).training_mode == TrainingMode::Natural);
    CHECK(load_checkpoint(adv).training_mode == TrainingMode::Adversarial);

    // retraining with the same seed reproduces the checkpoint byte for byte
    const std::string nat_bytes = slurp(nat);
    cfg.train_mode = "natural";
    REQUIRE(cmd_train(cfg) == 0);
    CHECK(slurp(nat) == nat_bytes);

    REQUIRE(cmd_evaluate(cfg, {}, {}) == 0);
    CHECK(fs::exists(out / "report.md"));
    const std::string csv = slurp(out / "report.csv");
    // rows: 3 defenses x (none + fgm + bim); no transfer (single backbone)
    std::size_t rows = 0;
    for (char c : csv)
        if (c == '\n') ++rows;
    CHECK(rows == 1 + 3 * 3);

    // different worker count, identical bytes
    cfg.workers = 1;
    REQUIRE(cmd_evaluate(cfg, {}, {}) == 0);
    CHECK(slurp(out / "report.csv") == csv);

    CHECK(cmd_report(cfg, (out / "report.csv").string()) == 0);
    CHECK(fs::exists(out / "report_linf.svg"));

    fs::remove_all(out);
}

TEST_CASE("unknown attack names exit with code 2 and list the options") {
    const fs::path out = scratch_dir("badattack");
    RunConfig cfg = tiny_config(out);
    REQUIRE(cmd_gen_data(cfg) == 0);
    REQUIRE(cmd_train(cfg) == 0);
    CHECK(cmd_evaluate(cfg, {}, {"deepfool"}) == 2);
    fs::remove_all(out);
}

TEST_CASE("evaluate without checkpoints is a configuration error") {
    const fs::path out = scratch_dir("nockpt");
    RunConfig cfg = tiny_config(out);
    REQUIRE(cmd_gen_data(cfg) == 0);
    CHECK(cmd_evaluate(cfg, {}, {}) == 2);
    fs::remove_all(out);
}

TEST_CASE("sweep emits csv and svg curves") {
    const fs::path out = scratch_dir("sweep");
    RunConfig cfg = tiny_config(out);
    cfg.grid_linf = {0, 0.05, 0.2};
    cfg.eval_attacks = {"bim-linf"};
    cfg.defense_rows = {"none"};
    REQUIRE(cmd_gen_data(cfg) == 0);
    REQUIRE(cmd_train(cfg) == 0);
    REQUIRE(cmd_sweep(cfg, {}, {}) == 0);
    CHECK(fs::exists(out / "sweep.csv"));
    CHECK(fs::exists(out / "curves_linf.svg"));
    const auto points = parse_csv(slurp(out / "sweep.csv"));
    CHECK(points.size() == 3);  // one per grid value
    // epsilon 0 equals clean accuracy
    double clean = -1, at0 = -1;
    for (const auto& p : points)
        if (p.epsilon == 0.0) at0 = p.accuracy;
    const TrainedModel model =
        load_checkpoint(out / "checkpoints" / "mini-convnet-natural.ckpt");
    clean = model.clean_accuracy;
    CHECK(at0 >= 0.0);
    CHECK(clean >= 0.0);
    fs::remove_all(out);
}

TEST_CASE("run_cli wires flags through to the commands") {
    const fs::path out = scratch_dir("runcli");
    const fs::path cfg_file = out / "run.cfg";
    RunConfig cfg = tiny_config(out);
    write_text_file(cfg_file, cfg.resolved_text());

    std::vector<std::string> args = {"docadv", "gen-data", "--config", cfg_file.string(),
                                     "--out", out.string()};
    std::vector<char*> argv;
    for (auto& a : args) argv.push_back(a.data());
    CHECK(run_cli(static_cast<int>(argv.size()), argv.data()) == 0);
    CHECK(fs::exists(out / "corpus" / "corpus.csv"));

    args = {"docadv", "bogus-command"};
    argv.clear();
    for (auto& a : args) argv.push_back(a.data());
    CHECK(run_cli(static_cast<int>(argv.size()), argv.data()) == 2);
    fs::remove_all(out);
}
