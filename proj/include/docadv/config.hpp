// Flat key-value run configuration with section-prefixed keys, plus the
// resolved snapshot every command writes for reproducibility.
#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "docadv/attack.hpp"
#include "docadv/data.hpp"
#include "docadv/model.hpp"

namespace docadv {

struct RunConfig {
    std::uint64_t seed = 42;
    std::string out_dir;   // --out / "out" key / DOCADV_OUT, in that order
    std::string data_dir;  // external corpus; empty = <out>/corpus

    CorpusSpec corpus;  // corpus.seed is derived from the global seed

    std::vector<std::string> presets = {"mini-convnet", "mini-resnet"};
    std::string train_preset = "mini-convnet";
    std::string train_mode = "natural";
    int epochs = 10;
    int batch_size = 8;
    double lr = 0.1;
    double lr_decay = 0.95;
    double adv_epsilon = 0.02;  // in-loop BIM budget for adversarial training
    int adv_steps = 5;

    int jpeg_quality = 75;
    std::vector<std::string> defense_rows = {"none", "grey", "jpeg", "adversarial",
                                             "grey+jpeg+adversarial"};

    int eval_subset = 32;
    int sweep_subset = 16;
    int workers = 0;  // 0: hardware concurrency
    std::vector<std::string> eval_attacks = {"fgm-linf", "bim-linf", "mim-linf", "fgm-l2",
                                             "bim-l2",   "mim-l2",   "spsa",     "transfer-fgm",
                                             "transfer-mim"};
    double anchor_linf = 0.02;
    double anchor_l2 = 2.0;
    std::vector<double> grid_linf = {0, 0.005, 0.01, 0.02, 0.05, 0.10, 0.20};
    std::vector<double> grid_l2 = {0, 0.5, 1, 2, 5, 10, 20};
    bool spsa_on_grey = false;  // grey rows keep the dash by default
    std::string dump_dir;

    int attack_steps = 20;
    int attack_strength = 20;
    double momentum = 1.0;
    int spsa_batch = 10;
    double spsa_delta = 0.01;

    // Attack defaults with the purpose-labeled seed fan-out applied.
    AttackConfig attack_defaults() const;
    void validate() const;

    // The snapshot: every key with its resolved value, sorted, byte-stable.
    std::string resolved_text() const;
};

RunConfig parse_config_text(const std::string& text);
RunConfig parse_config_file(const std::filesystem::path& path);

}  // namespace docadv
