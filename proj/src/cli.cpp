#include "docadv/cli.hpp"

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "CLI11.hpp"
#include "docadv/eval.hpp"
#include "docadv/image_io.hpp"
#include "docadv/rng.hpp"

namespace docadv {

namespace fs = std::filesystem;

namespace {

[[noreturn]] void invalid(const std::string& msg) { throw std::invalid_argument(msg); }

int resolve_workers(const RunConfig& cfg) {
    if (cfg.workers > 0) return cfg.workers;
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
}

fs::path out_dir(const RunConfig& cfg) {
    if (cfg.out_dir.empty())
        invalid("no output directory: pass --out, set 'out' in the config, or export DOCADV_OUT");
    return fs::path(cfg.out_dir);
}

void write_snapshot(const RunConfig& cfg, const char* command) {
    const fs::path dir = out_dir(cfg);
    fs::create_directories(dir);
    write_text_file(dir / (std::string(command) + ".resolved.cfg"), cfg.resolved_text());
}

std::map<std::string, int> class_map_for(const RunConfig& cfg) {
    std::map<std::string, int> map;
    const auto names = corpus_class_names(cfg.corpus.num_classes);
    for (int c = 0; c < cfg.corpus.num_classes; ++c) map[names[c]] = c;
    return map;
}

DatasetSplit load_corpus(const RunConfig& cfg) {
    const fs::path dir =
        cfg.data_dir.empty() ? out_dir(cfg) / "corpus" : fs::path(cfg.data_dir);
    if (!fs::is_directory(dir))
        invalid("corpus not found at " + dir.string() + "; run gen-data or set data.dir");
    DatasetSplit splits = load_image_dir(dir, class_map_for(cfg));
    for (auto* part : {&splits.train, &splits.val, &splits.test})
        for (auto& img : *part)
            img.pixels = to_model_input(img.pixels, cfg.corpus.height, cfg.corpus.width);
    return splits;
}

TrainConfig train_config_for(const RunConfig& cfg, const std::string& preset) {
    TrainConfig tc;
    tc.epochs = cfg.epochs;
    tc.batch_size = cfg.batch_size;
    tc.lr = {cfg.lr, cfg.lr_decay};
    tc.seed = derive_seed(cfg.seed, "train:" + preset);
    tc.adversarial_attack = cfg.attack_defaults();
    tc.adversarial_attack.method = AttackMethod::Bim;
    tc.adversarial_attack.threat = {Norm::LInf, cfg.adv_epsilon, cfg.attack_strength};
    tc.adversarial_attack.steps = cfg.adv_steps;
    tc.adversarial_attack.seed = derive_seed(cfg.seed, "advtrain:" + preset);
    return tc;
}

fs::path checkpoint_path(const RunConfig& cfg, const std::string& preset,
                         const std::string& mode) {
    return out_dir(cfg) / "checkpoints" / (preset + "-" + mode + ".ckpt");
}

// loaded checkpoints keyed by (preset, training mode name)
using ModelSet = std::map<std::pair<std::string, std::string>, TrainedModel>;

ModelSet load_models(const RunConfig& cfg, const std::vector<std::string>& model_paths) {
    std::vector<fs::path> paths;
    if (!model_paths.empty()) {
        for (const auto& p : model_paths) paths.emplace_back(p);
    } else {
        const fs::path dir = out_dir(cfg) / "checkpoints";
        if (fs::is_directory(dir))
            for (const auto& entry : fs::directory_iterator(dir))
                if (entry.path().extension() == ".ckpt") paths.push_back(entry.path());
        std::sort(paths.begin(), paths.end());
    }
    if (paths.empty())
        invalid("no checkpoints: pass --model or run train first (looked under " +
                (out_dir(cfg) / "checkpoints").string() + ")");
    ModelSet models;
    for (const auto& path : paths) {
        TrainedModel model = load_checkpoint(path);
        const auto key =
            std::make_pair(model.spec.preset, std::string(training_mode_name(model.training_mode)));
        if (models.count(key))
            invalid("duplicate checkpoint for " + key.first + "-" + key.second + " (" +
                    path.string() + ")");
        models.emplace(key, std::move(model));
    }
    return models;
}

struct MatrixRow {
    std::string backbone;
    std::string label;  // defense row label, e.g. "grey+jpeg+adversarial"
    TrainedModel model;
};

// A defense row names preprocessing stages and/or the adversarial training
// mode, mirroring the reference table layout.
MatrixRow build_row(const RunConfig& cfg, const ModelSet& models, const std::string& preset,
                    const std::string& label) {
    DefensePipeline pipeline;
    std::string mode = "natural";
    std::stringstream ss(label);
    std::string tok;
    while (std::getline(ss, tok, '+')) {
        if (tok == "none" || tok.empty()) continue;
        if (tok == "grey") pipeline.stages.push_back({StageKind::Grey, 0});
        else if (tok == "jpeg") pipeline.stages.push_back({StageKind::Jpeg, cfg.jpeg_quality});
        else if (tok == "adversarial") mode = "adversarial";
        else invalid("unknown defense row token '" + tok + "' in '" + label + "'");
    }
    const auto it = models.find({preset, mode});
    if (it == models.end())
        invalid("defense row '" + label + "' needs a " + mode + " " + preset +
                " checkpoint; train it first");
    MatrixRow row;
    row.backbone = preset;
    row.label = label;
    row.model = with_defense(it->second, pipeline);
    return row;
}

std::vector<std::string> backbones_in(const RunConfig& cfg, const ModelSet& models) {
    std::vector<std::string> out;
    for (const auto& preset : cfg.presets) {
        bool any = false;
        for (const auto& [key, model] : models)
            if (key.first == preset) any = true;
        if (any) out.push_back(preset);
    }
    if (out.empty()) invalid("none of the configured presets have checkpoints");
    return out;
}

struct EvalFailure {
    std::string what;
    std::string context;
};

void write_failures(const RunConfig& cfg, const std::vector<EvalFailure>& failures,
                    const char* command) {
    if (failures.empty()) return;
    std::string text;
    for (const auto& f : failures) text += f.context + ": " + f.what + "\n";
    write_text_file(out_dir(cfg) / (std::string(command) + ".errors.txt"), text);
    std::cerr << failures.size() << " combination(s) failed; see "
              << (out_dir(cfg) / (std::string(command) + ".errors.txt")).string() << "\n";
}

int gen_data_impl(const RunConfig& cfg) {
    cfg.validate();
    CorpusSpec spec = cfg.corpus;
    spec.seed = derive_seed(cfg.seed, "corpus");
    const DatasetSplit splits = generate_synthetic_corpus(spec);
    const fs::path dir = out_dir(cfg) / "corpus";
    save_corpus(splits, dir, spec.num_classes);
    write_snapshot(cfg, "gen-data");

    const auto names = corpus_class_names(spec.num_classes);
    std::cout << "corpus written to " << dir.string() << "\n";
    for (int c = 0; c < spec.num_classes; ++c)
        std::cout << "  class " << c << " (" << names[c] << "): train " << spec.train_per_class
                  << ", val " << spec.val_per_class << ", test " << spec.test_per_class << "\n";
    return 0;
}

int train_impl_cmd(const RunConfig& cfg) {
    cfg.validate();
    const std::string& preset = cfg.train_preset;
    const std::string& mode = cfg.train_mode;
    const DatasetSplit splits = load_corpus(cfg);
    const ClassifierSpec spec =
        make_classifier_spec(preset, cfg.corpus.height, cfg.corpus.width, cfg.corpus.num_classes,
                             derive_seed(cfg.seed, "init:" + preset));
    const TrainConfig tc = train_config_for(cfg, preset);
    const TrainedModel model = mode == "adversarial" ? train_adversarial(splits, spec, tc)
                                                     : train_natural(splits, spec, tc);
    const fs::path path = checkpoint_path(cfg, preset, mode);
    fs::create_directories(path.parent_path());
    save_checkpoint(model, path);
    write_snapshot(cfg, "train");
    std::cout << preset << " (" << mode << "): clean accuracy "
              << model.clean_accuracy << ", checkpoint " << path.string() << "\n";
    return 0;
}

// shared by evaluate and sweep
struct EvalContext {
    std::vector<LabeledImage> subset;
    std::vector<MatrixRow> rows;
    ModelSet models;
    std::vector<std::string> backbones;
    int workers = 1;
};

EvalContext make_context(const RunConfig& cfg, const std::vector<std::string>& model_paths,
                         int subset_size) {
    EvalContext ctx;
    ctx.workers = resolve_workers(cfg);
    const DatasetSplit splits = load_corpus(cfg);
    const int n = std::min<int>(subset_size, static_cast<int>(splits.test.size()));
    ctx.subset = sample_eval_subset(splits.test, n, derive_seed(cfg.seed, "sample"));
    ctx.models = load_models(cfg, model_paths);
    ctx.backbones = backbones_in(cfg, ctx.models);
    for (const auto& preset : ctx.backbones)
        for (const auto& label : cfg.defense_rows)
            ctx.rows.push_back(build_row(cfg, ctx.models, preset, label));
    return ctx;
}

// adversarially trained bare models act as transfer substitutes
std::vector<std::pair<std::string, const TrainedModel*>> substitutes_for(
    const EvalContext& ctx, const std::string& target_backbone) {
    std::vector<std::pair<std::string, const TrainedModel*>> subs;
    for (const auto& [key, model] : ctx.models)
        if (key.second == "adversarial" && key.first != target_backbone)
            subs.push_back({key.first + "+adversarial", &model});
    return subs;
}

const char* short_method_name(const std::string& attack_name) {
    if (attack_name.rfind("fgm", 0) == 0) return "fgm";
    if (attack_name.rfind("bim", 0) == 0) return "bim";
    if (attack_name.rfind("mim", 0) == 0) return "mim";
    return "spsa";
}

int evaluate_impl(const RunConfig& cfg, const std::vector<std::string>& model_paths,
                  const std::vector<std::string>& attack_list) {
    cfg.validate();
    const std::vector<std::string>& attacks =
        attack_list.empty() ? cfg.eval_attacks : attack_list;
    // validate names before any work so typos exit fast
    for (const auto& name : attacks)
        if (name.rfind("transfer-", 0) == 0) {
            const std::string inner = name.substr(9);
            if (inner != "fgm" && inner != "mim")
                invalid("unknown attack '" + name + "' (transfer supports transfer-fgm and "
                        "transfer-mim)");
        } else {
            (void)parse_attack_name(name, cfg.attack_defaults());
        }

    EvalContext ctx = make_context(cfg, model_paths, cfg.eval_subset);
    std::vector<EvalPoint> points;
    std::vector<EvalFailure> failures;

    for (const auto& row : ctx.rows) {
        const std::string mode = training_mode_name(row.model.training_mode);
        const std::vector<int> clean = clean_predictions(row.model, ctx.subset, ctx.workers);
        {
            AttackInstance none;
            const EvalReport report =
                evaluate_attack(row.model, none, ctx.subset, ctx.workers, &clean);
            points.push_back(
                make_point(report, row.backbone, row.label, mode, "none", "", cfg.seed));
        }
        for (const auto& name : attacks) {
            try {
                if (name.rfind("transfer-", 0) == 0) {
                    AttackInstance instance =
                        parse_attack_name(name.substr(9) + "-linf", cfg.attack_defaults());
                    instance.name = name;
                    instance.config.threat.epsilon = cfg.anchor_linf;
                    for (const auto& [sub_id, sub] : substitutes_for(ctx, row.backbone)) {
                        const EvalReport report = evaluate_transfer(
                            *sub, sub_id, row.model, instance, ctx.subset, ctx.workers, &clean);
                        points.push_back(make_point(report, row.backbone, row.label, mode,
                                                    name + "(" + sub_id + ")", "linf", cfg.seed));
                    }
                    continue;
                }
                AttackInstance instance = parse_attack_name(name, cfg.attack_defaults());
                const bool grey_row = row.label.find("grey") != std::string::npos;
                if (instance.config.method == AttackMethod::Spsa && grey_row && !cfg.spsa_on_grey)
                    continue;  // reported as a dash, like the reference tables
                instance.config.threat.epsilon =
                    instance.config.threat.norm == Norm::LInf ? cfg.anchor_linf : cfg.anchor_l2;
                std::vector<Tensor> adversarial;
                std::vector<Tensor>* adv_ptr = cfg.dump_dir.empty() ? nullptr : &adversarial;
                const EvalReport report = evaluate_attack(row.model, instance, ctx.subset,
                                                          ctx.workers, &clean, adv_ptr);
                points.push_back(make_point(report, row.backbone, row.label, mode,
                                            short_method_name(name),
                                            norm_name(instance.config.threat.norm), cfg.seed));
                if (adv_ptr)
                    dump_adversarial_examples(
                        fs::path(cfg.dump_dir) / (row.backbone + "-" + row.label), "test",
                        instance, report, adversarial);
            } catch (const std::exception& e) {
                failures.push_back({e.what(), row.backbone + "/" + row.label + "/" + name});
            }
        }
        std::cout << "evaluated " << row.backbone << " / " << row.label << "\n";
    }

    const fs::path dir = out_dir(cfg);
    fs::create_directories(dir);
    write_text_file(dir / "report.csv", to_csv(points));
    write_text_file(dir / "report.md", to_markdown(points, cfg.anchor_linf, cfg.anchor_l2));
    write_snapshot(cfg, "evaluate");
    write_failures(cfg, failures, "evaluate");
    std::cout << "report written to " << (dir / "report.csv").string() << "\n";
    return failures.empty() ? 0 : 1;
}

int sweep_impl(const RunConfig& cfg, const std::vector<std::string>& model_paths,
               const std::vector<std::string>& attack_list) {
    cfg.validate();
    const std::vector<std::string>& attacks =
        attack_list.empty() ? cfg.eval_attacks : attack_list;
    EvalContext ctx = make_context(cfg, model_paths, cfg.sweep_subset);
    std::vector<EvalPoint> points;
    std::vector<EvalFailure> failures;

    for (const auto& row : ctx.rows) {
        const std::string mode = training_mode_name(row.model.training_mode);
        const std::vector<int> clean = clean_predictions(row.model, ctx.subset, ctx.workers);
        for (const auto& name : attacks) {
            try {
                if (name.rfind("transfer-", 0) == 0) {
                    AttackInstance instance =
                        parse_attack_name(name.substr(9) + "-linf", cfg.attack_defaults());
                    for (const auto& [sub_id, sub] : substitutes_for(ctx, row.backbone)) {
                        for (double eps : cfg.grid_linf) {
                            EvalReport report;
                            if (eps == 0.0) {
                                AttackInstance none;
                                report = evaluate_attack(row.model, none, ctx.subset, ctx.workers,
                                                         &clean);
                            } else {
                                AttackInstance step = instance;
                                step.config.threat.epsilon = eps;
                                report = evaluate_transfer(*sub, sub_id, row.model, step,
                                                           ctx.subset, ctx.workers, &clean);
                                report.epsilon = eps;
                            }
                            report.epsilon = eps;
                            points.push_back(make_point(report, row.backbone, row.label, mode,
                                                        name + "(" + sub_id + ")", "linf",
                                                        cfg.seed));
                        }
                    }
                    continue;
                }
                AttackInstance instance = parse_attack_name(name, cfg.attack_defaults());
                const bool grey_row = row.label.find("grey") != std::string::npos;
                if (instance.config.method == AttackMethod::Spsa && grey_row && !cfg.spsa_on_grey)
                    continue;
                const auto& grid =
                    instance.config.threat.norm == Norm::LInf ? cfg.grid_linf : cfg.grid_l2;
                const SweepResult sweep =
                    sweep_epsilon(row.model, instance, grid, ctx.subset, ctx.workers);
                for (const auto& report : sweep.points)
                    points.push_back(make_point(report, row.backbone, row.label, mode,
                                                short_method_name(name),
                                                norm_name(instance.config.threat.norm), cfg.seed));
            } catch (const std::exception& e) {
                failures.push_back({e.what(), row.backbone + "/" + row.label + "/" + name});
            }
        }
        std::cout << "swept " << row.backbone << " / " << row.label << "\n";
    }

    const fs::path dir = out_dir(cfg);
    fs::create_directories(dir);
    write_text_file(dir / "sweep.csv", to_csv(points));
    write_text_file(dir / "sweep.md", to_markdown(points, cfg.anchor_linf, cfg.anchor_l2));
    write_text_file(dir / "curves_linf.svg", to_svg_curves(points, "linf"));
    write_text_file(dir / "curves_l2.svg", to_svg_curves(points, "l2"));
    write_snapshot(cfg, "sweep");
    write_failures(cfg, failures, "sweep");
    std::cout << "sweep written to " << (dir / "sweep.csv").string() << "\n";
    return failures.empty() ? 0 : 1;
}

int report_impl(const RunConfig& cfg, const std::string& csv_path) {
    const fs::path path =
        csv_path.empty() ? out_dir(cfg) / "report.csv" : fs::path(csv_path);
    const std::vector<EvalPoint> points = parse_csv(read_text_file(path));
    const fs::path base = path.parent_path() / path.stem();
    write_text_file(fs::path(base.string() + ".md"),
                    to_markdown(points, cfg.anchor_linf, cfg.anchor_l2));
    write_text_file(fs::path(base.string() + "_linf.svg"), to_svg_curves(points, "linf"));
    write_text_file(fs::path(base.string() + "_l2.svg"), to_svg_curves(points, "l2"));
    std::cout << "report rendered from " << path.string() << "\n";
    return 0;
}

template <typename Fn>
int guarded(Fn&& fn) {
    try {
        return fn();
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}

}  // namespace

int cmd_gen_data(const RunConfig& cfg) {
    return guarded([&] { return gen_data_impl(cfg); });
}

int cmd_train(const RunConfig& cfg) {
    return guarded([&] { return train_impl_cmd(cfg); });
}

int cmd_evaluate(const RunConfig& cfg, const std::vector<std::string>& model_paths,
                 const std::vector<std::string>& attacks) {
    return guarded([&] { return evaluate_impl(cfg, model_paths, attacks); });
}

int cmd_sweep(const RunConfig& cfg, const std::vector<std::string>& model_paths,
              const std::vector<std::string>& attacks) {
    return guarded([&] { return sweep_impl(cfg, model_paths, attacks); });
}

int cmd_report(const RunConfig& cfg, const std::string& csv_path) {
    return guarded([&] { return report_impl(cfg, csv_path); });
}

int run_cli(int argc, char** argv) {
    CLI::App app{"docadv: adversarial robustness benchmark for document image classifiers"};
    app.require_subcommand(1);
    app.fallthrough();  // global flags may follow the subcommand

    std::string config_path, out_flag, mode_positional, preset_positional, csv_positional;
    std::uint64_t seed_flag = 0;
    bool seed_set = false;
    int workers_flag = -1;
    std::vector<std::string> model_paths, attack_flags;

    app.add_option("--config", config_path, "flat key-value configuration file")
        ->check(CLI::ExistingFile);
    app.add_option_function<std::uint64_t>(
           "--seed",
           [&](std::uint64_t v) {
               seed_flag = v;
               seed_set = true;
           },
           "global seed (fans out to corpus, init, attacks, sampling)");
    app.add_option("--out", out_flag, "output directory (fallback: DOCADV_OUT)");
    app.add_option("--workers", workers_flag, "evaluation worker threads (0 = all cores)");
    app.add_option("--model", model_paths, "checkpoint path (repeatable)");
    app.add_option("--attack", attack_flags, "attack name (repeatable)");

    CLI::App* gen = app.add_subcommand("gen-data", "generate the synthetic document corpus");
    CLI::App* train = app.add_subcommand("train", "train one classifier preset");
    train->add_option("mode", mode_positional, "natural or adversarial");
    train->add_option("preset", preset_positional, "mini-convnet or mini-resnet");
    CLI::App* evaluate =
        app.add_subcommand("evaluate", "run the attack matrix at the anchor budgets");
    CLI::App* sweep = app.add_subcommand("sweep", "run attacks across the full budget grids");
    CLI::App* report = app.add_subcommand("report", "render markdown and SVG from a CSV");
    report->add_option("csv", csv_positional, "evaluation CSV (default <out>/report.csv)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    RunConfig cfg;
    if (!config_path.empty()) {
        try {
            cfg = parse_config_file(config_path);
        } catch (const std::exception& e) {
            std::cerr << "error: " << e.what() << "\n";
            return 2;
        }
    }
    if (seed_set) cfg.seed = seed_flag;
    if (!out_flag.empty()) cfg.out_dir = out_flag;
    if (cfg.out_dir.empty())
        if (const char* env = std::getenv("DOCADV_OUT")) cfg.out_dir = env;
    if (workers_flag >= 0) cfg.workers = workers_flag;
    if (!mode_positional.empty()) cfg.train_mode = mode_positional;
    if (!preset_positional.empty()) cfg.train_preset = preset_positional;

    if (gen->parsed()) return cmd_gen_data(cfg);
    if (train->parsed()) return cmd_train(cfg);
    if (evaluate->parsed()) return cmd_evaluate(cfg, model_paths, attack_flags);
    if (sweep->parsed()) return cmd_sweep(cfg, model_paths, attack_flags);
    if (report->parsed()) return cmd_report(cfg, csv_positional);
    return 2;
}

}  // namespace docadv
