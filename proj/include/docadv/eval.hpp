// Robustness metrics (accuracy, attack success rate), epsilon sweeps, and
// report emission (CSV, markdown tables, SVG curves).
#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "docadv/attack.hpp"
#include "docadv/data.hpp"
#include "docadv/model.hpp"

namespace docadv {

struct ExampleRecord {
    std::string id;
    int y_true = 0;
    int clean_pred = 0;
    int adv_pred = 0;
    double achieved_norm = 0.0;
    long queries = 0;
    std::string flag;  // "", "zero-gradient", "budget-exhausted"
};

struct EvalReport {
    std::string model_id;
    std::string attack_desc;  // "none", "bim-linf", "transfer-fgm(...)"
    double epsilon = 0.0;
    int n = 0;  // evaluated examples
    int m = 0;  // clean-correct examples
    double accuracy = 0.0;
    bool asr_defined = false;  // false when m == 0
    double asr = 0.0;
    std::vector<ExampleRecord> records;
};

// Pure recounts over per-example records; evaluate_attack uses exactly these.
double accuracy_from_records(const std::vector<ExampleRecord>& records);
int clean_correct_count(const std::vector<ExampleRecord>& records);
std::optional<double> asr_from_records(const std::vector<ExampleRecord>& records);

// A named, fully configured attack; "none" is the identity.
struct AttackInstance {
    std::string name = "none";
    AttackConfig config;
};

const std::vector<std::string>& attack_names();  // valid CLI names
// Throws (listing the valid names) on an unknown name. Norm, method, and
// steps are derived from the name; the rest comes from `defaults`.
AttackInstance parse_attack_name(const std::string& name, const AttackConfig& defaults);

std::vector<int> clean_predictions(const TrainedModel& model,
                                   const std::vector<LabeledImage>& examples, int workers);

// Runs the attack per example (seeded per index, parallel-safe) and fills a
// report. Clean predictions may be supplied to avoid recomputation; when
// `adversarial_out` is given the adversarial images are retained.
EvalReport evaluate_attack(const TrainedModel& model, const AttackInstance& attack,
                           const std::vector<LabeledImage>& examples, int workers = 1,
                           const std::vector<int>* cached_clean = nullptr,
                           std::vector<Tensor>* adversarial_out = nullptr);

// Transfer setting: examples crafted on `substitute`, replayed on the model.
EvalReport evaluate_transfer(const TrainedModel& substitute, const std::string& substitute_id,
                             const TrainedModel& target, const AttackInstance& attack,
                             const std::vector<LabeledImage>& examples, int workers = 1,
                             const std::vector<int>* cached_clean = nullptr);

double accuracy(const TrainedModel& model, const AttackInstance& attack,
                const std::vector<LabeledImage>& examples, int workers = 1);
std::optional<double> attack_success_rate(const TrainedModel& model, const AttackInstance& attack,
                                          const std::vector<LabeledImage>& examples,
                                          int workers = 1);

struct SweepResult {
    std::vector<double> grid;
    std::vector<EvalReport> points;  // one per grid value
};

// One report per epsilon; clean predictions are computed once, and the
// epsilon = 0 point reuses them verbatim.
SweepResult sweep_epsilon(const TrainedModel& model, const AttackInstance& attack_template,
                          const std::vector<double>& grid,
                          const std::vector<LabeledImage>& examples, int workers = 1);

// One CSV row per evaluated (model, attack, epsilon) point.
struct EvalPoint {
    std::string backbone;
    std::string defense;        // matrix row label, e.g. "grey+jpeg+adversarial"
    std::string training_mode;
    std::string attack;         // method name or "none" / "transfer-fgm(sub)"
    std::string norm;           // "linf", "l2", or "" for none
    double epsilon = 0.0;
    int n = 0;
    int m = 0;
    double accuracy = 0.0;
    bool asr_defined = false;
    double asr = 0.0;
    double mean_queries = 0.0;
    std::uint64_t seed = 0;
};

EvalPoint make_point(const EvalReport& report, const std::string& backbone,
                     const std::string& defense, const std::string& training_mode,
                     const std::string& attack, const std::string& norm, std::uint64_t seed);

// Deterministic emission: rows sorted by (backbone, defense, attack, norm,
// epsilon), fixed float formatting, asr "na" when undefined.
std::string to_csv(std::vector<EvalPoint> points);
std::vector<EvalPoint> parse_csv(const std::string& text);

// Markdown report: clean-accuracy table, per-attack table at the anchor
// budgets, and a transfer matrix (substitute == target backbone cells n/a).
std::string to_markdown(const std::vector<EvalPoint>& points, double anchor_linf,
                        double anchor_l2);

// Accuracy-vs-epsilon line chart for every (backbone, defense, attack)
// series under the given norm.
std::string to_svg_curves(const std::vector<EvalPoint>& points, const std::string& norm);

void write_text_file(const std::filesystem::path& path, const std::string& text);
std::string read_text_file(const std::filesystem::path& path);

// PNG dump named <split>_<index>_<method>_<norm>_<eps>.png per example plus
// a manifest CSV (index, true label, clean pred, adv pred, norm, queries).
void dump_adversarial_examples(const std::filesystem::path& dir, const std::string& split,
                               const AttackInstance& attack, const EvalReport& report,
                               const std::vector<Tensor>& adversarial);

}  // namespace docadv
