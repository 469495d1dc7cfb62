// Desk-scale classifier backbones, natural and adversarial training, and
// checkpoint io.
#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "docadv/attack.hpp"
#include "docadv/data.hpp"
#include "docadv/defense.hpp"
#include "docadv/tensor.hpp"

namespace docadv {

struct BlockSpec {
    int width = 8;
    int stride = 1;
    bool residual = false;  // stride-1 skip connection; width must match input
};

struct ClassifierSpec {
    std::string preset = "custom";
    int input_height = 64;
    int input_width = 64;
    int num_classes = 8;
    std::vector<BlockSpec> blocks;
    std::uint64_t seed = 0;

    void validate() const;
};

// Plain three-stage stack; stand-in for the larger of the reference backbones.
ClassifierSpec mini_convnet_spec(int height, int width, int num_classes, std::uint64_t seed);
// Same stack with a residual block after each downsampling stage.
ClassifierSpec mini_resnet_spec(int height, int width, int num_classes, std::uint64_t seed);
ClassifierSpec make_classifier_spec(const std::string& preset, int height, int width,
                                    int num_classes, std::uint64_t seed);

enum class TrainingMode { Natural, Adversarial };
const char* training_mode_name(TrainingMode mode);

struct LrSchedule {
    double initial = 0.1;
    double decay = 0.95;  // per-epoch factor
};

struct TrainConfig {
    int epochs = 10;
    int batch_size = 8;
    LrSchedule lr;
    std::uint64_t seed = 0;
    AttackConfig adversarial_attack;  // in-loop BIM; adversarial mode only

    void validate() const;
};

struct TrainedModel {
    ClassifierSpec spec;
    std::map<std::string, Tensor> parameters;
    DefensePipeline defense;
    TrainingMode training_mode = TrainingMode::Natural;
    double clean_accuracy = 0.0;  // on the test split at save time
};

// He-initialized backbone with a zero final layer (uniform predictions).
TrainedModel make_untrained(const ClassifierSpec& spec);

// Full defense pipeline, then backbone, then softmax. Output sums to one.
std::vector<double> predict(const TrainedModel& model, const Tensor& image);
// argmax of predict; ties break toward the lowest class index.
int classify(const TrainedModel& model, const Tensor& image);
int argmax_lowest(const std::vector<double>& values);

TrainedModel train_natural(const DatasetSplit& splits, const ClassifierSpec& spec,
                           const TrainConfig& config);
// Per minibatch, BIM examples are generated against the current parameters
// and the update averages the clean and adversarial losses 1:1.
TrainedModel train_adversarial(const DatasetSplit& splits, const ClassifierSpec& spec,
                               const TrainConfig& config);

TrainedModel with_defense(TrainedModel model, DefensePipeline pipeline);

// White-box adversary view: gradients flow through grey (channel mean) when
// present; a jpeg stage is treated as identity for gradients and applied at
// prediction time only.
std::unique_ptr<AttackTarget> make_attack_target(const TrainedModel& model);

double clean_accuracy_on(const TrainedModel& model, const std::vector<LabeledImage>& images);

// "DOCADV1" checkpoint: text header, then named little-endian f64 blobs.
// Round-trips bit-exactly.
void save_checkpoint(const TrainedModel& model, const std::filesystem::path& path);
TrainedModel load_checkpoint(const std::filesystem::path& path);

}  // namespace docadv
