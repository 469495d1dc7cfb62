#include "docadv/model.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "docadv/rng.hpp"

namespace docadv {

namespace {

[[noreturn]] void invalid(const std::string& msg) { throw std::invalid_argument(msg); }
[[noreturn]] void runtime(const std::string& msg) { throw std::runtime_error(msg); }

Tensor hwc_to_nchw(const Tensor& image) {
    const int H = image.shape[0], W = image.shape[1], C = image.shape[2];
    Tensor out = Tensor::zeros({1, C, H, W});
    for (int h = 0; h < H; ++h)
        for (int w = 0; w < W; ++w)
            for (int c = 0; c < C; ++c)
                out.values[(static_cast<std::size_t>(c) * H + h) * W + w] =
                    image.values[(static_cast<std::size_t>(h) * W + w) * C + c];
    return out;
}

Tensor nchw_to_hwc(const double* values, int C, int H, int W) {
    Tensor out = Tensor::zeros({H, W, C});
    for (int h = 0; h < H; ++h)
        for (int w = 0; w < W; ++w)
            for (int c = 0; c < C; ++c)
                out.values[(static_cast<std::size_t>(h) * W + w) * C + c] =
                    values[(static_cast<std::size_t>(c) * H + h) * W + w];
    return out;
}

Tensor stack_batch(const std::vector<const LabeledImage*>& batch, int H, int W) {
    const int B = static_cast<int>(batch.size());
    Tensor out = Tensor::zeros({B, 3, H, W});
    for (int i = 0; i < B; ++i) {
        const Tensor& img = batch[i]->pixels;
        double* dst = out.values.data() + static_cast<std::size_t>(i) * 3 * H * W;
        for (int h = 0; h < H; ++h)
            for (int w = 0; w < W; ++w)
                for (int c = 0; c < 3; ++c)
                    dst[(static_cast<std::size_t>(c) * H + h) * W + w] =
                        img.values[(static_cast<std::size_t>(h) * W + w) * 3 + c];
    }
    return out;
}

// Registers every parameter as a graph leaf; map order keeps this stable.
std::map<std::string, Tensor> leaf_parameters(Graph& g,
                                              const std::map<std::string, Tensor>& params) {
    std::map<std::string, Tensor> leaves;
    for (const auto& [name, tensor] : params) leaves[name] = g.leaf(tensor);
    return leaves;
}

Tensor build_logits(Graph& g, const ClassifierSpec& spec,
                    const std::map<std::string, Tensor>& leaves, const Tensor& input,
                    bool through_grey) {
    Tensor h = input;
    if (through_grey) h = g.forward(Op::ChannelMean, {h});
    // center the near-white documents; gradient is unaffected
    h = g.forward(Op::Add, {h, Tensor::full(h.shape, -0.5)});
    for (std::size_t i = 0; i < spec.blocks.size(); ++i) {
        const BlockSpec& blk = spec.blocks[i];
        const std::string base = "block" + std::to_string(i);
        const Tensor& w = leaves.at(base + ".conv.w");
        const Tensor& b = leaves.at(base + ".conv.b");
        OpAttrs attrs;
        attrs.stride = blk.stride;
        attrs.pad = 1;
        Tensor conv = g.forward(Op::Add, {g.forward(Op::Conv2d, {h, w}, attrs), b});
        if (blk.residual) conv = g.forward(Op::Add, {h, conv});
        h = g.forward(Op::Relu, {conv});
    }
    // 2x2 pooling keeps coarse layout; a global mean would erase the
    // positional structure that separates document templates
    OpAttrs pool;
    pool.window_h = std::min(2, h.shape[2]);
    pool.window_w = std::min(2, h.shape[3]);
    pool.stride = 2;
    h = g.forward(Op::AvgPool2d, {h}, pool);
    h = g.forward(Op::Flatten, {h});
    return g.forward(Op::Add, {g.forward(Op::Matmul, {h, leaves.at("fc.w")}), leaves.at("fc.b")});
}

std::vector<double> softmax(const std::vector<double>& logits) {
    double m = logits[0];
    for (double v : logits) m = std::max(m, v);
    double sum = 0.0;
    std::vector<double> out(logits.size());
    for (std::size_t i = 0; i < logits.size(); ++i) {
        out[i] = std::exp(logits[i] - m);
        sum += out[i];
    }
    for (double& v : out) v /= sum;
    return out;
}

void check_image_shape(const ClassifierSpec& spec, const Tensor& image, const char* who) {
    const Shape expected{spec.input_height, spec.input_width, 3};
    if (image.shape != expected)
        invalid(std::string(who) + ": image shape " + shape_str(image.shape) +
                " does not match model input " + shape_str(expected));
}

// per-image epsilon-ball projection + [0,1] clip on raw values
void project_values(double* x, const double* origin, int n, Norm norm, double eps) {
    if (norm == Norm::LInf) {
        for (int i = 0; i < n; ++i)
            x[i] = std::clamp(std::clamp(x[i], origin[i] - eps, origin[i] + eps), 0.0, 1.0);
    } else {
        double sq = 0.0;
        for (int i = 0; i < n; ++i) {
            const double d = x[i] - origin[i];
            sq += d * d;
        }
        const double norm2 = std::sqrt(sq);
        if (norm2 > eps) {
            const double scale = eps / norm2;
            for (int i = 0; i < n; ++i) x[i] = origin[i] + (x[i] - origin[i]) * scale;
        }
        for (int i = 0; i < n; ++i) x[i] = std::clamp(x[i], 0.0, 1.0);
    }
}

// Batched BIM against the current parameters; the adversarial-training inner
// loop. Per-image semantics match the attacks module's bim.
Tensor inloop_bim(const ClassifierSpec& spec, const std::map<std::string, Tensor>& params,
                  const Tensor& clean, const std::vector<int>& labels, const AttackConfig& cfg) {
    const int B = clean.shape[0];
    const int plane = clean.shape[1] * clean.shape[2] * clean.shape[3];
    const double eps = cfg.threat.epsilon;
    const double alpha = cfg.alpha();
    Tensor x = clean;
    x.node_id.reset();
    for (int step = 0; step < cfg.steps; ++step) {
        Graph g;
        Tensor xl = g.leaf(x);
        const auto leaves = leaf_parameters(g, params);
        OpAttrs ce;
        ce.labels = labels;
        Tensor loss =
            g.forward(Op::SoftmaxCrossEntropy, {build_logits(g, spec, leaves, xl, false)}, ce);
        const Tensor& grad = g.backward(*loss.node_id)[*xl.node_id];
        for (int i = 0; i < B; ++i) {
            double* xi = x.values.data() + static_cast<std::size_t>(i) * plane;
            const double* gi = grad.values.data() + static_cast<std::size_t>(i) * plane;
            const double* oi = clean.values.data() + static_cast<std::size_t>(i) * plane;
            if (cfg.threat.norm == Norm::LInf) {
                for (int k = 0; k < plane; ++k)
                    xi[k] += gi[k] > 0.0 ? alpha : (gi[k] < 0.0 ? -alpha : 0.0);
            } else {
                double sq = 0.0;
                for (int k = 0; k < plane; ++k) sq += gi[k] * gi[k];
                if (sq > 0.0) {
                    const double scale = alpha / std::sqrt(sq);
                    for (int k = 0; k < plane; ++k) xi[k] += gi[k] * scale;
                }
            }
            project_values(xi, oi, plane, cfg.threat.norm, eps);
        }
    }
    return x;
}

std::map<std::string, Tensor> init_parameters(const ClassifierSpec& spec) {
    Rng rng(derive_seed(spec.seed, "init"));
    std::map<std::string, Tensor> params;
    int ch = 3, h = spec.input_height, w = spec.input_width;
    for (std::size_t i = 0; i < spec.blocks.size(); ++i) {
        const BlockSpec& blk = spec.blocks[i];
        const std::string base = "block" + std::to_string(i);
        Tensor kernel = Tensor::zeros({blk.width, ch, 3, 3});
        // He fan-in; residual branches start near identity (no normalization layers)
        const double stddev = std::sqrt(2.0 / (ch * 9)) * (blk.residual ? 0.1 : 1.0);
        for (double& v : kernel.values) v = stddev * rng.normal();
        params[base + ".conv.w"] = std::move(kernel);
        params[base + ".conv.b"] = Tensor::zeros({blk.width});
        ch = blk.width;
        h = (h - 1) / blk.stride + 1;
        w = (w - 1) / blk.stride + 1;
    }
    const int ph = (h - std::min(2, h)) / 2 + 1;
    const int pw = (w - std::min(2, w)) / 2 + 1;
    params["fc.w"] = Tensor::zeros({ch * ph * pw, spec.num_classes});  // zero head: uniform start
    params["fc.b"] = Tensor::zeros({spec.num_classes});
    return params;
}

TrainedModel train_impl(const DatasetSplit& splits, const ClassifierSpec& spec,
                        const TrainConfig& config, TrainingMode mode) {
    spec.validate();
    config.validate();
    if (splits.train.empty() || splits.val.empty())
        invalid("train: train and val splits must be nonempty");
    for (const auto* part : {&splits.train, &splits.val, &splits.test})
        for (const auto& img : *part) {
            if (img.label < 0 || img.label >= spec.num_classes)
                invalid("train: label " + std::to_string(img.label) + " outside " +
                        std::to_string(spec.num_classes) + " classes (image " + img.id + ")");
            check_image_shape(spec, img.pixels, "train");
        }
    AttackConfig adv = config.adversarial_attack;
    if (mode == TrainingMode::Adversarial) {
        if (adv.method != AttackMethod::Bim)
            invalid("train_adversarial: the in-loop attack must be bim");
        adv.validate();
    }

    auto params = init_parameters(spec);
    std::vector<int> order(splits.train.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
    Rng shuffle_rng(derive_seed(config.seed, "shuffle"));

    double first_epoch_loss = 0.0, last_epoch_loss = 0.0;
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        const double lr = config.lr.initial * std::pow(config.lr.decay, epoch);
        shuffle(order, shuffle_rng);
        double loss_sum = 0.0;
        int batches = 0;
        for (std::size_t start = 0; start < order.size();
             start += static_cast<std::size_t>(config.batch_size)) {
            std::vector<const LabeledImage*> batch;
            std::vector<int> labels;
            const std::size_t end =
                std::min(order.size(), start + static_cast<std::size_t>(config.batch_size));
            for (std::size_t i = start; i < end; ++i) {
                batch.push_back(&splits.train[order[i]]);
                labels.push_back(splits.train[order[i]].label);
            }
            const Tensor clean = stack_batch(batch, spec.input_height, spec.input_width);

            Graph g;
            Tensor x = g.leaf(clean);
            const auto leaves = leaf_parameters(g, params);
            OpAttrs ce;
            ce.labels = labels;
            Tensor loss =
                g.forward(Op::SoftmaxCrossEntropy, {build_logits(g, spec, leaves, x, false)}, ce);
            if (mode == TrainingMode::Adversarial) {
                const Tensor advx = g.leaf(inloop_bim(spec, params, clean, labels, adv));
                Tensor adv_loss = g.forward(
                    Op::SoftmaxCrossEntropy, {build_logits(g, spec, leaves, advx, false)}, ce);
                loss =
                    g.forward(Op::Mul, {g.forward(Op::Add, {loss, adv_loss}), Tensor({1}, {0.5})});
            }
            const double loss_value = loss.values[0];
            if (!std::isfinite(loss_value) || loss_value > 1e12)
                runtime("training diverged (epoch " + std::to_string(epoch) + " loss " +
                        std::to_string(loss_value) + "); lower the learning rate");
            loss_sum += loss_value;
            ++batches;

            const auto& grads = g.backward(*loss.node_id);
            for (auto& [name, tensor] : params) {
                const Tensor& grad = grads[*leaves.at(name).node_id];
                for (int k = 0; k < tensor.size(); ++k) tensor.values[k] -= lr * grad.values[k];
            }
        }
        const double epoch_loss = loss_sum / batches;
        if (epoch == 0) first_epoch_loss = epoch_loss;
        last_epoch_loss = epoch_loss;
    }
    if (config.epochs >= 2 && last_epoch_loss >= first_epoch_loss)
        runtime("training made no progress (first epoch loss " + std::to_string(first_epoch_loss) +
                ", final " + std::to_string(last_epoch_loss) + "); lower the learning rate");

    TrainedModel model;
    model.spec = spec;
    model.parameters = std::move(params);
    model.training_mode = mode;
    model.clean_accuracy = splits.test.empty() ? 0.0 : clean_accuracy_on(model, splits.test);
    return model;
}

void put_u64_le(std::string& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint64_t get_u64_le(const unsigned char* p) {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
    return v;
}

}  // namespace

void ClassifierSpec::validate() const {
    if (num_classes < 2) invalid("classifier: need at least 2 classes");
    if (input_height < 16 || input_width < 16)
        invalid("classifier: input " + std::to_string(input_height) + "x" +
                std::to_string(input_width) + " below the 16x16 minimum");
    if (blocks.empty()) invalid("classifier: block list is empty");
    int ch = 3, h = input_height, w = input_width;
    for (std::size_t i = 0; i < blocks.size(); ++i) {
        const BlockSpec& blk = blocks[i];
        if (blk.width < 1) invalid("classifier: block " + std::to_string(i) + " width < 1");
        if (blk.stride < 1) invalid("classifier: block " + std::to_string(i) + " stride < 1");
        if (blk.residual) {
            if (blk.stride != 1)
                invalid("classifier: residual block " + std::to_string(i) + " must have stride 1");
            if (blk.width != ch)
                invalid("classifier: residual block " + std::to_string(i) + " width " +
                        std::to_string(blk.width) + " != input channels " + std::to_string(ch));
        }
        h = (h - 1) / blk.stride + 1;
        w = (w - 1) / blk.stride + 1;
        if (h < 1 || w < 1)
            invalid("classifier: feature map vanishes at block " + std::to_string(i));
        ch = blk.width;
    }
}

ClassifierSpec mini_convnet_spec(int height, int width, int num_classes, std::uint64_t seed) {
    ClassifierSpec spec;
    spec.preset = "mini-convnet";
    spec.input_height = height;
    spec.input_width = width;
    spec.num_classes = num_classes;
    spec.seed = seed;
    spec.blocks = {{8, 2, false}, {16, 2, false}, {32, 2, false}};
    return spec;
}

ClassifierSpec mini_resnet_spec(int height, int width, int num_classes, std::uint64_t seed) {
    ClassifierSpec spec = mini_convnet_spec(height, width, num_classes, seed);
    spec.preset = "mini-resnet";
    spec.blocks = {{8, 2, false},  {8, 1, true},   {16, 2, false},
                   {16, 1, true},  {32, 2, false}, {32, 1, true}};
    return spec;
}

ClassifierSpec make_classifier_spec(const std::string& preset, int height, int width,
                                    int num_classes, std::uint64_t seed) {
    if (preset == "mini-convnet") return mini_convnet_spec(height, width, num_classes, seed);
    if (preset == "mini-resnet") return mini_resnet_spec(height, width, num_classes, seed);
    invalid("unknown classifier preset '" + preset + "' (expected mini-convnet or mini-resnet)");
}

const char* training_mode_name(TrainingMode mode) {
    return mode == TrainingMode::Natural ? "natural" : "adversarial";
}

void TrainConfig::validate() const {
    if (epochs < 1) invalid("train: epochs must be >= 1");
    if (batch_size < 1) invalid("train: batch_size must be >= 1");
    if (lr.initial <= 0.0) invalid("train: learning rate must be positive");
    if (lr.decay <= 0.0) invalid("train: learning rate decay must be positive");
}

TrainedModel make_untrained(const ClassifierSpec& spec) {
    spec.validate();
    TrainedModel model;
    model.spec = spec;
    model.parameters = init_parameters(spec);
    return model;
}

std::vector<double> predict(const TrainedModel& model, const Tensor& image) {
    check_image_shape(model.spec, image, "predict");
    const Tensor defended = apply_pipeline(model.defense, image);
    Graph g;
    Tensor x = g.leaf(hwc_to_nchw(defended));
    const auto leaves = leaf_parameters(g, model.parameters);
    const Tensor logits = build_logits(g, model.spec, leaves, x, false);
    return softmax(logits.values);
}

int argmax_lowest(const std::vector<double>& values) {
    int best = 0;
    for (int i = 1; i < static_cast<int>(values.size()); ++i)
        if (values[i] > values[best]) best = i;
    return best;
}

int classify(const TrainedModel& model, const Tensor& image) {
    return argmax_lowest(predict(model, image));
}

TrainedModel train_natural(const DatasetSplit& splits, const ClassifierSpec& spec,
                           const TrainConfig& config) {
    return train_impl(splits, spec, config, TrainingMode::Natural);
}

TrainedModel train_adversarial(const DatasetSplit& splits, const ClassifierSpec& spec,
                               const TrainConfig& config) {
    return train_impl(splits, spec, config, TrainingMode::Adversarial);
}

TrainedModel with_defense(TrainedModel model, DefensePipeline pipeline) {
    model.defense = std::move(pipeline);
    return model;
}

double clean_accuracy_on(const TrainedModel& model, const std::vector<LabeledImage>& images) {
    if (images.empty()) invalid("clean_accuracy_on: no images");
    int correct = 0;
    for (const auto& img : images)
        if (classify(model, img.pixels) == img.label) ++correct;
    return static_cast<double>(correct) / images.size();
}

namespace {

// White-box adversary view of a trained model.
class ModelTarget final : public AttackTarget {
  public:
    explicit ModelTarget(const TrainedModel& model) : model_(model) {}

    Shape input_shape() const override {
        return {model_.spec.input_height, model_.spec.input_width, 3};
    }
    int num_classes() const override { return model_.spec.num_classes; }

    std::vector<double> predict(const Tensor& image) const override {
        return docadv::predict(model_, image);
    }

    LossGrad loss_and_gradient(const Tensor& image, int label) const override {
        check_image_shape(model_.spec, image, "loss_and_gradient");
        Graph g;
        Tensor x = g.leaf(hwc_to_nchw(image));
        const auto leaves = leaf_parameters(g, model_.parameters);
        const Tensor logits = build_logits(g, model_.spec, leaves, x, model_.defense.has_grey());
        OpAttrs ce;
        ce.labels = {label};
        const Tensor loss = g.forward(Op::SoftmaxCrossEntropy, {logits}, ce);
        const Tensor& grad = g.backward(*loss.node_id)[*x.node_id];
        LossGrad out;
        out.loss = loss.values[0];
        out.gradient =
            nchw_to_hwc(grad.values.data(), 3, model_.spec.input_height, model_.spec.input_width);
        return out;
    }

  private:
    const TrainedModel& model_;
};

}  // namespace

std::unique_ptr<AttackTarget> make_attack_target(const TrainedModel& model) {
    return std::make_unique<ModelTarget>(model);
}

void save_checkpoint(const TrainedModel& model, const std::filesystem::path& path) {
    std::string out;
    out += "DOCADV1\n";
    out += "format 1\n";
    out += "preset " + model.spec.preset + "\n";
    out += "input_height " + std::to_string(model.spec.input_height) + "\n";
    out += "input_width " + std::to_string(model.spec.input_width) + "\n";
    out += "num_classes " + std::to_string(model.spec.num_classes) + "\n";
    out += "blocks ";
    for (std::size_t i = 0; i < model.spec.blocks.size(); ++i) {
        const BlockSpec& b = model.spec.blocks[i];
        if (i) out += ",";
        out += std::to_string(b.width) + ":" + std::to_string(b.stride) + ":" +
               (b.residual ? "1" : "0");
    }
    out += "\n";
    out += "model_seed " + std::to_string(model.spec.seed) + "\n";
    out += std::string("training_mode ") + training_mode_name(model.training_mode) + "\n";
    char acc[64];
    std::snprintf(acc, sizeof acc, "%a", model.clean_accuracy);
    out += std::string("clean_accuracy ") + acc + "\n";
    out += "defense " + model.defense.describe() + "\n";
    out += "tensors " + std::to_string(model.parameters.size()) + "\n";
    out += "end_header\n";
    for (const auto& [name, tensor] : model.parameters) {
        out += "tensor " + name + " " + std::to_string(tensor.shape.size());
        for (int d : tensor.shape) out += " " + std::to_string(d);
        out += "\n";
        for (double v : tensor.values) put_u64_le(out, std::bit_cast<std::uint64_t>(v));
    }
    std::ofstream f(path, std::ios::binary);
    if (!f) runtime("save_checkpoint: cannot write " + path.string());
    f.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!f) runtime("save_checkpoint: short write to " + path.string());
}

TrainedModel load_checkpoint(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) runtime("load_checkpoint: cannot open " + path.string());
    std::string bytes(std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>{});

    std::size_t pos = 0;
    auto next_line = [&]() -> std::string {
        const std::size_t nl = bytes.find('\n', pos);
        if (nl == std::string::npos)
            runtime("load_checkpoint: truncated header in " + path.string());
        std::string line = bytes.substr(pos, nl - pos);
        pos = nl + 1;
        return line;
    };

    if (next_line() != "DOCADV1")
        runtime("load_checkpoint: " + path.string() + " is not a DOCADV1 checkpoint");

    TrainedModel model;
    int tensor_count = -1;
    for (std::string line = next_line(); line != "end_header"; line = next_line()) {
        const std::size_t sp = line.find(' ');
        if (sp == std::string::npos)
            runtime("load_checkpoint: malformed header line '" + line + "'");
        const std::string key = line.substr(0, sp), value = line.substr(sp + 1);
        if (key == "format") {
            if (value != "1") runtime("load_checkpoint: unsupported format " + value);
        } else if (key == "preset") {
            model.spec.preset = value;
        } else if (key == "input_height") {
            model.spec.input_height = std::stoi(value);
        } else if (key == "input_width") {
            model.spec.input_width = std::stoi(value);
        } else if (key == "num_classes") {
            model.spec.num_classes = std::stoi(value);
        } else if (key == "blocks") {
            std::stringstream ss(value);
            std::string tok;
            while (std::getline(ss, tok, ',')) {
                BlockSpec b;
                int residual = 0;
                if (std::sscanf(tok.c_str(), "%d:%d:%d", &b.width, &b.stride, &residual) != 3)
                    runtime("load_checkpoint: malformed block '" + tok + "'");
                b.residual = residual != 0;
                model.spec.blocks.push_back(b);
            }
        } else if (key == "model_seed") {
            model.spec.seed = std::stoull(value);
        } else if (key == "training_mode") {
            model.training_mode =
                value == "adversarial" ? TrainingMode::Adversarial : TrainingMode::Natural;
        } else if (key == "clean_accuracy") {
            model.clean_accuracy = std::strtod(value.c_str(), nullptr);
        } else if (key == "defense") {
            model.defense = DefensePipeline::parse(value);
        } else if (key == "tensors") {
            tensor_count = std::stoi(value);
        } else {
            runtime("load_checkpoint: unknown header key '" + key + "'");
        }
    }
    if (tensor_count < 0) runtime("load_checkpoint: missing tensor count");

    for (int t = 0; t < tensor_count; ++t) {
        std::stringstream ss(next_line());
        std::string tag, name;
        int rank = 0;
        ss >> tag >> name >> rank;
        if (tag != "tensor" || !ss) runtime("load_checkpoint: malformed tensor header");
        Shape shape(rank);
        for (int i = 0; i < rank; ++i) ss >> shape[i];
        const int count = numel(shape);
        if (pos + static_cast<std::size_t>(count) * 8 > bytes.size())
            runtime("load_checkpoint: truncated tensor data for " + name);
        std::vector<double> values(count);
        for (int i = 0; i < count; ++i)
            values[i] = std::bit_cast<double>(
                get_u64_le(reinterpret_cast<const unsigned char*>(bytes.data() + pos) + i * 8));
        pos += static_cast<std::size_t>(count) * 8;
        model.parameters[name] = Tensor(shape, std::move(values));
    }
    model.spec.validate();
    return model;
}

}  // namespace docadv
