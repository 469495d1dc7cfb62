#include "docadv/attack.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "docadv/model.hpp"
#include "docadv/parallel.hpp"
#include "docadv/rng.hpp"

namespace docadv {

namespace {

[[noreturn]] void invalid(const std::string& msg) { throw std::invalid_argument(msg); }

double sign(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

bool any_nonzero(const Tensor& t) {
    for (double v : t.values)
        if (v != 0.0) return true;
    return false;
}

double l1_norm(const Tensor& t) {
    double acc = 0.0;
    for (double v : t.values) acc += std::abs(v);
    return acc;
}

double l2_norm(const Tensor& t) {
    double acc = 0.0;
    for (double v : t.values) acc += v * v;
    return std::sqrt(acc);
}

void check_same_shape(const Tensor& a, const Tensor& b, const char* who) {
    if (a.shape != b.shape)
        invalid(std::string(who) + ": shapes " + shape_str(a.shape) + " and " +
                shape_str(b.shape) + " differ");
}

}  // namespace

const char* norm_name(Norm norm) { return norm == Norm::L2 ? "l2" : "linf"; }

const char* method_name(AttackMethod method) {
    switch (method) {
        case AttackMethod::Fgm: return "fgm";
        case AttackMethod::Bim: return "bim";
        case AttackMethod::Mim: return "mim";
        case AttackMethod::Spsa: return "spsa";
    }
    return "?";
}

const char* outcome_name(AttackOutcome outcome) {
    switch (outcome) {
        case AttackOutcome::Ok: return "ok";
        case AttackOutcome::ZeroGradient: return "zero-gradient";
        case AttackOutcome::BudgetExhausted: return "budget-exhausted";
    }
    return "?";
}

double AttackConfig::alpha() const {
    if (step_size > 0.0) return step_size;
    return 2.0 * threat.epsilon / std::max(1, steps);
}

void AttackConfig::validate() const {
    if (threat.epsilon < 0.0) invalid("attack: epsilon must be >= 0");
    if (threat.strength < 1) invalid("attack: strength must be >= 1");
    if (step_size < 0.0) invalid("attack: step size must be >= 0 (0 selects the default)");
    if (method != AttackMethod::Fgm) {
        if (steps < 1) invalid("attack: steps must be >= 1");
        if (threat.epsilon > 0.0 && alpha() <= 0.0) invalid("attack: step size must be positive");
    }
    // Each bim/mim step spends one gradient query, so oversized configs are
    // rejected up front. An spsa run stops mid-flight with a budget flag
    // instead, since its budget is counted in forward queries.
    if ((method == AttackMethod::Bim || method == AttackMethod::Mim) && steps > threat.strength)
        invalid("attack: " + std::to_string(steps) + " steps exceed the query budget (" +
                std::to_string(threat.strength) + ")");
    if (method == AttackMethod::Mim && momentum_decay < 0.0)
        invalid("attack: momentum decay must be >= 0");
    if (method == AttackMethod::Spsa) {
        if (spsa_batch < 1) invalid("attack: spsa batch must be >= 1");
        if (spsa_delta <= 0.0) invalid("attack: spsa delta must be positive");
        if (threat.norm != Norm::LInf) invalid("attack: spsa supports the linf norm only");
    }
}

Tensor project_ball(const Tensor& candidate, const Tensor& origin, const ThreatSpec& threat) {
    check_same_shape(candidate, origin, "project_ball");
    Tensor out = candidate;
    out.node_id.reset();
    const double eps = threat.epsilon;
    if (threat.norm == Norm::LInf) {
        for (int i = 0; i < out.size(); ++i) {
            const double o = origin.values[i];
            out.values[i] = std::clamp(std::clamp(out.values[i], o - eps, o + eps), 0.0, 1.0);
        }
    } else {
        double sq = 0.0;
        for (int i = 0; i < out.size(); ++i) {
            const double d = out.values[i] - origin.values[i];
            sq += d * d;
        }
        const double norm2 = std::sqrt(sq);
        if (norm2 > eps) {
            const double scale = eps / norm2;
            for (int i = 0; i < out.size(); ++i)
                out.values[i] = origin.values[i] + (out.values[i] - origin.values[i]) * scale;
        }
        for (double& v : out.values) v = std::clamp(v, 0.0, 1.0);
    }
    return out;
}

double achieved_norm(const Tensor& adversarial, const Tensor& original, Norm norm) {
    check_same_shape(adversarial, original, "achieved_norm");
    double acc = 0.0;
    for (int i = 0; i < adversarial.size(); ++i) {
        const double d = adversarial.values[i] - original.values[i];
        if (norm == Norm::LInf) acc = std::max(acc, std::abs(d));
        else acc += d * d;
    }
    return norm == Norm::LInf ? acc : std::sqrt(acc);
}

double prediction_loss(const std::vector<double>& probs, int label) {
    const double p = std::max(probs.at(label), 1e-12);
    return -std::log(p);
}

AttackResult fgm(const AttackTarget& target, const Tensor& image, int label,
                 const AttackConfig& config) {
    config.validate();
    const auto lg = target.loss_and_gradient(image, label);
    AttackResult result;
    result.queries = 1;
    if (!any_nonzero(lg.gradient)) {
        result.image = image;
        result.outcome = AttackOutcome::ZeroGradient;
        return result;
    }
    Tensor candidate = image;
    const double eps = config.threat.epsilon;
    if (config.threat.norm == Norm::LInf) {
        for (int i = 0; i < candidate.size(); ++i)
            candidate.values[i] += eps * sign(lg.gradient.values[i]);
    } else {
        const double scale = eps / l2_norm(lg.gradient);
        for (int i = 0; i < candidate.size(); ++i)
            candidate.values[i] += scale * lg.gradient.values[i];
    }
    result.image = project_ball(candidate, image, config.threat);
    return result;
}

AttackResult bim(const AttackTarget& target, const Tensor& image, int label,
                 const AttackConfig& config) {
    config.validate();
    const double alpha = config.alpha();
    Tensor x = image;
    x.node_id.reset();
    bool saw_gradient = false;
    AttackResult result;
    for (int step = 0; step < config.steps; ++step) {
        const auto lg = target.loss_and_gradient(x, label);
        ++result.queries;
        if (any_nonzero(lg.gradient)) {
            saw_gradient = true;
            if (config.threat.norm == Norm::LInf) {
                for (int i = 0; i < x.size(); ++i)
                    x.values[i] += alpha * sign(lg.gradient.values[i]);
            } else {
                const double scale = alpha / l2_norm(lg.gradient);
                for (int i = 0; i < x.size(); ++i) x.values[i] += scale * lg.gradient.values[i];
            }
        }
        x = project_ball(x, image, config.threat);
    }
    if (!saw_gradient) {
        result.image = image;
        result.outcome = AttackOutcome::ZeroGradient;
        return result;
    }
    result.image = std::move(x);
    return result;
}

AttackResult mim(const AttackTarget& target, const Tensor& image, int label,
                 const AttackConfig& config) {
    config.validate();
    const double alpha = config.alpha();
    const double mu = config.momentum_decay;
    Tensor x = image;
    x.node_id.reset();
    Tensor momentum = Tensor::zeros(image.shape);
    bool moved = false;
    AttackResult result;
    for (int step = 0; step < config.steps; ++step) {
        const auto lg = target.loss_and_gradient(x, label);
        ++result.queries;
        const double l1 = l1_norm(lg.gradient);
        for (int i = 0; i < momentum.size(); ++i) {
            momentum.values[i] *= mu;
            if (l1 > 0.0) momentum.values[i] += lg.gradient.values[i] / l1;
        }
        if (any_nonzero(momentum)) {
            moved = true;
            if (config.threat.norm == Norm::LInf) {
                for (int i = 0; i < x.size(); ++i)
                    x.values[i] += alpha * sign(momentum.values[i]);
            } else {
                const double scale = alpha / l2_norm(momentum);
                for (int i = 0; i < x.size(); ++i) x.values[i] += scale * momentum.values[i];
            }
        }
        x = project_ball(x, image, config.threat);
    }
    if (!moved) {
        result.image = image;
        result.outcome = AttackOutcome::ZeroGradient;
        return result;
    }
    result.image = std::move(x);
    return result;
}

Tensor spsa_gradient_estimate(const AttackTarget& target, const Tensor& image, int label,
                              int batch, double delta, Rng& rng) {
    Tensor estimate = Tensor::zeros(image.shape);
    Tensor direction = Tensor::zeros(image.shape);
    Tensor probe = Tensor::zeros(image.shape);
    for (int i = 0; i < batch; ++i) {
        for (double& v : direction.values) v = rng.rademacher();
        for (int k = 0; k < probe.size(); ++k)
            probe.values[k] = std::clamp(image.values[k] + delta * direction.values[k], 0.0, 1.0);
        const double loss_plus = prediction_loss(target.predict(probe), label);
        for (int k = 0; k < probe.size(); ++k)
            probe.values[k] = std::clamp(image.values[k] - delta * direction.values[k], 0.0, 1.0);
        const double loss_minus = prediction_loss(target.predict(probe), label);
        const double scale = (loss_plus - loss_minus) / (2.0 * delta * batch);
        for (int k = 0; k < estimate.size(); ++k) estimate.values[k] += scale * direction.values[k];
    }
    return estimate;
}

AttackResult spsa(const AttackTarget& target, const Tensor& image, int label,
                  const AttackConfig& config) {
    config.validate();
    const double alpha = config.alpha();
    const long budget = config.spsa_forward_budget();
    Rng rng(config.seed);

    Tensor x = image;
    x.node_id.reset();
    AttackResult result;
    for (int step = 0; step < config.steps; ++step) {
        if (result.queries + 2L * config.spsa_batch > budget) {
            result.outcome = AttackOutcome::BudgetExhausted;
            break;
        }
        const Tensor estimate =
            spsa_gradient_estimate(target, x, label, config.spsa_batch, config.spsa_delta, rng);
        result.queries += 2L * config.spsa_batch;
        for (int k = 0; k < x.size(); ++k) x.values[k] += alpha * sign(estimate.values[k]);
        x = project_ball(x, image, config.threat);
    }
    result.image = std::move(x);
    return result;
}

AttackResult run_attack(const AttackTarget& target, const Tensor& image, int label,
                        const AttackConfig& config) {
    switch (config.method) {
        case AttackMethod::Fgm: return fgm(target, image, label, config);
        case AttackMethod::Bim: return bim(target, image, label, config);
        case AttackMethod::Mim: return mim(target, image, label, config);
        case AttackMethod::Spsa: return spsa(target, image, label, config);
    }
    invalid("run_attack: unknown method");
}

TransferOutcome transfer_attack(const TrainedModel& substitute, const TrainedModel& target,
                                const std::vector<LabeledImage>& examples,
                                const AttackConfig& config, int workers) {
    if (config.method != AttackMethod::Fgm && config.method != AttackMethod::Mim)
        invalid("transfer_attack: transfer setting uses fgm or mim");
    if (config.threat.norm != Norm::LInf)
        invalid("transfer_attack: transfer setting uses the linf norm");
    if (substitute.spec.input_height != target.spec.input_height ||
        substitute.spec.input_width != target.spec.input_width)
        invalid("transfer_attack: substitute input " +
                std::to_string(substitute.spec.input_height) + "x" +
                std::to_string(substitute.spec.input_width) + " does not match target " +
                std::to_string(target.spec.input_height) + "x" +
                std::to_string(target.spec.input_width));

    const auto substitute_view = make_attack_target(substitute);
    TransferOutcome out;
    out.crafted.resize(examples.size());
    out.target_predictions.resize(examples.size());
    parallel_for(static_cast<int>(examples.size()), workers, [&](int i) {
        AttackConfig per_image = config;
        per_image.seed = derive_seed(config.seed, static_cast<std::uint64_t>(i));
        out.crafted[i] =
            run_attack(*substitute_view, examples[i].pixels, examples[i].label, per_image);
        out.target_predictions[i] = classify(target, out.crafted[i].image);  // one query
    });
    return out;
}

}  // namespace docadv
