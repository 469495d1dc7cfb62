// Untargeted adversarial example generation under L-infinity and L2 budgets:
// FGM, BIM, MIM (gradient-based), SPSA (score-based), and transfer replay.
#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "docadv/data.hpp"
#include "docadv/rng.hpp"
#include "docadv/tensor.hpp"

namespace docadv {

struct TrainedModel;

enum class Norm { L2, LInf };
const char* norm_name(Norm norm);  // "l2" / "linf"

struct ThreatSpec {
    Norm norm = Norm::LInf;
    double epsilon = 0.02;  // budget in [0,1] pixel units
    int strength = 20;      // max queries: gradient queries for white-box methods,
                            // iterations for spsa (each makes 2*spsa_batch forward queries)
};

enum class AttackMethod { Fgm, Bim, Mim, Spsa };
const char* method_name(AttackMethod method);

struct AttackConfig {
    AttackMethod method = AttackMethod::Bim;
    ThreatSpec threat;
    int steps = 20;               // T; ignored by fgm
    double step_size = 0.0;       // alpha; 0 selects the 2*eps/T default
    double momentum_decay = 1.0;  // mu; mim only
    int spsa_batch = 10;          // q: directions per iteration
    double spsa_delta = 0.01;     // probe radius in pixel units
    std::uint64_t seed = 0;

    double alpha() const;
    long spsa_forward_budget() const { return 2L * spsa_batch * threat.strength; }
    void validate() const;
};

enum class AttackOutcome { Ok, ZeroGradient, BudgetExhausted };
const char* outcome_name(AttackOutcome outcome);

struct AttackResult {
    Tensor image;
    long queries = 0;  // gradient queries (white-box) or forward queries (spsa)
    AttackOutcome outcome = AttackOutcome::Ok;
};

// The two faces a classifier shows an adversary. Gradient methods see
// loss_and_gradient (through the differentiable defense stages only);
// score-based methods see predict, which runs the full defense pipeline.
class AttackTarget {
  public:
    virtual ~AttackTarget() = default;
    virtual Shape input_shape() const = 0;  // (H,W,3)
    virtual int num_classes() const = 0;
    virtual std::vector<double> predict(const Tensor& image) const = 0;

    struct LossGrad {
        double loss = 0.0;
        Tensor gradient;  // dloss/dimage, image-shaped
    };
    virtual LossGrad loss_and_gradient(const Tensor& image, int label) const = 0;
};

// Nearest point of the epsilon-ball around origin, then clipped to [0,1]:
// per-entry clamp for LInf, radial rescale for L2.
Tensor project_ball(const Tensor& candidate, const Tensor& origin, const ThreatSpec& threat);

double achieved_norm(const Tensor& adversarial, const Tensor& original, Norm norm);

// cross-entropy computed from a prediction array (the score-based loss)
double prediction_loss(const std::vector<double>& probs, int label);

// One SPSA gradient estimate: q Rademacher directions v_i, probes at
// x +- delta*v_i (clipped to [0,1]), mean of the paired-difference terms.
// Consumes 2q forward queries. Unbiased for linear losses.
Tensor spsa_gradient_estimate(const AttackTarget& target, const Tensor& image, int label,
                              int batch, double delta, Rng& rng);

AttackResult fgm(const AttackTarget& target, const Tensor& image, int label,
                 const AttackConfig& config);
AttackResult bim(const AttackTarget& target, const Tensor& image, int label,
                 const AttackConfig& config);
AttackResult mim(const AttackTarget& target, const Tensor& image, int label,
                 const AttackConfig& config);
AttackResult spsa(const AttackTarget& target, const Tensor& image, int label,
                  const AttackConfig& config);

AttackResult run_attack(const AttackTarget& target, const Tensor& image, int label,
                        const AttackConfig& config);

struct TransferOutcome {
    std::vector<AttackResult> crafted;     // examples generated against the substitute
    std::vector<int> target_predictions;   // one target query per example
};

// Examples are crafted on `substitute` only; `target` is queried once per
// example. Restricted to the transfer setting: fgm or mim under LInf.
TransferOutcome transfer_attack(const TrainedModel& substitute, const TrainedModel& target,
                                const std::vector<LabeledImage>& examples,
                                const AttackConfig& config, int workers = 1);

}  // namespace docadv
