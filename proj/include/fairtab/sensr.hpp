#pragma once

#include <string>
#include <vector>

#include "fairtab/dataset.hpp"
#include "fairtab/fair_metric.hpp"
#include "fairtab/models.hpp"

namespace fairtab {

// Adversarial training of the smooth classifier against fair-metric attacks.
// The adversary maximizes loss(h(x + delta), y) - lambda * d(x, x + delta)^2,
// so motion inside the sensitive subspace is free and everything else is
// penalized. Ascent takes fixed-length steepest steps (step_size along the
// normalized objective gradient) so saturated losses still get attacked, and
// a +-6 box on each coordinate stops runaway iterates.
struct SensrConfig {
    int steps = 10;
    double step_size = 0.1;
    double lambda = 1.0;
    double eps_train = 0.1;  // target mean perturbation distance for auto-tune
    bool auto_tune = true;
    TrainConfig train;
};

struct PerturbReport {
    double objective = 0.0;  // best objective reached (includes the start)
    double dist2 = 0.0;      // fair distance^2 at the returned iterate
    bool non_finite = false; // ascent hit a non-finite objective and stopped
};

// Best iterate of `steps` gradient-ascent steps; never worse than x itself.
std::vector<double> worst_case_perturb(const SmoothClassifier& model, const FairMetric& m,
                                       const double* x, int y, const SensrConfig& cfg,
                                       PerturbReport* report = nullptr);

// Minimizes adversarial loss over mini-batches. With auto_tune, lambda is
// scaled multiplicatively after each epoch so the mean perturbation distance
// tracks eps_train within +-20%. One JSON line per epoch is appended to
// epoch_log when provided: {epoch, clean_loss, adv_loss, mean_perturb_dist,
// lambda}. Aborts when the adversarial loss exceeds 1000x its first-epoch
// value.
SmoothClassifier train_sensr(const TabularDataset& ds, const FairMetric& m,
                             const SensrConfig& cfg,
                             std::vector<std::string>* epoch_log = nullptr);

}  // namespace fairtab
