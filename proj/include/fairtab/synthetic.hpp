#pragma once

#include <cstdint>

#include "fairtab/dataset.hpp"

namespace fairtab {

// Credit-scoring-shaped benchmark data with a planted individual-fairness
// trap: core features are independent of gender, but `spur` sits at
// +-spur_strength around gender and the label logit carries a direct
// label_bias * gender term, so an unconstrained model picks up gender
// through spur while a model that ignores the sensitive subspace loses only
// the label_bias term.
struct SyntheticSpec {
    std::size_t rows = 5000;
    std::uint64_t seed = 0;
    double spur_strength = 1.0;  // gender offset of the spurious feature
    double spur_noise = 0.25;    // residual sd of the spurious feature
    double label_bias = 0.55;    // direct gender term in the label logit
};

// Numeric features income, debt_ratio, history_len, num_accounts,
// utilization, age, spur; categorical housing; sensitive column gender
// (Female/Male); binary label approve. Deterministic in spec.seed.
TabularDataset synthetic_credit(const SyntheticSpec& spec);

}  // namespace fairtab
