#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fairtab/dataset.hpp"
#include "fairtab/fair_metric.hpp"
#include "fairtab/models.hpp"

namespace fairtab {

// Row-sparse squared fair distances: for each row, its candidate columns in
// ascending order. The row itself (distance 0) must be present.
struct SparseRow {
    std::vector<std::size_t> cols;
    std::vector<double> d2;
};
using SparseD2 = std::vector<SparseRow>;

// Entry masses are stored as fractions of the row's 1/n budget, so a pure
// row is exactly {col, 1.0} and the transport value is frac / n.
struct PlanEntry {
    std::size_t col = 0;
    double frac = 0.0;
};

struct TransportPlan {
    std::vector<std::vector<PlanEntry>> rows;
    double budget = 0.0;
    double lambda_star = 0.0;
    double moved_mass_fraction = 0.0;  // off-diagonal transport mass
    double objective = 0.0;            // sum pi_ij * loss_j
    double cost = 0.0;                 // sum pi_ij * d2_ij
};

// max_pi sum pi_ij loss_j subject to row sums 1/n, sum pi_ij d2_ij <= eps_lp,
// pi >= 0. Solved by bisecting the multiplier lambda: each row puts its mass
// on argmax_j loss_j - lambda * d2_ij (ties -> lowest index); at the budget
// crossing, rows are split between their bracketing columns so the cost meets
// eps_lp exactly.
TransportPlan solve_adversary_lp(const std::vector<double>& losses, const SparseD2& d2,
                                 double eps_lp);

struct IfgbConfig {
    double eps_lp = 0.1;
    std::size_t candidate_cap = 50;  // nearest candidates kept per row
    TrainConfig train;
};

// Per round: logistic losses from the current margins -> transport LP ->
// per-sample weights w_j = n * sum_i pi_ij -> next tree fitted against the
// reweighted gradients. One JSON line per round is appended to round_log:
// {round, mean_loss, adv_objective, lambda_star, moved_mass_fraction}.
BoostedEnsemble train_ifgb(const TabularDataset& ds, const FairMetric& m,
                           const IfgbConfig& cfg,
                           std::vector<std::string>* round_log = nullptr);

// The pairwise candidate table train_ifgb uses (exposed for tests/audits).
SparseD2 nearest_candidates(const FairMetric& m, const Matrix& features,
                            std::size_t candidate_cap);

}  // namespace fairtab
