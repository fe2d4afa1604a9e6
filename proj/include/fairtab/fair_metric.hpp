#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fairtab/dataset.hpp"
#include "fairtab/matrix.hpp"

namespace fairtab {

// Fair distance d(x, x') = sqrt((x-x')^T (I - P) (x-x')) where P projects
// onto the sensitive subspace. Immutable after fit; distances are pure.
struct FairMetric {
    Matrix basis;      // k x d, orthonormal rows spanning the sensitive subspace
    Matrix projector;  // d x d, basis^T basis (cached at construction)
    std::vector<std::string> feature_names;
    double epsilon_default = 0.0;

    std::size_t dim() const { return basis.cols; }
    std::size_t k() const { return basis.rows; }
};

FairMetric make_fair_metric(Matrix basis, std::vector<std::string> feature_names,
                            double epsilon_default);

struct SubspaceFitReport {
    double holdout_accuracy = 0.0;  // direction classifier on a held-out fold
    std::size_t subspace_dim = 0;
    int iterations = 0;
    bool converged = true;  // false = best iterate returned with warning
};

struct MetricOptions {
    int k_extra = 0;          // extra between-group mean directions
    double l2 = 1e-2;         // ridge on the direction classifier
    std::uint64_t seed = 0;
    std::size_t pair_budget = 2000000;  // pairs sampled for epsilon_default
    double drop_tol = 1e-8;   // relative tolerance for dropping directions
    int max_iter = 100;
};

struct MetricFitResult {
    FairMetric metric;
    SubspaceFitReport report;
};

// Step one. Fits one-vs-rest logistic directions for each non-reference
// sensitive category (reference = lexicographically first), optionally adds
// the top k_extra principal directions of the between-group mean scatter,
// and orthonormalizes. epsilon_default is set to the 5th percentile of
// pairwise fair distances on this split.
MetricFitResult learn_sensitive_subspace(const TabularDataset& metric_split,
                                         const MetricOptions& opts = {});

double fair_distance_squared(const FairMetric& m, const double* x, const double* y,
                             std::size_t n);
double fair_distance(const FairMetric& m, const double* x, const double* y,
                     std::size_t n);

// Rows projected onto the basis (n x k); lets pairwise loops compute
// d^2(i,j) = ||x_i - x_j||^2 - ||z_i - z_j||^2 without touching P.
Matrix project_rows(const FairMetric& m, const Matrix& x);

std::string metric_to_json(const FairMetric& m);
FairMetric metric_from_json(const std::string& text);
void save_metric(const FairMetric& m, const std::string& path);
FairMetric load_metric(const std::string& path);

}  // namespace fairtab
