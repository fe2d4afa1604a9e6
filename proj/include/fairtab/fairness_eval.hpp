#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fairtab/dataset.hpp"
#include "fairtab/fair_metric.hpp"
#include "fairtab/matrix.hpp"

namespace fairtab {

// How the pair loops covered the n*(n-1)/2 candidate pairs.
struct PairSampling {
    bool exhaustive = true;
    std::size_t count = 0;  // pairs visited
    std::uint64_t seed = 0;
};

constexpr std::size_t kDefaultPairBudget = 2000000;

// IFM(eps) = #(d <= eps and equal predicted labels) / #(d <= eps).
// Values are NaN (serialized as null) where the denominator is zero.
struct IfmCurve {
    std::vector<double> epsilons;
    std::vector<double> values;
    std::vector<std::size_t> pair_counts;
    PairSampling sampling;
};

IfmCurve ifm(const std::vector<int>& predicted, const FairMetric& m,
             const TabularDataset& ds, const std::vector<double>& epsilons,
             std::size_t pair_budget = kDefaultPairBudget, std::uint64_t seed = 0);

struct LipschitzAuditResult {
    double lipschitz_l = 1.0;
    std::size_t violations = 0;
    std::size_t pairs = 0;
    double alpha_hat = 0.0;
    double ci_half_width = 0.0;  // binomial 95% width, 0 in exhaustive mode
    PairSampling sampling;
};

// Violation iff |p - p'| > L * d(x, x'). D is the absolute probability
// difference (total-variation distance between the Bernoulli outputs).
LipschitzAuditResult lipschitz_audit(const std::vector<double>& proba,
                                     const FairMetric& m, const TabularDataset& ds,
                                     double lipschitz_l = 1.0,
                                     std::size_t pair_budget = kDefaultPairBudget,
                                     std::uint64_t seed = 0);

// Rate fields are NaN when undefined (no negatives for FPR, no positives
// for FNR, single-class group for AUC).
struct GroupRow {
    std::string group;
    std::size_t count = 0;
    double accuracy = 0.0;
    double fpr = 0.0;
    double fnr = 0.0;
    double auc = 0.0;
};

struct GroupMetricTable {
    std::vector<GroupRow> rows;  // sorted by group name
    bool has_diff = false;       // exactly two groups
    GroupRow diff;               // reference minus other
    std::string reference;       // lexicographically last group
    double threshold = 0.5;
};

GroupMetricTable group_metrics(const std::vector<double>& proba,
                               const TabularDataset& ds, double threshold = 0.5);

struct RocPoint {
    double fpr = 0.0;
    double tpr = 0.0;
};

// Monotone staircase from (0,0) to (1,1). Thresholds are all distinct scores
// when there are at most n_thresholds of them, else an even subsample.
std::vector<RocPoint> roc_points(const std::vector<double>& proba,
                                 const std::vector<int>& labels,
                                 std::size_t n_thresholds);

double trapezoid_area(const std::vector<RocPoint>& points);

// Concordance AUC over all (positive, negative) pairs, ties counted 1/2,
// computed with midranks. NaN when a class is missing.
double concordance_auc(const std::vector<double>& scores, const std::vector<int>& labels);

// 20 log-spaced values between the 1st and 50th percentile of pairwise fair
// distances (linear fallback when the 1st percentile is zero).
std::vector<double> default_epsilon_grid(const FairMetric& m, const TabularDataset& ds,
                                         std::size_t count = 20,
                                         std::size_t pair_budget = kDefaultPairBudget,
                                         std::uint64_t seed = 0);

std::string ifm_to_json(const IfmCurve& curve);
std::string lipschitz_to_json(const LipschitzAuditResult& audit);
std::string group_table_to_json(const GroupMetricTable& table);
std::string ifm_to_csv(const IfmCurve& curve);
std::string roc_to_csv(const std::vector<RocPoint>& points);

}  // namespace fairtab
