#include "fairtab/fairness_eval.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <numeric>

#include <nlohmann/json.hpp>

#include "fairtab/errors.hpp"
#include "fairtab/kernels.hpp"
#include "fairtab/rng.hpp"

namespace fairtab {

namespace {

using nlohmann::json;

constexpr double kNan = std::numeric_limits<double>::quiet_NaN();

std::string fmt_double(double v) {
    char buf[32];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

// Pairwise fair distance with the projection cache: d^2(i,j) =
// ||x_i - x_j||^2 - ||z_i - z_j||^2, clamped at zero like fair_distance_squared.
struct PairDistances {
    const Matrix* x = nullptr;
    Matrix z;
    std::size_t dim = 0;
    std::size_t k = 0;

    PairDistances(const FairMetric& m, const Matrix& features)
        : x(&features), dim(features.cols), k(m.k()) {
        if (m.dim() != features.cols) {
            throw ArgumentError("fairness_eval: metric dimension " +
                                std::to_string(m.dim()) + " != feature count " +
                                std::to_string(features.cols));
        }
        if (k > 0) z = project_rows(m, features);
    }

    double d(std::size_t i, std::size_t j) const {
        double full = kernels::squared_l2(x->row(i), x->row(j), dim);
        double sub = k > 0 ? kernels::squared_l2(z.row(i), z.row(j), k) : 0.0;
        double d2 = full - sub;
        return d2 > 0.0 ? std::sqrt(d2) : 0.0;
    }
};

std::size_t total_pairs(std::size_t n) { return n < 2 ? 0 : n * (n - 1) / 2; }

// Visits either every unordered pair or `budget` uniform draws (with
// replacement) when the exhaustive count exceeds the budget.
template <typename Visit>
PairSampling for_pairs(std::size_t n, std::size_t budget, std::uint64_t seed,
                       Visit&& visit) {
    PairSampling sampling;
    std::size_t total = total_pairs(n);
    if (total <= budget) {
        sampling.exhaustive = true;
        sampling.count = total;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i + 1; j < n; ++j) visit(i, j);
        return sampling;
    }
    sampling.exhaustive = false;
    sampling.count = budget;
    sampling.seed = seed;
    Rng rng(mix_seed(seed, 0xaa1125ULL));
    for (std::size_t t = 0; t < budget; ++t) {
        std::size_t i = rng.next_index(n);
        std::size_t j = rng.next_index(n - 1);
        if (j >= i) ++j;
        visit(std::min(i, j), std::max(i, j));
    }
    return sampling;
}

json sampling_to_json(const PairSampling& s) {
    json j;
    j["count"] = s.count;
    j["mode"] = s.exhaustive ? "exhaustive" : "sampled";
    if (!s.exhaustive) j["seed"] = s.seed;
    return j;
}

json rate_or_null(double v) {
    if (std::isnan(v)) return nullptr;
    return v;
}

json row_to_json(const GroupRow& r) {
    json j;
    j["accuracy"] = rate_or_null(r.accuracy);
    j["auc"] = rate_or_null(r.auc);
    j["count"] = r.count;
    j["fnr"] = rate_or_null(r.fnr);
    j["fpr"] = rate_or_null(r.fpr);
    j["group"] = r.group;
    return j;
}

}  // namespace

IfmCurve ifm(const std::vector<int>& predicted, const FairMetric& m,
             const TabularDataset& ds, const std::vector<double>& epsilons,
             std::size_t pair_budget, std::uint64_t seed) {
    const std::size_t n = ds.n_rows();
    if (n == 0) throw DataError("ifm: empty dataset");
    if (predicted.size() != n) {
        throw ArgumentError("ifm: prediction count " + std::to_string(predicted.size()) +
                            " != row count " + std::to_string(n));
    }
    if (epsilons.empty()) throw ArgumentError("ifm: empty epsilon grid");
    for (std::size_t g = 1; g < epsilons.size(); ++g) {
        if (epsilons[g] < epsilons[g - 1]) throw ArgumentError("ifm: epsilon grid must ascend");
    }

    PairDistances dist(m, ds.features);
    std::vector<std::size_t> den_add(epsilons.size(), 0), num_add(epsilons.size(), 0);
    IfmCurve curve;
    curve.epsilons = epsilons;
    curve.sampling = for_pairs(n, pair_budget, seed, [&](std::size_t i, std::size_t j) {
        double d = dist.d(i, j);
        auto it = std::lower_bound(epsilons.begin(), epsilons.end(), d);
        if (it == epsilons.end()) return;
        auto g = static_cast<std::size_t>(it - epsilons.begin());
        den_add[g] += 1;
        if (predicted[i] == predicted[j]) num_add[g] += 1;
    });

    std::size_t den = 0, num = 0;
    curve.values.resize(epsilons.size());
    curve.pair_counts.resize(epsilons.size());
    for (std::size_t g = 0; g < epsilons.size(); ++g) {
        den += den_add[g];
        num += num_add[g];
        curve.pair_counts[g] = den;
        curve.values[g] = den > 0
                              ? static_cast<double>(num) / static_cast<double>(den)
                              : kNan;
    }
    return curve;
}

LipschitzAuditResult lipschitz_audit(const std::vector<double>& proba,
                                     const FairMetric& m, const TabularDataset& ds,
                                     double lipschitz_l, std::size_t pair_budget,
                                     std::uint64_t seed) {
    const std::size_t n = ds.n_rows();
    if (n == 0) throw DataError("lipschitz_audit: empty dataset");
    if (proba.size() != n) {
        throw ArgumentError("lipschitz_audit: prediction count mismatch");
    }
    if (!(lipschitz_l > 0.0)) throw ArgumentError("lipschitz_audit: L must be positive");

    PairDistances dist(m, ds.features);
    LipschitzAuditResult audit;
    audit.lipschitz_l = lipschitz_l;
    audit.sampling = for_pairs(n, pair_budget, seed, [&](std::size_t i, std::size_t j) {
        audit.pairs += 1;
        if (std::fabs(proba[i] - proba[j]) > lipschitz_l * dist.d(i, j)) {
            audit.violations += 1;
        }
    });
    audit.alpha_hat = audit.pairs > 0 ? static_cast<double>(audit.violations) /
                                            static_cast<double>(audit.pairs)
                                      : kNan;
    if (!audit.sampling.exhaustive && audit.pairs > 0) {
        audit.ci_half_width = 1.96 * std::sqrt(audit.alpha_hat * (1.0 - audit.alpha_hat) /
                                               static_cast<double>(audit.pairs));
    }
    return audit;
}

double concordance_auc(const std::vector<double>& scores, const std::vector<int>& labels) {
    const std::size_t n = scores.size();
    if (labels.size() != n) throw ArgumentError("concordance_auc: size mismatch");
    std::size_t n_pos = 0;
    for (int y : labels) n_pos += y == 1 ? 1 : 0;
    std::size_t n_neg = n - n_pos;
    if (n_pos == 0 || n_neg == 0) return kNan;

    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
        return scores[a] < scores[b];
    });
    double rank_sum_pos = 0.0;
    std::size_t start = 0;
    while (start < n) {
        std::size_t stop = start;
        while (stop < n && scores[idx[stop]] == scores[idx[start]]) ++stop;
        double midrank = 0.5 * static_cast<double>(start + 1 + stop);  // 1-based mean
        for (std::size_t t = start; t < stop; ++t) {
            if (labels[idx[t]] == 1) rank_sum_pos += midrank;
        }
        start = stop;
    }
    double np = static_cast<double>(n_pos), nn = static_cast<double>(n_neg);
    return (rank_sum_pos - np * (np + 1.0) / 2.0) / (np * nn);
}

GroupMetricTable group_metrics(const std::vector<double>& proba,
                               const TabularDataset& ds, double threshold) {
    const std::size_t n = ds.n_rows();
    if (n == 0) throw DataError("group_metrics: empty dataset");
    if (proba.size() != n) throw ArgumentError("group_metrics: prediction count mismatch");
    if (ds.sensitive.size() != n) {
        throw ArgumentError("group_metrics: dataset has no sensitive column");
    }
    if (!(threshold > 0.0 && threshold < 1.0)) {
        throw ArgumentError("group_metrics: threshold must be in (0,1)");
    }

    std::map<std::string, std::vector<std::size_t>> groups;
    for (std::size_t i = 0; i < n; ++i) groups[ds.sensitive[i]].push_back(i);

    GroupMetricTable table;
    table.threshold = threshold;
    for (const auto& [name, members] : groups) {
        GroupRow row;
        row.group = name;
        row.count = members.size();
        std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
        std::vector<double> scores;
        std::vector<int> labels;
        scores.reserve(members.size());
        labels.reserve(members.size());
        for (std::size_t i : members) {
            int pred = proba[i] >= threshold ? 1 : 0;
            if (ds.labels[i] == 1) {
                pred == 1 ? ++tp : ++fn;
            } else {
                pred == 1 ? ++fp : ++tn;
            }
            scores.push_back(proba[i]);
            labels.push_back(ds.labels[i]);
        }
        auto cnt = static_cast<double>(members.size());
        row.accuracy = static_cast<double>(tp + tn) / cnt;
        row.fpr = fp + tn > 0 ? static_cast<double>(fp) / static_cast<double>(fp + tn) : kNan;
        row.fnr = fn + tp > 0 ? static_cast<double>(fn) / static_cast<double>(fn + tp) : kNan;
        row.auc = concordance_auc(scores, labels);
        table.rows.push_back(std::move(row));
    }

    if (table.rows.size() == 2) {
        const GroupRow& other = table.rows[0];
        const GroupRow& ref = table.rows[1];  // lexicographically last
        table.has_diff = true;
        table.reference = ref.group;
        table.diff.group = ref.group + "-" + other.group;
        table.diff.count = 0;
        table.diff.accuracy = ref.accuracy - other.accuracy;
        table.diff.fpr = ref.fpr - other.fpr;
        table.diff.fnr = ref.fnr - other.fnr;
        table.diff.auc = ref.auc - other.auc;
    }
    return table;
}

std::vector<RocPoint> roc_points(const std::vector<double>& proba,
                                 const std::vector<int>& labels,
                                 std::size_t n_thresholds) {
    const std::size_t n = proba.size();
    if (labels.size() != n) throw ArgumentError("roc_points: size mismatch");
    if (n_thresholds < 2) throw ArgumentError("roc_points: need at least 2 thresholds");
    std::size_t n_pos = 0;
    for (int y : labels) n_pos += y == 1 ? 1 : 0;
    std::size_t n_neg = n - n_pos;
    if (n_pos == 0 || n_neg == 0) {
        throw DataError("roc_points: labels contain a single class");
    }

    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
        return proba[a] > proba[b];
    });

    // cumulative (fp, tp) at every distinct score threshold, descending
    std::vector<RocPoint> full;
    std::size_t tp = 0, fp = 0, at = 0;
    while (at < n) {
        std::size_t stop = at;
        while (stop < n && proba[idx[stop]] == proba[idx[at]]) ++stop;
        for (std::size_t t = at; t < stop; ++t) {
            labels[idx[t]] == 1 ? ++tp : ++fp;
        }
        full.push_back({static_cast<double>(fp) / static_cast<double>(n_neg),
                        static_cast<double>(tp) / static_cast<double>(n_pos)});
        at = stop;
    }

    std::vector<RocPoint> kept;
    if (full.size() <= n_thresholds) {
        kept = full;
    } else {
        std::size_t last = full.size() - 1;
        std::size_t prev = full.size();
        for (std::size_t t = 0; t < n_thresholds; ++t) {
            auto pick = static_cast<std::size_t>(std::llround(
                static_cast<double>(t) * static_cast<double>(last) /
                static_cast<double>(n_thresholds - 1)));
            if (pick != prev) kept.push_back(full[pick]);
            prev = pick;
        }
    }

    std::vector<RocPoint> points;
    points.push_back({0.0, 0.0});
    for (const auto& p : kept) {
        if (p.fpr != points.back().fpr || p.tpr != points.back().tpr) points.push_back(p);
    }
    if (points.back().fpr != 1.0 || points.back().tpr != 1.0) points.push_back({1.0, 1.0});
    return points;
}

double trapezoid_area(const std::vector<RocPoint>& points) {
    double area = 0.0;
    for (std::size_t i = 1; i < points.size(); ++i) {
        area += (points[i].fpr - points[i - 1].fpr) *
                (points[i].tpr + points[i - 1].tpr) * 0.5;
    }
    return area;
}

std::vector<double> default_epsilon_grid(const FairMetric& m, const TabularDataset& ds,
                                         std::size_t count, std::size_t pair_budget,
                                         std::uint64_t seed) {
    if (count < 2) throw ArgumentError("default_epsilon_grid: need at least 2 values");
    if (ds.n_rows() < 2) throw DataError("default_epsilon_grid: need at least 2 rows");

    PairDistances dist(m, ds.features);
    std::vector<double> sample;
    for_pairs(ds.n_rows(), pair_budget, mix_seed(seed, 0x9f1dULL),
              [&](std::size_t i, std::size_t j) { sample.push_back(dist.d(i, j)); });

    auto percentile = [&](double q) {
        auto pos = static_cast<std::size_t>(
            std::llround(q * static_cast<double>(sample.size() - 1)));
        std::nth_element(sample.begin(), sample.begin() + static_cast<std::ptrdiff_t>(pos),
                         sample.end());
        return sample[pos];
    };
    double hi = percentile(0.50);
    double lo = percentile(0.01);

    std::vector<double> grid(count);
    auto steps = static_cast<double>(count - 1);
    if (lo > 0.0 && hi > lo) {
        double llo = std::log(lo), lhi = std::log(hi);
        for (std::size_t t = 0; t < count; ++t) {
            grid[t] = std::exp(llo + (lhi - llo) * static_cast<double>(t) / steps);
        }
        grid.front() = lo;
        grid.back() = hi;
    } else {
        for (std::size_t t = 0; t < count; ++t) {
            grid[t] = lo + (hi - lo) * static_cast<double>(t) / steps;
        }
    }
    for (std::size_t t = 1; t < count; ++t) grid[t] = std::max(grid[t], grid[t - 1]);
    return grid;
}

std::string ifm_to_json(const IfmCurve& curve) {
    json j;
    j["epsilons"] = curve.epsilons;
    j["pair_counts"] = curve.pair_counts;
    j["sampling"] = sampling_to_json(curve.sampling);
    json vals = json::array();
    for (double v : curve.values) vals.push_back(rate_or_null(v));
    j["values"] = vals;
    return j.dump();
}

std::string lipschitz_to_json(const LipschitzAuditResult& audit) {
    json j;
    j["alpha_hat"] = rate_or_null(audit.alpha_hat);
    j["ci_half_width"] = audit.ci_half_width;
    j["lipschitz_l"] = audit.lipschitz_l;
    j["pairs"] = audit.pairs;
    j["sampling"] = sampling_to_json(audit.sampling);
    j["violations"] = audit.violations;
    return j.dump();
}

std::string group_table_to_json(const GroupMetricTable& table) {
    json j;
    j["diff"] = table.has_diff ? row_to_json(table.diff) : json(nullptr);
    j["reference"] = table.reference;
    json rows = json::array();
    for (const auto& r : table.rows) rows.push_back(row_to_json(r));
    j["rows"] = rows;
    j["threshold"] = table.threshold;
    return j.dump();
}

std::string ifm_to_csv(const IfmCurve& curve) {
    std::string out = "epsilon,ifm,pairs\n";
    for (std::size_t g = 0; g < curve.epsilons.size(); ++g) {
        out += fmt_double(curve.epsilons[g]);
        out += ',';
        if (!std::isnan(curve.values[g])) out += fmt_double(curve.values[g]);
        out += ',';
        out += std::to_string(curve.pair_counts[g]);
        out += '\n';
    }
    return out;
}

std::string roc_to_csv(const std::vector<RocPoint>& points) {
    std::string out = "fpr,tpr\n";
    for (const auto& p : points) {
        out += fmt_double(p.fpr);
        out += ',';
        out += fmt_double(p.tpr);
        out += '\n';
    }
    return out;
}

}  // namespace fairtab
