#include "fairtab/fair_metric.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include <json.hpp>

#include "fairtab/checksum.hpp"
#include "fairtab/errors.hpp"
#include "fairtab/io.hpp"
#include "fairtab/kernels.hpp"
#include "fairtab/linalg.hpp"
#include "fairtab/rng.hpp"

namespace fairtab {

FairMetric make_fair_metric(Matrix basis, std::vector<std::string> feature_names,
                            double epsilon_default) {
    FairMetric m;
    const std::size_t d = basis.cols;
    m.projector = Matrix(d, d);
    for (std::size_t r = 0; r < basis.rows; ++r) {
        const double* v = basis.row(r);
        for (std::size_t i = 0; i < d; ++i) {
            kernels::axpy(v[i], v, m.projector.row(i), d);
        }
    }
    m.basis = std::move(basis);
    m.feature_names = std::move(feature_names);
    m.epsilon_default = epsilon_default;
    return m;
}

double fair_distance_squared(const FairMetric& m, const double* x, const double* y,
                             std::size_t n) {
    require_dim(n, m.dim(), "fair_distance: vector");
    double full = kernels::squared_l2(x, y, n);
    if (m.k() == 0) return full;
    std::vector<double> diff(n);
    for (std::size_t i = 0; i < n; ++i) diff[i] = x[i] - y[i];
    double proj = 0.0;
    for (std::size_t r = 0; r < m.k(); ++r) {
        double z = kernels::dot(m.basis.row(r), diff.data(), n);
        proj += z * z;
    }
    return std::max(0.0, full - proj);
}

double fair_distance(const FairMetric& m, const double* x, const double* y,
                     std::size_t n) {
    return std::sqrt(fair_distance_squared(m, x, y, n));
}

Matrix project_rows(const FairMetric& m, const Matrix& x) {
    require_dim(x.cols, m.dim(), "project_rows: features");
    Matrix z(x.rows, m.k());
    for (std::size_t i = 0; i < x.rows; ++i) {
        for (std::size_t r = 0; r < m.k(); ++r) {
            z.at(i, r) = kernels::dot(m.basis.row(r), x.row(i), x.cols);
        }
    }
    return z;
}

namespace {

// 5th percentile (nearest rank) of pairwise fair distances; exhaustive when
// the pair count fits the budget, deterministic sample otherwise.
double epsilon_percentile(const FairMetric& m, const Matrix& x, std::size_t pair_budget,
                          std::uint64_t seed) {
    const std::size_t n = x.rows;
    if (n < 2) return 0.0;
    Matrix z = project_rows(m, x);
    std::vector<double> dists;
    auto pair_d = [&](std::size_t i, std::size_t j) {
        double full = kernels::squared_l2(x.row(i), x.row(j), x.cols);
        double proj = m.k() == 0 ? 0.0 : kernels::squared_l2(z.row(i), z.row(j), m.k());
        return std::sqrt(std::max(0.0, full - proj));
    };
    std::size_t total = n * (n - 1) / 2;
    if (total <= pair_budget) {
        dists.reserve(total);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i + 1; j < n; ++j) dists.push_back(pair_d(i, j));
    } else {
        Rng rng(mix_seed(seed, 0xe5ULL));
        dists.reserve(pair_budget);
        while (dists.size() < pair_budget) {
            std::size_t i = rng.next_index(n);
            std::size_t j = rng.next_index(n);
            if (i == j) continue;
            dists.push_back(pair_d(i, j));
        }
    }
    auto rank = static_cast<std::size_t>(
        std::llround(0.05 * static_cast<double>(dists.size() - 1)));
    std::nth_element(dists.begin(), dists.begin() + static_cast<std::ptrdiff_t>(rank),
                     dists.end());
    return dists[rank];
}

std::vector<std::string> sorted_categories(const std::vector<std::string>& sensitive) {
    std::vector<std::string> cats(sensitive.begin(), sensitive.end());
    std::sort(cats.begin(), cats.end());
    cats.erase(std::unique(cats.begin(), cats.end()), cats.end());
    return cats;
}

// one-vs-rest logistic directions for every non-reference category
struct DirectionFits {
    std::vector<std::vector<double>> coefs;     // per non-reference category
    std::vector<double> intercepts;
    int iterations = 0;
    bool converged = true;
};

DirectionFits fit_directions(const Matrix& x, const std::vector<std::string>& sensitive,
                             const std::vector<std::size_t>& rows,
                             const std::vector<std::string>& cats, double l2, int max_iter) {
    DirectionFits out;
    Matrix sub(rows.size(), x.cols);
    for (std::size_t r = 0; r < rows.size(); ++r)
        for (std::size_t j = 0; j < x.cols; ++j) sub.at(r, j) = x.at(rows[r], j);
    for (std::size_t c = 1; c < cats.size(); ++c) {
        std::vector<double> y(rows.size());
        for (std::size_t r = 0; r < rows.size(); ++r)
            y[r] = sensitive[rows[r]] == cats[c] ? 1.0 : 0.0;
        auto fit = linalg::logistic_regression(sub, y, l2, max_iter);
        out.iterations = std::max(out.iterations, fit.iterations);
        out.converged = out.converged && fit.converged;
        out.coefs.push_back(std::move(fit.coef));
        out.intercepts.push_back(fit.intercept);
    }
    return out;
}

}  // namespace

MetricFitResult learn_sensitive_subspace(const TabularDataset& ds, const MetricOptions& opts) {
    if (ds.role != Role::metric_train) {
        throw ArgumentError("learn_sensitive_subspace: requires the metric_train split");
    }
    if (!ds.has_sensitive()) {
        throw ArgumentError("learn_sensitive_subspace: sensitive column required");
    }
    if (!ds.cat_names.empty()) {
        throw ArgumentError("learn_sensitive_subspace: preprocess categorical features first");
    }
    const std::size_t n = ds.n_rows();
    const std::size_t d = ds.features.cols;

    auto cats = sorted_categories(ds.sensitive);
    if (cats.size() < 2) {
        throw DegenerateSubspaceError("sensitive column has a single category");
    }
    std::map<std::string, std::size_t> counts;
    for (const auto& s : ds.sensitive) ++counts[s];
    for (const auto& [cat, cnt] : counts) {
        if (cnt < 2) {
            throw DegenerateSubspaceError("sensitive category '" + cat +
                                          "' has fewer than 2 rows");
        }
    }

    std::vector<std::size_t> all_rows(n);
    std::iota(all_rows.begin(), all_rows.end(), 0);
    auto dirs = fit_directions(ds.features, ds.sensitive, all_rows, cats, opts.l2,
                               opts.max_iter);

    std::vector<std::vector<double>> candidates = dirs.coefs;

    if (opts.k_extra > 0) {
        // between-group mean scatter, principal directions
        std::vector<double> mu(d, 0.0);
        for (std::size_t i = 0; i < n; ++i) kernels::axpy(1.0, ds.features.row(i), mu.data(), d);
        for (auto& v : mu) v /= static_cast<double>(n);
        Matrix scatter(d, d);
        for (const auto& cat : cats) {
            std::vector<double> gm(d, 0.0);
            std::size_t gn = 0;
            for (std::size_t i = 0; i < n; ++i) {
                if (ds.sensitive[i] != cat) continue;
                kernels::axpy(1.0, ds.features.row(i), gm.data(), d);
                ++gn;
            }
            for (auto& v : gm) v /= static_cast<double>(gn);
            for (std::size_t j = 0; j < d; ++j) gm[j] -= mu[j];
            double w = static_cast<double>(gn) / static_cast<double>(n);
            for (std::size_t a = 0; a < d; ++a)
                kernels::axpy(w * gm[a], gm.data(), scatter.row(a), d);
        }
        auto eig = linalg::jacobi_eigen(scatter);
        double top = eig.values.empty() ? 0.0 : std::max(eig.values[0], 0.0);
        int taken = 0;
        for (std::size_t c = 0; c < eig.values.size() && taken < opts.k_extra; ++c) {
            if (eig.values[c] <= opts.drop_tol * top) break;
            std::vector<double> v(d);
            for (std::size_t r = 0; r < d; ++r) v[r] = eig.vectors.at(r, c);
            candidates.push_back(std::move(v));
            ++taken;
        }
    }

    auto ortho = linalg::orthonormalize(candidates, opts.drop_tol);
    if (ortho.empty()) {
        throw DegenerateSubspaceError("all candidate directions collapsed to zero");
    }
    Matrix basis(ortho.size(), d);
    for (std::size_t r = 0; r < ortho.size(); ++r)
        for (std::size_t j = 0; j < d; ++j) basis.at(r, j) = ortho[r][j];

    FairMetric metric = make_fair_metric(std::move(basis), ds.feature_names, 0.0);
    metric.epsilon_default = epsilon_percentile(metric, ds.features, opts.pair_budget,
                                                opts.seed);

    // held-out diagnostic: refit on 80%, score multiclass prediction on 20%
    SubspaceFitReport report;
    report.subspace_dim = metric.k();
    report.iterations = dirs.iterations;
    report.converged = dirs.converged;
    {
        std::vector<std::size_t> order(n);
        std::iota(order.begin(), order.end(), 0);
        Rng rng(mix_seed(opts.seed, 0xf01dULL));
        rng.shuffle(order);
        std::size_t cut = n - n / 5;
        if (cut == n) cut = n - 1;
        std::vector<std::size_t> fit_rows(order.begin(), order.begin() + cut);
        std::vector<std::size_t> eval_rows(order.begin() + cut, order.end());
        auto fold = fit_directions(ds.features, ds.sensitive, fit_rows, cats, opts.l2,
                                   opts.max_iter);
        std::size_t correct = 0;
        for (std::size_t r : eval_rows) {
            std::size_t best = 0;  // reference category scores 0
            double best_z = 0.0;
            for (std::size_t c = 0; c + 1 < cats.size(); ++c) {
                double z = kernels::dot(fold.coefs[c].data(), ds.features.row(r), d) +
                           fold.intercepts[c];
                if (z > best_z) {
                    best_z = z;
                    best = c + 1;
                }
            }
            if (cats[best] == ds.sensitive[r]) ++correct;
        }
        report.holdout_accuracy =
            eval_rows.empty() ? 0.0
                              : static_cast<double>(correct) / static_cast<double>(eval_rows.size());
    }

    return {std::move(metric), report};
}

namespace {

nlohmann::json metric_payload(const FairMetric& m) {
    nlohmann::json j;
    j["basis"] = nlohmann::json::array();
    for (std::size_t r = 0; r < m.k(); ++r) {
        nlohmann::json row = nlohmann::json::array();
        for (std::size_t c = 0; c < m.dim(); ++c) row.push_back(m.basis.at(r, c));
        j["basis"].push_back(std::move(row));
    }
    j["dim"] = m.dim();
    j["epsilon_default"] = m.epsilon_default;
    j["feature_names"] = m.feature_names;
    return j;
}

}  // namespace

std::string metric_to_json(const FairMetric& m) {
    nlohmann::json j = metric_payload(m);
    j["checksum"] = checksum_hex(j.dump());
    return j.dump(2) + "\n";
}

FairMetric metric_from_json(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw IntegrityError(std::string("metric parse failure: ") + e.what());
    }
    std::string stored;
    try {
        stored = j.at("checksum").get<std::string>();
        j.erase("checksum");
        if (checksum_hex(j.dump()) != stored) {
            throw IntegrityError("metric checksum mismatch");
        }
        auto names = j.at("feature_names").get<std::vector<std::string>>();
        auto dim = j.at("dim").get<std::size_t>();
        const auto& rows = j.at("basis");
        Matrix basis(rows.size(), dim);
        for (std::size_t r = 0; r < rows.size(); ++r) {
            if (rows[r].size() != dim) throw IntegrityError("metric basis row length mismatch");
            for (std::size_t c = 0; c < dim; ++c) basis.at(r, c) = rows[r][c].get<double>();
        }
        return make_fair_metric(std::move(basis), std::move(names),
                                j.at("epsilon_default").get<double>());
    } catch (const nlohmann::json::exception& e) {
        throw IntegrityError(std::string("metric field failure: ") + e.what());
    }
}

void save_metric(const FairMetric& m, const std::string& path) {
    write_file_atomic(path, metric_to_json(m));
}

FairMetric load_metric(const std::string& path) { return metric_from_json(read_file(path)); }

}  // namespace fairtab
