#include "fairtab/ifgb.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include <nlohmann/json.hpp>

#include "fairtab/errors.hpp"
#include "fairtab/kernels.hpp"

namespace fairtab {

namespace {

struct LpEval {
    std::vector<std::size_t> choice;  // index into each row's candidate list
    double objective = 0.0;
    double cost = 0.0;
};

struct LpContext {
    const std::vector<double>* losses;
    const SparseD2* d2;
    std::vector<std::vector<double>> row_losses;  // gathered per candidate

    LpEval evaluate(double lambda) const {
        const std::size_t n = losses->size();
        LpEval out;
        out.choice.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            const SparseRow& row = (*d2)[i];
            std::size_t t = kernels::shifted_argmax(row_losses[i].data(), row.d2.data(),
                                                    lambda, row.cols.size());
            if (t == kernels::npos) {
                throw IntegrityError("solve_adversary_lp: no selectable candidate");
            }
            out.choice[i] = t;
            out.objective += row_losses[i][t];
            out.cost += row.d2[t];
        }
        auto dn = static_cast<double>(n);
        out.objective /= dn;
        out.cost /= dn;
        return out;
    }
};

TransportPlan pure_plan(const LpContext& ctx, const LpEval& eval, double eps_lp,
                        double lambda) {
    const SparseD2& d2 = *ctx.d2;
    const std::size_t n = d2.size();
    TransportPlan plan;
    plan.budget = eps_lp;
    plan.lambda_star = lambda;
    plan.objective = eval.objective;
    plan.cost = eval.cost;
    plan.rows.resize(n);
    double moved = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t col = d2[i].cols[eval.choice[i]];
        plan.rows[i].push_back({col, 1.0});
        if (col != i) moved += 1.0;
    }
    plan.moved_mass_fraction = moved / static_cast<double>(n);
    return plan;
}

}  // namespace

TransportPlan solve_adversary_lp(const std::vector<double>& losses, const SparseD2& d2,
                                 double eps_lp) {
    const std::size_t n = losses.size();
    if (eps_lp < 0.0) throw ArgumentError("solve_adversary_lp: eps_lp must be >= 0");
    if (n == 0) throw ArgumentError("solve_adversary_lp: empty instance");
    if (d2.size() != n) throw ArgumentError("solve_adversary_lp: d2 row count mismatch");
    for (double v : losses) {
        if (!std::isfinite(v)) throw ArgumentError("solve_adversary_lp: non-finite loss");
    }

    LpContext ctx{&losses, &d2, {}};
    ctx.row_losses.resize(n);
    double min_nonzero_d2 = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i) {
        const SparseRow& row = d2[i];
        if (row.cols.size() != row.d2.size() || row.cols.empty()) {
            throw ArgumentError("solve_adversary_lp: malformed sparse row");
        }
        bool has_self = false;
        ctx.row_losses[i].resize(row.cols.size());
        for (std::size_t t = 0; t < row.cols.size(); ++t) {
            if (row.cols[t] >= n) throw ArgumentError("solve_adversary_lp: column out of range");
            if (row.d2[t] < 0.0) throw ArgumentError("solve_adversary_lp: negative distance");
            if (row.cols[t] == i) {
                if (row.d2[t] != 0.0) {
                    throw ArgumentError("solve_adversary_lp: self distance must be 0");
                }
                has_self = true;
            }
            if (row.d2[t] > 0.0 && std::isfinite(row.d2[t])) {
                min_nonzero_d2 = std::min(min_nonzero_d2, row.d2[t]);
            }
            ctx.row_losses[i][t] = losses[row.cols[t]];
        }
        if (!has_self) throw ArgumentError("solve_adversary_lp: row missing its own column");
    }

    if (eps_lp == 0.0) {
        // zero budget forbids movement outright
        TransportPlan plan;
        plan.budget = 0.0;
        plan.rows.resize(n);
        double mean = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            plan.rows[i].push_back({i, 1.0});
            mean += losses[i];
        }
        plan.objective = mean / static_cast<double>(n);
        return plan;
    }

    LpEval at_zero = ctx.evaluate(0.0);
    if (at_zero.cost <= eps_lp) return pure_plan(ctx, at_zero, eps_lp, 0.0);

    auto [min_it, max_it] = std::minmax_element(losses.begin(), losses.end());
    double spread = *max_it - *min_it;
    double hi = std::isfinite(min_nonzero_d2) && min_nonzero_d2 > 0.0 && spread > 0.0
                    ? spread / min_nonzero_d2
                    : 1.0;
    LpEval hi_eval = ctx.evaluate(hi);
    for (int guard = 0; hi_eval.cost > eps_lp && guard < 200; ++guard) {
        hi *= 2.0;
        hi_eval = ctx.evaluate(hi);
    }
    if (hi_eval.cost > eps_lp) {
        throw IntegrityError("solve_adversary_lp: could not bracket the budget");
    }

    double lo = 0.0;
    LpEval lo_eval = at_zero;
    for (int iter = 0; iter < 200; ++iter) {
        double mid = 0.5 * (lo + hi);
        if (mid == lo || mid == hi) break;
        LpEval mid_eval = ctx.evaluate(mid);
        if (mid_eval.cost > eps_lp) {
            lo = mid;
            lo_eval = std::move(mid_eval);
        } else {
            hi = mid;
            hi_eval = std::move(mid_eval);
        }
    }

    // mix the bracketing vertex plans so the budget binds exactly
    double theta = (eps_lp - hi_eval.cost) / (lo_eval.cost - hi_eval.cost);
    theta = std::clamp(theta, 0.0, 1.0);

    TransportPlan plan;
    plan.budget = eps_lp;
    plan.lambda_star = hi;
    plan.rows.resize(n);
    double moved = 0.0, objective = 0.0, cost = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const SparseRow& row = d2[i];
        std::size_t lo_t = lo_eval.choice[i], hi_t = hi_eval.choice[i];
        if (lo_t == hi_t || theta == 0.0) {
            std::size_t col = row.cols[hi_t];
            plan.rows[i].push_back({col, 1.0});
            objective += ctx.row_losses[i][hi_t];
            cost += row.d2[hi_t];
            if (col != i) moved += 1.0;
        } else {
            plan.rows[i].push_back({row.cols[lo_t], theta});
            plan.rows[i].push_back({row.cols[hi_t], 1.0 - theta});
            objective += theta * ctx.row_losses[i][lo_t] + (1.0 - theta) * ctx.row_losses[i][hi_t];
            cost += theta * row.d2[lo_t] + (1.0 - theta) * row.d2[hi_t];
            if (row.cols[lo_t] != i) moved += theta;
            if (row.cols[hi_t] != i) moved += 1.0 - theta;
        }
    }
    auto dn = static_cast<double>(n);
    plan.objective = objective / dn;
    plan.cost = cost / dn;
    plan.moved_mass_fraction = moved / dn;
    return plan;
}

SparseD2 nearest_candidates(const FairMetric& m, const Matrix& features,
                            std::size_t candidate_cap) {
    if (candidate_cap < 1) throw ArgumentError("ifgb: candidate_cap must be >= 1");
    const std::size_t n = features.rows;
    const std::size_t d = features.cols;
    const std::size_t k = m.k();
    Matrix z;
    if (k > 0) z = project_rows(m, features);

    SparseD2 table(n);
    std::vector<std::pair<double, std::size_t>> scratch(n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            double full = kernels::squared_l2(features.row(i), features.row(j), d);
            double sub = k > 0 ? kernels::squared_l2(z.row(i), z.row(j), k) : 0.0;
            scratch[j] = {std::max(full - sub, 0.0), j};
        }
        std::size_t keep = std::min(candidate_cap, n);
        std::partial_sort(scratch.begin(),
                          scratch.begin() + static_cast<std::ptrdiff_t>(keep),
                          scratch.end());
        bool has_self = false;
        for (std::size_t t = 0; t < keep; ++t) has_self |= scratch[t].second == i;
        if (!has_self) scratch[keep - 1] = {0.0, i};

        std::sort(scratch.begin(), scratch.begin() + static_cast<std::ptrdiff_t>(keep),
                  [](const auto& a, const auto& b) { return a.second < b.second; });
        SparseRow& row = table[i];
        row.cols.resize(keep);
        row.d2.resize(keep);
        for (std::size_t t = 0; t < keep; ++t) {
            row.cols[t] = scratch[t].second;
            row.d2[t] = scratch[t].second == i ? 0.0 : scratch[t].first;
        }
    }
    return table;
}

BoostedEnsemble train_ifgb(const TabularDataset& ds, const FairMetric& m,
                           const IfgbConfig& cfg, std::vector<std::string>* round_log) {
    if (cfg.eps_lp < 0.0) throw ArgumentError("train_ifgb: eps_lp must be >= 0");
    if (cfg.candidate_cap < 1) throw ArgumentError("train_ifgb: candidate_cap must be >= 1");
    if (!m.feature_names.empty() && m.feature_names != ds.feature_names) {
        throw SchemaError("train_ifgb: metric features do not match the dataset");
    }
    if (m.dim() != ds.features.cols) {
        throw SchemaError("train_ifgb: metric dimension != dataset features");
    }

    const std::size_t n = ds.n_rows();
    SparseD2 table = nearest_candidates(m, ds.features, cfg.candidate_cap);

    WeightProvider provider = [&](int round, const std::vector<double>& margins) {
        std::vector<double> losses(n);
        double mean_loss = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            losses[i] = bce_from_logit(margins[i], ds.labels[i]);
            mean_loss += losses[i];
        }
        mean_loss /= static_cast<double>(n);

        TransportPlan plan = solve_adversary_lp(losses, table, cfg.eps_lp);
        std::vector<double> weights(n, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            for (const PlanEntry& e : plan.rows[i]) weights[e.col] += e.frac;
        }

        if (round_log != nullptr) {
            nlohmann::json line;
            line["adv_objective"] = plan.objective;
            line["lambda_star"] = plan.lambda_star;
            line["mean_loss"] = mean_loss;
            line["moved_mass_fraction"] = plan.moved_mass_fraction;
            line["round"] = round;
            round_log->push_back(line.dump());
        }
        return weights;
    };

    return boost_loop(ds, cfg.train, provider);
}

}  // namespace fairtab
