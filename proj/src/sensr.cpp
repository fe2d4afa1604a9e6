#include "fairtab/sensr.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <nlohmann/json.hpp>

#include "fairtab/errors.hpp"

namespace fairtab {

namespace {

constexpr double kBoxLimit = 6.0;

void validate(const SensrConfig& cfg) {
    if (cfg.steps < 0) throw ArgumentError("sensr: steps must be >= 0");
    if (!(cfg.lambda > 0.0)) throw ArgumentError("sensr: lambda must be positive");
    if (cfg.steps > 0 && !(cfg.step_size > 0.0)) {
        throw ArgumentError("sensr: step_size must be positive");
    }
    if (cfg.eps_train < 0.0) throw ArgumentError("sensr: eps_train must be >= 0");
}

}  // namespace

std::vector<double> worst_case_perturb(const SmoothClassifier& model, const FairMetric& m,
                                       const double* x, int y, const SensrConfig& cfg,
                                       PerturbReport* report) {
    validate(cfg);
    const std::size_t d = model.layer_sizes.front();
    if (m.dim() != d) {
        throw ArgumentError("worst_case_perturb: metric dimension " +
                            std::to_string(m.dim()) + " != model input " +
                            std::to_string(d));
    }
    const std::size_t k = m.k();

    std::vector<double> best(x, x + d);
    PerturbReport rep;
    rep.objective = smooth_loss(model, x, y);
    if (!std::isfinite(rep.objective)) {
        rep.non_finite = true;
        if (report != nullptr) *report = rep;
        return best;
    }

    std::vector<double> cur(best), lo(d), hi(d), delta(d), z(k);
    for (std::size_t i = 0; i < d; ++i) {
        lo[i] = std::min(x[i], -kBoxLimit);
        hi[i] = std::max(x[i], kBoxLimit);
    }

    std::vector<double> ascent(d);
    for (int step = 0; step < cfg.steps; ++step) {
        auto grad = input_gradient(model, cur.data(), y);
        for (std::size_t i = 0; i < d; ++i) delta[i] = cur[i] - x[i];
        for (std::size_t r = 0; r < k; ++r) {
            z[r] = 0.0;
            const double* row = m.basis.row(r);
            for (std::size_t i = 0; i < d; ++i) z[r] += row[i] * delta[i];
        }
        double norm2 = 0.0;
        for (std::size_t i = 0; i < d; ++i) {
            double residual = delta[i];
            for (std::size_t r = 0; r < k; ++r) residual -= m.basis.at(r, i) * z[r];
            ascent[i] = grad[i] - cfg.lambda * 2.0 * residual;
            norm2 += ascent[i] * ascent[i];
        }
        if (!(norm2 > 0.0)) break;  // stationary (or non-finite gradient)
        double scale = cfg.step_size / std::sqrt(norm2);
        for (std::size_t i = 0; i < d; ++i) {
            cur[i] = std::clamp(cur[i] + scale * ascent[i], lo[i], hi[i]);
        }
        double dist2 = fair_distance_squared(m, x, cur.data(), d);
        double objective = smooth_loss(model, cur.data(), y) - cfg.lambda * dist2;
        if (!std::isfinite(objective)) {
            rep.non_finite = true;
            break;
        }
        if (objective > rep.objective) {
            rep.objective = objective;
            rep.dist2 = dist2;
            best = cur;
        }
    }
    if (report != nullptr) *report = rep;
    return best;
}

SmoothClassifier train_sensr(const TabularDataset& ds, const FairMetric& m,
                             const SensrConfig& cfg,
                             std::vector<std::string>* epoch_log) {
    validate(cfg);
    if (!m.feature_names.empty() && m.feature_names != ds.feature_names) {
        throw SchemaError("train_sensr: metric features do not match the dataset");
    }
    if (m.dim() != ds.features.cols) {
        throw SchemaError("train_sensr: metric dimension != dataset features");
    }

    double cur_lambda = cfg.lambda;
    double sum_clean = 0.0, sum_dist = 0.0;
    std::size_t count = 0;
    double initial_adv = 0.0;

    TrainHooks hooks;
    hooks.perturb = [&](const SmoothClassifier& model, const double* x, int y,
                        double* x_adv) {
        sum_clean += smooth_loss(model, x, y);
        SensrConfig inner = cfg;
        inner.lambda = cur_lambda;
        PerturbReport rep;
        auto best = worst_case_perturb(model, m, x, y, inner, &rep);
        std::copy(best.begin(), best.end(), x_adv);
        sum_dist += std::sqrt(std::max(rep.dist2, 0.0));
        count += 1;
    };
    hooks.on_epoch_end = [&](int epoch, double adv_loss) {
        auto denom = static_cast<double>(std::max<std::size_t>(count, 1));
        double clean = sum_clean / denom;
        double dist = sum_dist / denom;
        sum_clean = sum_dist = 0.0;
        count = 0;

        if (epoch_log != nullptr) {
            nlohmann::json line;
            line["adv_loss"] = adv_loss;
            line["clean_loss"] = clean;
            line["epoch"] = epoch;
            line["lambda"] = cur_lambda;
            line["mean_perturb_dist"] = dist;
            epoch_log->push_back(line.dump());
        }

        if (epoch == 1) {
            initial_adv = adv_loss;
        } else if (adv_loss > 1e3 * initial_adv) {
            throw ConfigError("train_sensr: diverged at epoch " + std::to_string(epoch) +
                              " (adversarial loss " + std::to_string(adv_loss) +
                              " > 1000x initial " + std::to_string(initial_adv) + ")");
        }

        if (cfg.auto_tune && cfg.eps_train > 0.0 && cfg.steps > 0) {
            if (dist > 1.2 * cfg.eps_train) {
                cur_lambda *= 1.25;
            } else if (dist < 0.8 * cfg.eps_train) {
                cur_lambda /= 1.25;
            }
        }
    };

    return train_smooth_loop(ds, cfg.train, &hooks);
}

}  // namespace fairtab
