#include "fairtab/synthetic.hpp"

#include <algorithm>
#include <cmath>

#include "fairtab/errors.hpp"
#include "fairtab/models.hpp"
#include "fairtab/rng.hpp"

namespace fairtab {

TabularDataset synthetic_credit(const SyntheticSpec& spec) {
    if (spec.rows == 0) throw ArgumentError("synthetic_credit: rows must be positive");
    if (!(spec.spur_noise > 0.0)) {
        throw ArgumentError("synthetic_credit: spur_noise must be positive");
    }
    const std::size_t n = spec.rows;

    TabularDataset ds;
    ds.feature_names = {"income", "debt_ratio", "history_len", "num_accounts",
                        "utilization", "age", "spur"};
    ds.features = Matrix(n, ds.feature_names.size());
    ds.cat_names = {"housing"};
    ds.cat_columns.resize(1);
    ds.cat_columns[0].reserve(n);
    ds.labels.reserve(n);
    ds.sensitive.reserve(n);

    Rng rng(mix_seed(spec.seed, 0x5c7ed17));
    for (std::size_t i = 0; i < n; ++i) {
        double g = rng.next_double() < 0.52 ? 1.0 : -1.0;
        double n_inc = rng.next_normal();
        double n_debt = rng.next_normal();
        double n_hist = rng.next_normal();
        double n_acct = rng.next_normal();
        double n_util = rng.next_normal();
        double n_age = rng.next_normal();
        double n_spur = rng.next_normal();
        double u_house = rng.next_double();
        double u_label = rng.next_double();

        ds.features.at(i, 0) = 28.0 + 42.0 * std::exp(0.45 * n_inc);
        ds.features.at(i, 1) = std::clamp(0.32 + 0.16 * n_debt, 0.0, 1.2);
        ds.features.at(i, 2) = std::clamp(11.0 + 6.0 * n_hist, 0.0, 40.0);
        ds.features.at(i, 3) = std::max(0.0, std::round(6.0 + 2.5 * n_acct));
        ds.features.at(i, 4) = std::clamp(0.5 + 0.24 * n_util, 0.0, 1.0);
        ds.features.at(i, 5) = std::clamp(42.0 + 13.0 * n_age, 18.0, 88.0);
        ds.features.at(i, 6) = spec.spur_strength * g + spec.spur_noise * n_spur;

        const char* housing = u_house < 0.30 ? "mortgage" : (u_house < 0.70 ? "own" : "rent");
        ds.cat_columns[0].push_back(housing);
        ds.sensitive.push_back(g > 0.0 ? "Male" : "Female");

        double housing_term = u_house < 0.30 ? 0.0 : (u_house < 0.70 ? 0.25 : -0.25);
        double logit = 0.1 + 1.0 * n_inc - 1.2 * n_debt + 0.8 * n_hist + 0.3 * n_acct -
                       0.7 * n_util + 0.25 * n_age + housing_term + spec.label_bias * g;
        ds.labels.push_back(u_label < sigmoid(logit) ? 1 : 0);
    }
    return ds;
}

}  // namespace fairtab
