#include "fairtab/models.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <json.hpp>

#include "fairtab/errors.hpp"
#include "fairtab/kernels.hpp"
#include "fairtab/rng.hpp"

namespace fairtab {

double sigmoid(double z) {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    double e = std::exp(z);
    return e / (1.0 + e);
}

double bce_from_logit(double z, int y) {
    double softplus = z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
    return softplus - static_cast<double>(y) * z;
}

namespace {

double activate(Activation act, double z) {
    return act == Activation::relu ? (z > 0.0 ? z : 0.0) : std::tanh(z);
}

// derivative through the cached activation value (relu uses the preact sign)
double activate_grad(Activation act, double z, double a) {
    return act == Activation::relu ? (z > 0.0 ? 1.0 : 0.0) : 1.0 - a * a;
}

struct ForwardCache {
    std::vector<std::vector<double>> preact;  // z per layer (last = logit)
    std::vector<std::vector<double>> act;     // a per layer, act[0] = input
};

double forward(const SmoothClassifier& m, const double* x, ForwardCache* cache) {
    const std::size_t layers = m.weights.size();
    std::vector<double> cur(x, x + m.layer_sizes[0]);
    if (cache != nullptr) {
        cache->preact.assign(layers, {});
        cache->act.assign(layers + 1, {});
        cache->act[0] = cur;
    }
    for (std::size_t l = 0; l < layers; ++l) {
        const Matrix& w = m.weights[l];
        std::vector<double> z(w.rows);
        for (std::size_t o = 0; o < w.rows; ++o) {
            z[o] = kernels::dot(w.row(o), cur.data(), w.cols) + m.biases[l][o];
        }
        bool last = l + 1 == layers;
        std::vector<double> a(w.rows);
        for (std::size_t o = 0; o < w.rows; ++o) a[o] = last ? z[o] : activate(m.activation, z[o]);
        if (cache != nullptr) {
            cache->preact[l] = z;
            cache->act[l + 1] = a;
        }
        cur = std::move(a);
    }
    return cur[0];
}

struct Grads {
    std::vector<Matrix> weights;
    std::vector<std::vector<double>> biases;

    explicit Grads(const SmoothClassifier& m) {
        for (std::size_t l = 0; l < m.weights.size(); ++l) {
            weights.emplace_back(m.weights[l].rows, m.weights[l].cols);
            biases.emplace_back(m.biases[l].size(), 0.0);
        }
    }
    void zero() {
        for (auto& w : weights) std::fill(w.data.begin(), w.data.end(), 0.0);
        for (auto& b : biases) std::fill(b.begin(), b.end(), 0.0);
    }
};

// accumulates d loss / d params into grads (when non-null); returns the loss
// and optionally the gradient with respect to the input
double backward(const SmoothClassifier& m, const double* x, int y, Grads* grads,
                std::vector<double>* input_grad) {
    ForwardCache cache;
    double logit = forward(m, x, &cache);
    double loss = bce_from_logit(logit, y);
    const std::size_t layers = m.weights.size();

    std::vector<double> delta = {sigmoid(logit) - static_cast<double>(y)};
    for (std::size_t l = layers; l-- > 0;) {
        const Matrix& w = m.weights[l];
        const auto& a_in = cache.act[l];
        if (grads != nullptr) {
            for (std::size_t o = 0; o < w.rows; ++o) {
                kernels::axpy(delta[o], a_in.data(), grads->weights[l].row(o), w.cols);
                grads->biases[l][o] += delta[o];
            }
        }
        if (l == 0 && input_grad == nullptr) break;
        std::vector<double> prev(w.cols, 0.0);
        for (std::size_t o = 0; o < w.rows; ++o) {
            kernels::axpy(delta[o], w.row(o), prev.data(), w.cols);
        }
        if (l == 0) {
            *input_grad = std::move(prev);
            break;
        }
        for (std::size_t i = 0; i < w.cols; ++i) {
            prev[i] *= activate_grad(m.activation, cache.preact[l - 1][i], cache.act[l][i]);
        }
        delta = std::move(prev);
    }
    return loss;
}

void require_trainable(const TabularDataset& ds, const char* what) {
    if (ds.role != Role::main_train) {
        throw ArgumentError(std::string(what) + ": requires the main_train split");
    }
    if (ds.has_sensitive()) {
        throw ArgumentError(std::string(what) + ": sensitive data must not be reachable");
    }
    if (!ds.cat_names.empty()) {
        throw ArgumentError(std::string(what) + ": preprocess categorical features first");
    }
    if (ds.n_rows() == 0) throw DataError(std::string(what) + ": empty dataset");
}

}  // namespace

double SmoothClassifier::logit(const double* x) const { return forward(*this, x, nullptr); }

double SmoothClassifier::proba(const double* x) const { return sigmoid(logit(x)); }

SmoothClassifier init_smooth(std::size_t n_features, const TrainConfig& cfg,
                             std::vector<std::string> feature_names) {
    SmoothClassifier m;
    m.activation = cfg.activation;
    m.feature_names = std::move(feature_names);
    m.layer_sizes.push_back(n_features);
    for (std::size_t h : cfg.hidden) m.layer_sizes.push_back(h);
    m.layer_sizes.push_back(1);

    Rng rng(mix_seed(cfg.seed, 0x1a17ULL));
    for (std::size_t l = 0; l + 1 < m.layer_sizes.size(); ++l) {
        std::size_t fan_in = m.layer_sizes[l];
        std::size_t fan_out = m.layer_sizes[l + 1];
        Matrix w(fan_out, fan_in);
        bool output_layer = l + 2 == m.layer_sizes.size();
        if (!output_layer) {
            double scale = 1.0 / std::sqrt(static_cast<double>(fan_in));
            for (auto& v : w.data) v = scale * rng.next_normal();
        }
        m.weights.push_back(std::move(w));
        m.biases.emplace_back(fan_out, 0.0);
    }
    return m;
}

double smooth_loss(const SmoothClassifier& model, const double* x, int y) {
    return bce_from_logit(model.logit(x), y);
}

std::vector<double> input_gradient(const SmoothClassifier& model, const double* x, int y) {
    std::vector<double> g;
    backward(model, x, y, nullptr, &g);
    return g;
}

SmoothClassifier train_smooth_loop(const TabularDataset& ds, const TrainConfig& cfg,
                                   const TrainHooks* hooks) {
    require_trainable(ds, "train_smooth");
    const std::size_t n = ds.n_rows();
    const std::size_t d = ds.features.cols;

    SmoothClassifier model = init_smooth(d, cfg, ds.feature_names);
    Grads grads(model), velocity(model);

    std::size_t bs = cfg.batch_size == 0 || cfg.batch_size >= n ? n : cfg.batch_size;
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);

    std::vector<double> xbuf(d);
    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        if (bs < n) {
            Rng rng(mix_seed(cfg.seed, 0xba7c4ULL + static_cast<std::uint64_t>(epoch)));
            rng.shuffle(order);
        }
        double epoch_loss = 0.0;
        for (std::size_t start = 0; start < n; start += bs) {
            std::size_t stop = std::min(start + bs, n);
            grads.zero();
            for (std::size_t p = start; p < stop; ++p) {
                std::size_t i = order[p];
                const double* x = ds.features.row(i);
                std::copy(x, x + d, xbuf.begin());
                if (hooks != nullptr && hooks->perturb) {
                    hooks->perturb(model, x, ds.labels[i], xbuf.data());
                }
                double loss = backward(model, xbuf.data(), ds.labels[i], &grads, nullptr);
                if (!std::isfinite(loss)) {
                    throw ConfigError("train_smooth: non-finite loss at epoch " +
                                      std::to_string(epoch) + " (learning rate too high?)");
                }
                epoch_loss += loss;
            }
            auto count = static_cast<double>(stop - start);
            for (std::size_t l = 0; l < model.weights.size(); ++l) {
                for (std::size_t k = 0; k < grads.weights[l].data.size(); ++k) {
                    double g = grads.weights[l].data[k] / count;
                    double& v = velocity.weights[l].data[k];
                    v = cfg.momentum * v - cfg.learning_rate * g;
                    model.weights[l].data[k] += v;
                }
                for (std::size_t k = 0; k < grads.biases[l].size(); ++k) {
                    double g = grads.biases[l][k] / count;
                    double& v = velocity.biases[l][k];
                    v = cfg.momentum * v - cfg.learning_rate * g;
                    model.biases[l][k] += v;
                }
            }
        }
        if (hooks != nullptr && hooks->on_epoch_end) {
            hooks->on_epoch_end(epoch, epoch_loss / static_cast<double>(n));
        }
    }
    return model;
}

SmoothClassifier train_smooth(const TabularDataset& ds, const TrainConfig& cfg) {
    return train_smooth_loop(ds, cfg, nullptr);
}

double Tree::eval(const double* x) const {
    int idx = 0;
    while (nodes[static_cast<std::size_t>(idx)].feature >= 0) {
        const TreeNode& nd = nodes[static_cast<std::size_t>(idx)];
        idx = x[nd.feature] < nd.threshold ? nd.left : nd.right;
    }
    return nodes[static_cast<std::size_t>(idx)].leaf_value;
}

double BoostedEnsemble::margin(const double* x) const {
    double sum = 0.0;
    for (const auto& t : trees) sum += t.eval(x);
    return base_score + learning_rate * sum;
}

double BoostedEnsemble::proba(const double* x) const { return sigmoid(margin(x)); }

namespace {

struct TreeBuilder {
    const Matrix& x;
    const std::vector<double>& g;
    const std::vector<double>& h;
    const TrainConfig& cfg;
    Tree tree;

    int build(std::vector<std::size_t>& rows, int depth) {
        double total_g = 0.0, total_h = 0.0;
        for (std::size_t i : rows) {
            total_g += g[i];
            total_h += h[i];
        }
        int self = static_cast<int>(tree.nodes.size());
        tree.nodes.emplace_back();
        tree.nodes.back().leaf_value = -total_g / (total_h + cfg.tree_l2);

        if (depth >= cfg.max_depth || rows.size() < 2) return self;

        // exact greedy split search; ties keep the lowest feature index and
        // then the lowest threshold because the scan order is ascending
        double parent_score = total_g * total_g / (total_h + cfg.tree_l2);
        double best_gain = 1e-12;
        int best_feature = -1;
        double best_threshold = 0.0;

        std::vector<std::size_t> sorted = rows;
        for (std::size_t j = 0; j < x.cols; ++j) {
            std::sort(sorted.begin(), sorted.end(), [&](std::size_t a, std::size_t b) {
                double va = x.at(a, j), vb = x.at(b, j);
                if (va != vb) return va < vb;
                return a < b;
            });
            double gl = 0.0, hl = 0.0;
            for (std::size_t p = 0; p + 1 < sorted.size(); ++p) {
                gl += g[sorted[p]];
                hl += h[sorted[p]];
                double v = x.at(sorted[p], j);
                double next = x.at(sorted[p + 1], j);
                if (v == next) continue;
                double hr = total_h - hl;
                if (hl < cfg.min_leaf_weight || hr < cfg.min_leaf_weight) continue;
                double gr = total_g - gl;
                double gain = gl * gl / (hl + cfg.tree_l2) + gr * gr / (hr + cfg.tree_l2) -
                              parent_score;
                if (gain > best_gain) {
                    best_gain = gain;
                    best_feature = static_cast<int>(j);
                    best_threshold = v + 0.5 * (next - v);
                }
            }
        }
        if (best_feature < 0) return self;

        std::vector<std::size_t> left, right;
        for (std::size_t i : rows) {
            if (x.at(i, static_cast<std::size_t>(best_feature)) < best_threshold) {
                left.push_back(i);
            } else {
                right.push_back(i);
            }
        }
        if (left.empty() || right.empty()) return self;

        int l = build(left, depth + 1);
        int r = build(right, depth + 1);
        TreeNode& nd = tree.nodes[static_cast<std::size_t>(self)];
        nd.feature = best_feature;
        nd.threshold = best_threshold;
        nd.left = l;
        nd.right = r;
        return self;
    }
};

}  // namespace

BoostedEnsemble boost_loop(const TabularDataset& ds, const TrainConfig& cfg,
                           const WeightProvider& provider) {
    require_trainable(ds, "train_boosted");
    const std::size_t n = ds.n_rows();

    BoostedEnsemble model;
    model.learning_rate = cfg.tree_learning_rate;
    model.feature_names = ds.feature_names;

    double mean_y = 0.0;
    for (int y : ds.labels) mean_y += static_cast<double>(y);
    mean_y /= static_cast<double>(n);
    double p0 = std::clamp(mean_y, 1e-6, 1.0 - 1e-6);
    model.base_score = std::log(p0 / (1.0 - p0));

    if (mean_y == 0.0 || mean_y == 1.0) {
        model.warnings.push_back("all labels identical; returning base-score-only model");
        return model;
    }

    std::vector<double> margins(n, model.base_score);
    std::vector<double> g(n), h(n);
    std::vector<std::size_t> all_rows(n);
    std::iota(all_rows.begin(), all_rows.end(), 0);

    for (int round = 0; round < cfg.rounds; ++round) {
        std::vector<double> w = provider(round, margins);
        require_dim(w.size(), n, "boost weights");
        for (std::size_t i = 0; i < n; ++i) {
            double p = sigmoid(margins[i]);
            g[i] = w[i] * (p - static_cast<double>(ds.labels[i]));
            h[i] = w[i] * p * (1.0 - p);
        }
        TreeBuilder builder{ds.features, g, h, cfg, {}};
        std::vector<std::size_t> rows = all_rows;
        builder.build(rows, 0);
        for (std::size_t i = 0; i < n; ++i) {
            margins[i] += cfg.tree_learning_rate * builder.tree.eval(ds.features.row(i));
        }
        model.trees.push_back(std::move(builder.tree));
    }
    return model;
}

BoostedEnsemble train_boosted(const TabularDataset& ds, const TrainConfig& cfg,
                              const std::vector<double>* weights) {
    require_trainable(ds, "train_boosted");
    const std::size_t n = ds.n_rows();
    std::vector<double> w(n, 1.0);
    if (weights != nullptr) {
        require_dim(weights->size(), n, "train_boosted weights");
        double sum = 0.0;
        for (double v : *weights) {
            if (v < 0.0 || !std::isfinite(v)) {
                throw ArgumentError("train_boosted: weights must be finite and nonnegative");
            }
            sum += v;
        }
        if (sum <= 0.0) throw ArgumentError("train_boosted: weights sum to zero");
        double scale = static_cast<double>(n) / sum;
        for (std::size_t i = 0; i < n; ++i) w[i] = (*weights)[i] * scale;
    }
    return boost_loop(ds, cfg, [&w](int, const std::vector<double>&) { return w; });
}

std::vector<double> predict_proba(const SmoothClassifier& model, const Matrix& x) {
    require_dim(x.cols, model.layer_sizes[0], "predict_proba: features");
    std::vector<double> out(x.rows);
    for (std::size_t i = 0; i < x.rows; ++i) out[i] = model.proba(x.row(i));
    return out;
}

std::vector<double> predict_proba(const BoostedEnsemble& model, const Matrix& x) {
    if (!model.feature_names.empty()) {
        require_dim(x.cols, model.feature_names.size(), "predict_proba: features");
    }
    std::vector<double> out(x.rows);
    for (std::size_t i = 0; i < x.rows; ++i) out[i] = model.proba(x.row(i));
    return out;
}

std::vector<int> predict_label(const std::vector<double>& proba, double threshold) {
    std::vector<int> out(proba.size());
    for (std::size_t i = 0; i < proba.size(); ++i) out[i] = proba[i] >= threshold ? 1 : 0;
    return out;
}

namespace {

nlohmann::json tree_node_json(const Tree& t, int idx) {
    const TreeNode& nd = t.nodes[static_cast<std::size_t>(idx)];
    if (nd.feature < 0) return {{"leaf_value", nd.leaf_value}};
    return {{"feature", nd.feature},
            {"threshold", nd.threshold},
            {"left", tree_node_json(t, nd.left)},
            {"right", tree_node_json(t, nd.right)}};
}

int tree_node_parse(const nlohmann::json& j, Tree& t) {
    int self = static_cast<int>(t.nodes.size());
    t.nodes.emplace_back();
    if (j.contains("leaf_value")) {
        t.nodes[static_cast<std::size_t>(self)].leaf_value = j.at("leaf_value").get<double>();
        return self;
    }
    int feature = j.at("feature").get<int>();
    double threshold = j.at("threshold").get<double>();
    int l = tree_node_parse(j.at("left"), t);
    int r = tree_node_parse(j.at("right"), t);
    TreeNode& nd = t.nodes[static_cast<std::size_t>(self)];
    nd.feature = feature;
    nd.threshold = threshold;
    nd.left = l;
    nd.right = r;
    return self;
}

nlohmann::json parse_or_integrity(const std::string& text, const char* what) {
    try {
        return nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw IntegrityError(std::string(what) + " parse failure: " + e.what());
    }
}

}  // namespace

std::string smooth_to_json(const SmoothClassifier& model) {
    nlohmann::json j;
    j["kind"] = "smooth";
    j["activation"] = model.activation == Activation::relu ? "relu" : "tanh";
    j["layer_sizes"] = model.layer_sizes;
    j["feature_names"] = model.feature_names;
    j["weights"] = nlohmann::json::array();
    j["biases"] = nlohmann::json::array();
    for (std::size_t l = 0; l < model.weights.size(); ++l) {
        nlohmann::json wl = nlohmann::json::array();
        for (std::size_t o = 0; o < model.weights[l].rows; ++o) {
            nlohmann::json row = nlohmann::json::array();
            for (std::size_t i = 0; i < model.weights[l].cols; ++i) {
                row.push_back(model.weights[l].at(o, i));
            }
            wl.push_back(std::move(row));
        }
        j["weights"].push_back(std::move(wl));
        j["biases"].push_back(model.biases[l]);
    }
    return j.dump(2) + "\n";
}

SmoothClassifier smooth_from_json(const std::string& text) {
    nlohmann::json j = parse_or_integrity(text, "smooth model");
    try {
        SmoothClassifier m;
        std::string act = j.at("activation").get<std::string>();
        m.activation = act == "relu" ? Activation::relu : Activation::tanh;
        m.layer_sizes = j.at("layer_sizes").get<std::vector<std::size_t>>();
        m.feature_names = j.at("feature_names").get<std::vector<std::string>>();
        for (std::size_t l = 0; l + 1 < m.layer_sizes.size(); ++l) {
            Matrix w(m.layer_sizes[l + 1], m.layer_sizes[l]);
            const auto& wl = j.at("weights").at(l);
            for (std::size_t o = 0; o < w.rows; ++o)
                for (std::size_t i = 0; i < w.cols; ++i) w.at(o, i) = wl.at(o).at(i).get<double>();
            m.weights.push_back(std::move(w));
            m.biases.push_back(j.at("biases").at(l).get<std::vector<double>>());
        }
        return m;
    } catch (const nlohmann::json::exception& e) {
        throw IntegrityError(std::string("smooth model field failure: ") + e.what());
    }
}

std::string boosted_to_json(const BoostedEnsemble& model) {
    nlohmann::json j;
    j["kind"] = "boosted";
    j["base_score"] = model.base_score;
    j["learning_rate"] = model.learning_rate;
    j["feature_names"] = model.feature_names;
    j["warnings"] = model.warnings;
    j["trees"] = nlohmann::json::array();
    for (const auto& t : model.trees) j["trees"].push_back(tree_node_json(t, 0));
    return j.dump(2) + "\n";
}

BoostedEnsemble boosted_from_json(const std::string& text) {
    nlohmann::json j = parse_or_integrity(text, "boosted model");
    try {
        BoostedEnsemble m;
        m.base_score = j.at("base_score").get<double>();
        m.learning_rate = j.at("learning_rate").get<double>();
        m.feature_names = j.at("feature_names").get<std::vector<std::string>>();
        m.warnings = j.value("warnings", std::vector<std::string>{});
        for (const auto& tj : j.at("trees")) {
            Tree t;
            tree_node_parse(tj, t);
            m.trees.push_back(std::move(t));
        }
        return m;
    } catch (const nlohmann::json::exception& e) {
        throw IntegrityError(std::string("boosted model field failure: ") + e.what());
    }
}

}  // namespace fairtab
