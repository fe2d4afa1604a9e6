#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "fairtab/dataset.hpp"
#include "fairtab/matrix.hpp"

namespace fairtab {

enum class Activation { relu, tanh };

struct TrainConfig {
    // smooth model
    int epochs = 40;
    std::size_t batch_size = 64;  // 0 = full batch (no shuffling)
    double learning_rate = 0.05;
    double momentum = 0.9;
    std::vector<std::size_t> hidden = {32};
    Activation activation = Activation::relu;
    // boosted model
    int rounds = 50;
    int max_depth = 3;
    double min_leaf_weight = 1.0;  // minimum hessian mass per child
    double tree_l2 = 1.0;
    double tree_learning_rate = 0.2;
    // shared
    double threshold = 0.5;
    std::uint64_t seed = 0;
};

// Feed-forward binary classifier; single output logit.
struct SmoothClassifier {
    std::vector<std::size_t> layer_sizes;  // input, hidden..., 1
    std::vector<Matrix> weights;           // weights[l]: out x in
    std::vector<std::vector<double>> biases;
    Activation activation = Activation::relu;
    std::vector<std::string> feature_names;

    double logit(const double* x) const;
    double proba(const double* x) const;
};

// Hidden layers get seeded normal init scaled by 1/sqrt(fan_in); the output
// layer starts at zero so an untrained net predicts 0.5 everywhere.
SmoothClassifier init_smooth(std::size_t n_features, const TrainConfig& cfg,
                             std::vector<std::string> feature_names);

// binary cross-entropy of the model output against y, computed from logits
double smooth_loss(const SmoothClassifier& model, const double* x, int y);

// d loss(h(x), y) / d x via backpropagation
std::vector<double> input_gradient(const SmoothClassifier& model, const double* x, int y);

// Hooks that turn the plain training loop into adversarial training. The
// loop copies each sample into a buffer and, when `perturb` is set, lets the
// hook overwrite it before the gradient step, so an inert hook is
// arithmetically identical to no hook at all.
struct TrainHooks {
    std::function<void(const SmoothClassifier&, const double* x, int y, double* x_adv)> perturb;
    std::function<void(int epoch, double mean_loss)> on_epoch_end;
};

// Mini-batch SGD with momentum on mean BCE. Deterministic in cfg.seed; full
// batch mode consumes no randomness beyond initialization.
SmoothClassifier train_smooth_loop(const TabularDataset& ds, const TrainConfig& cfg,
                                   const TrainHooks* hooks);

SmoothClassifier train_smooth(const TabularDataset& ds, const TrainConfig& cfg);

struct TreeNode {
    int feature = -1;  // -1 marks a leaf
    double threshold = 0.0;
    double leaf_value = 0.0;
    int left = -1;
    int right = -1;
};

struct Tree {
    std::vector<TreeNode> nodes;  // nodes[0] is the root
    double eval(const double* x) const;
};

struct BoostedEnsemble {
    std::vector<Tree> trees;
    double learning_rate = 0.2;
    double base_score = 0.0;  // prior log-odds, clamped
    std::vector<std::string> feature_names;
    std::vector<std::string> warnings;

    // sigmoid(base_score + learning_rate * sum of tree outputs)
    double margin(const double* x) const;
    double proba(const double* x) const;
};

// Called before each round with the current per-sample margins; returns
// per-sample weights summing to n. Uniform weights reproduce plain boosting.
using WeightProvider =
    std::function<std::vector<double>(int round, const std::vector<double>& margins)>;

BoostedEnsemble boost_loop(const TabularDataset& ds, const TrainConfig& cfg,
                           const WeightProvider& provider);

// Exact greedy second-order boosting on logistic loss. `weights`, when
// given, must be nonnegative; they are normalized to sum to n.
BoostedEnsemble train_boosted(const TabularDataset& ds, const TrainConfig& cfg,
                              const std::vector<double>* weights = nullptr);

std::vector<double> predict_proba(const SmoothClassifier& model, const Matrix& x);
std::vector<double> predict_proba(const BoostedEnsemble& model, const Matrix& x);
std::vector<int> predict_label(const std::vector<double>& proba, double threshold);

std::string smooth_to_json(const SmoothClassifier& model);
SmoothClassifier smooth_from_json(const std::string& text);
std::string boosted_to_json(const BoostedEnsemble& model);
BoostedEnsemble boosted_from_json(const std::string& text);

double sigmoid(double z);
double bce_from_logit(double z, int y);

}  // namespace fairtab
