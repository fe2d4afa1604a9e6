#include "fairtab/cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <initializer_list>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "fairtab/checksum.hpp"
#include "fairtab/errors.hpp"
#include "fairtab/io.hpp"
#include "fairtab/rng.hpp"

namespace fairtab {

namespace fs = std::filesystem;
using nlohmann::json;

const std::vector<std::string> kMethods = {"baseline-nn", "sensr", "baseline-gbt", "ifgb"};

namespace {

json parse_config_json(const std::string& text, const std::string& what) {
    try {
        return json::parse(text);
    } catch (const json::exception& e) {
        throw ConfigError(what + ": " + e.what());
    }
}

json parse_artifact_json(const std::string& text, const std::string& what) {
    try {
        return json::parse(text);
    } catch (const json::exception& e) {
        throw DataError(what + ": " + e.what());
    }
}

void reject_unknown(const json& j, const std::string& prefix,
                    std::initializer_list<const char*> keys) {
    if (!j.is_object()) {
        throw ConfigError("config section " +
                          (prefix.empty() ? std::string("(top level)") : prefix) +
                          " must be a JSON object");
    }
    for (const auto& item : j.items()) {
        bool known = false;
        for (const char* k : keys) {
            if (item.key() == k) {
                known = true;
                break;
            }
        }
        if (!known) throw ConfigError("unknown config key: " + prefix + item.key());
    }
}

template <typename T>
void read_field(const json& j, const char* key, const std::string& prefix, T& out) {
    auto it = j.find(key);
    if (it == j.end()) return;
    try {
        it->get_to(out);
    } catch (const json::exception&) {
        throw ConfigError("config key " + prefix + key + " has the wrong type");
    }
}

void read_activation(const json& j, const std::string& prefix, Activation& out) {
    auto it = j.find("activation");
    if (it == j.end()) return;
    std::string s;
    try {
        it->get_to(s);
    } catch (const json::exception&) {
        throw ConfigError("config key " + prefix + "activation has the wrong type");
    }
    if (s == "relu") {
        out = Activation::relu;
    } else if (s == "tanh") {
        out = Activation::tanh;
    } else {
        throw ConfigError("config key " + prefix + "activation must be \"relu\" or \"tanh\"");
    }
}

constexpr std::initializer_list<const char*> kNnKeys = {
    "epochs", "batch_size", "learning_rate", "momentum", "hidden", "activation", "threshold"};
constexpr std::initializer_list<const char*> kGbtKeys = {
    "rounds", "max_depth", "min_leaf_weight", "tree_l2", "tree_learning_rate", "threshold"};

void read_nn_fields(const json& j, const std::string& prefix, TrainConfig& t) {
    read_field(j, "epochs", prefix, t.epochs);
    read_field(j, "batch_size", prefix, t.batch_size);
    read_field(j, "learning_rate", prefix, t.learning_rate);
    read_field(j, "momentum", prefix, t.momentum);
    read_field(j, "hidden", prefix, t.hidden);
    read_activation(j, prefix, t.activation);
    read_field(j, "threshold", prefix, t.threshold);
}

void read_gbt_fields(const json& j, const std::string& prefix, TrainConfig& t) {
    read_field(j, "rounds", prefix, t.rounds);
    read_field(j, "max_depth", prefix, t.max_depth);
    read_field(j, "min_leaf_weight", prefix, t.min_leaf_weight);
    read_field(j, "tree_l2", prefix, t.tree_l2);
    read_field(j, "tree_learning_rate", prefix, t.tree_learning_rate);
    read_field(j, "threshold", prefix, t.threshold);
}

void check_hidden(const TrainConfig& t, const std::string& prefix) {
    if (t.hidden.empty()) throw ConfigError("config key " + prefix + "hidden must be non-empty");
    for (std::size_t h : t.hidden) {
        if (h < 1 || h > 65536) {
            throw ConfigError("config key " + prefix + "hidden entries must be in [1, 65536]");
        }
    }
}

json nn_fields_json(const TrainConfig& t) {
    json j;
    j["epochs"] = t.epochs;
    j["batch_size"] = t.batch_size;
    j["learning_rate"] = t.learning_rate;
    j["momentum"] = t.momentum;
    j["hidden"] = t.hidden;
    j["activation"] = t.activation == Activation::relu ? "relu" : "tanh";
    j["threshold"] = t.threshold;
    j["seed"] = t.seed;
    return j;
}

json gbt_fields_json(const TrainConfig& t) {
    json j;
    j["rounds"] = t.rounds;
    j["max_depth"] = t.max_depth;
    j["min_leaf_weight"] = t.min_leaf_weight;
    j["tree_l2"] = t.tree_l2;
    j["tree_learning_rate"] = t.tree_learning_rate;
    j["threshold"] = t.threshold;
    j["seed"] = t.seed;
    return j;
}

std::string config_checksum(const RunConfig& cfg) { return checksum_hex(run_config_to_json(cfg)); }

struct Manifest {
    json j;
    std::string checksum;  // of the manifest file bytes
};

Manifest load_manifest(const fs::path& dir) {
    fs::path p = dir / "split_manifest.json";
    if (!fs::exists(p)) {
        throw DataError("missing artifact split_manifest.json: run split first");
    }
    std::string bytes = read_file(p.string());
    Manifest man;
    man.j = parse_artifact_json(bytes, "split_manifest.json");
    man.checksum = checksum_hex(bytes);
    return man;
}

// Checks the on-disk artifact against the checksum recorded at split time.
void verify_artifact(const fs::path& dir, const json& manifest, const std::string& name) {
    fs::path p = dir / name;
    if (!fs::exists(p)) throw DataError("missing artifact " + name + ": run split first");
    std::string got = checksum_hex(read_file(p.string()));
    std::string want = manifest.at("files").at(name).get<std::string>();
    if (got != want) {
        throw IntegrityError(name + " does not match the checksum in split_manifest.json");
    }
}

std::vector<std::size_t> manifest_indices(const json& manifest, const char* split) {
    try {
        return manifest.at("indices").at(split).get<std::vector<std::size_t>>();
    } catch (const json::exception& e) {
        throw DataError(std::string("split_manifest.json indices.") + split + ": " + e.what());
    }
}

// The externally auditable isolation contract: the three index sets must
// partition [0, row_count), and the metric must have been learned against
// this exact manifest.
void verify_isolation(const fs::path& dir, const Manifest& man) {
    std::vector<std::size_t> all = manifest_indices(man.j, "main_train");
    std::vector<std::size_t> metric_idx = manifest_indices(man.j, "metric_train");
    std::vector<std::size_t> test_idx = manifest_indices(man.j, "test");
    all.insert(all.end(), metric_idx.begin(), metric_idx.end());
    all.insert(all.end(), test_idx.begin(), test_idx.end());
    std::sort(all.begin(), all.end());
    std::size_t row_count = man.j.at("row_count").get<std::size_t>();
    bool ok = all.size() == row_count;
    for (std::size_t i = 0; ok && i < all.size(); ++i) ok = all[i] == i;
    if (!ok) {
        throw IsolationError(
            "split manifest index sets are not disjoint and exhaustive; refusing to proceed");
    }
    fs::path rep_path = dir / "metric_report.json";
    if (fs::exists(rep_path)) {
        json rep = parse_artifact_json(read_file(rep_path.string()), "metric_report.json");
        if (rep.at("manifest_checksum").get<std::string>() != man.checksum) {
            throw IsolationError(
                "metric was learned against a different split manifest; rerun learn-metric");
        }
    }
}

void write_csv_atomic(const TabularDataset& ds, const fs::path& path, const RunConfig& cfg) {
    fs::path tmp = path;
    tmp += ".tmp";
    write_csv(ds, tmp.string(), cfg.label_column, cfg.sensitive_column);
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) {
        fs::remove(tmp, ec);
        throw DataError("rename failed: " + path.string());
    }
}

json num_or_null(double v) {
    if (std::isnan(v)) return nullptr;
    return v;
}

std::string join_lines(const std::vector<std::string>& lines) {
    std::string out;
    for (const auto& l : lines) {
        out += l;
        out += '\n';
    }
    return out;
}

PreprocessRecipe load_recipe(const fs::path& dir) {
    fs::path p = dir / "preprocess.json";
    if (!fs::exists(p)) throw DataError("missing artifact preprocess.json: run split first");
    return recipe_from_json(read_file(p.string()));
}

std::string load_metric_text(const fs::path& dir, const std::string& stage) {
    fs::path p = dir / "metric.json";
    if (!fs::exists(p)) {
        throw ConfigError("metric required: run learn-metric before " + stage);
    }
    return read_file(p.string());
}

}  // namespace

void finalize_seeds(RunConfig& cfg) {
    cfg.split.seed = mix_seed(cfg.seed, 0x5b117);
    cfg.metric.seed = mix_seed(cfg.seed, 0x3e71c);
    std::uint64_t nn_seed = mix_seed(cfg.seed, 0x2e702);
    cfg.baseline_nn.seed = nn_seed;
    cfg.sensr.train.seed = nn_seed;
    std::uint64_t gbt_seed = mix_seed(cfg.seed, 0x9b005);
    cfg.baseline_gbt.seed = gbt_seed;
    cfg.ifgb.train.seed = gbt_seed;
    cfg.evaluate.seed = mix_seed(cfg.seed, 0xe7a1);
}

RunConfig run_config_from_json(const std::string& text) {
    json j = parse_config_json(text, "config");
    reject_unknown(j, "",
                   {"data_csv", "output_dir", "label_column", "sensitive_column", "seed", "split",
                    "metric", "baseline_nn", "sensr", "baseline_gbt", "ifgb", "evaluate"});
    RunConfig cfg;
    read_field(j, "data_csv", "", cfg.data_csv);
    read_field(j, "output_dir", "", cfg.output_dir);
    read_field(j, "label_column", "", cfg.label_column);
    read_field(j, "sensitive_column", "", cfg.sensitive_column);
    read_field(j, "seed", "", cfg.seed);
    if (cfg.data_csv.empty()) throw ConfigError("config key data_csv is required");
    if (cfg.output_dir.empty()) throw ConfigError("config key output_dir is required");
    if (cfg.label_column.empty()) throw ConfigError("config key label_column must be non-empty");
    if (cfg.sensitive_column.empty()) {
        throw ConfigError("config key sensitive_column must be non-empty");
    }

    if (auto it = j.find("split"); it != j.end()) {
        reject_unknown(*it, "split.", {"metric_fraction", "test_fraction", "stratify_on_label"});
        read_field(*it, "metric_fraction", "split.", cfg.split.metric_fraction);
        read_field(*it, "test_fraction", "split.", cfg.split.test_fraction);
        read_field(*it, "stratify_on_label", "split.", cfg.split.stratify_on_label);
    }
    if (auto it = j.find("metric"); it != j.end()) {
        reject_unknown(*it, "metric.", {"k_extra", "l2", "pair_budget", "drop_tol", "max_iter"});
        read_field(*it, "k_extra", "metric.", cfg.metric.k_extra);
        read_field(*it, "l2", "metric.", cfg.metric.l2);
        read_field(*it, "pair_budget", "metric.", cfg.metric.pair_budget);
        read_field(*it, "drop_tol", "metric.", cfg.metric.drop_tol);
        read_field(*it, "max_iter", "metric.", cfg.metric.max_iter);
    }
    if (auto it = j.find("baseline_nn"); it != j.end()) {
        reject_unknown(*it, "baseline_nn.", kNnKeys);
        read_nn_fields(*it, "baseline_nn.", cfg.baseline_nn);
    }
    cfg.sensr.train = cfg.baseline_nn;
    if (auto it = j.find("sensr"); it != j.end()) {
        reject_unknown(*it, "sensr.",
                       {"steps", "step_size", "lambda", "eps_train", "auto_tune", "epochs",
                        "batch_size", "learning_rate", "momentum", "hidden", "activation",
                        "threshold"});
        read_field(*it, "steps", "sensr.", cfg.sensr.steps);
        read_field(*it, "step_size", "sensr.", cfg.sensr.step_size);
        read_field(*it, "lambda", "sensr.", cfg.sensr.lambda);
        read_field(*it, "eps_train", "sensr.", cfg.sensr.eps_train);
        read_field(*it, "auto_tune", "sensr.", cfg.sensr.auto_tune);
        read_nn_fields(*it, "sensr.", cfg.sensr.train);
    }
    if (auto it = j.find("baseline_gbt"); it != j.end()) {
        reject_unknown(*it, "baseline_gbt.", kGbtKeys);
        read_gbt_fields(*it, "baseline_gbt.", cfg.baseline_gbt);
    }
    cfg.ifgb.train = cfg.baseline_gbt;
    if (auto it = j.find("ifgb"); it != j.end()) {
        reject_unknown(*it, "ifgb.",
                       {"eps_lp", "candidate_cap", "rounds", "max_depth", "min_leaf_weight",
                        "tree_l2", "tree_learning_rate", "threshold"});
        read_field(*it, "eps_lp", "ifgb.", cfg.ifgb.eps_lp);
        read_field(*it, "candidate_cap", "ifgb.", cfg.ifgb.candidate_cap);
        read_gbt_fields(*it, "ifgb.", cfg.ifgb.train);
    }
    if (auto it = j.find("evaluate"); it != j.end()) {
        reject_unknown(*it, "evaluate.",
                       {"epsilon_count", "pair_budget", "lipschitz_l", "threshold",
                        "roc_thresholds"});
        read_field(*it, "epsilon_count", "evaluate.", cfg.evaluate.epsilon_count);
        read_field(*it, "pair_budget", "evaluate.", cfg.evaluate.pair_budget);
        read_field(*it, "lipschitz_l", "evaluate.", cfg.evaluate.lipschitz_l);
        read_field(*it, "threshold", "evaluate.", cfg.evaluate.threshold);
        read_field(*it, "roc_thresholds", "evaluate.", cfg.evaluate.roc_thresholds);
    }
    check_hidden(cfg.baseline_nn, "baseline_nn.");
    check_hidden(cfg.sensr.train, "sensr.");
    finalize_seeds(cfg);
    return cfg;
}

RunConfig load_run_config(const std::string& path) {
    if (!fs::exists(path)) throw ConfigError("config file not found: " + path);
    return run_config_from_json(read_file(path));
}

std::string run_config_to_json(const RunConfig& cfg) {
    json j;
    j["data_csv"] = cfg.data_csv;
    j["output_dir"] = cfg.output_dir;
    j["label_column"] = cfg.label_column;
    j["sensitive_column"] = cfg.sensitive_column;
    j["seed"] = cfg.seed;
    j["split"] = {{"metric_fraction", cfg.split.metric_fraction},
                  {"test_fraction", cfg.split.test_fraction},
                  {"stratify_on_label", cfg.split.stratify_on_label},
                  {"seed", cfg.split.seed}};
    j["metric"] = {{"k_extra", cfg.metric.k_extra},
                   {"l2", cfg.metric.l2},
                   {"pair_budget", cfg.metric.pair_budget},
                   {"drop_tol", cfg.metric.drop_tol},
                   {"max_iter", cfg.metric.max_iter},
                   {"seed", cfg.metric.seed}};
    j["baseline_nn"] = nn_fields_json(cfg.baseline_nn);
    json sensr = nn_fields_json(cfg.sensr.train);
    sensr["steps"] = cfg.sensr.steps;
    sensr["step_size"] = cfg.sensr.step_size;
    sensr["lambda"] = cfg.sensr.lambda;
    sensr["eps_train"] = cfg.sensr.eps_train;
    sensr["auto_tune"] = cfg.sensr.auto_tune;
    j["sensr"] = sensr;
    j["baseline_gbt"] = gbt_fields_json(cfg.baseline_gbt);
    json ifgb = gbt_fields_json(cfg.ifgb.train);
    ifgb["eps_lp"] = cfg.ifgb.eps_lp;
    ifgb["candidate_cap"] = cfg.ifgb.candidate_cap;
    j["ifgb"] = ifgb;
    j["evaluate"] = {{"epsilon_count", cfg.evaluate.epsilon_count},
                     {"pair_budget", cfg.evaluate.pair_budget},
                     {"lipschitz_l", cfg.evaluate.lipschitz_l},
                     {"threshold", cfg.evaluate.threshold},
                     {"roc_thresholds", cfg.evaluate.roc_thresholds},
                     {"seed", cfg.evaluate.seed}};
    return j.dump(2) + "\n";
}

void cmd_split(const RunConfig& cfg, bool force) {
    fs::path dir(cfg.output_dir);
    fs::create_directories(dir);
    fs::path manifest_path = dir / "split_manifest.json";
    if (fs::exists(manifest_path) && !force) {
        throw ConfigError("split_manifest.json already exists in " + cfg.output_dir +
                          "; pass --force to overwrite");
    }
    if (!fs::exists(cfg.data_csv)) throw DataError("cannot open file: " + cfg.data_csv);
    std::string raw = read_file(cfg.data_csv);
    TabularDataset ds = load_csv(cfg.data_csv, cfg.label_column, cfg.sensitive_column);
    SplitResult res = three_way_split(ds, cfg.split);

    write_csv_atomic(res.main_train, dir / "main_train.csv", cfg);
    write_csv_atomic(res.metric_train, dir / "metric_train.csv", cfg);
    write_csv_atomic(res.test, dir / "test.csv", cfg);
    PreprocessRecipe recipe = fit_preprocess(res.main_train);
    std::string recipe_json = recipe_to_json(recipe);
    write_file_atomic((dir / "preprocess.json").string(), recipe_json);

    json manifest;
    manifest["data_checksum"] = checksum_hex(raw);
    manifest["data_csv"] = cfg.data_csv;
    manifest["label_column"] = cfg.label_column;
    manifest["sensitive_column"] = cfg.sensitive_column;
    manifest["row_count"] = ds.n_rows();
    manifest["seed"] = cfg.split.seed;
    manifest["config_checksum"] = config_checksum(cfg);
    manifest["split"] = {{"metric_fraction", cfg.split.metric_fraction},
                         {"test_fraction", cfg.split.test_fraction},
                         {"stratify_on_label", cfg.split.stratify_on_label}};
    manifest["rows"] = {{"main_train", res.main_train.n_rows()},
                        {"metric_train", res.metric_train.n_rows()},
                        {"test", res.test.n_rows()}};
    manifest["indices"] = {{"main_train", res.main_indices},
                           {"metric_train", res.metric_indices},
                           {"test", res.test_indices}};
    manifest["files"] = {
        {"main_train.csv", checksum_hex(read_file((dir / "main_train.csv").string()))},
        {"metric_train.csv", checksum_hex(read_file((dir / "metric_train.csv").string()))},
        {"test.csv", checksum_hex(read_file((dir / "test.csv").string()))},
        {"preprocess.json", checksum_hex(recipe_json)}};
    write_file_atomic(manifest_path.string(), manifest.dump(2) + "\n");
}

void cmd_learn_metric(const RunConfig& cfg) {
    fs::path dir(cfg.output_dir);
    Manifest man = load_manifest(dir);
    verify_artifact(dir, man.j, "metric_train.csv");
    verify_artifact(dir, man.j, "preprocess.json");

    TabularDataset metric_ds =
        load_csv((dir / "metric_train.csv").string(), cfg.label_column, cfg.sensitive_column);
    metric_ds.role = Role::metric_train;
    PreprocessRecipe recipe = load_recipe(dir);
    TabularDataset pre = apply_preprocess(recipe, metric_ds);

    MetricFitResult fit = learn_sensitive_subspace(pre, cfg.metric);
    std::string metric_json = metric_to_json(fit.metric);
    write_file_atomic((dir / "metric.json").string(), metric_json);

    json rep;
    rep["converged"] = fit.report.converged;
    rep["holdout_accuracy"] = fit.report.holdout_accuracy;
    rep["iterations"] = fit.report.iterations;
    rep["subspace_dim"] = fit.report.subspace_dim;
    rep["epsilon_default"] = fit.metric.epsilon_default;
    rep["manifest_checksum"] = man.checksum;
    rep["metric_checksum"] = checksum_hex(metric_json);
    rep["config_checksum"] = config_checksum(cfg);
    rep["seed"] = cfg.metric.seed;
    rep["options"] = {{"k_extra", cfg.metric.k_extra},
                      {"l2", cfg.metric.l2},
                      {"pair_budget", cfg.metric.pair_budget}};
    write_file_atomic((dir / "metric_report.json").string(), rep.dump(2) + "\n");
}

void cmd_train(const RunConfig& cfg, const std::string& method) {
    if (std::find(kMethods.begin(), kMethods.end(), method) == kMethods.end()) {
        throw ConfigError("unknown method: " + method +
                          " (expected baseline-nn, sensr, baseline-gbt or ifgb)");
    }
    fs::path dir(cfg.output_dir);
    Manifest man = load_manifest(dir);
    verify_artifact(dir, man.j, "main_train.csv");
    verify_artifact(dir, man.j, "preprocess.json");

    const bool fair = method == "sensr" || method == "ifgb";
    FairMetric metric;
    std::string metric_checksum;
    if (fair) {
        std::string metric_text = load_metric_text(dir, "training " + method);
        verify_isolation(dir, man);
        metric_checksum = checksum_hex(metric_text);
        metric = metric_from_json(metric_text);
    }

    TabularDataset train_ds =
        load_csv((dir / "main_train.csv").string(), cfg.label_column, std::nullopt);
    train_ds.role = Role::main_train;
    PreprocessRecipe recipe = load_recipe(dir);
    TabularDataset pre = apply_preprocess(recipe, train_ds);
    if (fair && metric.feature_names != pre.feature_names) {
        throw SchemaError("metric feature names do not match the training data");
    }

    std::vector<std::string> log;
    json model_json;
    if (method == "baseline-nn") {
        TrainHooks hooks;
        hooks.on_epoch_end = [&log](int epoch, double mean_loss) {
            json line;
            line["epoch"] = epoch;
            line["loss"] = mean_loss;
            log.push_back(line.dump());
        };
        SmoothClassifier model = train_smooth_loop(pre, cfg.baseline_nn, &hooks);
        model_json = json::parse(smooth_to_json(model));
    } else if (method == "sensr") {
        SmoothClassifier model = train_sensr(pre, metric, cfg.sensr, &log);
        model_json = json::parse(smooth_to_json(model));
    } else if (method == "baseline-gbt") {
        const std::vector<int>& labels = pre.labels;
        WeightProvider provider = [&labels, &log](int round,
                                                  const std::vector<double>& margins) {
            double total = 0.0;
            for (std::size_t i = 0; i < margins.size(); ++i) {
                total += bce_from_logit(margins[i], labels[i]);
            }
            json line;
            line["mean_loss"] = total / static_cast<double>(margins.size());
            line["round"] = round;
            log.push_back(line.dump());
            return std::vector<double>(margins.size(), 1.0);
        };
        BoostedEnsemble model = boost_loop(pre, cfg.baseline_gbt, provider);
        model_json = json::parse(boosted_to_json(model));
    } else {
        BoostedEnsemble model = train_ifgb(pre, metric, cfg.ifgb, &log);
        model_json = json::parse(boosted_to_json(model));
    }

    json out;
    out["model"] = model_json;
    out["provenance"] = {
        {"method", method},
        {"trained_on", "main_train.csv"},
        {"config_checksum", config_checksum(cfg)},
        {"data_checksum", man.j.at("data_checksum")},
        {"manifest_checksum", man.checksum},
        {"metric_checksum", fair ? json(metric_checksum) : json(nullptr)},
        {"preprocess_checksum", man.j.at("files").at("preprocess.json")},
        {"seed", fair ? (method == "sensr" ? cfg.sensr.train.seed : cfg.ifgb.train.seed)
                      : (method == "baseline-nn" ? cfg.baseline_nn.seed
                                                 : cfg.baseline_gbt.seed)}};
    write_file_atomic((dir / ("model_" + method + ".json")).string(), out.dump(2) + "\n");
    write_file_atomic((dir / ("train_log_" + method + ".jsonl")).string(), join_lines(log));
}

void cmd_evaluate(const RunConfig& cfg, const std::vector<std::string>& methods_in) {
    fs::path dir(cfg.output_dir);
    Manifest man = load_manifest(dir);
    verify_artifact(dir, man.j, "test.csv");
    verify_artifact(dir, man.j, "preprocess.json");
    std::string metric_text = load_metric_text(dir, "evaluate");
    verify_isolation(dir, man);
    std::string metric_checksum = checksum_hex(metric_text);
    FairMetric metric = metric_from_json(metric_text);

    std::vector<std::string> methods = methods_in;
    if (methods.empty()) {
        for (const auto& name : kMethods) {
            if (fs::exists(dir / ("model_" + name + ".json"))) methods.push_back(name);
        }
        if (methods.empty()) throw ConfigError("no model files found: run train first");
    } else {
        for (const auto& name : methods) {
            if (std::find(kMethods.begin(), kMethods.end(), name) == kMethods.end()) {
                throw ConfigError("unknown method: " + name);
            }
            if (!fs::exists(dir / ("model_" + name + ".json"))) {
                throw DataError("missing artifact model_" + name + ".json: run train first");
            }
        }
    }

    TabularDataset test_ds =
        load_csv((dir / "test.csv").string(), cfg.label_column, cfg.sensitive_column);
    test_ds.role = Role::test;
    PreprocessRecipe recipe = load_recipe(dir);
    TabularDataset pre = apply_preprocess(recipe, test_ds);
    if (metric.feature_names != pre.feature_names) {
        throw SchemaError("metric feature names do not match the test data");
    }

    const EvalConfig& ev = cfg.evaluate;
    std::vector<double> grid =
        default_epsilon_grid(metric, pre, ev.epsilon_count, ev.pair_budget, ev.seed);

    json models_out = json::object();
    for (const auto& method : methods) {
        json mf = parse_artifact_json(read_file((dir / ("model_" + method + ".json")).string()),
                                      "model_" + method + ".json");
        json prov = mf.at("provenance");
        if (prov.at("method").get<std::string>() != method) {
            throw IntegrityError("model_" + method + ".json records method " +
                                 prov.at("method").get<std::string>());
        }
        if (prov.at("manifest_checksum").get<std::string>() != man.checksum) {
            throw IsolationError("model " + method +
                                 " was trained against a different split manifest");
        }
        if (!prov.at("metric_checksum").is_null() &&
            prov.at("metric_checksum").get<std::string>() != metric_checksum) {
            throw IsolationError("model " + method + " was trained against a different metric");
        }

        std::vector<double> proba;
        std::vector<std::string> model_features;
        if (method == "baseline-nn" || method == "sensr") {
            SmoothClassifier model = smooth_from_json(mf.at("model").dump());
            model_features = model.feature_names;
            if (model_features == pre.feature_names) proba = predict_proba(model, pre.features);
        } else {
            BoostedEnsemble model = boosted_from_json(mf.at("model").dump());
            model_features = model.feature_names;
            if (model_features == pre.feature_names) proba = predict_proba(model, pre.features);
        }
        if (model_features != pre.feature_names) {
            throw SchemaError("model " + method + " feature names do not match the test data");
        }

        std::vector<int> predicted = predict_label(proba, ev.threshold);
        IfmCurve curve = ifm(predicted, metric, pre, grid, ev.pair_budget, ev.seed);
        LipschitzAuditResult audit =
            lipschitz_audit(proba, metric, pre, ev.lipschitz_l, ev.pair_budget, ev.seed);
        GroupMetricTable table = group_metrics(proba, pre, ev.threshold);
        std::vector<RocPoint> roc = roc_points(proba, pre.labels, ev.roc_thresholds);

        std::size_t correct = 0;
        for (std::size_t i = 0; i < predicted.size(); ++i) {
            if (predicted[i] == pre.labels[i]) ++correct;
        }

        write_file_atomic((dir / ("roc_" + method + ".csv")).string(), roc_to_csv(roc));
        write_file_atomic((dir / ("ifm_" + method + ".csv")).string(), ifm_to_csv(curve));

        json entry;
        entry["accuracy"] = static_cast<double>(correct) / static_cast<double>(predicted.size());
        entry["auc"] = {{"trapezoid", num_or_null(trapezoid_area(roc))},
                        {"concordance", num_or_null(concordance_auc(proba, pre.labels))}};
        entry["groups"] = json::parse(group_table_to_json(table));
        entry["ifm"] = json::parse(ifm_to_json(curve));
        entry["lipschitz"] = json::parse(lipschitz_to_json(audit));
        entry["provenance"] = prov;
        models_out[method] = entry;
    }

    json report;
    report["epsilon_grid"] = grid;
    report["lipschitz_l"] = ev.lipschitz_l;
    report["threshold"] = ev.threshold;
    report["models"] = models_out;
    report["provenance"] = {{"config_checksum", config_checksum(cfg)},
                            {"data_checksum", man.j.at("data_checksum")},
                            {"manifest_checksum", man.checksum},
                            {"metric_checksum", metric_checksum},
                            {"seed", ev.seed}};
    write_file_atomic((dir / "report.json").string(), report.dump(2) + "\n");
}

int run_cli(int argc, const char* const* argv) {
    CLI::App app{"fairtab: train and audit individually fair tabular classifiers"};
    app.require_subcommand(1);

    std::string config_path;
    std::string output_override;
    std::uint64_t seed_override = 0;
    bool seed_given = false;
    bool force = false;
    std::string method;
    std::vector<std::string> models;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "run config JSON file")->required();
        sub->add_option("--output", output_override, "override output_dir");
        sub->add_option("--seed", seed_override, "override the master seed")
            ->each([&seed_given](const std::string&) { seed_given = true; });
        sub->add_flag("--force", force, "overwrite existing artifacts");
    };

    CLI::App* sub_split =
        app.add_subcommand("split", "three-way split with an isolation manifest");
    add_common(sub_split);
    CLI::App* sub_metric =
        app.add_subcommand("learn-metric", "fit the fair metric on the metric split");
    add_common(sub_metric);
    CLI::App* sub_train = app.add_subcommand("train", "train one model on main_train");
    add_common(sub_train);
    sub_train->add_option("--method", method, "baseline-nn, sensr, baseline-gbt or ifgb")
        ->required();
    CLI::App* sub_eval =
        app.add_subcommand("evaluate", "audit trained models on the test split");
    add_common(sub_eval);
    sub_eval->add_option("--models", models, "methods to evaluate (default: all present)")
        ->delimiter(',');

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        RunConfig cfg = load_run_config(config_path);
        if (!output_override.empty()) cfg.output_dir = output_override;
        if (seed_given) {
            cfg.seed = seed_override;
            finalize_seeds(cfg);
        }
        if (sub_split->parsed()) {
            cmd_split(cfg, force);
        } else if (sub_metric->parsed()) {
            cmd_learn_metric(cfg);
        } else if (sub_train->parsed()) {
            cmd_train(cfg, method);
        } else {
            cmd_evaluate(cfg, models);
        }
        return 0;
    } catch (const IsolationError& e) {
        std::fprintf(stderr, "fairtab: isolation error: %s\n", e.what());
        return 4;
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "fairtab: config error: %s\n", e.what());
        return 2;
    } catch (const DataError& e) {
        std::fprintf(stderr, "fairtab: data error: %s\n", e.what());
        return 3;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "fairtab: error: %s\n", e.what());
        return 3;
    }
}

}  // namespace fairtab
