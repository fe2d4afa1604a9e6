#include <cstdlib>
#include <filesystem>
#include <string>
#include <sys/wait.h>
#include <vector>

#include <doctest.h>
#include <json.hpp>

#include "fairtab/checksum.hpp"
#include "fairtab/cli.hpp"
#include "fairtab/errors.hpp"
#include "fairtab/io.hpp"
#include "fairtab/synthetic.hpp"

using namespace fairtab;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path fresh_dir(const std::string& name) {
    fs::path dir = fs::temp_directory_path() / ("fairtab_cli_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

// Input-schema config for a small, fast pipeline (also written to disk for
// the subprocess tests, so it must stay loadable by the strict parser).
json small_config_json(const fs::path& dir, std::uint64_t seed) {
    json j;
    j["data_csv"] = (dir / "data.csv").string();
    j["output_dir"] = (dir / "out").string();
    j["label_column"] = "approve";
    j["sensitive_column"] = "gender";
    j["seed"] = seed;
    j["baseline_nn"] = {{"epochs", 4}, {"batch_size", 32}, {"hidden", json::array({6})}};
    j["sensr"] = {{"steps", 3}, {"step_size", 0.2}, {"eps_train", 0.4}};
    j["baseline_gbt"] = {{"rounds", 6}};
    j["ifgb"] = {{"eps_lp", 0.02}, {"candidate_cap", 20}};
    j["evaluate"] = {{"epsilon_count", 6}};
    return j;
}

RunConfig small_config(const fs::path& dir, std::size_t rows = 600, std::uint64_t seed = 3) {
    SyntheticSpec spec;
    spec.rows = rows;
    spec.seed = 40 + seed;
    TabularDataset ds = synthetic_credit(spec);
    write_csv(ds, (dir / "data.csv").string(), "approve", "gender");
    return run_config_from_json(small_config_json(dir, seed).dump());
}

std::string slurp(const fs::path& p) { return read_file(p.string()); }

int run_bin(const std::string& args) {
    std::string cmd = std::string(FAIRTAB_BIN) + " " + args + " >/dev/null 2>&1";
    int rc = std::system(cmd.c_str());
    REQUIRE(rc != -1);
    return WEXITSTATUS(rc);
}

void write_config_file(const fs::path& dir, std::uint64_t seed, const fs::path& path) {
    write_file_atomic(path.string(), small_config_json(dir, seed).dump(2) + "\n");
}

}  // namespace

TEST_CASE("config defaults are materialized and sections inherit") {
    RunConfig cfg = run_config_from_json(R"({
        "data_csv": "d.csv", "output_dir": "out",
        "baseline_nn": {"epochs": 7, "hidden": [5, 4], "activation": "tanh"},
        "baseline_gbt": {"rounds": 9, "max_depth": 2}
    })");
    CHECK(cfg.sensr.train.epochs == 7);
    CHECK(cfg.sensr.train.hidden == std::vector<std::size_t>{5, 4});
    CHECK(cfg.sensr.train.activation == Activation::tanh);
    CHECK(cfg.ifgb.train.rounds == 9);
    CHECK(cfg.ifgb.train.max_depth == 2);
    CHECK(cfg.baseline_nn.seed == cfg.sensr.train.seed);
    CHECK(cfg.baseline_gbt.seed == cfg.ifgb.train.seed);
    CHECK(cfg.split.seed != cfg.metric.seed);
    CHECK(cfg.baseline_nn.seed != cfg.baseline_gbt.seed);

    RunConfig other = run_config_from_json(R"({"data_csv": "d.csv", "output_dir": "out"})");
    CHECK(other.seed == 0);
    CHECK(other.split.seed == cfg.split.seed);  // same master seed, same stages

    RunConfig reseeded = other;
    reseeded.seed = 1;
    finalize_seeds(reseeded);
    CHECK(reseeded.split.seed != other.split.seed);
}

TEST_CASE("config sections can override inherited training fields") {
    RunConfig cfg = run_config_from_json(R"({
        "data_csv": "d.csv", "output_dir": "out",
        "baseline_nn": {"epochs": 7},
        "sensr": {"epochs": 3, "steps": 2},
        "ifgb": {"rounds": 4}
    })");
    CHECK(cfg.baseline_nn.epochs == 7);
    CHECK(cfg.sensr.train.epochs == 3);
    CHECK(cfg.sensr.steps == 2);
    CHECK(cfg.baseline_gbt.rounds == 50);
    CHECK(cfg.ifgb.train.rounds == 4);
}

TEST_CASE("config rejects unknown keys and bad values") {
    CHECK_THROWS_AS(run_config_from_json(R"({"data_csv":"d","output_dir":"o","typo":1})"),
                    ConfigError);
    CHECK_THROWS_AS(
        run_config_from_json(R"({"data_csv":"d","output_dir":"o","split":{"metric_frac":0.1}})"),
        ConfigError);
    CHECK_THROWS_AS(
        run_config_from_json(R"({"data_csv":"d","output_dir":"o","sensr":{"lambda_":1}})"),
        ConfigError);
    CHECK_THROWS_AS(run_config_from_json(R"({"data_csv":"d","output_dir":"o","seed":"x"})"),
                    ConfigError);
    CHECK_THROWS_AS(
        run_config_from_json(R"({"data_csv":"d","output_dir":"o","baseline_nn":{"hidden":[]}})"),
        ConfigError);
    CHECK_THROWS_AS(run_config_from_json(
                        R"({"data_csv":"d","output_dir":"o","baseline_nn":{"activation":"elu"}})"),
                    ConfigError);
    CHECK_THROWS_AS(run_config_from_json(R"({"output_dir":"o"})"), ConfigError);
    CHECK_THROWS_AS(run_config_from_json(R"({"data_csv":"d"})"), ConfigError);
    CHECK_THROWS_AS(run_config_from_json("not json"), ConfigError);
}

TEST_CASE("split writes a disjoint exhaustive manifest and honors force") {
    fs::path dir = fresh_dir("split");
    RunConfig cfg = small_config(dir);
    cmd_split(cfg, false);

    fs::path out(cfg.output_dir);
    for (const char* name :
         {"split_manifest.json", "main_train.csv", "metric_train.csv", "test.csv",
          "preprocess.json"}) {
        CHECK(fs::exists(out / name));
    }
    json man = json::parse(slurp(out / "split_manifest.json"));
    auto main_idx = man["indices"]["main_train"].get<std::vector<std::size_t>>();
    auto metric_idx = man["indices"]["metric_train"].get<std::vector<std::size_t>>();
    auto test_idx = man["indices"]["test"].get<std::vector<std::size_t>>();
    std::vector<std::size_t> all = main_idx;
    all.insert(all.end(), metric_idx.begin(), metric_idx.end());
    all.insert(all.end(), test_idx.begin(), test_idx.end());
    std::sort(all.begin(), all.end());
    REQUIRE(all.size() == man["row_count"].get<std::size_t>());
    for (std::size_t i = 0; i < all.size(); ++i) REQUIRE(all[i] == i);
    CHECK(man["rows"]["main_train"].get<std::size_t>() == main_idx.size());

    // purged sensitive column in main_train only
    CHECK(slurp(out / "main_train.csv").find("gender") == std::string::npos);
    CHECK(slurp(out / "metric_train.csv").find("gender") != std::string::npos);
    CHECK(slurp(out / "test.csv").find("gender") != std::string::npos);

    CHECK_THROWS_AS(cmd_split(cfg, false), ConfigError);

    std::string before = slurp(out / "split_manifest.json");
    std::string csv_before = slurp(out / "main_train.csv");
    cmd_split(cfg, true);
    CHECK(slurp(out / "split_manifest.json") == before);
    CHECK(slurp(out / "main_train.csv") == csv_before);
}

TEST_CASE("learn-metric records provenance checksums that match") {
    fs::path dir = fresh_dir("metric");
    RunConfig cfg = small_config(dir);
    cmd_split(cfg, false);
    cmd_learn_metric(cfg);

    fs::path out(cfg.output_dir);
    json rep = json::parse(slurp(out / "metric_report.json"));
    CHECK(rep["manifest_checksum"].get<std::string>() ==
          checksum_hex(slurp(out / "split_manifest.json")));
    CHECK(rep["metric_checksum"].get<std::string>() == checksum_hex(slurp(out / "metric.json")));
    CHECK(rep["subspace_dim"].get<std::size_t>() >= 1);
    CHECK(rep["holdout_accuracy"].get<double>() > 0.8);  // spur makes gender easy

    FairMetric m = load_metric((out / "metric.json").string());
    CHECK(m.k() >= 1);
}

TEST_CASE("train requires a metric for fair methods only") {
    fs::path dir = fresh_dir("needmetric");
    RunConfig cfg = small_config(dir);
    cmd_split(cfg, false);
    CHECK_NOTHROW(cmd_train(cfg, "baseline-nn"));
    CHECK_NOTHROW(cmd_train(cfg, "baseline-gbt"));
    CHECK_THROWS_WITH_AS(cmd_train(cfg, "sensr"),
                         doctest::Contains("metric required"), ConfigError);
    CHECK_THROWS_WITH_AS(cmd_train(cfg, "ifgb"),
                         doctest::Contains("metric required"), ConfigError);
    CHECK_THROWS_AS(cmd_train(cfg, "xgboost"), ConfigError);
}

TEST_CASE("sensr with zero steps reproduces the baseline-nn model bit for bit") {
    fs::path dir = fresh_dir("steps0");
    RunConfig cfg = small_config(dir);
    cmd_split(cfg, false);
    cmd_learn_metric(cfg);
    cmd_train(cfg, "baseline-nn");
    RunConfig frozen = cfg;
    frozen.sensr.steps = 0;
    cmd_train(frozen, "sensr");

    fs::path out(cfg.output_dir);
    json nn = json::parse(slurp(out / "model_baseline-nn.json"));
    json sr = json::parse(slurp(out / "model_sensr.json"));
    CHECK(nn["model"].dump() == sr["model"].dump());
    CHECK(nn["provenance"]["metric_checksum"].is_null());
    CHECK(sr["provenance"]["metric_checksum"].is_string());
}

TEST_CASE("ifgb with zero budget matches baseline-gbt predictions") {
    fs::path dir = fresh_dir("eps0");
    RunConfig cfg = small_config(dir);
    cmd_split(cfg, false);
    cmd_learn_metric(cfg);
    cmd_train(cfg, "baseline-gbt");
    RunConfig frozen = cfg;
    frozen.ifgb.eps_lp = 0.0;
    cmd_train(frozen, "ifgb");

    fs::path out(cfg.output_dir);
    BoostedEnsemble base = boosted_from_json(
        json::parse(slurp(out / "model_baseline-gbt.json"))["model"].dump());
    BoostedEnsemble fair = boosted_from_json(
        json::parse(slurp(out / "model_ifgb.json"))["model"].dump());
    TabularDataset test_ds =
        load_csv((out / "test.csv").string(), cfg.label_column, cfg.sensitive_column);
    TabularDataset pre = apply_preprocess(
        recipe_from_json(slurp(out / "preprocess.json")), test_ds);
    std::vector<double> pb = predict_proba(base, pre.features);
    std::vector<double> pf = predict_proba(fair, pre.features);
    REQUIRE(pb.size() == pf.size());
    for (std::size_t i = 0; i < pb.size(); ++i) {
        CHECK(std::abs(pb[i] - pf[i]) <= 1e-9);
    }
}

TEST_CASE("tampered split manifest trips the isolation check") {
    fs::path dir = fresh_dir("tamper");
    RunConfig cfg = small_config(dir);
    cmd_split(cfg, false);
    cmd_learn_metric(cfg);

    fs::path out(cfg.output_dir);
    fs::path manifest = out / "split_manifest.json";
    json man = json::parse(slurp(manifest));
    man["indices"]["metric_train"][0] = man["indices"]["main_train"][0];  // inject overlap
    write_file_atomic(manifest.string(), man.dump(2) + "\n");

    CHECK_THROWS_AS(cmd_train(cfg, "sensr"), IsolationError);
    CHECK_THROWS_AS(cmd_train(cfg, "ifgb"), IsolationError);
    CHECK_THROWS_AS(cmd_evaluate(cfg, {}), IsolationError);
}

TEST_CASE("manifest rewrite after learn-metric is refused even when disjoint") {
    fs::path dir = fresh_dir("rewrite");
    RunConfig cfg = small_config(dir);
    cmd_split(cfg, false);
    cmd_learn_metric(cfg);

    fs::path out(cfg.output_dir);
    fs::path manifest = out / "split_manifest.json";
    json man = json::parse(slurp(manifest));
    // swap one index between main_train and test: still disjoint + exhaustive
    auto a = man["indices"]["main_train"][0];
    man["indices"]["main_train"][0] = man["indices"]["test"][0];
    man["indices"]["test"][0] = a;
    write_file_atomic(manifest.string(), man.dump(2) + "\n");

    CHECK_THROWS_AS(cmd_train(cfg, "sensr"), IsolationError);
}

TEST_CASE("tampered split csv is an integrity error") {
    fs::path dir = fresh_dir("integrity");
    RunConfig cfg = small_config(dir);
    cmd_split(cfg, false);
    fs::path csv = fs::path(cfg.output_dir) / "main_train.csv";
    std::string text = slurp(csv);
    text += "1,50.0,0.3,10,5,0.5,40,0.9,own\n";
    write_file_atomic(csv.string(), text);
    CHECK_THROWS_AS(cmd_train(cfg, "baseline-gbt"), IntegrityError);
}

TEST_CASE("evaluate produces a consolidated deterministic report") {
    fs::path dir = fresh_dir("eval");
    RunConfig cfg = small_config(dir, 700);
    cmd_split(cfg, false);
    cmd_learn_metric(cfg);
    cmd_train(cfg, "baseline-nn");
    cmd_train(cfg, "sensr");
    cmd_evaluate(cfg, {});

    fs::path out(cfg.output_dir);
    json rep = json::parse(slurp(out / "report.json"));
    REQUIRE(rep["models"].size() == 2);
    REQUIRE(rep["models"].contains("baseline-nn"));
    REQUIRE(rep["models"].contains("sensr"));
    std::size_t grid_n = rep["epsilon_grid"].size();
    CHECK(grid_n == cfg.evaluate.epsilon_count);
    for (const auto& name : {"baseline-nn", "sensr"}) {
        const json& e = rep["models"][name];
        CHECK(e["ifm"]["epsilons"].size() == grid_n);
        CHECK(e["ifm"]["values"].size() == grid_n);
        CHECK(e["groups"]["reference"].get<std::string>() == "Male");
        CHECK(e["groups"]["rows"].size() == 2);
        CHECK(e["groups"]["diff"].is_object());  // Male minus Female
        double acc = e["accuracy"].get<double>();
        CHECK(acc >= 0.0);
        CHECK(acc <= 1.0);
        CHECK(fs::exists(out / ("roc_" + std::string(name) + ".csv")));
        CHECK(fs::exists(out / ("ifm_" + std::string(name) + ".csv")));
    }
    // diff row is reference minus other for every rate
    const json& g = rep["models"]["baseline-nn"]["groups"];
    const json& rows = g["rows"];
    REQUIRE(rows[0]["group"] == "Female");
    REQUIRE(rows[1]["group"] == "Male");
    if (rows[0]["accuracy"].is_number() && rows[1]["accuracy"].is_number()) {
        CHECK(g["diff"]["accuracy"].get<double>() ==
              doctest::Approx(rows[1]["accuracy"].get<double>() -
                              rows[0]["accuracy"].get<double>())
                  .epsilon(1e-12));
    }

    std::string report_before = slurp(out / "report.json");
    std::string roc_before = slurp(out / "roc_sensr.csv");
    std::string ifm_before = slurp(out / "ifm_sensr.csv");
    cmd_evaluate(cfg, {});
    CHECK(slurp(out / "report.json") == report_before);
    CHECK(slurp(out / "roc_sensr.csv") == roc_before);
    CHECK(slurp(out / "ifm_sensr.csv") == ifm_before);

    cmd_evaluate(cfg, {"sensr"});
    json solo = json::parse(slurp(out / "report.json"));
    CHECK(solo["models"].size() == 1);
    CHECK_THROWS_AS(cmd_evaluate(cfg, {"ifgb"}), DataError);       // not trained
    CHECK_THROWS_AS(cmd_evaluate(cfg, {"mystery"}), ConfigError);  // not a method
}

TEST_CASE("evaluate rejects a model with foreign feature names") {
    fs::path dir = fresh_dir("schema");
    RunConfig cfg = small_config(dir);
    cmd_split(cfg, false);
    cmd_learn_metric(cfg);
    cmd_train(cfg, "baseline-nn");

    fs::path model = fs::path(cfg.output_dir) / "model_baseline-nn.json";
    json mf = json::parse(slurp(model));
    mf["model"]["feature_names"][0] = "wages";
    write_file_atomic(model.string(), mf.dump(2) + "\n");
    CHECK_THROWS_AS(cmd_evaluate(cfg, {"baseline-nn"}), SchemaError);
}

TEST_CASE("full pipeline rerun is byte-identical") {
    fs::path dir = fresh_dir("determinism");
    RunConfig cfg = small_config(dir, 500);
    auto run_all = [&cfg]() {
        cmd_split(cfg, true);
        cmd_learn_metric(cfg);
        cmd_train(cfg, "baseline-gbt");
        cmd_train(cfg, "ifgb");
        cmd_evaluate(cfg, {});
    };
    run_all();
    fs::path out(cfg.output_dir);
    std::vector<std::string> names = {"split_manifest.json", "preprocess.json",
                                      "metric.json",         "metric_report.json",
                                      "model_baseline-gbt.json", "model_ifgb.json",
                                      "train_log_ifgb.jsonl",    "report.json",
                                      "roc_ifgb.csv",            "ifm_ifgb.csv"};
    std::vector<std::string> before;
    for (const auto& n : names) before.push_back(slurp(out / n));
    run_all();
    for (std::size_t i = 0; i < names.size(); ++i) {
        CAPTURE(names[i]);
        CHECK(slurp(out / names[i]) == before[i]);
    }
}

TEST_CASE("cli binary maps errors to documented exit codes") {
    fs::path dir = fresh_dir("bin");
    RunConfig cfg = small_config(dir);
    fs::path cfg_path = dir / "run.json";
    write_config_file(dir, 3, cfg_path);
    std::string c = " --config " + cfg_path.string();

    CHECK(run_bin("--help") == 0);
    CHECK(run_bin("") == 2);                        // subcommand required
    CHECK(run_bin("split") == 2);                   // --config required
    CHECK(run_bin("frobnicate" + c) == 2);          // unknown subcommand
    CHECK(run_bin("split --config /nope.json") == 2);

    CHECK(run_bin("split" + c) == 0);
    CHECK(run_bin("split" + c) == 2);               // refuses without --force
    CHECK(run_bin("split" + c + " --force") == 0);
    CHECK(run_bin("train --method sensr" + c) == 2);  // metric required
    CHECK(run_bin("learn-metric" + c) == 0);
    CHECK(run_bin("train --method baseline-nn" + c) == 0);
    CHECK(run_bin("train --method sensr" + c) == 0);
    CHECK(run_bin("train --method turbo" + c) == 2);
    CHECK(run_bin("evaluate" + c) == 0);

    // missing data file -> 3
    fs::path bad_cfg = dir / "bad.json";
    json bad = small_config_json(dir, 3);
    bad["data_csv"] = (dir / "missing.csv").string();
    bad["output_dir"] = (dir / "out_bad").string();
    write_file_atomic(bad_cfg.string(), bad.dump(2) + "\n");
    CHECK(run_bin("split --config " + bad_cfg.string()) == 3);

    // tampered manifest -> 4
    fs::path manifest = fs::path(cfg.output_dir) / "split_manifest.json";
    json man = json::parse(slurp(manifest));
    man["indices"]["metric_train"][0] = man["indices"]["main_train"][0];
    write_file_atomic(manifest.string(), man.dump(2) + "\n");
    CHECK(run_bin("train --method sensr" + c) == 4);
    CHECK(run_bin("evaluate" + c) == 4);
}

TEST_CASE("cli binary honors output and seed overrides") {
    fs::path dir = fresh_dir("overrides");
    RunConfig cfg = small_config(dir);
    fs::path cfg_path = dir / "run.json";
    write_config_file(dir, 3, cfg_path);
    fs::path alt = dir / "alt_out";

    CHECK(run_bin("split --config " + cfg_path.string() + " --output " + alt.string()) == 0);
    CHECK(fs::exists(alt / "split_manifest.json"));
    CHECK(!fs::exists(fs::path(cfg.output_dir) / "split_manifest.json"));

    // a different seed must change the split
    CHECK(run_bin("split --config " + cfg_path.string() + " --output " + alt.string() +
                  " --seed 99 --force") == 0);
    json man = json::parse(slurp(alt / "split_manifest.json"));
    CHECK(man["seed"].get<std::uint64_t>() != cfg.split.seed);
}

TEST_CASE("synthetic credit data has the planted structure") {
    SyntheticSpec spec;
    spec.rows = 4000;
    spec.seed = 5;
    TabularDataset ds = synthetic_credit(spec);
    REQUIRE(ds.n_rows() == 4000);
    REQUIRE(ds.feature_names.size() == 7);
    REQUIRE(ds.cat_names == std::vector<std::string>{"housing"});
    REQUIRE(ds.has_sensitive());

    // spur separates the groups by construction
    double male_spur = 0.0, female_spur = 0.0;
    std::size_t males = 0;
    std::size_t positives = 0;
    for (std::size_t i = 0; i < ds.n_rows(); ++i) {
        if (ds.sensitive[i] == "Male") {
            male_spur += ds.features.at(i, 6);
            ++males;
        } else {
            female_spur += ds.features.at(i, 6);
        }
        positives += static_cast<std::size_t>(ds.labels[i]);
    }
    male_spur /= static_cast<double>(males);
    female_spur /= static_cast<double>(ds.n_rows() - males);
    CHECK(male_spur > 0.8);
    CHECK(female_spur < -0.8);
    double male_frac = static_cast<double>(males) / 4000.0;
    CHECK(male_frac > 0.45);
    CHECK(male_frac < 0.60);
    double pos_rate = static_cast<double>(positives) / 4000.0;
    CHECK(pos_rate > 0.35);
    CHECK(pos_rate < 0.70);

    TabularDataset again = synthetic_credit(spec);
    CHECK(again.features.data == ds.features.data);
    CHECK(again.labels == ds.labels);
    CHECK_THROWS_AS(synthetic_credit(SyntheticSpec{.rows = 0}), ArgumentError);
}
