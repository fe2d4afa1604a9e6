#include "fairtab/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include <json.hpp>

#include "fairtab/errors.hpp"
#include "fairtab/rng.hpp"

namespace fairtab {

const char* role_name(Role r) {
    switch (r) {
        case Role::unsplit: return "unsplit";
        case Role::metric_train: return "metric_train";
        case Role::main_train: return "main_train";
        case Role::test: return "test";
    }
    return "unsplit";
}

Role role_from_name(const std::string& name) {
    if (name == "unsplit") return Role::unsplit;
    if (name == "metric_train") return Role::metric_train;
    if (name == "main_train") return Role::main_train;
    if (name == "test") return Role::test;
    throw ArgumentError("unknown role: " + name);
}

namespace {

// RFC4180-style records: quoted fields may contain commas, quotes ("")
// and newlines; accepts LF and CRLF endings.
std::vector<std::vector<std::string>> parse_csv(const std::string& text) {
    std::vector<std::vector<std::string>> rows;
    std::vector<std::string> row;
    std::string field;
    bool in_quotes = false;
    bool field_started = false;

    auto end_field = [&] {
        row.push_back(std::move(field));
        field.clear();
        field_started = false;
    };
    auto end_row = [&] {
        end_field();
        rows.push_back(std::move(row));
        row.clear();
    };

    for (std::size_t i = 0; i < text.size(); ++i) {
        char c = text[i];
        if (in_quotes) {
            if (c == '"') {
                if (i + 1 < text.size() && text[i + 1] == '"') {
                    field += '"';
                    ++i;
                } else {
                    in_quotes = false;
                }
            } else {
                field += c;
            }
            continue;
        }
        switch (c) {
            case '"':
                if (!field_started && field.empty()) {
                    in_quotes = true;
                    field_started = true;
                } else {
                    field += c;
                }
                break;
            case ',':
                end_field();
                break;
            case '\r':
                if (i + 1 < text.size() && text[i + 1] == '\n') {
                    end_row();
                    ++i;
                } else {
                    field += c;
                }
                break;
            case '\n':
                end_row();
                break;
            default:
                field += c;
                field_started = true;
                break;
        }
    }
    if (in_quotes) throw DataError("csv: unterminated quoted field");
    if (field_started || !field.empty() || !row.empty()) end_row();
    return rows;
}

bool parse_finite_double(const std::string& s, double* out) {
    if (s.empty()) return false;
    const char* begin = s.c_str();
    char* end = nullptr;
    double v = std::strtod(begin, &end);
    if (end != begin + s.size()) return false;
    if (!std::isfinite(v)) return false;
    *out = v;
    return true;
}

std::string format_double(double v) {
    char buf[32];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

std::string csv_quote(const std::string& s) {
    if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += "\"\"";
        else out += c;
    }
    out += '"';
    return out;
}

}  // namespace

TabularDataset load_csv(const std::string& path, const std::string& label_col,
                        const std::optional<std::string>& sensitive_col,
                        const LoadOptions& opts) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open file: " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    auto rows = parse_csv(buf.str());
    if (rows.empty()) throw DataError("empty file: " + path);

    const auto& header = rows[0];
    std::size_t n_cols = header.size();
    for (std::size_t i = 1; i < rows.size(); ++i) {
        if (rows[i].size() != n_cols) {
            throw DataError("csv: row " + std::to_string(i - 1) + " has " +
                            std::to_string(rows[i].size()) + " fields, header has " +
                            std::to_string(n_cols));
        }
    }

    auto col_index = [&](const std::string& name) -> std::size_t {
        for (std::size_t j = 0; j < n_cols; ++j)
            if (header[j] == name) return j;
        throw SchemaError("missing column: " + name);
    };
    std::size_t label_idx = col_index(label_col);
    std::size_t sens_idx = n_cols;
    if (sensitive_col) sens_idx = col_index(*sensitive_col);

    // keep rows without empty cells (no imputation beyond drop-row)
    std::vector<std::size_t> kept;
    for (std::size_t i = 1; i < rows.size(); ++i) {
        bool missing = std::any_of(rows[i].begin(), rows[i].end(),
                                   [](const std::string& f) { return f.empty(); });
        if (missing && opts.drop_missing) continue;
        kept.push_back(i);
    }
    if (kept.empty()) throw DataError("no data rows in " + path);

    std::vector<std::size_t> feature_cols;
    for (std::size_t j = 0; j < n_cols; ++j) {
        if (j == label_idx || j == sens_idx) continue;
        feature_cols.push_back(j);
    }

    // a column is numeric when every kept value parses as a finite double
    std::vector<bool> numeric(feature_cols.size(), true);
    std::vector<std::vector<double>> num_vals(feature_cols.size());
    for (std::size_t f = 0; f < feature_cols.size(); ++f) {
        num_vals[f].resize(kept.size());
        for (std::size_t r = 0; r < kept.size(); ++r) {
            if (!parse_finite_double(rows[kept[r]][feature_cols[f]], &num_vals[f][r])) {
                numeric[f] = false;
                break;
            }
        }
    }

    TabularDataset ds;
    ds.role = Role::unsplit;
    for (std::size_t f = 0; f < feature_cols.size(); ++f) {
        if (numeric[f]) ds.feature_names.push_back(header[feature_cols[f]]);
        else ds.cat_names.push_back(header[feature_cols[f]]);
    }
    ds.features = Matrix(kept.size(), ds.feature_names.size());
    ds.cat_columns.resize(ds.cat_names.size());
    for (auto& col : ds.cat_columns) col.resize(kept.size());

    std::size_t num_j = 0, cat_j = 0;
    for (std::size_t f = 0; f < feature_cols.size(); ++f) {
        if (numeric[f]) {
            for (std::size_t r = 0; r < kept.size(); ++r)
                ds.features.at(r, num_j) = num_vals[f][r];
            ++num_j;
        } else {
            for (std::size_t r = 0; r < kept.size(); ++r)
                ds.cat_columns[cat_j][r] = rows[kept[r]][feature_cols[f]];
            ++cat_j;
        }
    }

    ds.labels.resize(kept.size());
    for (std::size_t r = 0; r < kept.size(); ++r) {
        double v = 0.0;
        const std::string& raw = rows[kept[r]][label_idx];
        if (!parse_finite_double(raw, &v) || (v != 0.0 && v != 1.0)) {
            throw DataError("label not in {0,1} at data row " + std::to_string(r) +
                            ": '" + raw + "'");
        }
        ds.labels[r] = static_cast<int>(v);
    }
    if (sensitive_col) {
        ds.sensitive.resize(kept.size());
        for (std::size_t r = 0; r < kept.size(); ++r)
            ds.sensitive[r] = rows[kept[r]][sens_idx];
    }
    return ds;
}

TabularDataset take_rows(const TabularDataset& ds, const std::vector<std::size_t>& indices,
                         Role role, bool purge_sensitive) {
    TabularDataset out;
    out.role = role;
    out.feature_names = ds.feature_names;
    out.cat_names = ds.cat_names;
    out.features = Matrix(indices.size(), ds.features.cols);
    for (std::size_t r = 0; r < indices.size(); ++r)
        for (std::size_t j = 0; j < ds.features.cols; ++j)
            out.features.at(r, j) = ds.features.at(indices[r], j);
    out.cat_columns.resize(ds.cat_columns.size());
    for (std::size_t c = 0; c < ds.cat_columns.size(); ++c) {
        out.cat_columns[c].resize(indices.size());
        for (std::size_t r = 0; r < indices.size(); ++r)
            out.cat_columns[c][r] = ds.cat_columns[c][indices[r]];
    }
    out.labels.resize(indices.size());
    for (std::size_t r = 0; r < indices.size(); ++r) out.labels[r] = ds.labels[indices[r]];
    if (!purge_sensitive && ds.has_sensitive()) {
        out.sensitive.resize(indices.size());
        for (std::size_t r = 0; r < indices.size(); ++r)
            out.sensitive[r] = ds.sensitive[indices[r]];
    }
    return out;
}

namespace {

// Largest-remainder apportionment of `target` across strata with capacities.
std::vector<std::size_t> apportion(const std::vector<std::size_t>& sizes,
                                   const std::vector<std::size_t>& capacity,
                                   std::size_t total, std::size_t target) {
    const std::size_t s = sizes.size();
    std::vector<std::size_t> alloc(s, 0);
    std::vector<double> remainder(s, 0.0);
    std::size_t assigned = 0;
    for (std::size_t i = 0; i < s; ++i) {
        double quota = static_cast<double>(target) * static_cast<double>(sizes[i]) /
                       static_cast<double>(total);
        auto fl = static_cast<std::size_t>(quota);
        alloc[i] = std::min(fl, capacity[i]);
        remainder[i] = quota - static_cast<double>(fl);
        assigned += alloc[i];
    }
    std::vector<std::size_t> order(s);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return remainder[a] > remainder[b];
    });
    std::size_t cursor = 0;
    while (assigned < target) {
        std::size_t i = order[cursor % s];
        if (alloc[i] < capacity[i]) {
            ++alloc[i];
            ++assigned;
        }
        ++cursor;
        if (cursor > 4 * s * (target + 1)) {
            throw ArgumentError("split apportionment failed (capacities too small)");
        }
    }
    return alloc;
}

}  // namespace

SplitResult three_way_split(const TabularDataset& ds, const SplitSpec& spec) {
    if (ds.role != Role::unsplit) throw ArgumentError("three_way_split: dataset already split");
    if (!ds.has_sensitive()) throw ArgumentError("three_way_split: sensitive column required");
    if (!(spec.metric_fraction > 0.0 && spec.metric_fraction < 1.0) ||
        !(spec.test_fraction > 0.0 && spec.test_fraction < 1.0) ||
        spec.metric_fraction + spec.test_fraction >= 1.0) {
        throw ArgumentError("three_way_split: fractions must lie in (0,1) and sum below 1");
    }

    const std::size_t n = ds.n_rows();
    std::map<int, std::vector<std::size_t>> strata;
    if (spec.stratify_on_label) {
        for (std::size_t i = 0; i < n; ++i) strata[ds.labels[i]].push_back(i);
    } else {
        for (std::size_t i = 0; i < n; ++i) strata[0].push_back(i);
    }

    std::vector<std::vector<std::size_t>> groups;
    std::vector<std::size_t> sizes;
    for (auto& [label, idx] : strata) {
        Rng rng(mix_seed(spec.seed, 0x5eed0000ULL + static_cast<std::uint64_t>(label)));
        rng.shuffle(idx);
        sizes.push_back(idx.size());
        groups.push_back(std::move(idx));
    }

    auto metric_target = static_cast<std::size_t>(
        std::llround(spec.metric_fraction * static_cast<double>(n)));
    auto test_target = static_cast<std::size_t>(
        std::llround(spec.test_fraction * static_cast<double>(n)));
    if (metric_target + test_target > n) test_target = n - metric_target;

    std::vector<std::size_t> cap_all = sizes;
    auto metric_alloc = apportion(sizes, cap_all, n, metric_target);
    std::vector<std::size_t> cap_rest(sizes.size());
    for (std::size_t i = 0; i < sizes.size(); ++i) cap_rest[i] = sizes[i] - metric_alloc[i];
    auto test_alloc = apportion(sizes, cap_rest, n, test_target);

    SplitResult out;
    for (std::size_t g = 0; g < groups.size(); ++g) {
        const auto& idx = groups[g];
        std::size_t m = metric_alloc[g];
        std::size_t t = test_alloc[g];
        out.metric_indices.insert(out.metric_indices.end(), idx.begin(), idx.begin() + m);
        out.test_indices.insert(out.test_indices.end(), idx.begin() + m, idx.begin() + m + t);
        out.main_indices.insert(out.main_indices.end(), idx.begin() + m + t, idx.end());
    }
    std::sort(out.metric_indices.begin(), out.metric_indices.end());
    std::sort(out.main_indices.begin(), out.main_indices.end());
    std::sort(out.test_indices.begin(), out.test_indices.end());

    out.metric_train = take_rows(ds, out.metric_indices, Role::metric_train, false);
    out.main_train = take_rows(ds, out.main_indices, Role::main_train, true);
    out.test = take_rows(ds, out.test_indices, Role::test, false);
    return out;
}

PreprocessRecipe fit_preprocess(const TabularDataset& ds) {
    if (ds.role != Role::metric_train && ds.role != Role::main_train) {
        throw ArgumentError("fit_preprocess: recipe must be fitted on a training split");
    }
    const std::size_t n = ds.n_rows();
    if (n == 0) throw DataError("fit_preprocess: empty dataset");

    PreprocessRecipe recipe;
    for (std::size_t j = 0; j < ds.feature_names.size(); ++j) {
        ColumnTransform t;
        t.name = ds.feature_names[j];
        double mean = 0.0;
        for (std::size_t i = 0; i < n; ++i) mean += ds.features.at(i, j);
        mean /= static_cast<double>(n);
        double var = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            double d = ds.features.at(i, j) - mean;
            var += d * d;
        }
        var /= static_cast<double>(n);  // population convention: [2,4] -> [-1,1]
        double sd = std::sqrt(var);
        if (sd < 1e-12) {
            t.kind = ColumnTransform::Kind::passthrough;
            recipe.warnings.push_back("column '" + t.name +
                                      "' is constant on the fitting data; left unstandardized");
        } else {
            t.kind = ColumnTransform::Kind::standardize;
            t.mean = mean;
            t.std = sd;
        }
        recipe.numeric.push_back(std::move(t));
    }
    for (std::size_t c = 0; c < ds.cat_names.size(); ++c) {
        ColumnTransform t;
        t.kind = ColumnTransform::Kind::one_hot;
        t.name = ds.cat_names[c];
        std::set<std::string> seen(ds.cat_columns[c].begin(), ds.cat_columns[c].end());
        t.categories.assign(seen.begin(), seen.end());
        recipe.categorical.push_back(std::move(t));
    }
    return recipe;
}

TabularDataset apply_preprocess(const PreprocessRecipe& recipe, const TabularDataset& ds,
                                std::vector<std::string>* warnings) {
    if (ds.feature_names.size() != recipe.numeric.size()) {
        throw SchemaError("apply_preprocess: numeric column count mismatch");
    }
    for (std::size_t j = 0; j < recipe.numeric.size(); ++j) {
        if (ds.feature_names[j] != recipe.numeric[j].name) {
            throw SchemaError("apply_preprocess: numeric column '" + ds.feature_names[j] +
                              "' does not match recipe column '" + recipe.numeric[j].name + "'");
        }
    }
    if (ds.cat_names.size() != recipe.categorical.size()) {
        throw SchemaError("apply_preprocess: categorical column count mismatch");
    }
    for (std::size_t c = 0; c < recipe.categorical.size(); ++c) {
        if (ds.cat_names[c] != recipe.categorical[c].name) {
            throw SchemaError("apply_preprocess: categorical column '" + ds.cat_names[c] +
                              "' does not match recipe column '" + recipe.categorical[c].name + "'");
        }
    }

    const std::size_t n = ds.n_rows();
    std::size_t out_cols = recipe.numeric.size();
    for (const auto& t : recipe.categorical) out_cols += t.categories.size();

    TabularDataset out;
    out.role = ds.role;
    out.labels = ds.labels;
    out.sensitive = ds.sensitive;
    out.features = Matrix(n, out_cols);

    for (std::size_t j = 0; j < recipe.numeric.size(); ++j) {
        const auto& t = recipe.numeric[j];
        out.feature_names.push_back(t.name);
        for (std::size_t i = 0; i < n; ++i) {
            double v = ds.features.at(i, j);
            out.features.at(i, j) =
                t.kind == ColumnTransform::Kind::standardize ? (v - t.mean) / t.std : v;
        }
    }
    std::size_t col = recipe.numeric.size();
    for (std::size_t c = 0; c < recipe.categorical.size(); ++c) {
        const auto& t = recipe.categorical[c];
        for (const auto& cat : t.categories) out.feature_names.push_back(t.name + "=" + cat);
        std::set<std::string> unseen_reported;
        for (std::size_t i = 0; i < n; ++i) {
            const std::string& v = ds.cat_columns[c][i];
            auto it = std::lower_bound(t.categories.begin(), t.categories.end(), v);
            if (it != t.categories.end() && *it == v) {
                out.features.at(i, col + static_cast<std::size_t>(it - t.categories.begin())) = 1.0;
            } else if (warnings != nullptr && unseen_reported.insert(v).second) {
                warnings->push_back("unseen category '" + v + "' in column '" + t.name +
                                    "' encoded as all zeros");
            }
        }
        col += t.categories.size();
    }
    return out;
}

std::string recipe_to_json(const PreprocessRecipe& recipe) {
    nlohmann::json j;
    j["numeric"] = nlohmann::json::array();
    for (const auto& t : recipe.numeric) {
        nlohmann::json e;
        e["name"] = t.name;
        if (t.kind == ColumnTransform::Kind::standardize) {
            e["kind"] = "standardize";
            e["mean"] = t.mean;
            e["std"] = t.std;
        } else {
            e["kind"] = "passthrough";
        }
        j["numeric"].push_back(e);
    }
    j["categorical"] = nlohmann::json::array();
    for (const auto& t : recipe.categorical) {
        j["categorical"].push_back({{"name", t.name}, {"categories", t.categories}});
    }
    j["warnings"] = recipe.warnings;
    return j.dump(2) + "\n";
}

PreprocessRecipe recipe_from_json(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw IntegrityError(std::string("recipe parse failure: ") + e.what());
    }
    PreprocessRecipe recipe;
    for (const auto& e : j.at("numeric")) {
        ColumnTransform t;
        t.name = e.at("name").get<std::string>();
        std::string kind = e.at("kind").get<std::string>();
        if (kind == "standardize") {
            t.kind = ColumnTransform::Kind::standardize;
            t.mean = e.at("mean").get<double>();
            t.std = e.at("std").get<double>();
        } else {
            t.kind = ColumnTransform::Kind::passthrough;
        }
        recipe.numeric.push_back(std::move(t));
    }
    for (const auto& e : j.at("categorical")) {
        ColumnTransform t;
        t.kind = ColumnTransform::Kind::one_hot;
        t.name = e.at("name").get<std::string>();
        t.categories = e.at("categories").get<std::vector<std::string>>();
        recipe.categorical.push_back(std::move(t));
    }
    recipe.warnings = j.value("warnings", std::vector<std::string>{});
    return recipe;
}

void write_csv(const TabularDataset& ds, const std::string& path,
               const std::string& label_col, const std::string& sensitive_col) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write file: " + path);

    out << csv_quote(label_col);
    if (ds.has_sensitive()) out << ',' << csv_quote(sensitive_col);
    for (const auto& name : ds.feature_names) out << ',' << csv_quote(name);
    for (const auto& name : ds.cat_names) out << ',' << csv_quote(name);
    out << '\n';

    for (std::size_t i = 0; i < ds.n_rows(); ++i) {
        out << ds.labels[i];
        if (ds.has_sensitive()) out << ',' << csv_quote(ds.sensitive[i]);
        for (std::size_t j = 0; j < ds.features.cols; ++j)
            out << ',' << format_double(ds.features.at(i, j));
        for (std::size_t c = 0; c < ds.cat_columns.size(); ++c)
            out << ',' << csv_quote(ds.cat_columns[c][i]);
        out << '\n';
    }
    if (!out) throw DataError("write failed: " + path);
}

}  // namespace fairtab
