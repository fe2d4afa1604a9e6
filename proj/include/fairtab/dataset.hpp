#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "fairtab/matrix.hpp"

namespace fairtab {

enum class Role { unsplit, metric_train, main_train, test };

const char* role_name(Role r);
Role role_from_name(const std::string& name);

// Immutable after construction. Numeric feature columns live in `features`
// (one matrix column per name in `feature_names`); raw categorical feature
// columns are kept as strings until a PreprocessRecipe encodes them.
// The sensitive column is never part of either block.
struct TabularDataset {
    Matrix features;
    std::vector<std::string> feature_names;
    std::vector<std::vector<std::string>> cat_columns;
    std::vector<std::string> cat_names;
    std::vector<int> labels;                // 0/1
    std::vector<std::string> sensitive;     // empty when absent
    Role role = Role::unsplit;

    std::size_t n_rows() const { return labels.size(); }
    std::size_t n_features() const { return feature_names.size() + cat_names.size(); }
    bool has_sensitive() const { return !sensitive.empty(); }
};

struct SplitSpec {
    // fractions of ALL rows; defaults sized so a 52,588-row file lands on
    // 23,145 / 8,501 / 20,942
    double metric_fraction = 8501.0 / 52588.0;
    double test_fraction = 20942.0 / 52588.0;
    std::uint64_t seed = 0;
    bool stratify_on_label = true;
};

struct SplitResult {
    TabularDataset metric_train;
    TabularDataset main_train;
    TabularDataset test;
    std::vector<std::size_t> metric_indices;  // ascending, into the input rows
    std::vector<std::size_t> main_indices;
    std::vector<std::size_t> test_indices;
};

struct LoadOptions {
    bool drop_missing = true;  // drop rows with empty cells (no imputation)
};

// Header-row CSV, comma-delimited, RFC4180-style quoting. The label column
// must parse to {0,1}; the sensitive column, when named, is split off into
// `sensitive`. Columns where every value parses as a double become numeric,
// anything else is categorical.
TabularDataset load_csv(const std::string& path, const std::string& label_col,
                        const std::optional<std::string>& sensitive_col,
                        const LoadOptions& opts = {});

// Stratified (by label, optionally) three-way split. metric_train and test
// keep the sensitive column; main_train has it purged. Index sets are
// disjoint, exhaustive, and deterministic in the seed.
SplitResult three_way_split(const TabularDataset& ds, const SplitSpec& spec);

// Row subset helper used by the splitter and tests.
TabularDataset take_rows(const TabularDataset& ds, const std::vector<std::size_t>& indices,
                         Role role, bool purge_sensitive);

struct ColumnTransform {
    enum class Kind { standardize, one_hot, passthrough };
    Kind kind = Kind::passthrough;
    std::string name;
    double mean = 0.0;  // standardize
    double std = 1.0;
    std::vector<std::string> categories;  // one_hot, sorted
};

struct PreprocessRecipe {
    std::vector<ColumnTransform> numeric;      // one per feature_names entry
    std::vector<ColumnTransform> categorical;  // one per cat_names entry
    std::vector<std::string> warnings;         // fit-time notes (constant columns)
};

// Fit on training-role data only (metric_train or main_train). Constant
// numeric columns degrade to passthrough with a warning record.
PreprocessRecipe fit_preprocess(const TabularDataset& ds);

// Returns a fully numeric dataset (categorical columns one-hot encoded,
// appended after the numeric block in recipe order). Unseen categories
// encode as all zeros; a note is appended to *warnings when given.
TabularDataset apply_preprocess(const PreprocessRecipe& recipe, const TabularDataset& ds,
                                std::vector<std::string>* warnings = nullptr);

std::string recipe_to_json(const PreprocessRecipe& recipe);
PreprocessRecipe recipe_from_json(const std::string& text);

// Writes label + sensitive (when present) + feature columns; inverse of
// load_csv for split artifacts.
void write_csv(const TabularDataset& ds, const std::string& path,
               const std::string& label_col, const std::string& sensitive_col);

}  // namespace fairtab
