#pragma once

#include <cstdint>
#include <functional>

#include "panelml/forest.hpp"

namespace panelml {

/// Attribution of one model score to input columns: base is the
/// expected score, phi[i] the contribution of column i, and
/// base + sum(phi) equals the score on the instance (local accuracy).
struct ShapRow {
    double base = 0.0;
    std::vector<double> phi;
    std::vector<double> std_error;  // per-column; empty for exact methods
    int target_class = 0;
    std::int64_t instance_id = 0;

    double total() const;
};

struct ShapMatrix {
    std::vector<std::string> names;  // one per phi entry, uniform across rows
    std::vector<ShapRow> rows;
};

struct FeatureRanking {
    std::vector<std::pair<std::string, double>> entries;  // mean |phi|, descending

    std::string to_csv() const;
};

/// Exact Shapley values of the forest's class score under path-dependent
/// feature removal: a removed feature's split averages both children
/// weighted by training cover. Forest phi is the mean of per-tree phi.
ShapRow tree_shap(const ForestModel& forest, std::span<const double> row,
                  std::span<const std::uint8_t> miss, int target_class,
                  std::int64_t instance_id = 0);

using ScoreFn = std::function<double(std::span<const double>)>;

/// Monte-Carlo permutation Shapley estimate for any score function.
/// Rows must be pre-imputed (no missing mask). Deterministic per seed;
/// std_error carries the per-column standard error of the estimate.
ShapRow sampling_shap(const ScoreFn& score, std::span<const double> row,
                      const std::vector<std::vector<double>>& background, int samples,
                      std::uint64_t seed);

/// Collapse encoded-column attributions back to source variables: the
/// one-hot (and missing-level) columns of one variable sum into a single
/// phi entry. Preserves base and sum(phi) exactly.
ShapRow aggregate_onehot(const ShapRow& row, const std::vector<ColumnDescriptor>& columns);

/// Unique source variables of an encoded layout, first-appearance order;
/// the name axis matching aggregate_onehot output.
std::vector<std::string> source_variables(const std::vector<ColumnDescriptor>& columns);

/// Mean of |phi| over all rows per variable, sorted descending; ties
/// break by variable name.
FeatureRanking mean_abs_ranking(const ShapMatrix& matrix);

/// Beeswarm-ready summary: one CSV row per (instance, variable) with the
/// attribution, the raw feature value (empty when absent) and the
/// feature value's normalized rank in [0,1] across instances.
/// feature_values[r][v] aligns with matrix.rows[r] / matrix.names[v].
std::string shap_summary_export(const ShapMatrix& matrix,
                                const std::vector<std::vector<Cell>>& feature_values);

}  // namespace panelml
