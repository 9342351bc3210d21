#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "panelml/tables.hpp"

namespace panelml {

/// Income classes 1..3; the whole pipeline is a three-class task.
inline constexpr int kNumClasses = 3;
using Scores = std::array<double, kNumClasses>;

/// Income threshold binning: class 1 below the first edge, one class per
/// interval, last class at or above the final edge.
int bin_target(double income, const std::vector<double>& edges);

struct ColumnDescriptor {
    enum class Encoding { Numeric, OneHot, MissingLevel };
    std::string source;  // originating variable
    Encoding encoding = Encoding::Numeric;
    int level = 0;  // category id, OneHot only

    std::string header() const;
    bool operator==(const ColumnDescriptor&) const = default;
};

/// Model-ready numeric matrix. Row-major; absent numeric cells carry a
/// 0.0 placeholder flagged in `missing`.
struct DesignMatrix {
    std::vector<ColumnDescriptor> columns;
    std::size_t n_rows = 0;
    std::vector<double> values;         // n_rows x columns
    std::vector<std::uint8_t> missing;  // same footprint; set only on numeric columns
    std::vector<int> targets;           // class labels, 1..kNumClasses
    std::vector<std::pair<std::int64_t, int>> row_ids;  // (individual id, year)

    std::size_t n_cols() const { return columns.size(); }
    double at(std::size_t r, std::size_t c) const { return values[r * n_cols() + c]; }
    bool is_missing(std::size_t r, std::size_t c) const { return missing[r * n_cols() + c] != 0; }
    std::span<const double> row(std::size_t r) const { return {values.data() + r * n_cols(), n_cols()}; }
    std::span<const std::uint8_t> row_missing(std::size_t r) const {
        return {missing.data() + r * n_cols(), n_cols()};
    }

    /// Restrict to a row subset, preserving order.
    DesignMatrix subset(const std::vector<std::size_t>& rows) const;
    /// Drop every column derived from `variable`.
    DesignMatrix without_variable(const std::string& variable) const;

    std::string to_csv() const;
};

/// Encode kept features: numeric columns copied with a missing mask,
/// nominal columns expanded over their observed levels (plus a
/// missing-level indicator when requested and absences exist). Targets
/// are binned with the codebook's edges.
DesignMatrix encode_design_matrix(const LongTable& table, const std::vector<std::string>& kept,
                                  bool one_hot, bool missing_level);

/// Per-class proportions, summing to 1.
Scores class_distribution(const std::vector<int>& targets);

}  // namespace panelml
