#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "panelml/cell.hpp"
#include "panelml/codebook.hpp"

namespace panelml {

/// One column of the wide layout: a codebook variable, optionally bound
/// to a year (repeated measures get one column per declared year).
struct WideColumn {
    int var_index = -1;
    int year = -1;  // -1 = no year suffix
    std::string header;
};

/// Wide format: one row per individual, year-suffixed columns for
/// repeated measures. Immutable after ingestion.
struct WideTable {
    Codebook codebook;
    std::vector<WideColumn> columns;
    std::vector<std::int64_t> ids;           // one per row
    std::vector<std::vector<Cell>> rows;     // rows[i][c] aligned with columns

    std::size_t row_count() const { return rows.size(); }
    int column_of(int var_index, int year) const;  // -1 when absent
};

/// Long format: one row per (individual, year) observation. Cells are
/// aligned with `var_indices` (codebook variables minus the id column).
struct LongRow {
    std::int64_t id = 0;
    int year = 0;
    std::vector<Cell> cells;
};

struct LongTable {
    Codebook codebook;
    std::vector<int> var_indices;
    std::vector<LongRow> rows;

    std::size_t row_count() const { return rows.size(); }
    /// Position of a variable inside each row's cell vector; -1 when absent.
    int col_of(const std::string& name) const;
    int target_col() const;
    std::vector<std::string> column_names() const;
    /// Distinct years present, ascending.
    std::vector<int> years_present() const;
};

/// Read a wide-format extract. Headers must be `<var>` or `<var>#<year>`
/// exactly as the codebook declares; unknown or missing columns are errors,
/// as are duplicate individual ids.
WideTable ingest_wide_csv(const std::string& path, const Codebook& codebook);
WideTable ingest_wide_string(const std::string& text, const Codebook& codebook, const std::string& origin);

/// Unroll repeated measures: each individual contributes one long row per
/// declared year, with time-invariant cells copied into every year row.
LongTable unroll_longitudinal(const WideTable& wide);

/// Drop rows whose target is absent or negative. Surviving rows are
/// untouched; returns the number of rows removed.
std::pair<LongTable, std::size_t> filter_invalid_target(const LongTable& table);

/// Replace feature cells carrying a declared missing code (or any
/// negative raw code) with the absent marker. Target cells untouched.
LongTable mark_missing(const LongTable& table);

/// Sample `total` rows with an exactly uniform year histogram,
/// without replacement within each year, deterministic per seed.
LongTable balanced_year_sample(const LongTable& table, std::size_t total, std::uint64_t seed);

/// Restrict to rows from one year.
LongTable filter_year(const LongTable& table, int year);

}  // namespace panelml
