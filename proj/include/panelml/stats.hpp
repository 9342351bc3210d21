#pragma once

#include <optional>
#include <string>
#include <vector>

#include "panelml/tables.hpp"

namespace panelml {

/// Spearman rank correlation with average fractional ranks for ties.
/// Pairs with any absent value are dropped first; returns nullopt with
/// fewer than two complete pairs or zero variance on either side.
std::optional<double> spearman(const std::vector<double>& x, const std::vector<double>& y);
std::optional<double> spearman_cells(const std::vector<Cell>& x, const std::vector<Cell>& y);

/// Average fractional ranks (1-based) of v; ties share the mean rank.
std::vector<double> fractional_ranks(const std::vector<double>& v);

struct CorrelationMatrix {
    std::vector<std::string> names;
    // rho[i][j]; nullopt marks undefined pairs. Symmetric, unit diagonal
    // where defined.
    std::vector<std::vector<std::optional<double>>> rho;

    std::string to_csv() const;
};

/// Pairwise-complete Spearman over every variable pair in the table;
/// nominal variables enter through their integer codes.
CorrelationMatrix correlation_matrix(const LongTable& table);

/// Keep one variable per connected group linked by |rho| >= threshold:
/// the first group member found in `keep_policy`, else the first in
/// matrix (codebook) order. Returns kept names in matrix order.
std::vector<std::string> prune_correlated(const CorrelationMatrix& m, double threshold,
                                          const std::vector<std::string>& keep_policy);

}  // namespace panelml
