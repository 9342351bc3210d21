#include "panelml/stats.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <sstream>

#include "panelml/errors.hpp"

namespace panelml {

std::vector<double> fractional_ranks(const std::vector<double>& v) {
    std::vector<std::size_t> order(v.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });

    std::vector<double> ranks(v.size());
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t j = i;
        while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
        double mean_rank = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
        for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = mean_rank;
        i = j + 1;
    }
    return ranks;
}

std::optional<double> spearman(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size()) throw DataError("spearman: length mismatch");
    if (x.size() < 2) return std::nullopt;
    auto rx = fractional_ranks(x);
    auto ry = fractional_ranks(y);

    double n = static_cast<double>(x.size());
    double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / n;
    double my = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < rx.size(); ++i) {
        double dx = rx[i] - mx;
        double dy = ry[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if (sxx == 0.0 || syy == 0.0) return std::nullopt;
    double rho = sxy / std::sqrt(sxx * syy);
    return std::clamp(rho, -1.0, 1.0);
}

std::optional<double> spearman_cells(const std::vector<Cell>& x, const std::vector<Cell>& y) {
    if (x.size() != y.size()) throw DataError("spearman: length mismatch");
    std::vector<double> xs, ys;
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (x[i].is_absent() || y[i].is_absent()) continue;
        xs.push_back(x[i].as_double());
        ys.push_back(y[i].as_double());
    }
    return spearman(xs, ys);
}

CorrelationMatrix correlation_matrix(const LongTable& table) {
    std::size_t p = table.var_indices.size();
    if (p < 2) throw DataError("correlation_matrix: need at least two variables");

    CorrelationMatrix m;
    m.names = table.column_names();
    m.rho.assign(p, std::vector<std::optional<double>>(p, std::nullopt));

    std::vector<std::vector<Cell>> cols(p);
    for (std::size_t i = 0; i < p; ++i) {
        cols[i].reserve(table.row_count());
        for (const auto& r : table.rows) cols[i].push_back(r.cells[i]);
    }
    for (std::size_t i = 0; i < p; ++i) {
        for (std::size_t j = i; j < p; ++j) {
            auto rho = spearman_cells(cols[i], cols[j]);
            m.rho[i][j] = rho;
            m.rho[j][i] = rho;
        }
    }
    return m;
}

std::string CorrelationMatrix::to_csv() const {
    std::ostringstream out;
    out << "variable";
    for (const auto& n : names) out << "," << n;
    out << "\n";
    out.precision(17);
    for (std::size_t i = 0; i < names.size(); ++i) {
        out << names[i];
        for (std::size_t j = 0; j < names.size(); ++j) {
            out << ",";
            if (rho[i][j]) out << *rho[i][j];
        }
        out << "\n";
    }
    return out.str();
}

std::vector<std::string> prune_correlated(const CorrelationMatrix& m, double threshold,
                                          const std::vector<std::string>& keep_policy) {
    if (!(threshold > 0.0 && threshold <= 1.0)) {
        throw UsageError("prune threshold must be in (0, 1]");
    }
    std::size_t p = m.names.size();

    // Union-find over variables linked by |rho| >= threshold.
    std::vector<std::size_t> parent(p);
    std::iota(parent.begin(), parent.end(), std::size_t{0});
    std::function<std::size_t(std::size_t)> find = [&](std::size_t x) {
        while (parent[x] != x) x = parent[x] = parent[parent[x]];
        return x;
    };
    for (std::size_t i = 0; i < p; ++i) {
        for (std::size_t j = i + 1; j < p; ++j) {
            if (m.rho[i][j] && std::abs(*m.rho[i][j]) >= threshold) {
                parent[find(i)] = find(j);
            }
        }
    }

    auto policy_rank = [&](const std::string& name) -> std::size_t {
        for (std::size_t k = 0; k < keep_policy.size(); ++k) {
            if (keep_policy[k] == name) return k;
        }
        return keep_policy.size();
    };

    // Per component: keep the best-ranked member (policy order, then
    // matrix order).
    std::vector<int> keeper(p, -1);
    for (std::size_t i = 0; i < p; ++i) {
        std::size_t root = find(i);
        if (keeper[root] < 0) {
            keeper[root] = static_cast<int>(i);
            continue;
        }
        auto cur = static_cast<std::size_t>(keeper[root]);
        if (policy_rank(m.names[i]) < policy_rank(m.names[cur])) {
            keeper[root] = static_cast<int>(i);
        }
    }

    std::vector<std::string> kept;
    for (std::size_t i = 0; i < p; ++i) {
        if (keeper[find(i)] == static_cast<int>(i)) kept.push_back(m.names[i]);
    }
    return kept;
}

}  // namespace panelml
