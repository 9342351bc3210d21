#include "panelml/shap.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "panelml/errors.hpp"
#include "panelml/model.hpp"
#include "panelml/rng.hpp"
#include "panelml/stats.hpp"

namespace panelml {

double ShapRow::total() const {
    double t = base;
    for (double v : phi) t += v;
    return t;
}

namespace {

// Path bookkeeping for the polynomial-time tree traversal: each element
// tracks one feature on the current root-to-node path with the fraction
// of "feature removed" subsets flowing through (zero) and the fraction
// where the feature is present (one).
struct PathEl {
    int feature;
    double zero;
    double one;
    double weight;
};

void extend(std::vector<PathEl>& m, double pz, double po, int pi) {
    std::size_t l = m.size();
    m.push_back({pi, pz, po, l == 0 ? 1.0 : 0.0});
    for (std::size_t i = l; i-- > 0;) {
        m[i + 1].weight += po * m[i].weight * static_cast<double>(i + 1) / static_cast<double>(l + 1);
        m[i].weight = pz * m[i].weight * static_cast<double>(l - i) / static_cast<double>(l + 1);
    }
}

void unwind(std::vector<PathEl>& m, std::size_t i) {
    std::size_t l = m.size() - 1;
    double one = m[i].one, zero = m[i].zero;
    double n = m[l].weight;
    for (std::size_t j = l; j-- > 0;) {
        if (one != 0) {
            double t = m[j].weight;
            m[j].weight = n * static_cast<double>(l + 1) / (static_cast<double>(j + 1) * one);
            n = t - m[j].weight * zero * static_cast<double>(l - j) / static_cast<double>(l + 1);
        } else {
            m[j].weight = m[j].weight * static_cast<double>(l + 1) / (zero * static_cast<double>(l - j));
        }
    }
    for (std::size_t j = i; j < l; ++j) {
        m[j].feature = m[j + 1].feature;
        m[j].zero = m[j + 1].zero;
        m[j].one = m[j + 1].one;
    }
    m.pop_back();
}

double unwound_sum(const std::vector<PathEl>& m, std::size_t i) {
    std::size_t l = m.size() - 1;
    double one = m[i].one, zero = m[i].zero;
    double sum = 0.0;
    if (one != 0) {
        double n = m[l].weight;
        for (std::size_t j = l; j-- > 0;) {
            double t = n * static_cast<double>(l + 1) / (static_cast<double>(j + 1) * one);
            sum += t;
            n = m[j].weight - t * zero * static_cast<double>(l - j) / static_cast<double>(l + 1);
        }
    } else {
        for (std::size_t j = l; j-- > 0;) {
            sum += m[j].weight * static_cast<double>(l + 1) / (zero * static_cast<double>(l - j));
        }
    }
    return sum;
}

double leaf_value(const TreeNode& node, int target_class) {
    double tot = node.histogram[0] + node.histogram[1] + node.histogram[2];
    if (tot <= 0) return 1.0 / kNumClasses;
    return node.histogram[static_cast<std::size_t>(target_class - 1)] / tot;
}

void recurse(const DecisionTree& tree, std::span<const double> row,
             std::span<const std::uint8_t> miss, int target_class, int node_id,
             std::vector<PathEl> m, double pz, double po, int pi, std::vector<double>& phi) {
    extend(m, pz, po, pi);
    const TreeNode& node = tree.nodes[static_cast<std::size_t>(node_id)];
    if (node.is_leaf()) {
        double value = leaf_value(node, target_class);
        for (std::size_t i = 1; i < m.size(); ++i) {
            phi[static_cast<std::size_t>(m[i].feature)] +=
                unwound_sum(m, i) * (m[i].one - m[i].zero) * value;
        }
        return;
    }

    bool absent = !miss.empty() && miss[static_cast<std::size_t>(node.column)];
    bool go_left = absent ? node.missing_left : row[static_cast<std::size_t>(node.column)] < node.threshold;
    int hot = go_left ? node.left : node.right;
    int cold = go_left ? node.right : node.left;
    double cover_hot = tree.nodes[static_cast<std::size_t>(hot)].cover;
    double cover_cold = tree.nodes[static_cast<std::size_t>(cold)].cover;
    double denom = cover_hot + cover_cold;
    if (denom <= 0) return;

    double iz = 1.0, io = 1.0;
    for (std::size_t i = 1; i < m.size(); ++i) {
        if (m[i].feature == node.column) {
            iz = m[i].zero;
            io = m[i].one;
            unwind(m, i);
            break;
        }
    }
    recurse(tree, row, miss, target_class, hot, m, iz * cover_hot / denom, io, node.column, phi);
    recurse(tree, row, miss, target_class, cold, m, iz * cover_cold / denom, 0.0, node.column, phi);
}

double tree_expectation(const DecisionTree& tree, int target_class, int node_id = 0) {
    const TreeNode& node = tree.nodes[static_cast<std::size_t>(node_id)];
    if (node.is_leaf()) return leaf_value(node, target_class);
    double cl = tree.nodes[static_cast<std::size_t>(node.left)].cover;
    double cr = tree.nodes[static_cast<std::size_t>(node.right)].cover;
    double denom = cl + cr;
    if (denom <= 0) return leaf_value(node, target_class);
    return (cl * tree_expectation(tree, target_class, node.left) +
            cr * tree_expectation(tree, target_class, node.right)) /
           denom;
}

}  // namespace

ShapRow tree_shap(const ForestModel& forest, std::span<const double> row,
                  std::span<const std::uint8_t> miss, int target_class, std::int64_t instance_id) {
    if (row.size() != forest.columns().size()) {
        throw DataError("tree_shap: row layout does not match the forest");
    }
    if (target_class < 1 || target_class > kNumClasses) {
        throw UsageError("tree_shap: class out of range");
    }

    ShapRow out;
    out.target_class = target_class;
    out.instance_id = instance_id;
    out.phi.assign(row.size(), 0.0);

    double n_trees = static_cast<double>(forest.trees().size());
    for (const auto& tree : forest.trees()) {
        std::vector<double> phi(row.size(), 0.0);
        recurse(tree, row, miss, target_class, 0, {}, 1.0, 1.0, -1, phi);
        for (std::size_t c = 0; c < row.size(); ++c) out.phi[c] += phi[c] / n_trees;
        out.base += tree_expectation(tree, target_class) / n_trees;
    }
    return out;
}

ShapRow sampling_shap(const ScoreFn& score, std::span<const double> row,
                      const std::vector<std::vector<double>>& background, int samples,
                      std::uint64_t seed) {
    if (samples < 1) throw UsageError("sampling_shap: need at least one sample");
    if (background.empty()) throw DataError("sampling_shap: empty background");
    std::size_t p = row.size();

    ShapRow out;
    out.phi.assign(p, 0.0);
    out.std_error.assign(p, 0.0);
    for (const auto& b : background) out.base += score(b);
    out.base /= static_cast<double>(background.size());

    std::vector<double> sum(p, 0.0), sum_sq(p, 0.0);
    std::vector<std::size_t> perm(p);
    for (int s = 0; s < samples; ++s) {
        auto eng = substream(seed, "shap_perm", static_cast<std::uint64_t>(s));
        std::vector<double> x = background[uniform_below(eng, background.size())];
        std::iota(perm.begin(), perm.end(), std::size_t{0});
        shuffle_vec(perm, eng);

        double prev = score(x);
        for (std::size_t c : perm) {
            x[c] = row[c];
            double cur = score(x);
            double contrib = cur - prev;
            sum[c] += contrib;
            sum_sq[c] += contrib * contrib;
            prev = cur;
        }
    }
    double n = static_cast<double>(samples);
    for (std::size_t c = 0; c < p; ++c) {
        out.phi[c] = sum[c] / n;
        if (samples > 1) {
            double var = (sum_sq[c] - sum[c] * sum[c] / n) / (n - 1.0);
            out.std_error[c] = std::sqrt(std::max(0.0, var) / n);
        }
    }
    return out;
}

std::vector<std::string> source_variables(const std::vector<ColumnDescriptor>& columns) {
    std::vector<std::string> vars;
    for (const auto& c : columns) {
        if (std::find(vars.begin(), vars.end(), c.source) == vars.end()) vars.push_back(c.source);
    }
    return vars;
}

ShapRow aggregate_onehot(const ShapRow& row, const std::vector<ColumnDescriptor>& columns) {
    if (row.phi.size() != columns.size()) {
        throw DataError("aggregate_onehot: descriptor list does not cover the attribution row");
    }
    std::vector<std::string> vars = source_variables(columns);
    ShapRow out;
    out.base = row.base;
    out.target_class = row.target_class;
    out.instance_id = row.instance_id;
    out.phi.assign(vars.size(), 0.0);
    if (!row.std_error.empty()) out.std_error.assign(vars.size(), 0.0);
    for (std::size_t c = 0; c < columns.size(); ++c) {
        auto v = static_cast<std::size_t>(
            std::find(vars.begin(), vars.end(), columns[c].source) - vars.begin());
        out.phi[v] += row.phi[c];
        if (!row.std_error.empty()) out.std_error[v] += row.std_error[c] * row.std_error[c];
    }
    for (double& se : out.std_error) se = std::sqrt(se);
    return out;
}

FeatureRanking mean_abs_ranking(const ShapMatrix& matrix) {
    if (matrix.rows.empty()) throw DataError("mean_abs_ranking: empty matrix");
    std::size_t p = matrix.names.size();
    std::vector<double> acc(p, 0.0);
    for (const auto& row : matrix.rows) {
        if (row.phi.size() != p) throw DataError("mean_abs_ranking: ragged attribution matrix");
        for (std::size_t c = 0; c < p; ++c) acc[c] += std::abs(row.phi[c]);
    }
    FeatureRanking ranking;
    for (std::size_t c = 0; c < p; ++c) {
        ranking.entries.emplace_back(matrix.names[c], acc[c] / static_cast<double>(matrix.rows.size()));
    }
    std::sort(ranking.entries.begin(), ranking.entries.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });
    return ranking;
}

std::string FeatureRanking::to_csv() const {
    std::ostringstream out;
    out << "variable,mean_abs_shap\n";
    for (const auto& [name, value] : entries) {
        out << name << ",";
        io::write_double(out, value);
        out << "\n";
    }
    return out.str();
}

std::string shap_summary_export(const ShapMatrix& matrix,
                                const std::vector<std::vector<Cell>>& feature_values) {
    std::size_t p = matrix.names.size();
    if (feature_values.size() != matrix.rows.size()) {
        throw DataError("shap summary: instance count mismatch");
    }
    for (const auto& fv : feature_values) {
        if (fv.size() != p) throw DataError("shap summary: variable count mismatch");
    }

    // Normalized value ranks per variable over the observed instances.
    std::vector<std::vector<double>> rank(matrix.rows.size(), std::vector<double>(p, -1.0));
    for (std::size_t v = 0; v < p; ++v) {
        std::vector<double> observed;
        std::vector<std::size_t> where;
        for (std::size_t r = 0; r < matrix.rows.size(); ++r) {
            if (feature_values[r][v].kind != Cell::Kind::Absent) {
                observed.push_back(feature_values[r][v].as_double());
                where.push_back(r);
            }
        }
        if (observed.empty()) continue;
        auto ranks = fractional_ranks(observed);
        double n = static_cast<double>(observed.size());
        for (std::size_t i = 0; i < where.size(); ++i) {
            rank[where[i]][v] = n > 1 ? (ranks[i] - 1.0) / (n - 1.0) : 0.5;
        }
    }

    std::ostringstream out;
    out << "instance_id,variable,shap_value,feature_value,feature_value_rank\n";
    for (std::size_t r = 0; r < matrix.rows.size(); ++r) {
        const auto& row = matrix.rows[r];
        if (row.phi.size() != p) throw DataError("shap summary: ragged attribution matrix");
        for (std::size_t v = 0; v < p; ++v) {
            out << row.instance_id << "," << matrix.names[v] << ",";
            io::write_double(out, row.phi[v]);
            out << ",";
            const Cell& cell = feature_values[r][v];
            if (cell.kind == Cell::Kind::Numeric) io::write_double(out, cell.num);
            else if (cell.kind == Cell::Kind::Category) out << cell.cat;
            out << ",";
            if (rank[r][v] >= 0) io::write_double(out, rank[r][v]);
            out << "\n";
        }
    }
    return out.str();
}

}  // namespace panelml
