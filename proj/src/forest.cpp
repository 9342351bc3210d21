#include "panelml/forest.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <numeric>
#include <ostream>

#include "panelml/errors.hpp"
#include "panelml/rng.hpp"

namespace panelml {

namespace {

double gini(const std::array<double, kNumClasses>& counts, double total) {
    if (total <= 0) return 0.0;
    double sum_sq = 0.0;
    for (double c : counts) sum_sq += c * c;
    return 1.0 - sum_sq / (total * total);
}

struct SplitChoice {
    int column = -1;
    double threshold = 0.0;
    double impurity = 0.0;  // weighted child impurity over observed rows
    bool valid = false;
};

class TreeBuilder {
public:
    TreeBuilder(const DesignMatrix& m, const ForestConfig& cfg, std::mt19937_64* eng)
        : m_(m), cfg_(cfg), eng_(eng) {}

    DecisionTree build(std::vector<std::size_t> rows) {
        DecisionTree tree;
        grow(tree, std::move(rows), 0);
        return tree;
    }

private:
    int grow(DecisionTree& tree, std::vector<std::size_t> rows, int depth) {
        int node_id = static_cast<int>(tree.nodes.size());
        tree.nodes.emplace_back();
        {
            TreeNode& node = tree.nodes.back();
            node.cover = static_cast<double>(rows.size());
            for (std::size_t r : rows) node.histogram[static_cast<std::size_t>(m_.targets[r] - 1)] += 1.0;
        }

        bool pure = false;
        for (double c : tree.nodes[static_cast<std::size_t>(node_id)].histogram) {
            if (c == static_cast<double>(rows.size())) pure = true;
        }
        bool depth_capped = cfg_.max_depth > 0 && depth >= cfg_.max_depth;
        if (pure || depth_capped || rows.size() < 2 * static_cast<std::size_t>(cfg_.min_leaf)) {
            return node_id;
        }

        SplitChoice best = pick_split(rows);
        if (!best.valid) return node_id;

        std::vector<std::size_t> left_rows, right_rows, missing_rows;
        for (std::size_t r : rows) {
            if (m_.is_missing(r, static_cast<std::size_t>(best.column))) {
                missing_rows.push_back(r);
            } else if (m_.at(r, static_cast<std::size_t>(best.column)) < best.threshold) {
                left_rows.push_back(r);
            } else {
                right_rows.push_back(r);
            }
        }
        if (left_rows.empty() || right_rows.empty()) return node_id;

        // Absent values follow the child with the larger observed cover;
        // exact ties go left.
        bool missing_left = left_rows.size() >= right_rows.size();
        auto& bucket = missing_left ? left_rows : right_rows;
        bucket.insert(bucket.end(), missing_rows.begin(), missing_rows.end());

        int left_id = grow(tree, std::move(left_rows), depth + 1);
        int right_id = grow(tree, std::move(right_rows), depth + 1);
        TreeNode& node = tree.nodes[static_cast<std::size_t>(node_id)];
        node.column = best.column;
        node.threshold = best.threshold;
        node.missing_left = missing_left;
        node.left = left_id;
        node.right = right_id;
        return node_id;
    }

    std::vector<int> candidate_columns() {
        int p = static_cast<int>(m_.n_cols());
        int mtry = cfg_.mtry > 0 ? std::min(cfg_.mtry, p)
                                 : std::max(1, static_cast<int>(std::sqrt(static_cast<double>(p))));
        if (mtry >= p || eng_ == nullptr) {
            std::vector<int> all(static_cast<std::size_t>(p));
            std::iota(all.begin(), all.end(), 0);
            return all;
        }
        // Partial Fisher-Yates over a fresh index vector.
        std::vector<int> idx(static_cast<std::size_t>(p));
        std::iota(idx.begin(), idx.end(), 0);
        for (int i = 0; i < mtry; ++i) {
            auto j = static_cast<std::size_t>(i) +
                     uniform_below(*eng_, static_cast<std::uint64_t>(p - i));
            std::swap(idx[static_cast<std::size_t>(i)], idx[j]);
        }
        idx.resize(static_cast<std::size_t>(mtry));
        std::sort(idx.begin(), idx.end());  // column order, not draw order
        return idx;
    }

    SplitChoice pick_split(const std::vector<std::size_t>& rows) {
        SplitChoice best;
        for (int col : candidate_columns()) {
            // Observed (value, class) pairs sorted by value.
            scratch_.clear();
            for (std::size_t r : rows) {
                if (!m_.is_missing(r, static_cast<std::size_t>(col))) {
                    scratch_.emplace_back(m_.at(r, static_cast<std::size_t>(col)), m_.targets[r]);
                }
            }
            if (scratch_.size() < 2) continue;
            std::sort(scratch_.begin(), scratch_.end());

            std::array<double, kNumClasses> left{}, right{};
            for (const auto& [v, t] : scratch_) right[static_cast<std::size_t>(t - 1)] += 1.0;
            double n = static_cast<double>(scratch_.size());
            double n_left = 0.0;

            for (std::size_t i = 0; i + 1 < scratch_.size(); ++i) {
                int t = scratch_[i].second;
                left[static_cast<std::size_t>(t - 1)] += 1.0;
                right[static_cast<std::size_t>(t - 1)] -= 1.0;
                n_left += 1.0;
                if (scratch_[i].first == scratch_[i + 1].first) continue;  // not a boundary
                double impurity =
                    (n_left * gini(left, n_left) + (n - n_left) * gini(right, n - n_left)) / n;
                if (!best.valid || impurity < best.impurity) {
                    best.valid = true;
                    best.column = col;
                    best.threshold = (scratch_[i].first + scratch_[i + 1].first) / 2.0;
                    best.impurity = impurity;
                }
            }
        }
        return best;
    }

    const DesignMatrix& m_;
    const ForestConfig& cfg_;
    std::mt19937_64* eng_;
    std::vector<std::pair<double, int>> scratch_;
};

}  // namespace

int DecisionTree::leaf_for(std::span<const double> row, std::span<const std::uint8_t> miss) const {
    int cur = 0;
    while (!nodes[static_cast<std::size_t>(cur)].is_leaf()) {
        const TreeNode& n = nodes[static_cast<std::size_t>(cur)];
        bool absent = !miss.empty() && miss[static_cast<std::size_t>(n.column)];
        bool go_left = absent ? n.missing_left : row[static_cast<std::size_t>(n.column)] < n.threshold;
        cur = go_left ? n.left : n.right;
    }
    return cur;
}

Scores DecisionTree::score(std::span<const double> row, std::span<const std::uint8_t> miss) const {
    const TreeNode& leaf = nodes[static_cast<std::size_t>(leaf_for(row, miss))];
    double total = leaf.histogram[0] + leaf.histogram[1] + leaf.histogram[2];
    Scores s{};
    for (int k = 0; k < kNumClasses; ++k) {
        s[static_cast<std::size_t>(k)] = total > 0 ? leaf.histogram[static_cast<std::size_t>(k)] / total : 1.0 / kNumClasses;
    }
    return s;
}

ForestModel::ForestModel(std::vector<DecisionTree> trees, ForestConfig config,
                         std::vector<ColumnDescriptor> columns)
    : trees_(std::move(trees)), config_(config) {
    columns_ = std::move(columns);
}

Scores ForestModel::score(std::span<const double> row, std::span<const std::uint8_t> miss) const {
    check_layout(row);
    Scores acc{};
    for (const auto& tree : trees_) {
        Scores s = tree.score(row, miss);
        for (int k = 0; k < kNumClasses; ++k) acc[static_cast<std::size_t>(k)] += s[static_cast<std::size_t>(k)];
    }
    double n = static_cast<double>(trees_.size());
    for (auto& v : acc) v /= n;
    return acc;
}

ForestModel fit_forest(const DesignMatrix& matrix, const ForestConfig& config) {
    if (matrix.n_rows == 0) throw DataError("fit_forest: empty matrix");
    if (config.trees < 1) throw UsageError("fit_forest: need at least one tree");
    if (config.mtry < 0 || config.mtry > static_cast<int>(matrix.n_cols())) {
        throw UsageError("fit_forest: mtry out of range");
    }

    std::vector<DecisionTree> trees;
    trees.reserve(static_cast<std::size_t>(config.trees));
    for (int t = 0; t < config.trees; ++t) {
        // Per-tree stream keyed by (seed, tree index): trees are
        // independent of training order.
        auto eng = substream(config.seed, "tree", static_cast<std::uint64_t>(t));
        std::vector<std::size_t> rows;
        rows.reserve(matrix.n_rows);
        if (config.bootstrap) {
            for (std::size_t i = 0; i < matrix.n_rows; ++i) {
                rows.push_back(uniform_below(eng, matrix.n_rows));
            }
        } else {
            rows.resize(matrix.n_rows);
            std::iota(rows.begin(), rows.end(), std::size_t{0});
        }
        TreeBuilder builder(matrix, config, &eng);
        trees.push_back(builder.build(std::move(rows)));
    }
    return ForestModel(std::move(trees), config, matrix.columns);
}

DecisionTree fit_single_tree(const DesignMatrix& matrix, int min_leaf, int max_depth) {
    if (matrix.n_rows == 0) throw DataError("fit_single_tree: empty matrix");
    ForestConfig cfg;
    cfg.trees = 1;
    cfg.mtry = static_cast<int>(matrix.n_cols());
    cfg.bootstrap = false;
    cfg.min_leaf = min_leaf;
    cfg.max_depth = max_depth;
    std::vector<std::size_t> rows(matrix.n_rows);
    std::iota(rows.begin(), rows.end(), std::size_t{0});
    TreeBuilder builder(matrix, cfg, nullptr);
    return builder.build(std::move(rows));
}

void ForestModel::save(std::ostream& out) const {
    io::write_columns(out, columns_);
    out << "config " << config_.trees << " " << config_.mtry << " " << (config_.bootstrap ? 1 : 0)
        << " " << config_.min_leaf << " " << config_.max_depth << " " << config_.seed << "\n";
    out << "trees " << trees_.size() << "\n";
    for (const auto& tree : trees_) {
        out << "tree " << tree.nodes.size() << "\n";
        for (const auto& n : tree.nodes) {
            out << n.column << " ";
            io::write_double(out, n.threshold);
            out << " " << (n.missing_left ? 1 : 0) << " " << n.left << " " << n.right << " ";
            io::write_double(out, n.cover);
            for (double h : n.histogram) {
                out << " ";
                io::write_double(out, h);
            }
            out << "\n";
        }
    }
}

std::unique_ptr<ForestModel> ForestModel::load(std::istream& in) {
    auto cols = io::read_columns(in);
    io::expect_token(in, "config");
    ForestConfig cfg;
    int bootstrap = 1;
    in >> cfg.trees >> cfg.mtry >> bootstrap >> cfg.min_leaf >> cfg.max_depth >> cfg.seed;
    cfg.bootstrap = bootstrap != 0;
    io::expect_token(in, "trees");
    std::size_t n_trees = 0;
    in >> n_trees;
    std::vector<DecisionTree> trees(n_trees);
    for (auto& tree : trees) {
        io::expect_token(in, "tree");
        std::size_t n_nodes = 0;
        in >> n_nodes;
        tree.nodes.resize(n_nodes);
        for (auto& n : tree.nodes) {
            int ml = 0;
            in >> n.column;
            n.threshold = io::read_double(in);
            in >> ml >> n.left >> n.right;
            n.cover = io::read_double(in);
            for (auto& h : n.histogram) h = io::read_double(in);
            n.missing_left = ml != 0;
        }
    }
    if (!in) throw DataError("model file: truncated forest");
    return std::make_unique<ForestModel>(std::move(trees), cfg, std::move(cols));
}

}  // namespace panelml
