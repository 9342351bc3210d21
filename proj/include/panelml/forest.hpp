#pragma once

#include <array>
#include <cstdint>

#include "panelml/model.hpp"

namespace panelml {

/// Binary split tree. Internal nodes split one column at a threshold;
/// rows with the split value absent follow the learned missing
/// direction. Leaves keep the training class histogram.
struct TreeNode {
    int column = -1;           // -1 marks a leaf
    double threshold = 0.0;    // observed value < threshold goes left
    bool missing_left = true;  // learned direction for absent values
    int left = -1;
    int right = -1;
    std::array<double, kNumClasses> histogram{};  // training class counts
    double cover = 0.0;                           // training rows reaching this node

    bool is_leaf() const { return column < 0; }
};

struct DecisionTree {
    std::vector<TreeNode> nodes;  // nodes[0] is the root

    /// Leaf class distribution for one instance.
    Scores score(std::span<const double> row, std::span<const std::uint8_t> miss) const;
    int leaf_for(std::span<const double> row, std::span<const std::uint8_t> miss) const;
};

struct ForestConfig {
    int trees = 100;
    int mtry = 0;  // 0 = floor(sqrt(columns))
    bool bootstrap = true;
    int min_leaf = 1;
    int max_depth = 0;  // 0 = unlimited
    std::uint64_t seed = 0;
};

/// Bagged Gini-split tree ensemble. Scores are the mean of per-tree
/// leaf-histogram distributions.
class ForestModel : public Model {
public:
    ForestModel(std::vector<DecisionTree> trees, ForestConfig config,
                std::vector<ColumnDescriptor> columns);

    Scores score(std::span<const double> row, std::span<const std::uint8_t> miss) const override;
    std::string kind() const override { return "forest"; }
    void save(std::ostream& out) const override;
    static std::unique_ptr<ForestModel> load(std::istream& in);

    const std::vector<DecisionTree>& trees() const { return trees_; }
    const ForestConfig& config() const { return config_; }

private:
    std::vector<DecisionTree> trees_;
    ForestConfig config_;
};

ForestModel fit_forest(const DesignMatrix& matrix, const ForestConfig& config);

/// Single deterministic tree over all rows and columns (no bootstrap,
/// mtry = all); the greedy CART reference configuration.
DecisionTree fit_single_tree(const DesignMatrix& matrix, int min_leaf = 1, int max_depth = 0);

}  // namespace panelml
