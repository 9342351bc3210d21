#pragma once

#include <cstdint>
#include <functional>
#include <optional>

#include "panelml/model.hpp"

namespace panelml {

struct SplitSpec {
    double fraction = 0.8;  // train share, strictly between 0 and 1
    std::uint64_t seed = 0;
    // Default OFF: unrolled rows of one individual may then straddle the
    // split, leaking that individual's other years into training. Turn
    // ON for leakage-free evaluation of longitudinal data.
    bool group_by_individual = false;
};

struct Split {
    std::vector<std::size_t> train, test;  // ascending, disjoint, covering
};

/// Seeded uniform shuffle then prefix/suffix cut; |train| = round(n * fraction).
Split percentage_split(std::size_t n, const SplitSpec& spec);

/// Group-aware variant: whole individuals are assigned to one side until
/// the train side reaches its target row count.
Split percentage_split_grouped(const std::vector<std::int64_t>& ids, const SplitSpec& spec);

/// Dispatch on spec.group_by_individual using the matrix row ids.
Split percentage_split(const DesignMatrix& matrix, const SplitSpec& spec);

struct ConfusionMatrix {
    // counts[actual - 1][predicted - 1]
    std::array<std::array<std::int64_t, kNumClasses>, kNumClasses> counts{};

    std::int64_t total() const;
    std::int64_t trace() const;
};

/// Percentage of correctly classified instances: 100 * trace / total.
double accuracy(const ConfusionMatrix& cm);

ConfusionMatrix confusion(const std::vector<int>& actual, const std::vector<int>& predicted);

/// One-vs-rest ranking quality by direct pair counting:
/// (concordant + 0.5 * tied) / (positives * negatives). nullopt when
/// either side is empty.
std::optional<double> roc_auc_ovr(const std::vector<double>& scores,
                                  const std::vector<bool>& positives);

/// Prevalence-weighted mean of the defined per-class AUCs. Throws when a
/// class with nonzero prevalence has no defined AUC.
double weighted_auc(const std::array<std::optional<double>, kNumClasses>& auc,
                    const Scores& prevalence);

struct EvalReport {
    std::string model_name;
    std::size_t n_train = 0, n_test = 0;
    ConfusionMatrix cm;
    double accuracy = 0.0;  // percentage
    std::array<std::optional<double>, kNumClasses> auc{};
    std::optional<double> weighted;  // nullopt when undefined (degenerate test side)

    std::string to_csv() const;
};

using Trainer = std::function<std::unique_ptr<Model>(const DesignMatrix&)>;

/// Split, fit on the train side only, compute every metric on the test
/// side. Per-class prevalence for the weighted AUC is measured on the
/// test side.
EvalReport evaluate(const Trainer& trainer, const DesignMatrix& matrix, const SplitSpec& spec,
                    const std::string& model_name = "model");

/// Markdown comparison table: `Models|Correctly Classified Instances|ROC Area`.
std::string eval_markdown_table(const std::vector<EvalReport>& reports);

}  // namespace panelml
