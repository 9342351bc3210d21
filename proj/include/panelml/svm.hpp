#pragma once

#include <cstdint>

#include "panelml/model.hpp"

namespace panelml {

struct KernelSpec {
    enum class Type { Linear, Rbf };
    Type type = Type::Linear;
    double gamma = 1.0;  // rbf only

    double operator()(std::span<const double> a, std::span<const double> b) const;
};

/// One maximum-margin separator for a class pair, trained by sequential
/// minimal optimization on the dual problem.
struct BinarySvm {
    std::vector<std::vector<double>> support_vectors;
    std::vector<double> alpha;  // dual coefficients in [0, C]
    std::vector<int> labels;    // +1 / -1 per support vector
    double bias = 0.0;
    KernelSpec kernel;
    double C = 1.0;
    std::pair<int, int> class_pair{0, 0};  // (positive class, negative class)

    /// Decision value f(x); positive favors class_pair.first.
    double decision(std::span<const double> x) const;
};

struct SmoConfig {
    double C = 1.0;
    KernelSpec kernel;
    double tol = 1e-3;
    std::size_t max_passes = 200000;  // examine-example budget
    std::uint64_t seed = 0;
};

/// Solve the two-class problem on dense rows with labels +1/-1.
/// Throws ConvergenceError when the budget runs out with violated KKT
/// conditions. `alpha_out`, when given, receives the dual coefficient
/// of every training row (zeros included).
BinarySvm smo_solve_binary(const std::vector<std::vector<double>>& rows, const std::vector<int>& labels,
                           const SmoConfig& config, std::vector<double>* alpha_out = nullptr);

/// Dual objective at the current coefficients.
double svm_dual_objective(const BinarySvm& svm);

/// Largest KKT violation over the training rows given their dual
/// coefficients.
double svm_max_kkt_violation(const BinarySvm& svm, const std::vector<std::vector<double>>& rows,
                             const std::vector<int>& labels, const std::vector<double>& alpha);

/// One-vs-one bank: one BinarySvm per unordered class pair; scores are
/// normalized pairwise vote counts. Test rows are mean-imputed and
/// min-max scaled with training statistics.
class MultiSvm : public Model {
public:
    MultiSvm(std::vector<BinarySvm> machines, ImputationPlan plan, std::vector<ColumnDescriptor> columns);

    Scores score(std::span<const double> row, std::span<const std::uint8_t> miss) const override;
    std::string kind() const override { return "svm"; }
    void save(std::ostream& out) const override;
    static std::unique_ptr<MultiSvm> load(std::istream& in);

    const std::vector<BinarySvm>& machines() const { return machines_; }
    const ImputationPlan& plan() const { return plan_; }

private:
    std::vector<BinarySvm> machines_;
    ImputationPlan plan_;
};

MultiSvm fit_svm_multiclass(const DesignMatrix& matrix, const SmoConfig& config);

}  // namespace panelml
