#pragma once

#include <cstdint>

#include "panelml/model.hpp"

namespace panelml {

/// One hidden layer, sigmoid activations, softmax output. Weight
/// matrices are row-major.
struct MlpNetwork {
    std::size_t n_in = 0;
    std::size_t n_hidden = 0;
    std::vector<double> w1, b1;  // hidden x in, hidden
    std::vector<double> w2, b2;  // classes x hidden, classes

    static MlpNetwork zeros(std::size_t n_in, std::size_t n_hidden);

    Scores forward(std::span<const double> x) const;
    /// Mean cross-entropy over a batch of already-preprocessed rows.
    double loss(const std::vector<std::vector<double>>& rows, const std::vector<int>& targets) const;

    std::size_t parameter_count() const { return w1.size() + b1.size() + w2.size() + b2.size(); }
    double& parameter(std::size_t i);
};

struct MlpGradients {
    std::vector<double> w1, b1, w2, b2;
};

/// Analytic gradient of the mean cross-entropy over a batch.
MlpGradients mlp_backprop(const MlpNetwork& net, const std::vector<std::vector<double>>& rows,
                          const std::vector<int>& targets);

struct MlpConfig {
    int hidden = 0;  // 0 = ceil((features + classes) / 2)
    double rate = 0.3;
    double momentum = 0.2;
    int epochs = 500;
    int batch_size = 32;
    std::uint64_t seed = 0;
};

class MlpModel : public Model {
public:
    MlpModel(MlpNetwork net, ImputationPlan plan, MlpConfig config,
             std::vector<ColumnDescriptor> columns);

    Scores score(std::span<const double> row, std::span<const std::uint8_t> miss) const override;
    std::string kind() const override { return "mlp"; }
    void save(std::ostream& out) const override;
    static std::unique_ptr<MlpModel> load(std::istream& in);

    const MlpNetwork& network() const { return net_; }
    const ImputationPlan& plan() const { return plan_; }
    const std::vector<double>& epoch_losses() const { return epoch_losses_; }
    void set_epoch_losses(std::vector<double> l) { epoch_losses_ = std::move(l); }

private:
    MlpNetwork net_;
    ImputationPlan plan_;
    MlpConfig config_;
    std::vector<double> epoch_losses_;
};

/// Mini-batch gradient descent with momentum on cross-entropy. Numeric
/// inputs are mean-imputed and min-max scaled to [0,1] with training
/// statistics. Throws ConvergenceError on a non-finite loss.
MlpModel fit_mlp(const DesignMatrix& matrix, const MlpConfig& config);

}  // namespace panelml
