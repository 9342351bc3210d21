#include "panelml/mlp.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <numeric>
#include <ostream>

#include "panelml/errors.hpp"
#include "panelml/kernels.hpp"
#include "panelml/rng.hpp"

namespace panelml {

namespace {

inline double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

std::vector<double> hidden_activations(const MlpNetwork& net, std::span<const double> x) {
    std::vector<double> h(net.n_hidden);
    for (std::size_t j = 0; j < net.n_hidden; ++j) {
        double z = net.b1[j] + kernels::dot(net.w1.data() + j * net.n_in, x.data(), net.n_in);
        h[j] = sigmoid(z);
    }
    return h;
}

Scores output_distribution(const MlpNetwork& net, const std::vector<double>& h) {
    Scores z{};
    for (int k = 0; k < kNumClasses; ++k) {
        z[static_cast<std::size_t>(k)] =
            net.b2[static_cast<std::size_t>(k)] +
            kernels::dot(net.w2.data() + static_cast<std::size_t>(k) * net.n_hidden, h.data(), net.n_hidden);
    }
    double zmax = std::max({z[0], z[1], z[2]});
    double total = 0.0;
    for (auto& v : z) {
        v = std::exp(v - zmax);
        total += v;
    }
    for (auto& v : z) v /= total;
    return z;
}

}  // namespace

MlpNetwork MlpNetwork::zeros(std::size_t n_in, std::size_t n_hidden) {
    MlpNetwork net;
    net.n_in = n_in;
    net.n_hidden = n_hidden;
    net.w1.assign(n_hidden * n_in, 0.0);
    net.b1.assign(n_hidden, 0.0);
    net.w2.assign(static_cast<std::size_t>(kNumClasses) * n_hidden, 0.0);
    net.b2.assign(static_cast<std::size_t>(kNumClasses), 0.0);
    return net;
}

double& MlpNetwork::parameter(std::size_t i) {
    if (i < w1.size()) return w1[i];
    i -= w1.size();
    if (i < b1.size()) return b1[i];
    i -= b1.size();
    if (i < w2.size()) return w2[i];
    i -= w2.size();
    return b2[i];
}

Scores MlpNetwork::forward(std::span<const double> x) const {
    return output_distribution(*this, hidden_activations(*this, x));
}

double MlpNetwork::loss(const std::vector<std::vector<double>>& rows,
                        const std::vector<int>& targets) const {
    double total = 0.0;
    for (std::size_t r = 0; r < rows.size(); ++r) {
        Scores p = forward(rows[r]);
        total += -std::log(std::max(p[static_cast<std::size_t>(targets[r] - 1)], 1e-300));
    }
    return total / static_cast<double>(rows.size());
}

MlpGradients mlp_backprop(const MlpNetwork& net, const std::vector<std::vector<double>>& rows,
                          const std::vector<int>& targets) {
    MlpGradients g;
    g.w1.assign(net.w1.size(), 0.0);
    g.b1.assign(net.b1.size(), 0.0);
    g.w2.assign(net.w2.size(), 0.0);
    g.b2.assign(net.b2.size(), 0.0);

    for (std::size_t r = 0; r < rows.size(); ++r) {
        const auto& x = rows[r];
        auto h = hidden_activations(net, x);
        Scores p = output_distribution(net, h);

        // Softmax + cross-entropy: delta_out = p - onehot(target).
        Scores delta_out = p;
        delta_out[static_cast<std::size_t>(targets[r] - 1)] -= 1.0;

        for (int k = 0; k < kNumClasses; ++k) {
            double d = delta_out[static_cast<std::size_t>(k)];
            g.b2[static_cast<std::size_t>(k)] += d;
            kernels::axpy(d, h.data(), g.w2.data() + static_cast<std::size_t>(k) * net.n_hidden,
                          net.n_hidden);
        }
        for (std::size_t j = 0; j < net.n_hidden; ++j) {
            double back = 0.0;
            for (int k = 0; k < kNumClasses; ++k) {
                back += delta_out[static_cast<std::size_t>(k)] *
                        net.w2[static_cast<std::size_t>(k) * net.n_hidden + j];
            }
            double d = back * h[j] * (1.0 - h[j]);
            g.b1[j] += d;
            kernels::axpy(d, x.data(), g.w1.data() + j * net.n_in, net.n_in);
        }
    }
    double inv = 1.0 / static_cast<double>(rows.size());
    for (auto* vec : {&g.w1, &g.b1, &g.w2, &g.b2}) {
        for (auto& v : *vec) v *= inv;
    }
    return g;
}

MlpModel::MlpModel(MlpNetwork net, ImputationPlan plan, MlpConfig config,
                   std::vector<ColumnDescriptor> columns)
    : net_(std::move(net)), plan_(std::move(plan)), config_(config) {
    columns_ = std::move(columns);
}

Scores MlpModel::score(std::span<const double> row, std::span<const std::uint8_t> miss) const {
    check_layout(row);
    return net_.forward(plan_.apply(row, miss));
}

MlpModel fit_mlp(const DesignMatrix& matrix, const MlpConfig& config) {
    if (matrix.n_rows == 0) throw DataError("fit_mlp: empty matrix");
    MlpConfig cfg = config;
    if (cfg.hidden <= 0) {
        cfg.hidden = static_cast<int>((matrix.n_cols() + kNumClasses + 1) / 2);
    }
    if (cfg.batch_size <= 0) cfg.batch_size = 32;

    auto plan = make_imputation_plan(matrix, /*scale=*/true);
    std::vector<std::vector<double>> X;
    X.reserve(matrix.n_rows);
    for (std::size_t r = 0; r < matrix.n_rows; ++r) {
        X.push_back(plan.apply(matrix.row(r), matrix.row_missing(r)));
    }

    auto n_hidden = static_cast<std::size_t>(cfg.hidden);
    MlpNetwork net = MlpNetwork::zeros(matrix.n_cols(), n_hidden);
    auto init = substream(cfg.seed, "mlp_init");
    double w1_range = 1.0 / std::sqrt(static_cast<double>(net.n_in));
    double w2_range = 1.0 / std::sqrt(static_cast<double>(net.n_hidden));
    for (auto& w : net.w1) w = (uniform_real(init) * 2.0 - 1.0) * w1_range;
    for (auto& w : net.w2) w = (uniform_real(init) * 2.0 - 1.0) * w2_range;

    MlpGradients velocity;
    velocity.w1.assign(net.w1.size(), 0.0);
    velocity.b1.assign(net.b1.size(), 0.0);
    velocity.w2.assign(net.w2.size(), 0.0);
    velocity.b2.assign(net.b2.size(), 0.0);

    std::vector<std::size_t> order(matrix.n_rows);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::vector<double> epoch_losses;
    epoch_losses.reserve(static_cast<std::size_t>(cfg.epochs));

    std::vector<std::vector<double>> batch_rows;
    std::vector<int> batch_targets;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        auto eng = substream(cfg.seed, "mlp_shuffle", static_cast<std::uint64_t>(epoch));
        shuffle_vec(order, eng);
        for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
            std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
            batch_rows.clear();
            batch_targets.clear();
            for (std::size_t i = start; i < end; ++i) {
                batch_rows.push_back(X[order[i]]);
                batch_targets.push_back(matrix.targets[order[i]]);
            }
            MlpGradients g = mlp_backprop(net, batch_rows, batch_targets);
            auto step = [&](std::vector<double>& w, std::vector<double>& v, const std::vector<double>& grad) {
                for (std::size_t i = 0; i < w.size(); ++i) {
                    v[i] = cfg.momentum * v[i] - cfg.rate * grad[i];
                    w[i] += v[i];
                }
            };
            step(net.w1, velocity.w1, g.w1);
            step(net.b1, velocity.b1, g.b1);
            step(net.w2, velocity.w2, g.w2);
            step(net.b2, velocity.b2, g.b2);
        }
        double l = net.loss(X, matrix.targets);
        if (!std::isfinite(l)) {
            throw ConvergenceError("fit_mlp: non-finite loss at epoch " + std::to_string(epoch));
        }
        epoch_losses.push_back(l);
    }

    MlpModel model(std::move(net), std::move(plan), cfg, matrix.columns);
    model.set_epoch_losses(std::move(epoch_losses));
    return model;
}

void MlpModel::save(std::ostream& out) const {
    io::write_columns(out, columns_);
    out << "plan " << plan_.means.size() << " " << (plan_.scale ? 1 : 0) << "\n";
    for (std::size_t c = 0; c < plan_.means.size(); ++c) {
        io::write_double(out, plan_.means[c]);
        out << " ";
        io::write_double(out, plan_.lo[c]);
        out << " ";
        io::write_double(out, plan_.hi[c]);
        out << "\n";
    }
    out << "net " << net_.n_in << " " << net_.n_hidden << "\n";
    for (const auto* vec : {&net_.w1, &net_.b1, &net_.w2, &net_.b2}) {
        for (std::size_t i = 0; i < vec->size(); ++i) {
            if (i) out << " ";
            io::write_double(out, (*vec)[i]);
        }
        out << "\n";
    }
}

std::unique_ptr<MlpModel> MlpModel::load(std::istream& in) {
    auto cols = io::read_columns(in);
    io::expect_token(in, "plan");
    std::size_t p = 0;
    int scale = 0;
    in >> p >> scale;
    ImputationPlan plan;
    plan.scale = scale != 0;
    plan.means.resize(p);
    plan.lo.resize(p);
    plan.hi.resize(p);
    for (std::size_t c = 0; c < p; ++c) {
        plan.means[c] = io::read_double(in);
        plan.lo[c] = io::read_double(in);
        plan.hi[c] = io::read_double(in);
    }
    io::expect_token(in, "net");
    std::size_t n_in = 0, n_hidden = 0;
    in >> n_in >> n_hidden;
    MlpNetwork net = MlpNetwork::zeros(n_in, n_hidden);
    for (auto* vec : {&net.w1, &net.b1, &net.w2, &net.b2}) {
        for (auto& v : *vec) v = io::read_double(in);
    }
    if (!in) throw DataError("model file: truncated mlp");
    return std::make_unique<MlpModel>(std::move(net), std::move(plan), MlpConfig{}, std::move(cols));
}

}  // namespace panelml
