#include "panelml/svm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <istream>
#include <ostream>

#include "panelml/errors.hpp"
#include "panelml/kernels.hpp"
#include "panelml/rng.hpp"

namespace panelml {

double KernelSpec::operator()(std::span<const double> a, std::span<const double> b) const {
    switch (type) {
        case Type::Linear:
            return kernels::dot(a.data(), b.data(), a.size());
        case Type::Rbf:
            return std::exp(-gamma * kernels::squared_distance(a.data(), b.data(), a.size()));
    }
    return 0.0;
}

double BinarySvm::decision(std::span<const double> x) const {
    double f = bias;
    for (std::size_t i = 0; i < support_vectors.size(); ++i) {
        f += alpha[i] * labels[i] * kernel(support_vectors[i], x);
    }
    return f;
}

namespace {

// Platt's sequential minimal optimization with a full f-value cache;
// cache updates cost two kernel rows per successful step.
class SmoSolver {
public:
    SmoSolver(const std::vector<std::vector<double>>& rows, const std::vector<int>& labels,
              const SmoConfig& cfg)
        : X_(rows), y_(labels), cfg_(cfg), n_(rows.size()) {
        alpha_.assign(n_, 0.0);
        u_.assign(n_, 0.0);  // sum_j alpha_j y_j K(j, i); all-zero start
        eng_ = substream(cfg.seed, "smo");
    }

    void solve() {
        // The Platt sweep's stopping test reads the running threshold,
        // which drifts when every updated coefficient lands on a bound;
        // a drifted threshold can mask live violations. Re-anchor it
        // after each converged sweep and go again until the violation
        // measured with the anchored threshold is inside tolerance.
        for (int round = 0; round < 100; ++round) {
            run_sweeps();
            recompute_threshold();
            if (max_violation() <= cfg_.tol) return;
        }
        throw ConvergenceError("smo: stalled with max KKT violation " +
                               std::to_string(max_violation()));
    }

    const std::vector<double>& alphas() const { return alpha_; }

    BinarySvm result() const {
        BinarySvm svm;
        svm.kernel = cfg_.kernel;
        svm.C = cfg_.C;
        svm.bias = -threshold_;
        for (std::size_t i = 0; i < n_; ++i) {
            if (alpha_[i] > 0) {
                svm.support_vectors.push_back(X_[i]);
                svm.alpha.push_back(alpha_[i]);
                svm.labels.push_back(y_[i]);
            }
        }
        return svm;
    }

private:
    double kernel(std::size_t i, std::size_t j) const { return cfg_.kernel(X_[i], X_[j]); }
    double error(std::size_t i) const { return u_[i] - threshold_ - y_[i]; }
    // Bound classification with slack: clamped updates can leave a
    // coefficient within rounding of a bound, and treating it as free
    // would poison the threshold and the stopping test.
    bool at_lower(std::size_t i) const { return alpha_[i] <= kBoundEps * cfg_.C; }
    bool at_upper(std::size_t i) const { return alpha_[i] >= (1.0 - kBoundEps) * cfg_.C; }
    bool is_free(std::size_t i) const { return !at_lower(i) && !at_upper(i); }

    double max_violation() const {
        double worst = 0.0;
        for (std::size_t i = 0; i < n_; ++i) {
            double yf = y_[i] * (u_[i] - threshold_);
            if (at_lower(i)) worst = std::max(worst, 1.0 - yf);
            else if (at_upper(i)) worst = std::max(worst, yf - 1.0);
            else worst = std::max(worst, std::abs(yf - 1.0));
        }
        return worst;
    }

    void run_sweeps() {
        std::size_t num_changed = 0;
        bool examine_all = true;
        while (num_changed > 0 || examine_all) {
            num_changed = 0;
            for (std::size_t i = 0; i < n_; ++i) {
                if (!examine_all && !is_free(i)) continue;
                num_changed += examine(i);
                if (++examines_ > cfg_.max_passes) {
                    throw ConvergenceError("smo: iteration budget exhausted with max KKT violation " +
                                           std::to_string(max_violation()));
                }
            }
            if (examine_all) examine_all = false;
            else if (num_changed == 0) examine_all = true;
        }
    }

    // The running threshold from take_step is only exact while a free
    // point anchors it; with every support vector at a bound the
    // midpoint update can drift outside the feasible bias interval.
    // Rebuild it from the final coefficients.
    void recompute_threshold() {
        double lo = -std::numeric_limits<double>::infinity();
        double hi = std::numeric_limits<double>::infinity();
        double free_sum = 0.0;
        std::size_t free_n = 0;
        for (std::size_t i = 0; i < n_; ++i) {
            double e = u_[i] - y_[i];
            if (is_free(i)) {
                free_sum += e;
                ++free_n;
            } else if ((at_lower(i) && y_[i] == 1) || (at_upper(i) && y_[i] == -1)) {
                hi = std::min(hi, e);  // theta <= e keeps this point satisfied
            } else {
                lo = std::max(lo, e);
            }
        }
        if (free_n > 0) threshold_ = free_sum / static_cast<double>(free_n);
        else if (std::isfinite(lo) && std::isfinite(hi)) threshold_ = (lo + hi) / 2.0;
        else if (std::isfinite(lo)) threshold_ = lo;
        else if (std::isfinite(hi)) threshold_ = hi;
    }

    std::size_t examine(std::size_t i2) {
        double e2 = error(i2);
        double r2 = e2 * y_[i2];
        bool violated = (r2 < -cfg_.tol && !at_upper(i2)) || (r2 > cfg_.tol && !at_lower(i2));
        if (!violated) return 0;

        // Second-choice heuristic: largest |E1 - E2| among free points.
        std::ptrdiff_t best = -1;
        double best_gap = 0.0;
        for (std::size_t i = 0; i < n_; ++i) {
            if (!is_free(i)) continue;
            double gap = std::abs(error(i) - e2);
            if (gap > best_gap) {
                best_gap = gap;
                best = static_cast<std::ptrdiff_t>(i);
            }
        }
        if (best >= 0 && take_step(static_cast<std::size_t>(best), i2)) return 1;

        // Fallback sweeps from a random start: free points, then all.
        std::size_t start = uniform_below(eng_, n_);
        for (std::size_t k = 0; k < n_; ++k) {
            std::size_t i1 = (start + k) % n_;
            if (is_free(i1) && take_step(i1, i2)) return 1;
        }
        start = uniform_below(eng_, n_);
        for (std::size_t k = 0; k < n_; ++k) {
            std::size_t i1 = (start + k) % n_;
            if (take_step(i1, i2)) return 1;
        }
        return 0;
    }

    bool take_step(std::size_t i1, std::size_t i2) {
        if (i1 == i2) return false;
        double a1_old = alpha_[i1], a2_old = alpha_[i2];
        int y1 = y_[i1], y2 = y_[i2];
        double e1 = error(i1), e2 = error(i2);
        double s = y1 * y2;

        double lo, hi;
        if (y1 != y2) {
            lo = std::max(0.0, a2_old - a1_old);
            hi = std::min(cfg_.C, cfg_.C + a2_old - a1_old);
        } else {
            lo = std::max(0.0, a1_old + a2_old - cfg_.C);
            hi = std::min(cfg_.C, a1_old + a2_old);
        }
        if (lo >= hi) return false;

        double k11 = kernel(i1, i1), k12 = kernel(i1, i2), k22 = kernel(i2, i2);
        double eta = k11 + k22 - 2 * k12;
        double a2_new;
        if (eta > 0) {
            a2_new = std::clamp(a2_old + y2 * (e1 - e2) / eta, lo, hi);
        } else {
            // Objective at the segment ends (Platt's degenerate case).
            double f1 = y1 * (e1 + threshold_) - a1_old * k11 - s * a2_old * k12;
            double f2 = y2 * (e2 + threshold_) - s * a1_old * k12 - a2_old * k22;
            double l1 = a1_old + s * (a2_old - lo);
            double h1 = a1_old + s * (a2_old - hi);
            double obj_lo = l1 * f1 + lo * f2 + 0.5 * l1 * l1 * k11 + 0.5 * lo * lo * k22 + s * lo * l1 * k12;
            double obj_hi = h1 * f1 + hi * f2 + 0.5 * h1 * h1 * k11 + 0.5 * hi * hi * k22 + s * hi * h1 * k12;
            if (obj_lo < obj_hi - kEps) a2_new = lo;
            else if (obj_lo > obj_hi + kEps) a2_new = hi;
            else return false;
        }
        if (std::abs(a2_new - a2_old) < kEps * (a2_new + a2_old + kEps)) return false;
        double a1_new = a1_old + s * (a2_old - a2_new);

        double d1 = y1 * (a1_new - a1_old);
        double d2 = y2 * (a2_new - a2_old);
        double b1 = e1 + d1 * k11 + d2 * k12 + threshold_;
        double b2 = e2 + d1 * k12 + d2 * k22 + threshold_;
        if (a1_new > 0 && a1_new < cfg_.C) threshold_ = b1;
        else if (a2_new > 0 && a2_new < cfg_.C) threshold_ = b2;
        else threshold_ = (b1 + b2) / 2.0;

        for (std::size_t i = 0; i < n_; ++i) {
            u_[i] += d1 * kernel(i1, i) + d2 * kernel(i2, i);
        }
        alpha_[i1] = a1_new;
        alpha_[i2] = a2_new;
        return true;
    }

    static constexpr double kEps = 1e-12;
    static constexpr double kBoundEps = 1e-8;

    const std::vector<std::vector<double>>& X_;
    const std::vector<int>& y_;
    SmoConfig cfg_;
    std::size_t n_;
    std::vector<double> alpha_, u_;
    double threshold_ = 0.0;
    std::size_t examines_ = 0;
    std::mt19937_64 eng_;
};

}  // namespace

BinarySvm smo_solve_binary(const std::vector<std::vector<double>>& rows, const std::vector<int>& labels,
                           const SmoConfig& config, std::vector<double>* alpha_out) {
    if (rows.size() != labels.size()) throw DataError("smo: row/label length mismatch");
    if (config.C <= 0) throw UsageError("smo: C must be positive");
    bool pos = false, neg = false;
    for (int y : labels) {
        if (y == 1) pos = true;
        else if (y == -1) neg = true;
        else throw DataError("smo: labels must be +1/-1");
    }
    if (!pos || !neg) throw DataError("smo: both classes must be present");

    SmoSolver solver(rows, labels, config);
    solver.solve();
    if (alpha_out) *alpha_out = solver.alphas();
    return solver.result();
}

double svm_dual_objective(const BinarySvm& svm) {
    double lin = 0.0, quad = 0.0;
    std::size_t m = svm.support_vectors.size();
    for (std::size_t i = 0; i < m; ++i) {
        lin += svm.alpha[i];
        for (std::size_t j = 0; j < m; ++j) {
            quad += svm.alpha[i] * svm.alpha[j] * svm.labels[i] * svm.labels[j] *
                    svm.kernel(svm.support_vectors[i], svm.support_vectors[j]);
        }
    }
    return lin - 0.5 * quad;
}

double svm_max_kkt_violation(const BinarySvm& svm, const std::vector<std::vector<double>>& rows,
                             const std::vector<int>& labels, const std::vector<double>& alpha) {
    double worst = 0.0;
    for (std::size_t r = 0; r < rows.size(); ++r) {
        // Same bound slack as the solver: a clamped update may leave a
        // coefficient within rounding of 0 or C.
        double a = alpha[r];
        double yf = labels[r] * svm.decision(rows[r]);
        if (a <= 1e-8 * svm.C) worst = std::max(worst, 1.0 - yf);
        else if (a >= (1.0 - 1e-8) * svm.C) worst = std::max(worst, yf - 1.0);
        else worst = std::max(worst, std::abs(yf - 1.0));
    }
    return worst;
}

MultiSvm::MultiSvm(std::vector<BinarySvm> machines, ImputationPlan plan,
                   std::vector<ColumnDescriptor> columns)
    : machines_(std::move(machines)), plan_(std::move(plan)) {
    columns_ = std::move(columns);
}

Scores MultiSvm::score(std::span<const double> row, std::span<const std::uint8_t> miss) const {
    check_layout(row);
    auto x = plan_.apply(row, miss);
    Scores votes{};
    for (const auto& m : machines_) {
        int winner = m.decision(x) >= 0 ? m.class_pair.first : m.class_pair.second;
        votes[static_cast<std::size_t>(winner - 1)] += 1.0;
    }
    double total = static_cast<double>(machines_.size());
    for (auto& v : votes) v /= total;
    return votes;
}

MultiSvm fit_svm_multiclass(const DesignMatrix& matrix, const SmoConfig& config) {
    std::array<bool, kNumClasses> present{};
    for (int t : matrix.targets) present[static_cast<std::size_t>(t - 1)] = true;
    int n_present = 0;
    for (bool p : present) n_present += p;
    if (n_present < kNumClasses) {
        throw DataError("fit_svm_multiclass: all " + std::to_string(kNumClasses) +
                        " classes must be present in training data");
    }

    auto plan = make_imputation_plan(matrix, /*scale=*/true);
    std::vector<std::vector<double>> imputed;
    imputed.reserve(matrix.n_rows);
    for (std::size_t r = 0; r < matrix.n_rows; ++r) {
        imputed.push_back(plan.apply(matrix.row(r), matrix.row_missing(r)));
    }

    std::vector<BinarySvm> machines;
    for (int a = 1; a <= kNumClasses; ++a) {
        for (int b = a + 1; b <= kNumClasses; ++b) {
            std::vector<std::vector<double>> rows;
            std::vector<int> labels;
            for (std::size_t r = 0; r < matrix.n_rows; ++r) {
                if (matrix.targets[r] == a) {
                    rows.push_back(imputed[r]);
                    labels.push_back(1);
                } else if (matrix.targets[r] == b) {
                    rows.push_back(imputed[r]);
                    labels.push_back(-1);
                }
            }
            SmoConfig pair_cfg = config;
            pair_cfg.seed = splitmix64(config.seed ^ (static_cast<std::uint64_t>(a) << 8 | static_cast<std::uint64_t>(b)));
            try {
                BinarySvm svm = smo_solve_binary(rows, labels, pair_cfg);
                svm.class_pair = {a, b};
                machines.push_back(std::move(svm));
            } catch (const ConvergenceError& e) {
                throw ConvergenceError("pair (" + std::to_string(a) + "," + std::to_string(b) + "): " + e.what());
            }
        }
    }
    return MultiSvm(std::move(machines), std::move(plan), matrix.columns);
}

void MultiSvm::save(std::ostream& out) const {
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
    out << "machines " << machines_.size() << "\n";
    for (const auto& m : machines_) {
        out << "machine " << m.class_pair.first << " " << m.class_pair.second << " "
            << (m.kernel.type == KernelSpec::Type::Linear ? "linear" : "rbf") << " ";
        io::write_double(out, m.kernel.gamma);
        out << " ";
        io::write_double(out, m.C);
        out << " ";
        io::write_double(out, m.bias);
        out << " " << m.support_vectors.size() << " "
            << (m.support_vectors.empty() ? 0 : m.support_vectors[0].size()) << "\n";
        for (std::size_t s = 0; s < m.support_vectors.size(); ++s) {
            io::write_double(out, m.alpha[s]);
            out << " " << m.labels[s];
            for (double v : m.support_vectors[s]) {
                out << " ";
                io::write_double(out, v);
            }
            out << "\n";
        }
    }
}

std::unique_ptr<MultiSvm> MultiSvm::load(std::istream& in) {
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
    io::expect_token(in, "machines");
    std::size_t n = 0;
    in >> n;
    std::vector<BinarySvm> machines(n);
    for (auto& m : machines) {
        io::expect_token(in, "machine");
        std::string kernel_name;
        std::size_t n_sv = 0, dim = 0;
        in >> m.class_pair.first >> m.class_pair.second >> kernel_name;
        m.kernel.type = kernel_name == "rbf" ? KernelSpec::Type::Rbf : KernelSpec::Type::Linear;
        m.kernel.gamma = io::read_double(in);
        m.C = io::read_double(in);
        m.bias = io::read_double(in);
        in >> n_sv >> dim;
        m.support_vectors.assign(n_sv, std::vector<double>(dim));
        m.alpha.resize(n_sv);
        m.labels.resize(n_sv);
        for (std::size_t s = 0; s < n_sv; ++s) {
            m.alpha[s] = io::read_double(in);
            in >> m.labels[s];
            for (auto& v : m.support_vectors[s]) v = io::read_double(in);
        }
    }
    if (!in) throw DataError("model file: truncated svm");
    return std::make_unique<MultiSvm>(std::move(machines), std::move(plan), std::move(cols));
}

}  // namespace panelml
