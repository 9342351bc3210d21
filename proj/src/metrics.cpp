#include "panelml/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

#include "panelml/errors.hpp"
#include "panelml/rng.hpp"

namespace panelml {

namespace {

void check_fraction(const SplitSpec& spec) {
    if (!(spec.fraction > 0.0 && spec.fraction < 1.0)) {
        throw UsageError("split: train fraction must be strictly between 0 and 1");
    }
}

}  // namespace

Split percentage_split(std::size_t n, const SplitSpec& spec) {
    check_fraction(spec);
    if (n < 2) throw DataError("split: need at least 2 rows");

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    auto eng = substream(spec.seed, "split");
    shuffle_vec(order, eng);

    auto n_train = static_cast<std::size_t>(
        std::llround(static_cast<double>(n) * spec.fraction));
    n_train = std::clamp<std::size_t>(n_train, 1, n - 1);

    Split s;
    s.train.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
    s.test.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train), order.end());
    std::sort(s.train.begin(), s.train.end());
    std::sort(s.test.begin(), s.test.end());
    return s;
}

Split percentage_split_grouped(const std::vector<std::int64_t>& ids, const SplitSpec& spec) {
    check_fraction(spec);
    std::size_t n = ids.size();
    if (n < 2) throw DataError("split: need at least 2 rows");

    // Unique individuals in first-appearance order, then a seeded shuffle.
    std::vector<std::int64_t> groups;
    std::vector<std::vector<std::size_t>> members;
    for (std::size_t r = 0; r < n; ++r) {
        auto it = std::find(groups.begin(), groups.end(), ids[r]);
        if (it == groups.end()) {
            groups.push_back(ids[r]);
            members.emplace_back();
            it = groups.end() - 1;
        }
        members[static_cast<std::size_t>(it - groups.begin())].push_back(r);
    }
    if (groups.size() < 2) {
        throw DataError("split: grouped mode needs at least 2 individuals for a nonempty test set");
    }

    std::vector<std::size_t> group_order(groups.size());
    std::iota(group_order.begin(), group_order.end(), std::size_t{0});
    auto eng = substream(spec.seed, "split_groups");
    shuffle_vec(group_order, eng);

    auto target = static_cast<std::size_t>(std::llround(static_cast<double>(n) * spec.fraction));
    Split s;
    std::size_t last_train_group = 0;
    for (std::size_t g : group_order) {
        if (s.train.size() < target) {
            s.train.insert(s.train.end(), members[g].begin(), members[g].end());
            last_train_group = g;
        } else {
            s.test.insert(s.test.end(), members[g].begin(), members[g].end());
        }
    }
    if (s.test.empty()) {
        // The train target swallowed every group; hand the last one back.
        const auto& m = members[last_train_group];
        s.train.resize(s.train.size() - m.size());
        s.test.insert(s.test.end(), m.begin(), m.end());
    }
    if (s.train.empty() || s.test.empty()) {
        throw DataError("split: grouped mode cannot produce nonempty train and test sets");
    }
    std::sort(s.train.begin(), s.train.end());
    std::sort(s.test.begin(), s.test.end());
    return s;
}

Split percentage_split(const DesignMatrix& matrix, const SplitSpec& spec) {
    if (!spec.group_by_individual) return percentage_split(matrix.n_rows, spec);
    std::vector<std::int64_t> ids;
    ids.reserve(matrix.n_rows);
    for (const auto& [id, year] : matrix.row_ids) ids.push_back(id);
    return percentage_split_grouped(ids, spec);
}

std::int64_t ConfusionMatrix::total() const {
    std::int64_t t = 0;
    for (const auto& row : counts) {
        for (std::int64_t c : row) t += c;
    }
    return t;
}

std::int64_t ConfusionMatrix::trace() const {
    std::int64_t t = 0;
    for (int k = 0; k < kNumClasses; ++k) t += counts[static_cast<std::size_t>(k)][static_cast<std::size_t>(k)];
    return t;
}

double accuracy(const ConfusionMatrix& cm) {
    std::int64_t total = cm.total();
    if (total == 0) throw DataError("accuracy: empty confusion matrix");
    return 100.0 * static_cast<double>(cm.trace()) / static_cast<double>(total);
}

ConfusionMatrix confusion(const std::vector<int>& actual, const std::vector<int>& predicted) {
    if (actual.size() != predicted.size()) throw DataError("confusion: length mismatch");
    if (actual.empty()) throw DataError("confusion: empty input");
    ConfusionMatrix cm;
    for (std::size_t i = 0; i < actual.size(); ++i) {
        int a = actual[i], p = predicted[i];
        if (a < 1 || a > kNumClasses || p < 1 || p > kNumClasses) {
            throw DataError("confusion: class label out of range");
        }
        cm.counts[static_cast<std::size_t>(a - 1)][static_cast<std::size_t>(p - 1)] += 1;
    }
    return cm;
}

std::optional<double> roc_auc_ovr(const std::vector<double>& scores,
                                  const std::vector<bool>& positives) {
    if (scores.size() != positives.size()) throw DataError("auc: length mismatch");
    std::vector<double> pos, neg;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        (positives[i] ? pos : neg).push_back(scores[i]);
    }
    if (pos.empty() || neg.empty()) return std::nullopt;

    // Direct Mann-Whitney pair count; integer-valued doubles throughout,
    // so the result is exact up to the final division.
    double twice_count = 0.0;  // 2*concordant + tied
    for (double p : pos) {
        for (double q : neg) {
            if (p > q) twice_count += 2.0;
            else if (p == q) twice_count += 1.0;
        }
    }
    return twice_count / (2.0 * static_cast<double>(pos.size()) * static_cast<double>(neg.size()));
}

double weighted_auc(const std::array<std::optional<double>, kNumClasses>& auc,
                    const Scores& prevalence) {
    double total = prevalence[0] + prevalence[1] + prevalence[2];
    if (std::abs(total - 1.0) > 1e-9) throw DataError("weighted_auc: prevalence must sum to 1");
    double out = 0.0;
    for (int k = 0; k < kNumClasses; ++k) {
        auto ks = static_cast<std::size_t>(k);
        if (prevalence[ks] == 0.0) continue;
        if (!auc[ks]) {
            throw DataError("weighted_auc: class " + std::to_string(k + 1) +
                            " has positive prevalence but undefined AUC");
        }
        out += prevalence[ks] * *auc[ks];
    }
    return out;
}

EvalReport evaluate(const Trainer& trainer, const DesignMatrix& matrix, const SplitSpec& spec,
                    const std::string& model_name) {
    if (matrix.n_rows == 0) throw DataError("evaluate: empty matrix");
    Split split = percentage_split(matrix, spec);
    DesignMatrix train = matrix.subset(split.train);
    DesignMatrix test = matrix.subset(split.test);

    std::unique_ptr<Model> model = trainer(train);

    std::vector<int> actual = test.targets;
    std::vector<int> predicted;
    std::vector<std::array<double, kNumClasses>> scores;
    predicted.reserve(test.n_rows);
    for (std::size_t r = 0; r < test.n_rows; ++r) {
        auto [cls, s] = model->predict(test.row(r), test.row_missing(r));
        predicted.push_back(cls);
        scores.push_back(s);
    }

    EvalReport report;
    report.model_name = model_name;
    report.n_train = train.n_rows;
    report.n_test = test.n_rows;
    report.cm = confusion(actual, predicted);
    report.accuracy = accuracy(report.cm);

    Scores prevalence = class_distribution(actual);
    for (int k = 1; k <= kNumClasses; ++k) {
        std::vector<double> class_scores;
        std::vector<bool> is_positive;
        for (std::size_t r = 0; r < test.n_rows; ++r) {
            class_scores.push_back(scores[r][static_cast<std::size_t>(k - 1)]);
            is_positive.push_back(actual[r] == k);
        }
        report.auc[static_cast<std::size_t>(k - 1)] = roc_auc_ovr(class_scores, is_positive);
    }
    bool weighted_defined = true;
    for (int k = 0; k < kNumClasses; ++k) {
        auto ks = static_cast<std::size_t>(k);
        if (prevalence[ks] > 0.0 && !report.auc[ks]) weighted_defined = false;
    }
    if (weighted_defined) report.weighted = weighted_auc(report.auc, prevalence);
    return report;
}

std::string EvalReport::to_csv() const {
    std::ostringstream out;
    out << "metric,value\n";
    out << "model," << model_name << "\n";
    out << "train_rows," << n_train << "\n";
    out << "test_rows," << n_test << "\n";
    out << "accuracy_percent," << accuracy << "\n";
    for (int k = 0; k < kNumClasses; ++k) {
        out << "auc_class_" << (k + 1) << ",";
        if (auc[static_cast<std::size_t>(k)]) out << *auc[static_cast<std::size_t>(k)];
        out << "\n";
    }
    out << "weighted_auc,";
    if (weighted) out << *weighted;
    out << "\n";
    for (int a = 0; a < kNumClasses; ++a) {
        for (int p = 0; p < kNumClasses; ++p) {
            out << "confusion_" << (a + 1) << "_" << (p + 1) << ","
                << cm.counts[static_cast<std::size_t>(a)][static_cast<std::size_t>(p)] << "\n";
        }
    }
    return out.str();
}

std::string eval_markdown_table(const std::vector<EvalReport>& reports) {
    std::ostringstream out;
    out << "| Models | Correctly Classified Instances | ROC Area |\n";
    out << "| --- | --- | --- |\n";
    for (const auto& r : reports) {
        out << "| " << r.model_name << " | ";
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.4f%%", r.accuracy);
        out << buf << " | ";
        if (r.weighted) {
            std::snprintf(buf, sizeof buf, "%.3f", *r.weighted);
            out << buf;
        } else {
            out << "undefined";
        }
        out << " |\n";
    }
    return out.str();
}

}  // namespace panelml
