#include "panelml/model.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "panelml/errors.hpp"
#include "panelml/forest.hpp"
#include "panelml/majority.hpp"
#include "panelml/mlp.hpp"
#include "panelml/svm.hpp"

namespace panelml {

std::vector<double> ImputationPlan::apply(std::span<const double> row,
                                          std::span<const std::uint8_t> miss) const {
    if (row.size() != means.size()) throw DataError("imputation: row layout mismatch");
    std::vector<double> out(row.size());
    for (std::size_t c = 0; c < row.size(); ++c) {
        double v = (!miss.empty() && miss[c]) ? means[c] : row[c];
        if (scale) {
            double span = hi[c] - lo[c];
            v = span > 0 ? (v - lo[c]) / span : 0.0;
        }
        out[c] = v;
    }
    return out;
}

ImputationPlan make_imputation_plan(const DesignMatrix& matrix, bool scale) {
    ImputationPlan plan;
    plan.scale = scale;
    std::size_t p = matrix.n_cols();
    plan.means.assign(p, 0.0);
    plan.lo.assign(p, 0.0);
    plan.hi.assign(p, 0.0);
    for (std::size_t c = 0; c < p; ++c) {
        double sum = 0.0;
        std::size_t n = 0;
        double lo = 0.0, hi = 0.0;
        bool first = true;
        for (std::size_t r = 0; r < matrix.n_rows; ++r) {
            if (matrix.is_missing(r, c)) continue;
            double v = matrix.at(r, c);
            sum += v;
            ++n;
            if (first || v < lo) lo = v;
            if (first || v > hi) hi = v;
            first = false;
        }
        plan.means[c] = n ? sum / static_cast<double>(n) : 0.0;
        plan.lo[c] = lo;
        plan.hi[c] = hi;
    }
    return plan;
}

int argmax_class(const Scores& scores) {
    int best = 1;
    for (int k = 2; k <= kNumClasses; ++k) {
        if (scores[static_cast<std::size_t>(k - 1)] > scores[static_cast<std::size_t>(best - 1)]) {
            best = k;
        }
    }
    return best;
}

std::pair<int, Scores> Model::predict(std::span<const double> row,
                                      std::span<const std::uint8_t> miss) const {
    Scores s = score(row, miss);
    return {argmax_class(s), s};
}

void Model::check_layout(std::span<const double> row) const {
    if (row.size() != columns_.size()) {
        throw DataError(kind() + ": row has " + std::to_string(row.size()) + " columns, model expects " +
                        std::to_string(columns_.size()));
    }
}

namespace io {

void write_columns(std::ostream& out, const std::vector<ColumnDescriptor>& cols) {
    out << "columns " << cols.size() << "\n";
    for (const auto& c : cols) {
        int enc = static_cast<int>(c.encoding);
        out << c.source << " " << enc << " " << c.level << "\n";
    }
}

std::vector<ColumnDescriptor> read_columns(std::istream& in) {
    expect_token(in, "columns");
    std::size_t n = 0;
    in >> n;
    std::vector<ColumnDescriptor> cols(n);
    for (auto& c : cols) {
        int enc = 0;
        in >> c.source >> enc >> c.level;
        c.encoding = static_cast<ColumnDescriptor::Encoding>(enc);
    }
    if (!in) throw DataError("model file: truncated column table");
    return cols;
}

void write_double(std::ostream& out, double v) {
    char buf[32];
    auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
    out.write(buf, p - buf);
}

double read_double(std::istream& in) {
    std::string tok;
    in >> tok;
    if (!in) throw DataError("model file: truncated value");
    double v = 0.0;
    auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (ec != std::errc{} || p != tok.data() + tok.size()) {
        throw DataError("model file: bad number '" + tok + "'");
    }
    return v;
}

void expect_token(std::istream& in, const std::string& token) {
    std::string tok;
    in >> tok;
    if (tok != token) throw DataError("model file: expected '" + token + "', got '" + tok + "'");
}

}  // namespace io

std::unique_ptr<Model> load_model(std::istream& in) {
    std::string magic, kind;
    int version = 0;
    in >> magic >> version >> kind;
    if (magic != "panelml-model") throw DataError("not a model file");
    if (version != 1) throw DataError("unsupported model file version " + std::to_string(version));
    if (kind == "majority") return MajorityModel::load(in);
    if (kind == "forest") return ForestModel::load(in);
    if (kind == "svm") return MultiSvm::load(in);
    if (kind == "mlp") return MlpModel::load(in);
    throw DataError("unknown model kind '" + kind + "'");
}

std::unique_ptr<Model> load_model_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open model file: " + path);
    return load_model(in);
}

void save_model_file(const Model& model, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write model file: " + path);
    out << "panelml-model 1 " << model.kind() << "\n";
    model.save(out);
}

}  // namespace panelml
