#include "panelml/majority.hpp"

#include <array>
#include <istream>
#include <ostream>

#include "panelml/errors.hpp"

namespace panelml {

MajorityModel::MajorityModel(int majority_class, Scores priors, std::vector<ColumnDescriptor> columns)
    : majority_class_(majority_class), priors_(priors) {
    columns_ = std::move(columns);
}

Scores MajorityModel::score(std::span<const double> row, std::span<const std::uint8_t>) const {
    if (!columns_.empty()) check_layout(row);
    return priors_;
}

MajorityModel fit_majority(const std::vector<int>& targets, std::vector<ColumnDescriptor> columns) {
    if (targets.empty()) throw DataError("fit_majority: empty target vector");
    std::array<std::size_t, kNumClasses> counts{};
    for (int t : targets) {
        if (t < 1 || t > kNumClasses) throw DataError("fit_majority: label out of range");
        ++counts[static_cast<std::size_t>(t - 1)];
    }
    Scores priors{};
    for (int k = 0; k < kNumClasses; ++k) {
        priors[static_cast<std::size_t>(k)] =
            static_cast<double>(counts[static_cast<std::size_t>(k)]) / static_cast<double>(targets.size());
    }
    return MajorityModel(argmax_class(priors), priors, std::move(columns));
}

void MajorityModel::save(std::ostream& out) const {
    io::write_columns(out, columns_);
    out << "majority " << majority_class_ << "\npriors";
    for (double p : priors_) {
        out << " ";
        io::write_double(out, p);
    }
    out << "\n";
}

std::unique_ptr<MajorityModel> MajorityModel::load(std::istream& in) {
    auto cols = io::read_columns(in);
    io::expect_token(in, "majority");
    int cls = 0;
    in >> cls;
    io::expect_token(in, "priors");
    Scores priors{};
    for (auto& p : priors) p = io::read_double(in);
    return std::make_unique<MajorityModel>(cls, priors, std::move(cols));
}

}  // namespace panelml
