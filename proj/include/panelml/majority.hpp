#pragma once

#include "panelml/model.hpp"

namespace panelml {

/// Predicts the most frequent training class; scores are the training
/// priors for every input.
class MajorityModel : public Model {
public:
    MajorityModel(int majority_class, Scores priors, std::vector<ColumnDescriptor> columns);

    Scores score(std::span<const double> row, std::span<const std::uint8_t> miss) const override;
    std::string kind() const override { return "majority"; }
    void save(std::ostream& out) const override;
    static std::unique_ptr<MajorityModel> load(std::istream& in);

    int majority_class() const { return majority_class_; }
    const Scores& priors() const { return priors_; }

private:
    int majority_class_;
    Scores priors_;
};

MajorityModel fit_majority(const std::vector<int>& targets, std::vector<ColumnDescriptor> columns = {});

}  // namespace panelml
