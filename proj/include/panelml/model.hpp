#pragma once

#include <iosfwd>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "panelml/design.hpp"

namespace panelml {

/// Training-time statistics used to fill absent cells in test rows:
/// numeric columns take the training mean, optionally followed by
/// min-max scaling to [0,1] (MLP). One-hot columns pass through.
struct ImputationPlan {
    std::vector<double> means;
    std::vector<double> lo, hi;  // scaling bounds, used when scale is set
    bool scale = false;

    std::vector<double> apply(std::span<const double> row, std::span<const std::uint8_t> miss) const;
};

ImputationPlan make_imputation_plan(const DesignMatrix& matrix, bool scale);

/// A fitted classifier. Immutable after fitting; score/predict are safe
/// to call concurrently.
class Model {
public:
    virtual ~Model() = default;

    /// Probability-style class scores summing to 1.
    virtual Scores score(std::span<const double> row, std::span<const std::uint8_t> miss) const = 0;
    virtual std::string kind() const = 0;
    virtual void save(std::ostream& out) const = 0;

    /// argmax of score; ties go to the smallest class id.
    std::pair<int, Scores> predict(std::span<const double> row, std::span<const std::uint8_t> miss) const;

    const std::vector<ColumnDescriptor>& columns() const { return columns_; }

protected:
    /// Throws on a row whose layout differs from the training columns.
    void check_layout(std::span<const double> row) const;
    std::vector<ColumnDescriptor> columns_;
};

/// Reload any model saved with Model::save.
std::unique_ptr<Model> load_model(std::istream& in);
std::unique_ptr<Model> load_model_file(const std::string& path);
void save_model_file(const Model& model, const std::string& path);

int argmax_class(const Scores& scores);

namespace io {
// Serialization helpers shared by the model implementations. Text
// format: one token per whitespace-separated field, doubles at full
// round-trip precision.
void write_columns(std::ostream& out, const std::vector<ColumnDescriptor>& cols);
std::vector<ColumnDescriptor> read_columns(std::istream& in);
void write_double(std::ostream& out, double v);
double read_double(std::istream& in);
void expect_token(std::istream& in, const std::string& token);
}  // namespace io

}  // namespace panelml
