#include "panelml/design.hpp"

#include <algorithm>
#include <set>
#include <sstream>

#include "panelml/errors.hpp"

namespace panelml {

int bin_target(double income, const std::vector<double>& edges) {
    if (income < 0) throw DataError("bin_target: negative income");
    if (edges.size() != static_cast<std::size_t>(kNumClasses) - 1) {
        throw DataError("bin_target: need exactly " + std::to_string(kNumClasses - 1) + " edges");
    }
    int cls = 1;
    for (double e : edges) {
        if (income >= e) ++cls;
    }
    return cls;
}

std::string ColumnDescriptor::header() const {
    switch (encoding) {
        case Encoding::Numeric: return source;
        case Encoding::OneHot: return source + "." + std::to_string(level);
        case Encoding::MissingLevel: return source + ".missing";
    }
    return source;
}

DesignMatrix DesignMatrix::subset(const std::vector<std::size_t>& rows) const {
    DesignMatrix out;
    out.columns = columns;
    out.n_rows = rows.size();
    out.values.reserve(rows.size() * n_cols());
    out.missing.reserve(rows.size() * n_cols());
    for (std::size_t r : rows) {
        out.values.insert(out.values.end(), values.begin() + static_cast<std::ptrdiff_t>(r * n_cols()),
                          values.begin() + static_cast<std::ptrdiff_t>((r + 1) * n_cols()));
        out.missing.insert(out.missing.end(), missing.begin() + static_cast<std::ptrdiff_t>(r * n_cols()),
                           missing.begin() + static_cast<std::ptrdiff_t>((r + 1) * n_cols()));
        out.targets.push_back(targets[r]);
        out.row_ids.push_back(row_ids[r]);
    }
    return out;
}

DesignMatrix DesignMatrix::without_variable(const std::string& variable) const {
    std::vector<std::size_t> keep_cols;
    for (std::size_t c = 0; c < columns.size(); ++c) {
        if (columns[c].source != variable) keep_cols.push_back(c);
    }
    if (keep_cols.size() == columns.size()) {
        throw UsageError("no columns derive from variable '" + variable + "'");
    }
    DesignMatrix out;
    for (std::size_t c : keep_cols) out.columns.push_back(columns[c]);
    out.n_rows = n_rows;
    out.targets = targets;
    out.row_ids = row_ids;
    out.values.reserve(n_rows * keep_cols.size());
    out.missing.reserve(n_rows * keep_cols.size());
    for (std::size_t r = 0; r < n_rows; ++r) {
        for (std::size_t c : keep_cols) {
            out.values.push_back(at(r, c));
            out.missing.push_back(missing[r * n_cols() + c]);
        }
    }
    return out;
}

std::string DesignMatrix::to_csv() const {
    std::ostringstream out;
    out.precision(17);
    out << "individual_id,year,target";
    for (const auto& col : columns) out << "," << col.header();
    out << "\n";
    for (std::size_t r = 0; r < n_rows; ++r) {
        out << row_ids[r].first << "," << row_ids[r].second << "," << targets[r];
        for (std::size_t c = 0; c < n_cols(); ++c) {
            out << ",";
            if (!is_missing(r, c)) out << at(r, c);
        }
        out << "\n";
    }
    return out.str();
}

DesignMatrix encode_design_matrix(const LongTable& table, const std::vector<std::string>& kept,
                                  bool one_hot, bool missing_level) {
    const Codebook& cb = table.codebook;
    int target_col = table.target_col();
    const auto& target_var = cb.target();
    if (target_var.bin_edges.empty()) throw DataError("encode: target has no bin edges");

    struct Plan {
        int table_col;
        const VariableSpec* var;
        std::vector<int> levels;  // observed category levels, ascending
        bool add_missing_level = false;
    };
    std::vector<Plan> plans;
    for (const auto& name : kept) {
        int tc = table.col_of(name);
        if (tc < 0) throw DataError("encode: variable '" + name + "' not in table");
        const auto& var = cb.variables[static_cast<std::size_t>(table.var_indices[static_cast<std::size_t>(tc)])];
        if (var.role == Role::Target) throw DataError("encode: target '" + name + "' cannot be a feature");
        Plan plan{tc, &var, {}, false};
        if (var.kind == VarKind::Nominal && one_hot) {
            std::set<int> levels;
            bool any_absent = false;
            for (const auto& row : table.rows) {
                const Cell& c = row.cells[static_cast<std::size_t>(tc)];
                if (c.is_absent()) any_absent = true;
                else levels.insert(c.is_category() ? c.cat : static_cast<int>(c.num));
            }
            plan.levels.assign(levels.begin(), levels.end());
            plan.add_missing_level = missing_level && any_absent;
        }
        plans.push_back(std::move(plan));
    }

    DesignMatrix m;
    for (const auto& plan : plans) {
        if (plan.var->kind == VarKind::Nominal && one_hot) {
            for (int lvl : plan.levels) {
                m.columns.push_back({plan.var->name, ColumnDescriptor::Encoding::OneHot, lvl});
            }
            if (plan.add_missing_level) {
                m.columns.push_back({plan.var->name, ColumnDescriptor::Encoding::MissingLevel, 0});
            }
        } else {
            m.columns.push_back({plan.var->name, ColumnDescriptor::Encoding::Numeric, 0});
        }
    }

    m.n_rows = table.row_count();
    m.values.assign(m.n_rows * m.n_cols(), 0.0);
    m.missing.assign(m.n_rows * m.n_cols(), 0);
    m.targets.reserve(m.n_rows);
    m.row_ids.reserve(m.n_rows);

    for (std::size_t r = 0; r < table.row_count(); ++r) {
        const auto& row = table.rows[r];
        const Cell& t = row.cells[static_cast<std::size_t>(target_col)];
        if (t.is_absent()) throw DataError("encode: absent target at row " + std::to_string(r));
        m.targets.push_back(bin_target(t.as_double(), target_var.bin_edges));
        m.row_ids.emplace_back(row.id, row.year);

        std::size_t c = 0;
        for (const auto& plan : plans) {
            const Cell& cell = row.cells[static_cast<std::size_t>(plan.table_col)];
            if (plan.var->kind == VarKind::Nominal && one_hot) {
                if (!cell.is_absent()) {
                    int code = cell.is_category() ? cell.cat : static_cast<int>(cell.num);
                    auto it = std::lower_bound(plan.levels.begin(), plan.levels.end(), code);
                    m.values[r * m.n_cols() + c + static_cast<std::size_t>(it - plan.levels.begin())] = 1.0;
                }
                c += plan.levels.size();
                if (plan.add_missing_level) {
                    if (cell.is_absent()) m.values[r * m.n_cols() + c] = 1.0;
                    ++c;
                }
            } else {
                if (cell.is_absent()) {
                    m.missing[r * m.n_cols() + c] = 1;
                } else {
                    m.values[r * m.n_cols() + c] = cell.as_double();
                }
                ++c;
            }
        }
    }
    return m;
}

Scores class_distribution(const std::vector<int>& targets) {
    if (targets.empty()) throw DataError("class_distribution: empty input");
    Scores out{};
    for (int t : targets) {
        if (t < 1 || t > kNumClasses) throw DataError("class_distribution: label out of range");
        out[static_cast<std::size_t>(t - 1)] += 1.0;
    }
    for (auto& v : out) v /= static_cast<double>(targets.size());
    return out;
}

}  // namespace panelml
