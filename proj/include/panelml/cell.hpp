#pragma once

#include <cstdint>

namespace panelml {

/// One table cell: a real value, a category code, or absent.
struct Cell {
    enum class Kind : std::uint8_t { Absent, Numeric, Category };

    Kind kind = Kind::Absent;
    double num = 0.0;
    int cat = 0;

    static Cell absent() { return Cell{}; }
    static Cell numeric(double v) { return Cell{Kind::Numeric, v, 0}; }
    static Cell category(int c) { return Cell{Kind::Category, 0.0, c}; }

    bool is_absent() const { return kind == Kind::Absent; }
    bool is_numeric() const { return kind == Kind::Numeric; }
    bool is_category() const { return kind == Kind::Category; }

    /// Numeric view used by rank correlation and raw exports; category
    /// codes enter as their integer value.
    double as_double() const { return kind == Kind::Category ? static_cast<double>(cat) : num; }

    bool operator==(const Cell& o) const {
        if (kind != o.kind) return false;
        switch (kind) {
            case Kind::Absent: return true;
            case Kind::Numeric: return num == o.num;
            case Kind::Category: return cat == o.cat;
        }
        return false;
    }
};

}  // namespace panelml
