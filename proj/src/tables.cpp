#include "panelml/tables.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <set>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "panelml/csv.hpp"
#include "panelml/errors.hpp"
#include "panelml/rng.hpp"

namespace panelml {

namespace {

bool parse_int64(const std::string& s, std::int64_t& out) {
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc{} && p == s.data() + s.size();
}

bool parse_double(const std::string& s, double& out) {
    try {
        std::size_t pos = 0;
        out = std::stod(s, &pos);
        return pos == s.size();
    } catch (const std::exception&) {
        return false;
    }
}

Cell parse_cell(const std::string& tok, const VariableSpec& var, const std::string& origin, std::size_t line) {
    if (tok.empty()) return Cell::absent();
    if (var.kind == VarKind::Nominal) {
        std::int64_t v = 0;
        if (!parse_int64(tok, v)) {
            throw DataError(origin + " line " + std::to_string(line) + ": column '" + var.name +
                            "' is integer-coded, got '" + tok + "'");
        }
        return Cell::category(static_cast<int>(v));
    }
    double v = 0.0;
    if (!parse_double(tok, v)) {
        throw DataError(origin + " line " + std::to_string(line) + ": column '" + var.name +
                        "' is numeric, got '" + tok + "'");
    }
    return Cell::numeric(v);
}

}  // namespace

int WideTable::column_of(int var_index, int year) const {
    for (std::size_t c = 0; c < columns.size(); ++c) {
        if (columns[c].var_index == var_index && columns[c].year == year) return static_cast<int>(c);
    }
    return -1;
}

int LongTable::col_of(const std::string& name) const {
    for (std::size_t i = 0; i < var_indices.size(); ++i) {
        if (codebook.variables[static_cast<std::size_t>(var_indices[i])].name == name) {
            return static_cast<int>(i);
        }
    }
    return -1;
}

int LongTable::target_col() const {
    for (std::size_t i = 0; i < var_indices.size(); ++i) {
        if (codebook.variables[static_cast<std::size_t>(var_indices[i])].role == Role::Target) {
            return static_cast<int>(i);
        }
    }
    return -1;
}

std::vector<std::string> LongTable::column_names() const {
    std::vector<std::string> out;
    out.reserve(var_indices.size());
    for (int vi : var_indices) out.push_back(codebook.variables[static_cast<std::size_t>(vi)].name);
    return out;
}

std::vector<int> LongTable::years_present() const {
    std::set<int> ys;
    for (const auto& r : rows) ys.insert(r.year);
    return {ys.begin(), ys.end()};
}

WideTable ingest_wide_string(const std::string& text, const Codebook& codebook, const std::string& origin) {
    auto records = csv::parse_string(text);
    if (records.empty()) throw DataError(origin + ": empty file");

    // Expected column set from the codebook.
    WideTable wide;
    wide.codebook = codebook;
    std::unordered_map<std::string, int> expected;  // header -> column slot
    for (std::size_t vi = 0; vi < codebook.variables.size(); ++vi) {
        const auto& var = codebook.variables[vi];
        if (var.repeated()) {
            for (int y : var.year_suffixes) {
                std::string h = var.name + "#" + std::to_string(y);
                expected[h] = static_cast<int>(wide.columns.size());
                wide.columns.push_back({static_cast<int>(vi), y, h});
            }
        } else {
            expected[var.name] = static_cast<int>(wide.columns.size());
            wide.columns.push_back({static_cast<int>(vi), -1, var.name});
        }
    }

    // Map file header order onto column slots.
    const auto& header = records[0];
    std::vector<int> slot_of_field(header.fields.size(), -1);
    std::unordered_set<std::string> seen;
    for (std::size_t f = 0; f < header.fields.size(); ++f) {
        const auto& h = header.fields[f];
        auto it = expected.find(h);
        if (it == expected.end()) {
            throw DataError(origin + ": unknown column '" + h + "'");
        }
        if (!seen.insert(h).second) throw DataError(origin + ": duplicate column '" + h + "'");
        slot_of_field[f] = it->second;
    }
    if (seen.size() != expected.size()) {
        for (const auto& [h, slot] : expected) {
            (void)slot;
            if (!seen.count(h)) throw DataError(origin + ": missing required column '" + h + "'");
        }
    }

    int id_var = codebook.id_index();
    std::unordered_set<std::int64_t> id_seen;

    for (std::size_t r = 1; r < records.size(); ++r) {
        const auto& rec = records[r];
        if (rec.fields.size() != header.fields.size()) {
            throw DataError(origin + " line " + std::to_string(rec.line) + ": expected " +
                            std::to_string(header.fields.size()) + " fields, got " +
                            std::to_string(rec.fields.size()));
        }
        std::vector<Cell> cells(wide.columns.size(), Cell::absent());
        for (std::size_t f = 0; f < rec.fields.size(); ++f) {
            int slot = slot_of_field[f];
            const auto& var = codebook.variables[static_cast<std::size_t>(wide.columns[static_cast<std::size_t>(slot)].var_index)];
            cells[static_cast<std::size_t>(slot)] = parse_cell(rec.fields[f], var, origin, rec.line);
        }
        int id_slot = wide.column_of(id_var, -1);
        const Cell& idc = cells[static_cast<std::size_t>(id_slot)];
        if (idc.is_absent()) throw DataError(origin + " line " + std::to_string(rec.line) + ": missing individual id");
        auto id = static_cast<std::int64_t>(idc.as_double());
        if (!id_seen.insert(id).second) {
            throw DataError(origin + " line " + std::to_string(rec.line) + ": duplicate individual id " + std::to_string(id));
        }
        wide.ids.push_back(id);
        wide.rows.push_back(std::move(cells));
    }
    return wide;
}

WideTable ingest_wide_csv(const std::string& path, const Codebook& codebook) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open data file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return ingest_wide_string(buf.str(), codebook, path);
}

LongTable unroll_longitudinal(const WideTable& wide) {
    const Codebook& cb = wide.codebook;
    auto years = cb.repeated_years();
    if (years.empty()) throw DataError("unroll: codebook declares no repeated-measure variable");

    LongTable out;
    out.codebook = cb;
    int id_var = cb.id_index();
    for (std::size_t vi = 0; vi < cb.variables.size(); ++vi) {
        if (static_cast<int>(vi) != id_var) out.var_indices.push_back(static_cast<int>(vi));
    }

    // Precompute column slots per (variable, year).
    std::vector<int> plain_slot(cb.variables.size(), -1);
    std::vector<std::unordered_map<int, int>> year_slot(cb.variables.size());
    for (std::size_t c = 0; c < wide.columns.size(); ++c) {
        const auto& col = wide.columns[c];
        if (col.year < 0) plain_slot[static_cast<std::size_t>(col.var_index)] = static_cast<int>(c);
        else year_slot[static_cast<std::size_t>(col.var_index)][col.year] = static_cast<int>(c);
    }

    out.rows.reserve(wide.row_count() * years.size());
    for (std::size_t r = 0; r < wide.row_count(); ++r) {
        for (int y : years) {
            LongRow row;
            row.id = wide.ids[r];
            row.year = y;
            row.cells.reserve(out.var_indices.size());
            for (int vi : out.var_indices) {
                const auto& var = cb.variables[static_cast<std::size_t>(vi)];
                if (var.repeated()) {
                    auto it = year_slot[static_cast<std::size_t>(vi)].find(y);
                    row.cells.push_back(it == year_slot[static_cast<std::size_t>(vi)].end()
                                            ? Cell::absent()
                                            : wide.rows[r][static_cast<std::size_t>(it->second)]);
                } else {
                    row.cells.push_back(wide.rows[r][static_cast<std::size_t>(plain_slot[static_cast<std::size_t>(vi)])]);
                }
            }
            out.rows.push_back(std::move(row));
        }
    }
    return out;
}

std::pair<LongTable, std::size_t> filter_invalid_target(const LongTable& table) {
    int tc = table.target_col();
    LongTable out;
    out.codebook = table.codebook;
    out.var_indices = table.var_indices;
    for (const auto& row : table.rows) {
        const Cell& t = row.cells[static_cast<std::size_t>(tc)];
        if (t.is_absent()) continue;
        if (t.as_double() < 0) continue;
        out.rows.push_back(row);
    }
    return {std::move(out), table.row_count() - out.row_count()};
}

LongTable mark_missing(const LongTable& table) {
    LongTable out = table;
    for (std::size_t i = 0; i < out.var_indices.size(); ++i) {
        const auto& var = out.codebook.variables[static_cast<std::size_t>(out.var_indices[i])];
        if (var.role == Role::Target) continue;
        for (auto& row : out.rows) {
            Cell& c = row.cells[i];
            if (c.is_absent()) continue;
            double v = c.as_double();
            bool integral = v == static_cast<double>(static_cast<long long>(v));
            if (v < 0 || (integral && var.missing_codes.count(static_cast<int>(v)))) {
                c = Cell::absent();
            }
        }
    }
    return out;
}

LongTable balanced_year_sample(const LongTable& table, std::size_t total, std::uint64_t seed) {
    auto years = table.years_present();
    if (years.empty()) throw DataError("balanced_year_sample: empty table");
    if (total % years.size() != 0) {
        throw DataError("balanced_year_sample: total " + std::to_string(total) +
                        " not divisible by " + std::to_string(years.size()) + " years");
    }
    std::size_t per_year = total / years.size();

    std::vector<std::size_t> selected;
    selected.reserve(total);
    for (std::size_t yi = 0; yi < years.size(); ++yi) {
        int y = years[yi];
        std::vector<std::size_t> idx;
        for (std::size_t r = 0; r < table.row_count(); ++r) {
            if (table.rows[r].year == y) idx.push_back(r);
        }
        if (idx.size() < per_year) {
            throw DataError("balanced_year_sample: year " + std::to_string(y) + " has only " +
                            std::to_string(idx.size()) + " rows, need " + std::to_string(per_year));
        }
        auto eng = substream(seed, "year_sample", static_cast<std::uint64_t>(y));
        shuffle_vec(idx, eng);
        idx.resize(per_year);
        selected.insert(selected.end(), idx.begin(), idx.end());
    }
    std::sort(selected.begin(), selected.end());

    LongTable out;
    out.codebook = table.codebook;
    out.var_indices = table.var_indices;
    out.rows.reserve(total);
    for (std::size_t r : selected) out.rows.push_back(table.rows[r]);
    return out;
}

LongTable filter_year(const LongTable& table, int year) {
    LongTable out;
    out.codebook = table.codebook;
    out.var_indices = table.var_indices;
    for (const auto& row : table.rows) {
        if (row.year == year) out.rows.push_back(row);
    }
    return out;
}

}  // namespace panelml
