#include "panelml/codebook.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include "panelml/csv.hpp"
#include "panelml/errors.hpp"

namespace panelml {

namespace {

int parse_int(const std::string& s, const std::string& where, std::size_t line) {
    int v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || p != s.data() + s.size()) {
        throw DataError(where + " line " + std::to_string(line) + ": not an integer: '" + s + "'");
    }
    return v;
}

double parse_real(const std::string& s, const std::string& where, std::size_t line) {
    try {
        std::size_t pos = 0;
        double v = std::stod(s, &pos);
        if (pos != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw DataError(where + " line " + std::to_string(line) + ": not a number: '" + s + "'");
    }
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::string item;
    std::istringstream in(s);
    while (std::getline(in, item, ';')) {
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

Role parse_role(const std::string& s, const std::string& where, std::size_t line) {
    if (s == "id") return Role::Id;
    if (s == "time") return Role::Time;
    if (s == "feature") return Role::Feature;
    if (s == "target") return Role::Target;
    throw DataError(where + " line " + std::to_string(line) + ": unknown role '" + s + "'");
}

VarKind parse_kind(const std::string& s, const std::string& where, std::size_t line) {
    if (s == "numeric") return VarKind::Numeric;
    if (s == "nominal") return VarKind::Nominal;
    throw DataError(where + " line " + std::to_string(line) + ": unknown kind '" + s + "'");
}

}  // namespace

int Codebook::index_of(const std::string& name) const {
    for (std::size_t i = 0; i < variables.size(); ++i) {
        if (variables[i].name == name) return static_cast<int>(i);
    }
    return -1;
}

int Codebook::id_index() const {
    for (std::size_t i = 0; i < variables.size(); ++i) {
        if (variables[i].role == Role::Id) return static_cast<int>(i);
    }
    return -1;
}

int Codebook::target_index() const {
    for (std::size_t i = 0; i < variables.size(); ++i) {
        if (variables[i].role == Role::Target) return static_cast<int>(i);
    }
    return -1;
}

std::vector<int> Codebook::repeated_years() const {
    std::set<int> ys;
    for (const auto& v : variables) {
        if (v.repeated()) ys.insert(v.year_suffixes.begin(), v.year_suffixes.end());
    }
    return {ys.begin(), ys.end()};
}

Codebook parse_codebook(const std::string& text, const std::string& origin) {
    auto records = csv::parse_string(text);
    if (records.empty()) throw DataError(origin + ": empty codebook");

    const std::vector<std::string> expected_header = {
        "name", "role", "kind", "missing_codes", "valid_values",
        "year_suffixes", "recode_ref", "bin_edges"};
    if (records[0].fields != expected_header) {
        throw DataError(origin + " line " + std::to_string(records[0].line) + ": bad codebook header");
    }

    Codebook cb;
    std::unordered_set<std::string> seen;
    int n_target = 0, n_id = 0;
    std::set<int> all_years;

    for (std::size_t r = 1; r < records.size(); ++r) {
        const auto& rec = records[r];
        if (rec.fields.size() != expected_header.size()) {
            throw DataError(origin + " line " + std::to_string(rec.line) + ": expected " +
                            std::to_string(expected_header.size()) + " fields, got " +
                            std::to_string(rec.fields.size()));
        }
        VariableSpec v;
        v.name = rec.fields[0];
        if (v.name.empty()) throw DataError(origin + " line " + std::to_string(rec.line) + ": empty variable name");
        if (!seen.insert(v.name).second) {
            throw DataError(origin + " line " + std::to_string(rec.line) + ": duplicate variable '" + v.name + "'");
        }
        v.role = parse_role(rec.fields[1], origin, rec.line);
        v.kind = parse_kind(rec.fields[2], origin, rec.line);
        for (const auto& tok : split_list(rec.fields[3])) {
            v.missing_codes.insert(parse_int(tok, origin, rec.line));
        }
        for (const auto& tok : split_list(rec.fields[4])) {
            auto dash = tok.find('-', tok[0] == '-' ? 1 : 0);
            if (dash == std::string::npos) {
                int x = parse_int(tok, origin, rec.line);
                v.valid_values.emplace_back(x, x);
            } else {
                int lo = parse_int(tok.substr(0, dash), origin, rec.line);
                int hi = parse_int(tok.substr(dash + 1), origin, rec.line);
                if (hi < lo) throw DataError(origin + " line " + std::to_string(rec.line) + ": descending range '" + tok + "'");
                v.valid_values.emplace_back(lo, hi);
            }
        }
        for (const auto& tok : split_list(rec.fields[5])) {
            v.year_suffixes.push_back(parse_int(tok, origin, rec.line));
        }
        std::sort(v.year_suffixes.begin(), v.year_suffixes.end());
        if (std::adjacent_find(v.year_suffixes.begin(), v.year_suffixes.end()) != v.year_suffixes.end()) {
            throw DataError(origin + " line " + std::to_string(rec.line) + ": duplicate year suffix");
        }
        v.recode_ref = rec.fields[6];
        for (const auto& tok : split_list(rec.fields[7])) {
            v.bin_edges.push_back(parse_real(tok, origin, rec.line));
        }
        for (std::size_t i = 1; i < v.bin_edges.size(); ++i) {
            if (!(v.bin_edges[i - 1] < v.bin_edges[i])) {
                throw DataError(origin + " line " + std::to_string(rec.line) + ": bin_edges not strictly ascending");
            }
        }
        if (v.role == Role::Target) ++n_target;
        if (v.role == Role::Id) ++n_id;
        all_years.insert(v.year_suffixes.begin(), v.year_suffixes.end());
        cb.variables.push_back(std::move(v));
    }

    if (n_target != 1) throw DataError(origin + ": need exactly one target variable, found " + std::to_string(n_target));
    if (n_id != 1) throw DataError(origin + ": need exactly one id variable, found " + std::to_string(n_id));
    cb.years.assign(all_years.begin(), all_years.end());
    return cb;
}

Codebook load_codebook(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open codebook: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_codebook(buf.str(), path);
}

}  // namespace panelml
