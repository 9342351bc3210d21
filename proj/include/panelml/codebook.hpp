#pragma once

#include <optional>
#include <set>
#include <string>
#include <vector>

namespace panelml {

enum class Role { Id, Time, Feature, Target };
enum class VarKind { Numeric, Nominal };

/// Declaration of one survey variable: how it is typed, which raw codes
/// mean "no answer", and in which survey years it was measured.
struct VariableSpec {
    std::string name;
    Role role = Role::Feature;
    VarKind kind = VarKind::Numeric;
    std::set<int> missing_codes;
    // Inclusive integer ranges; empty = unrestricted.
    std::vector<std::pair<int, int>> valid_values;
    // Years the variable was measured. Two or more years make it a
    // repeated measure and its wide-format columns carry year suffixes.
    std::vector<int> year_suffixes;
    std::string recode_ref;          // name of a recode map, empty = none
    std::vector<double> bin_edges;   // target only, strictly ascending

    bool repeated() const { return year_suffixes.size() > 1; }
};

struct Codebook {
    std::vector<VariableSpec> variables;
    std::vector<int> years;  // ascending union of all year suffixes

    int index_of(const std::string& name) const;  // -1 when absent
    int id_index() const;
    int target_index() const;
    const VariableSpec& target() const { return variables[static_cast<std::size_t>(target_index())]; }
    /// Years over which repeated measures unroll (union across repeated
    /// variables), ascending.
    std::vector<int> repeated_years() const;
};

/// Parse and validate a codebook CSV.
/// Header: name,role,kind,missing_codes,valid_values,year_suffixes,recode_ref,bin_edges
/// List fields are ';'-separated; valid_values entries may be "a" or "a-b".
Codebook load_codebook(const std::string& path);
Codebook parse_codebook(const std::string& text, const std::string& origin);

}  // namespace panelml
