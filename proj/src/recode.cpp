#include "panelml/recode.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "panelml/csv.hpp"
#include "panelml/errors.hpp"

namespace panelml {

Cell RecodeMap::apply(int raw) const {
    for (const auto& r : ranges) {
        if (raw >= r.low && raw <= r.high) return Cell::category(r.out_category);
    }
    return Cell::absent();
}

RecodeMap parse_recode_map(const std::string& text, const std::string& name, const std::string& origin) {
    auto records = csv::parse_string(text);
    if (records.empty()) throw DataError(origin + ": empty recode map");
    if (records[0].fields != std::vector<std::string>{"low", "high", "out_category"}) {
        throw DataError(origin + ": bad recode map header");
    }
    RecodeMap map;
    map.name = name;
    for (std::size_t r = 1; r < records.size(); ++r) {
        const auto& rec = records[r];
        if (rec.fields.size() != 3) {
            throw DataError(origin + " line " + std::to_string(rec.line) + ": expected 3 fields");
        }
        RecodeMap::Range range;
        try {
            range.low = std::stoi(rec.fields[0]);
            range.high = std::stoi(rec.fields[1]);
            range.out_category = std::stoi(rec.fields[2]);
        } catch (const std::exception&) {
            throw DataError(origin + " line " + std::to_string(rec.line) + ": non-integer field");
        }
        if (range.high < range.low) {
            throw DataError(origin + " line " + std::to_string(rec.line) + ": descending range");
        }
        if (range.out_category < 1) {
            throw DataError(origin + " line " + std::to_string(rec.line) + ": out_category must be >= 1");
        }
        map.ranges.push_back(range);
    }
    // Overlap check over ranges sorted by low end.
    auto sorted = map.ranges;
    std::sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) { return a.low < b.low; });
    for (std::size_t i = 1; i < sorted.size(); ++i) {
        if (sorted[i].low <= sorted[i - 1].high) {
            throw DataError(origin + ": overlapping ranges at " + std::to_string(sorted[i].low));
        }
    }
    return map;
}

RecodeMap load_recode_map(const std::string& path, const std::string& name) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open recode map: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_recode_map(buf.str(), name, path);
}

RecodeOutcome apply_recodes(const LongTable& table, const std::vector<RecodeMap>& maps) {
    RecodeOutcome out;
    out.table = table;
    for (std::size_t i = 0; i < out.table.var_indices.size(); ++i) {
        const auto& var = out.table.codebook.variables[static_cast<std::size_t>(out.table.var_indices[i])];
        if (var.recode_ref.empty()) continue;
        auto it = std::find_if(maps.begin(), maps.end(),
                               [&](const RecodeMap& m) { return m.name == var.recode_ref; });
        if (it == maps.end()) {
            throw DataError("no recode map named '" + var.recode_ref + "' for variable '" + var.name + "'");
        }
        std::size_t dropped = 0;
        for (auto& row : out.table.rows) {
            Cell& c = row.cells[i];
            if (c.is_absent()) continue;
            Cell mapped = it->apply(c.is_category() ? c.cat : static_cast<int>(c.num));
            if (mapped.is_absent()) ++dropped;
            c = mapped;
        }
        if (dropped) out.uncovered.emplace_back(var.name, dropped);
    }
    return out;
}

}  // namespace panelml
