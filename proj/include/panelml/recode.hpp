#pragma once

#include <string>
#include <vector>

#include "panelml/cell.hpp"
#include "panelml/tables.hpp"

namespace panelml {

/// Maps raw integer codes to coarse categories via inclusive ranges.
struct RecodeMap {
    struct Range {
        int low = 0;
        int high = 0;
        int out_category = 0;
    };
    std::string name;
    std::vector<Range> ranges;  // non-overlapping, out_category >= 1

    /// Covering range's category, or absent when no range covers `raw`.
    Cell apply(int raw) const;
};

/// Parse `low,high,out_category` rows under a one-line header.
RecodeMap load_recode_map(const std::string& path, const std::string& name);
RecodeMap parse_recode_map(const std::string& text, const std::string& name, const std::string& origin);

/// Apply every recode map referenced by the codebook to the matching
/// nominal columns. Raw codes outside all ranges become absent; the
/// count of such cells is returned per variable.
struct RecodeOutcome {
    LongTable table;
    std::vector<std::pair<std::string, std::size_t>> uncovered;  // variable -> dropped cell count
};
RecodeOutcome apply_recodes(const LongTable& table, const std::vector<RecodeMap>& maps);

}  // namespace panelml
