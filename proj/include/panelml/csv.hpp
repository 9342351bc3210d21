#pragma once

#include <string>
#include <vector>

namespace panelml::csv {

/// One parsed record plus the 1-based line number it started on.
struct Record {
    std::vector<std::string> fields;
    std::size_t line = 0;
};

/// Parse an entire CSV document. Handles quoted fields and embedded
/// newlines; trailing blank lines are skipped.
std::vector<Record> parse_file(const std::string& path);
std::vector<Record> parse_string(const std::string& text);

/// Quote a field only when it needs quoting.
std::string escape(const std::string& field);

std::string join_row(const std::vector<std::string>& fields);

}  // namespace panelml::csv
