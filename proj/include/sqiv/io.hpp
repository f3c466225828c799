#pragma once

#include <string>
#include <vector>

#include "sqiv/model.hpp"

namespace sqiv {

/// Reads a numeric CSV with a header row. Blank lines and lines starting
/// with '#' are skipped. Missing or unreadable files and malformed cells
/// raise ParseError naming the file, line and column.
NamedTable read_csv(const std::string& path);
NamedTable parse_csv(const std::string& text, const std::string& source = "<string>");

/// Writes through a temporary file in the same directory and renames it over
/// the target, so readers never see a partial file. Raises IoError.
void write_file_atomic(const std::string& path, const std::string& content);

/// Six significant digits, the precision of every printed table.
std::string format_sig6(double value);
/// Shortest text that round-trips the double exactly.
std::string format_full(double value);

/// Quotes a CSV field when it contains a comma, quote or newline.
std::string csv_field(const std::string& text);

}  // namespace sqiv
