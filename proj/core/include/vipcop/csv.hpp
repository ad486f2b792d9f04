#pragma once

#include <cstddef>
#include <filesystem>
#include <istream>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "vipcop/table.hpp"

namespace vipcop {

// Label column given by header name or by zero-based position.
using LabelColumn = std::variant<std::string, std::size_t>;

// Parses a label-column argument: a header name, or a bare non-negative
// integer meaning a position (a header name equal to the digits wins).
LabelColumn parse_label_column(std::string_view text);

// RFC-4180 records: quoted fields, doubled quotes, CRLF or LF line ends.
std::vector<std::vector<std::string>> read_csv_records(std::istream& in);

// Header row required. Numeric columns are parsed as doubles; any other
// column is integer-coded by first appearance. Missing numeric cells are
// imputed with the column mean, missing categorical cells get their own code.
// Labels are coded by first appearance.
Table parse_csv(std::istream& in, const LabelColumn& label);
Table load_csv(const std::filesystem::path& path, const LabelColumn& label);

// Round-trip persistence: `<path>` holds the CSV (features + integer label in
// a final "label" column), `<path>.meta.json` holds class names and
// provenance flags.
void save_table(const Table& table, const std::filesystem::path& path);
Table load_table(const std::filesystem::path& path);

}  // namespace vipcop
