#include "vipcop/csv.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>

#include <nlohmann/json.hpp>

#include "vipcop/error.hpp"

namespace vipcop {

namespace {

bool is_missing(std::string_view cell) {
  static constexpr std::string_view kMissing[] = {"",    "NA",  "N/A", "NaN",
                                                  "nan", "?",   "null", "NULL"};
  return std::find(std::begin(kMissing), std::end(kMissing), cell) !=
         std::end(kMissing);
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  return s;
}

std::optional<double> parse_double(std::string_view cell) {
  cell = trim(cell);
  if (!cell.empty() && cell.front() == '+') cell.remove_prefix(1);
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), value);
  if (ec != std::errc() || ptr != cell.data() + cell.size() || !std::isfinite(value)) {
    return std::nullopt;
  }
  return value;
}

std::string location(std::size_t record, std::size_t column) {
  // record 0 is the header, so data record r is line r + 1 for simple files.
  return "row " + std::to_string(record) + ", column " + std::to_string(column);
}

}  // namespace

LabelColumn parse_label_column(std::string_view text) {
  std::size_t index = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), index);
  if (ec == std::errc() && ptr == text.data() + text.size() && !text.empty()) {
    return index;
  }
  return std::string(text);
}

std::vector<std::vector<std::string>> read_csv_records(std::istream& in) {
  std::vector<std::vector<std::string>> records;
  std::vector<std::string> record;
  std::string field;
  bool in_quotes = false;
  bool field_started = false;
  bool any = false;
  char c = 0;
  auto end_field = [&] {
    record.push_back(std::move(field));
    field.clear();
    field_started = false;
  };
  auto end_record = [&] {
    end_field();
    if (!(record.size() == 1 && record[0].empty())) records.push_back(std::move(record));
    record.clear();
  };
  while (in.get(c)) {
    any = true;
    if (in_quotes) {
      if (c == '"') {
        if (in.peek() == '"') {
          in.get(c);
          field.push_back('"');
        } else {
          in_quotes = false;
        }
      } else {
        field.push_back(c);
      }
      continue;
    }
    switch (c) {
      case '"':
        if (!field_started || field.empty()) {
          in_quotes = true;
          field_started = true;
        } else {
          field.push_back(c);
        }
        break;
      case ',':
        end_field();
        break;
      case '\r':
        if (in.peek() == '\n') in.get(c);
        end_record();
        break;
      case '\n':
        end_record();
        break;
      default:
        field.push_back(c);
        field_started = true;
    }
  }
  if (in_quotes) throw DataError("csv: unterminated quoted field at end of input");
  if (any && (field_started || !field.empty() || !record.empty())) end_record();
  return records;
}

Table parse_csv(std::istream& in, const LabelColumn& label) {
  const auto records = read_csv_records(in);
  if (records.empty()) throw DataError("csv: empty input (no header row)");
  const auto& header = records.front();
  const std::size_t width = header.size();
  if (records.size() < 2) throw DataError("csv: empty table (header only)");

  std::size_t label_col = width;
  if (const auto* name = std::get_if<std::string>(&label)) {
    auto it = std::find(header.begin(), header.end(), *name);
    if (it == header.end()) throw DataError("csv: label column '" + *name + "' not found");
    label_col = static_cast<std::size_t>(it - header.begin());
  } else {
    label_col = std::get<std::size_t>(label);
    if (label_col >= width) {
      throw DataError("csv: label column index " + std::to_string(label_col) +
                      " out of range (" + std::to_string(width) + " columns)");
    }
  }

  const std::size_t n = records.size() - 1;
  for (std::size_t r = 1; r <= n; ++r) {
    if (records[r].size() != width) {
      throw DataError("csv: parse failure at " + location(r, records[r].size()) +
                      ": expected " + std::to_string(width) + " fields, got " +
                      std::to_string(records[r].size()));
    }
  }

  // Labels by first appearance.
  std::vector<Label> labels(n);
  std::vector<std::string> class_names;
  std::map<std::string, Label, std::less<>> class_codes;
  for (std::size_t r = 1; r <= n; ++r) {
    std::string_view cell = trim(records[r][label_col]);
    if (is_missing(cell)) {
      throw DataError("csv: parse failure at " + location(r, label_col) +
                      ": missing label");
    }
    auto it = class_codes.find(cell);
    if (it == class_codes.end()) {
      it = class_codes.emplace(std::string(cell), static_cast<Label>(class_names.size())).first;
      class_names.emplace_back(cell);
    }
    labels[r - 1] = it->second;
  }
  if (class_names.size() < 2) {
    throw DataError("csv: single-class label column '" + header[label_col] + "'");
  }

  std::vector<std::size_t> feature_cols;
  for (std::size_t c = 0; c < width; ++c) {
    if (c != label_col) feature_cols.push_back(c);
  }
  if (feature_cols.empty()) throw DataError("csv: no feature columns");
  const std::size_t d = feature_cols.size();
  std::vector<double> values(n * d, 0.0);
  std::vector<std::string> names;

  for (std::size_t j = 0; j < d; ++j) {
    const std::size_t c = feature_cols[j];
    names.push_back(header[c]);
    bool numeric = true;
    for (std::size_t r = 1; r <= n && numeric; ++r) {
      std::string_view cell = trim(records[r][c]);
      if (!is_missing(cell) && !parse_double(cell)) numeric = false;
    }
    if (numeric) {
      double sum = 0.0;
      std::size_t present = 0;
      std::vector<std::size_t> missing_rows;
      for (std::size_t r = 1; r <= n; ++r) {
        std::string_view cell = trim(records[r][c]);
        if (is_missing(cell)) {
          missing_rows.push_back(r - 1);
          continue;
        }
        const double v = *parse_double(cell);
        values[(r - 1) * d + j] = v;
        sum += v;
        ++present;
      }
      const double mean = present > 0 ? sum / static_cast<double>(present) : 0.0;
      for (std::size_t i : missing_rows) values[i * d + j] = mean;
    } else {
      std::map<std::string, double, std::less<>> codes;
      for (std::size_t r = 1; r <= n; ++r) {
        std::string_view cell = trim(records[r][c]);
        // All missing spellings share one dedicated category.
        std::string key = is_missing(cell) ? std::string("\x01missing") : std::string(cell);
        auto it = codes.find(key);
        if (it == codes.end()) {
          it = codes.emplace(std::move(key), static_cast<double>(codes.size())).first;
        }
        values[(r - 1) * d + j] = it->second;
      }
    }
  }
  const auto classes = static_cast<std::uint32_t>(class_names.size());
  return Table(n, d, std::move(values), std::move(labels), classes, std::move(names),
               std::move(class_names));
}

Table load_csv(const std::filesystem::path& path, const LabelColumn& label) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("csv: cannot open '" + path.string() + "'");
  return parse_csv(in, label);
}

namespace {

std::string quote_if_needed(const std::string& s) {
  if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

std::filesystem::path meta_path(const std::filesystem::path& path) {
  return std::filesystem::path(path.string() + ".meta.json");
}

}  // namespace

void save_table(const Table& table, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  for (const auto& name : table.feature_names()) out << quote_if_needed(name) << ',';
  out << "label\n";
  char buf[32];
  for (std::size_t i = 0; i < table.rows(); ++i) {
    for (double v : table.row(i)) {
      auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
      out.write(buf, ptr - buf);
      out << ',';
    }
    out << table.label(i) << '\n';
  }

  nlohmann::json meta;
  meta["rows"] = table.rows();
  meta["cols"] = table.cols();
  meta["class_count"] = table.class_count();
  meta["class_names"] = table.class_names();
  meta["feature_names"] = table.feature_names();
  meta["injected_rows"] = table.provenance().injected_rows;
  meta["injected_cols"] = table.provenance().injected_cols;
  std::ofstream mout(meta_path(path));
  mout << meta.dump(2) << '\n';
}

Table load_table(const std::filesystem::path& path) {
  std::ifstream min(meta_path(path));
  if (!min) throw DataError("missing sidecar '" + meta_path(path).string() + "'");
  nlohmann::json meta;
  try {
    min >> meta;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("corrupt sidecar '" + meta_path(path).string() + "': " + e.what());
  }
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  const auto records = read_csv_records(in);
  const std::size_t n = meta.at("rows").get<std::size_t>();
  const std::size_t d = meta.at("cols").get<std::size_t>();
  if (records.size() != n + 1) throw DataError("table file row count disagrees with sidecar");
  std::vector<double> values;
  values.reserve(n * d);
  std::vector<Label> labels;
  labels.reserve(n);
  for (std::size_t r = 1; r <= n; ++r) {
    if (records[r].size() != d + 1) {
      throw DataError("table file: bad field count at " + location(r, records[r].size()));
    }
    for (std::size_t j = 0; j < d; ++j) {
      auto v = parse_double(records[r][j]);
      if (!v) throw DataError("table file: parse failure at " + location(r, j));
      values.push_back(*v);
    }
    auto y = parse_double(records[r][d]);
    if (!y || *y < 0) throw DataError("table file: bad label at " + location(r, d));
    labels.push_back(static_cast<Label>(*y));
  }
  Provenance prov{meta.at("injected_rows").get<std::vector<std::uint8_t>>(),
                  meta.at("injected_cols").get<std::vector<std::uint8_t>>()};
  return Table(n, d, std::move(values), std::move(labels),
               meta.at("class_count").get<std::uint32_t>(),
               meta.at("feature_names").get<std::vector<std::string>>(),
               meta.at("class_names").get<std::vector<std::string>>(), std::move(prov));
}

}  // namespace vipcop
