#include "vipcop/table.hpp"

#include <cmath>
#include <numeric>
#include <string>

#include "vipcop/error.hpp"

namespace vipcop {

Table::Table(std::size_t rows, std::size_t cols, std::vector<double> values,
             std::vector<Label> labels, std::uint32_t class_count,
             std::vector<std::string> feature_names,
             std::vector<std::string> class_names, Provenance provenance)
    : rows_(rows),
      cols_(cols),
      values_(std::move(values)),
      labels_(std::move(labels)),
      class_count_(class_count),
      feature_names_(std::move(feature_names)),
      class_names_(std::move(class_names)),
      provenance_(std::move(provenance)) {
  if (values_.size() != rows_ * cols_) {
    throw DataError("table: expected " + std::to_string(rows_ * cols_) +
                    " values, got " + std::to_string(values_.size()));
  }
  if (labels_.size() != rows_) {
    throw DataError("table: " + std::to_string(rows_) + " rows but " +
                    std::to_string(labels_.size()) + " labels");
  }
  if (class_count_ < 2) {
    throw DataError("table: class_count must be at least 2");
  }
  for (std::size_t i = 0; i < rows_; ++i) {
    if (labels_[i] >= class_count_) {
      throw DataError("table: label " + std::to_string(labels_[i]) +
                      " at row " + std::to_string(i) + " is outside [0, " +
                      std::to_string(class_count_) + ")");
    }
  }
  for (std::size_t k = 0; k < values_.size(); ++k) {
    if (!std::isfinite(values_[k])) {
      throw DataError("table: non-finite value at row " +
                      std::to_string(k / cols_) + ", column " +
                      std::to_string(k % cols_));
    }
  }
  if (feature_names_.empty()) {
    feature_names_.reserve(cols_);
    for (std::size_t j = 0; j < cols_; ++j) {
      feature_names_.push_back("f" + std::to_string(j));
    }
  } else if (feature_names_.size() != cols_) {
    throw DataError("table: feature_names size mismatch");
  }
  if (class_names_.empty()) {
    for (std::uint32_t c = 0; c < class_count_; ++c) {
      class_names_.push_back(std::to_string(c));
    }
  } else if (class_names_.size() != class_count_) {
    throw DataError("table: class_names size mismatch");
  }
  if (provenance_.injected_rows.empty()) provenance_.injected_rows.assign(rows_, 0);
  if (provenance_.injected_cols.empty()) provenance_.injected_cols.assign(cols_, 0);
  if (provenance_.injected_rows.size() != rows_ ||
      provenance_.injected_cols.size() != cols_) {
    throw DataError("table: provenance flags size mismatch");
  }
}

std::vector<double> Table::column(std::size_t col) const {
  std::vector<double> out(rows_);
  for (std::size_t i = 0; i < rows_; ++i) out[i] = at(i, col);
  return out;
}

std::vector<std::size_t> Table::class_counts() const {
  std::vector<std::size_t> counts(class_count_, 0);
  for (Label y : labels_) ++counts[y];
  return counts;
}

Table Table::subset(std::span<const std::size_t> rows,
                    std::span<const std::size_t> cols) const {
  std::vector<double> values;
  values.reserve(rows.size() * cols.size());
  std::vector<Label> labels;
  labels.reserve(rows.size());
  Provenance prov;
  prov.injected_rows.reserve(rows.size());
  for (std::size_t r : rows) {
    if (r >= rows_) throw DataError("table: row index out of range");
    const double* src = values_.data() + r * cols_;
    for (std::size_t c : cols) {
      if (c >= cols_) throw DataError("table: column index out of range");
      values.push_back(src[c]);
    }
    labels.push_back(labels_[r]);
    prov.injected_rows.push_back(provenance_.injected_rows[r]);
  }
  std::vector<std::string> names;
  names.reserve(cols.size());
  for (std::size_t c : cols) {
    names.push_back(feature_names_[c]);
    prov.injected_cols.push_back(provenance_.injected_cols[c]);
  }
  return Table(rows.size(), cols.size(), std::move(values), std::move(labels),
               class_count_, std::move(names), class_names_, std::move(prov));
}

Table Table::select_rows(std::span<const std::size_t> rows) const {
  const auto cols = iota_indices(cols_);
  return subset(rows, cols);
}

Table Table::select_cols(std::span<const std::size_t> cols) const {
  const auto rows = iota_indices(rows_);
  return subset(rows, cols);
}

std::vector<std::size_t> iota_indices(std::size_t n) {
  std::vector<std::size_t> out(n);
  std::iota(out.begin(), out.end(), std::size_t{0});
  return out;
}

}  // namespace vipcop
