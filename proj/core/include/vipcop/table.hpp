#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace vipcop {

using Label = std::uint32_t;

// Which rows/columns were produced by an augmentation or noising transform
// (1) rather than taken from the source data (0).
struct Provenance {
  std::vector<std::uint8_t> injected_rows;
  std::vector<std::uint8_t> injected_cols;
};

// Dense, row-major feature matrix with integer class labels in [0, K).
// Immutable once constructed; every transform returns a new table.
class Table {
 public:
  Table() = default;

  // Throws DataError when the invariants do not hold: rows*cols values,
  // one label per row, K >= 2, labels < K and all features finite.
  Table(std::size_t rows, std::size_t cols, std::vector<double> values,
        std::vector<Label> labels, std::uint32_t class_count,
        std::vector<std::string> feature_names = {},
        std::vector<std::string> class_names = {},
        Provenance provenance = {});

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::uint32_t class_count() const { return class_count_; }

  double at(std::size_t row, std::size_t col) const {
    return values_[row * cols_ + col];
  }
  std::span<const double> row(std::size_t r) const {
    return {values_.data() + r * cols_, cols_};
  }
  Label label(std::size_t r) const { return labels_[r]; }

  const std::vector<double>& values() const { return values_; }
  const std::vector<Label>& labels() const { return labels_; }
  const std::vector<std::string>& feature_names() const {
    return feature_names_;
  }
  const std::vector<std::string>& class_names() const { return class_names_; }
  const Provenance& provenance() const { return provenance_; }

  bool row_injected(std::size_t r) const {
    return provenance_.injected_rows[r] != 0;
  }
  bool col_injected(std::size_t c) const {
    return provenance_.injected_cols[c] != 0;
  }

  std::vector<double> column(std::size_t col) const;
  std::vector<std::size_t> class_counts() const;

  // Copy of the given rows and columns, in the given order. Provenance and
  // names follow the selected items.
  Table subset(std::span<const std::size_t> rows,
               std::span<const std::size_t> cols) const;
  Table select_rows(std::span<const std::size_t> rows) const;
  Table select_cols(std::span<const std::size_t> cols) const;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> values_;
  std::vector<Label> labels_;
  std::uint32_t class_count_ = 0;
  std::vector<std::string> feature_names_;
  std::vector<std::string> class_names_;
  Provenance provenance_;
};

std::vector<std::size_t> iota_indices(std::size_t n);

}  // namespace vipcop
