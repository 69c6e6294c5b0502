#pragma once

#include <cassert>
#include <cstddef>
#include <span>
#include <vector>

namespace epiforge {

/// Dense row-major matrix of doubles. Rows are the unit of access everywhere
/// in the toolkit (design rows, training samples, Shapley instances).
class RowMatrix {
 public:
  RowMatrix() = default;
  RowMatrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  bool empty() const { return rows_ == 0; }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  void append_row(std::span<const double> values) {
    assert(rows_ == 0 || values.size() == cols_);
    if (rows_ == 0) cols_ = values.size();
    data_.insert(data_.end(), values.begin(), values.end());
    ++rows_;
  }

  RowMatrix select_rows(std::span<const std::size_t> indices) const {
    RowMatrix out;
    out.cols_ = cols_;
    out.data_.reserve(indices.size() * cols_);
    for (auto i : indices) {
      auto r = row(i);
      out.data_.insert(out.data_.end(), r.begin(), r.end());
    }
    out.rows_ = indices.size();
    return out;
  }

  const std::vector<double>& data() const { return data_; }

  bool operator==(const RowMatrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

}  // namespace epiforge
