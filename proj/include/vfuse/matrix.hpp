#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

namespace vfuse {

using RowView = std::span<const double>;

// Dense row-major matrix; rows are the unit of storage for feature vectors,
// descriptors and model components.
class RowMatrix {
 public:
  RowMatrix() = default;
  explicit RowMatrix(std::size_t cols) : cols_(cols) {}
  RowMatrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  bool empty() const { return rows_ == 0; }

  RowView row(std::size_t i) const { return {data_.data() + i * cols_, cols_}; }
  std::span<double> row(std::size_t i) { return {data_.data() + i * cols_, cols_}; }

  void append(RowView values) {
    if (values.size() != cols_) throw std::invalid_argument("RowMatrix::append: width mismatch");
    data_.insert(data_.end(), values.begin(), values.end());
    ++rows_;
  }

  void reserve(std::size_t rows) { data_.reserve(rows * cols_); }

  const std::vector<double>& data() const { return data_; }

  std::vector<RowView> views() const {
    std::vector<RowView> out;
    out.reserve(rows_);
    for (std::size_t i = 0; i < rows_; ++i) out.push_back(row(i));
    return out;
  }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

inline double dot(RowView a, RowView b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double squared_distance(RowView a, RowView b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

}  // namespace vfuse
