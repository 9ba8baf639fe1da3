#pragma once

#include <array>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "cmqe/embedding.hpp"
#include "cmqe/error.hpp"

namespace cmqe {

// Dense row-major design matrix, one row per instance.
class FeatureMatrix {
 public:
  FeatureMatrix() = default;
  FeatureMatrix(std::size_t rows, std::size_t cols, std::vector<double> data)
      : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows_ * cols_) throw DataError("feature matrix data size does not match shape");
  }

  static FeatureMatrix from_rows(std::span<const FeatureVector> rows) {
    FeatureMatrix m;
    if (rows.empty()) return m;
    m.cols_ = rows.front().values.size();
    m.segment_dims_ = rows.front().segment_dims;
    m.rows_ = rows.size();
    m.data_.reserve(m.rows_ * m.cols_);
    for (const auto& r : rows) {
      if (r.values.size() != m.cols_ || r.segment_dims != m.segment_dims_) {
        throw DataError("feature vector '" + r.instance_id + "' has " + std::to_string(r.values.size()) +
                        " features, expected " + std::to_string(m.cols_));
      }
      m.data_.insert(m.data_.end(), r.values.begin(), r.values.end());
    }
    return m;
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  double operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols_ + c]; }
  std::span<const double> row(std::size_t r) const noexcept {
    return std::span<const double>(data_).subspan(r * cols_, cols_);
  }
  std::span<const double> data() const noexcept { return data_; }

  // English/Hindi/Hinglish widths when the matrix came from assembled
  // triplets; zeros otherwise.
  const std::array<std::size_t, 3>& segment_dims() const noexcept { return segment_dims_; }
  void set_segment_dims(const std::array<std::size_t, 3>& dims) { segment_dims_ = dims; }

  bool all_finite() const {
    for (double v : data_) {
      if (!std::isfinite(v)) return false;
    }
    return true;
  }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
  std::array<std::size_t, 3> segment_dims_{};
};

}  // namespace cmqe
