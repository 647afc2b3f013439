#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "pufsec/error.hpp"
#include "pufsec/features.hpp"
#include "pufsec/puf.hpp"

namespace pufsec {

/// Row-major dense matrix of doubles.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  bool empty() const noexcept { return rows_ == 0; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }
  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }

  void append_row(std::span<const double> values) {
    if (rows_ == 0 && cols_ == 0) cols_ = values.size();
    if (values.size() != cols_) throw DimensionMismatch("row width differs from matrix width");
    data_.insert(data_.end(), values.begin(), values.end());
    ++rows_;
  }

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

/// Features plus integer labels: -1/+1 for binary tasks, 0..K-1 for multiclass.
struct LabeledSet {
  Matrix x;
  std::vector<int> y;

  std::size_t size() const noexcept { return y.size(); }
  std::size_t dim() const noexcept { return x.cols(); }

  void add(std::span<const double> features, int label) {
    x.append_row(features);
    y.push_back(label);
  }

  void check() const {
    if (y.empty()) throw InvalidArgument("labeled set is empty");
    if (x.rows() != y.size()) throw DimensionMismatch("feature and label counts differ");
    if (x.cols() == 0) throw DimensionMismatch("features have zero width");
  }
};

inline LabeledSet encode_crps(const CrpDataset& ds, FeatureMode mode) {
  LabeledSet out;
  out.x = Matrix(ds.size(), feature_dim(mode, static_cast<std::size_t>(ds.stages())));
  out.y = ds.responses;
  for (std::size_t i = 0; i < ds.size(); ++i) encode(mode, ds.challenges[i], out.x.row(i));
  return out;
}

/// Subset of rows in the given order.
inline LabeledSet select_rows(const LabeledSet& s, std::span<const std::size_t> idx) {
  LabeledSet out;
  out.x = Matrix(idx.size(), s.dim());
  out.y.reserve(idx.size());
  for (std::size_t i = 0; i < idx.size(); ++i) {
    auto src = s.x.row(idx[i]);
    std::copy(src.begin(), src.end(), out.x.row(i).begin());
    out.y.push_back(s.y[idx[i]]);
  }
  return out;
}

}  // namespace pufsec
