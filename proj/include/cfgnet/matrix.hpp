#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

namespace cfgnet {

// Dense row-major double matrix. Small enough on purpose: the whole network
// runs on matvec / matvec-transpose / outer-product accumulate.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), data_(rows * cols, 0.0) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  std::vector<double>& data() { return data_; }
  const std::vector<double>& data() const { return data_; }

  void fill(double v) { data_.assign(data_.size(), v); }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

// y += W * x
inline void matvec_add(const Matrix& w, std::span<const double> x, std::span<double> y) {
  if (x.size() != w.cols() || y.size() != w.rows()) {
    throw std::invalid_argument("matvec_add: shape mismatch");
  }
  for (std::size_t r = 0; r < w.rows(); ++r) {
    const auto row = w.row(r);
    double acc = 0.0;
    for (std::size_t c = 0; c < row.size(); ++c) acc += row[c] * x[c];
    y[r] += acc;
  }
}

// out += W^T * v
inline void matvec_transpose_add(const Matrix& w, std::span<const double> v,
                                 std::span<double> out) {
  if (v.size() != w.rows() || out.size() != w.cols()) {
    throw std::invalid_argument("matvec_transpose_add: shape mismatch");
  }
  for (std::size_t r = 0; r < w.rows(); ++r) {
    const auto row = w.row(r);
    const double vr = v[r];
    for (std::size_t c = 0; c < row.size(); ++c) out[c] += vr * row[c];
  }
}

// dW += v * x^T
inline void outer_add(Matrix& dw, std::span<const double> v, std::span<const double> x) {
  if (v.size() != dw.rows() || x.size() != dw.cols()) {
    throw std::invalid_argument("outer_add: shape mismatch");
  }
  for (std::size_t r = 0; r < dw.rows(); ++r) {
    auto row = dw.row(r);
    const double vr = v[r];
    for (std::size_t c = 0; c < row.size(); ++c) row[c] += vr * x[c];
  }
}

}  // namespace cfgnet
