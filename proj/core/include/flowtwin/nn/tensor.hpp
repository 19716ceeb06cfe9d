#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

namespace flowtwin::nn {

/// Raised when a forward op produces a non-finite value or a gradient blows up.
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Dense row-major matrix of 64-bit floats. Everything in the learning core
/// is rank 2; vectors are 1xd or nx1 and scalars 1x1.
class Tensor {
 public:
  Tensor() = default;
  Tensor(int rows, int cols) : rows_(rows), cols_(cols), v_(size_t(rows) * cols, 0.0) {
    if (rows < 0 || cols < 0) throw std::invalid_argument("negative tensor dimension");
  }

  static Tensor zeros(int rows, int cols) { return Tensor(rows, cols); }
  static Tensor scalar(double v) {
    Tensor t(1, 1);
    t.v_[0] = v;
    return t;
  }
  static Tensor from_values(int rows, int cols, std::vector<double> values) {
    Tensor t;
    t.rows_ = rows;
    t.cols_ = cols;
    if (values.size() != size_t(rows) * cols)
      throw std::invalid_argument("value count does not match shape");
    t.v_ = std::move(values);
    return t;
  }

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  size_t size() const { return v_.size(); }
  std::vector<int> shape() const { return {rows_, cols_}; }
  bool same_shape(const Tensor& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }

  double& at(int r, int c) { return v_[size_t(r) * cols_ + c]; }
  double at(int r, int c) const { return v_[size_t(r) * cols_ + c]; }
  double* data() { return v_.data(); }
  const double* data() const { return v_.data(); }
  std::span<const double> values() const { return v_; }
  std::span<double> values() { return v_; }

  bool all_finite() const;
  double item() const {
    if (v_.size() != 1) throw std::invalid_argument("item() on non-scalar tensor");
    return v_[0];
  }

 private:
  int rows_ = 0;
  int cols_ = 0;
  std::vector<double> v_;
};

/// C = A * B with A (m x k), B (k x n). The ikj order keeps B streaming.
void matmul_into(const Tensor& a, const Tensor& b, Tensor& out, bool accumulate);

}  // namespace flowtwin::nn
