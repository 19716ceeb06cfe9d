#include "flowtwin/nn/tensor.hpp"

#include <cmath>

namespace flowtwin::nn {

bool Tensor::all_finite() const {
  for (double v : v_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

void matmul_into(const Tensor& a, const Tensor& b, Tensor& out, bool accumulate) {
  const int m = a.rows(), k = a.cols(), n = b.cols();
  if (b.rows() != k) throw std::invalid_argument("matmul: inner dimensions differ");
  if (out.rows() != m || out.cols() != n) throw std::invalid_argument("matmul: bad out shape");
  const double* pa = a.data();
  const double* pb = b.data();
  double* pc = out.data();
  if (!accumulate) std::fill(out.values().begin(), out.values().end(), 0.0);
  for (int i = 0; i < m; ++i) {
    const double* arow = pa + size_t(i) * k;
    double* crow = pc + size_t(i) * n;
    for (int kk = 0; kk < k; ++kk) {
      const double av = arow[kk];
      if (av == 0.0) continue;
      const double* brow = pb + size_t(kk) * n;
      for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

}  // namespace flowtwin::nn
