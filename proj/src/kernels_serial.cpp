#include <algorithm>
#include <cmath>

#include "vqa/kernels.hpp"

namespace vqa::kernels::serial {

void gemm_nn(std::span<const double> a, std::span<const double> b, std::span<double> c, GemmDims d) {
  std::fill(c.begin(), c.end(), 0.0);
  for (std::size_t i = 0; i < d.m; ++i) {
    double* crow = c.data() + i * d.n;
    for (std::size_t p = 0; p < d.k; ++p) {
      const double aip = a[i * d.k + p];
      const double* brow = b.data() + p * d.n;
      for (std::size_t j = 0; j < d.n; ++j) crow[j] += aip * brow[j];
    }
  }
}

void gemm_nt(std::span<const double> a, std::span<const double> b, std::span<double> c, GemmDims d) {
  for (std::size_t i = 0; i < d.m; ++i) {
    const double* arow = a.data() + i * d.k;
    for (std::size_t j = 0; j < d.n; ++j) {
      const double* brow = b.data() + j * d.k;
      double acc = 0.0;
      for (std::size_t p = 0; p < d.k; ++p) acc += arow[p] * brow[p];
      c[i * d.n + j] = acc;
    }
  }
}

void gemm_tn(std::span<const double> a, std::span<const double> b, std::span<double> c, GemmDims d) {
  std::fill(c.begin(), c.end(), 0.0);
  for (std::size_t i = 0; i < d.m; ++i) {
    double* crow = c.data() + i * d.n;
    for (std::size_t p = 0; p < d.k; ++p) {
      const double api = a[p * d.m + i];
      if (api == 0.0) continue;
      const double* brow = b.data() + p * d.n;
      for (std::size_t j = 0; j < d.n; ++j) crow[j] += api * brow[j];
    }
  }
}

void softmax_rows(std::span<const double> x, std::span<double> y, std::size_t rows, std::size_t cols) {
  for (std::size_t r = 0; r < rows; ++r) {
    const double* in = x.data() + r * cols;
    double* out = y.data() + r * cols;
    const double peak = *std::max_element(in, in + cols);
    double total = 0.0;
    for (std::size_t j = 0; j < cols; ++j) {
      out[j] = std::exp(in[j] - peak);
      total += out[j];
    }
    for (std::size_t j = 0; j < cols; ++j) out[j] /= total;
  }
}

}  // namespace vqa::kernels::serial
