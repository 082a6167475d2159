#pragma once

#include <cstddef>
#include <span>

// Dense kernels behind the autodiff engine. Every kernel has a serial
// reference in `serial` and an OpenMP version in `parallel`; both accumulate
// each output element in the same order, so their results are bitwise equal.
// Outputs are overwritten, not accumulated into.
namespace vqa::kernels {

struct GemmDims {
  std::size_t m;  // rows of C
  std::size_t n;  // cols of C
  std::size_t k;  // reduction length
};

namespace serial {

// C[m x n] = A[m x k] * B[k x n]
void gemm_nn(std::span<const double> a, std::span<const double> b, std::span<double> c, GemmDims d);
// C[m x n] = A[m x k] * B[n x k]^T
void gemm_nt(std::span<const double> a, std::span<const double> b, std::span<double> c, GemmDims d);
// C[m x n] = A[k x m]^T * B[k x n]
void gemm_tn(std::span<const double> a, std::span<const double> b, std::span<double> c, GemmDims d);
// Row-wise max-shifted softmax of x[rows x cols].
void softmax_rows(std::span<const double> x, std::span<double> y, std::size_t rows, std::size_t cols);

}  // namespace serial

namespace parallel {

void gemm_nn(std::span<const double> a, std::span<const double> b, std::span<double> c, GemmDims d);
void gemm_nt(std::span<const double> a, std::span<const double> b, std::span<double> c, GemmDims d);
void gemm_tn(std::span<const double> a, std::span<const double> b, std::span<double> c, GemmDims d);
void softmax_rows(std::span<const double> x, std::span<double> y, std::size_t rows, std::size_t cols);

}  // namespace parallel

// Below this many multiply-adds the parallel kernels stay on one thread.
inline constexpr std::size_t kParallelThreshold = 1u << 16;

using parallel::gemm_nn;
using parallel::gemm_nt;
using parallel::gemm_tn;
using parallel::softmax_rows;

}  // namespace vqa::kernels
