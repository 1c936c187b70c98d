#pragma once

#include <cstddef>

#include "fitcarl/tensor.hpp"

// Dense inner loops used by the tensor ops. Each kernel has a serial
// reference and an OpenMP variant. Both variants accumulate every output
// element in the same order, so their results are bit-identical and the
// dispatcher may pick either one without affecting determinism.
namespace fitcarl::kernels {

enum class Trans { No, Yes };

struct GemmArgs {
  Trans trans_a = Trans::No;
  Trans trans_b = Trans::No;
  std::size_t m = 0, n = 0, k = 0;
  const Real* a = nullptr;  // op(A) is m x k
  const Real* b = nullptr;  // op(B) is k x n
  Real* c = nullptr;        // m x n, row-major
  bool accumulate = false;  // C += op(A) op(B) instead of C = ...
};

/// out[k] = sum_i sum_j w[i,j,k] v1[i] v2[j]   (w is d1 x d2 x d3)
struct TuckerArgs {
  std::size_t d1 = 0, d2 = 0, d3 = 0;
  const Real* w = nullptr;
  const Real* v1 = nullptr;
  const Real* v2 = nullptr;
};

/// Gradients of m = W x1 v1 x2 v2 given dm (length d3). Outputs accumulate.
struct TuckerBackwardArgs {
  TuckerArgs fwd;
  const Real* dm = nullptr;
  Real* dw = nullptr;   // may be null
  Real* dv1 = nullptr;  // may be null
  Real* dv2 = nullptr;  // may be null
};

namespace serial {
void gemm(const GemmArgs& args);
void tucker_contract(const TuckerArgs& args, Real* out);
void tucker_backward(const TuckerBackwardArgs& args);
}  // namespace serial

namespace parallel {
void gemm(const GemmArgs& args);
void tucker_contract(const TuckerArgs& args, Real* out);
void tucker_backward(const TuckerBackwardArgs& args);
}  // namespace parallel

/// Picks the OpenMP variant for large problems outside of an enclosing
/// parallel region, the serial variant otherwise.
void gemm(const GemmArgs& args);
void tucker_contract(const TuckerArgs& args, Real* out);
void tucker_backward(const TuckerBackwardArgs& args);

/// Work threshold (multiply-adds) above which the dispatcher goes parallel.
void set_parallel_threshold(std::size_t flops);
std::size_t parallel_threshold();

}  // namespace fitcarl::kernels
