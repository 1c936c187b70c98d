#include "fitcarl/kernels.hpp"

#include <omp.h>

#include <algorithm>
#include <atomic>
#include <vector>

namespace fitcarl::kernels {
namespace {

std::atomic<std::size_t> g_threshold{1u << 16};

// Computes rows [row_begin, row_end) of C. For every element the sum runs
// over p = 0..k-1 in ascending order, whichever loop nest is used.
void gemm_rows(const GemmArgs& g, std::size_t row_begin, std::size_t row_end) {
  const std::size_t m = g.m, n = g.n, k = g.k;
  const bool ta = g.trans_a == Trans::Yes;
  if (g.trans_b == Trans::No) {
    std::vector<Real> acc(n);
    for (std::size_t i = row_begin; i < row_end; ++i) {
      std::fill(acc.begin(), acc.end(), Real{0});
      for (std::size_t p = 0; p < k; ++p) {
        const Real aip = ta ? g.a[p * m + i] : g.a[i * k + p];
        const Real* brow = g.b + p * n;
        for (std::size_t j = 0; j < n; ++j) acc[j] += aip * brow[j];
      }
      Real* crow = g.c + i * n;
      if (g.accumulate) {
        for (std::size_t j = 0; j < n; ++j) crow[j] += acc[j];
      } else {
        std::copy(acc.begin(), acc.end(), crow);
      }
    }
    return;
  }
  // B transposed: C[i,j] is a dot product of a row of op(A) and a row of B.
  std::vector<Real> arow(k);
  for (std::size_t i = row_begin; i < row_end; ++i) {
    for (std::size_t p = 0; p < k; ++p) arow[p] = ta ? g.a[p * m + i] : g.a[i * k + p];
    Real* crow = g.c + i * n;
    std::size_t j = 0;
    for (; j + 4 <= n; j += 4) {
      const Real* b0 = g.b + j * k;
      const Real* b1 = b0 + k;
      const Real* b2 = b1 + k;
      const Real* b3 = b2 + k;
      Real s0 = 0, s1 = 0, s2 = 0, s3 = 0;
      for (std::size_t p = 0; p < k; ++p) {
        const Real x = arow[p];
        s0 += x * b0[p];
        s1 += x * b1[p];
        s2 += x * b2[p];
        s3 += x * b3[p];
      }
      if (g.accumulate) {
        crow[j] += s0;
        crow[j + 1] += s1;
        crow[j + 2] += s2;
        crow[j + 3] += s3;
      } else {
        crow[j] = s0;
        crow[j + 1] = s1;
        crow[j + 2] = s2;
        crow[j + 3] = s3;
      }
    }
    for (; j < n; ++j) {
      const Real* bj = g.b + j * k;
      Real s = 0;
      for (std::size_t p = 0; p < k; ++p) s += arow[p] * bj[p];
      crow[j] = g.accumulate ? crow[j] + s : s;
    }
  }
}

// tmp[j,k] = sum_i v1[i] w[i,j,k] for j in [jb, je)
void tucker_stage1(const TuckerArgs& t, Real* tmp, std::size_t jb, std::size_t je) {
  for (std::size_t j = jb; j < je; ++j) {
    Real* trow = tmp + j * t.d3;
    std::fill(trow, trow + t.d3, Real{0});
    for (std::size_t i = 0; i < t.d1; ++i) {
      const Real s = t.v1[i];
      const Real* wrow = t.w + (i * t.d2 + j) * t.d3;
      for (std::size_t k = 0; k < t.d3; ++k) trow[k] += s * wrow[k];
    }
  }
}

void tucker_stage2(const TuckerArgs& t, const Real* tmp, Real* out) {
  std::fill(out, out + t.d3, Real{0});
  for (std::size_t j = 0; j < t.d2; ++j) {
    const Real s = t.v2[j];
    const Real* trow = tmp + j * t.d3;
    for (std::size_t k = 0; k < t.d3; ++k) out[k] += s * trow[k];
  }
}

// Handles slab i of the backward pass: dw[i,:,:] and dv1[i].
void tucker_backward_slab(const TuckerBackwardArgs& b, std::size_t i, Real* dv2_partial) {
  const auto& t = b.fwd;
  Real dv1_i = 0;
  for (std::size_t j = 0; j < t.d2; ++j) {
    const Real* wrow = t.w + (i * t.d2 + j) * t.d3;
    Real inner = 0;
    for (std::size_t k = 0; k < t.d3; ++k) inner += wrow[k] * b.dm[k];
    dv1_i += t.v2[j] * inner;
    if (dv2_partial) dv2_partial[j] = t.v1[i] * inner;
    if (b.dw) {
      Real* dwrow = b.dw + (i * t.d2 + j) * t.d3;
      const Real s = t.v1[i] * t.v2[j];
      for (std::size_t k = 0; k < t.d3; ++k) dwrow[k] += s * b.dm[k];
    }
  }
  if (b.dv1) b.dv1[i] += dv1_i;
}

}  // namespace

namespace serial {

void gemm(const GemmArgs& args) { gemm_rows(args, 0, args.m); }

void tucker_contract(const TuckerArgs& args, Real* out) {
  std::vector<Real> tmp(args.d2 * args.d3);
  tucker_stage1(args, tmp.data(), 0, args.d2);
  tucker_stage2(args, tmp.data(), out);
}

void tucker_backward(const TuckerBackwardArgs& args) {
  const auto& t = args.fwd;
  std::vector<Real> partial(t.d1 * t.d2);
  for (std::size_t i = 0; i < t.d1; ++i) {
    tucker_backward_slab(args, i, args.dv2 ? partial.data() + i * t.d2 : nullptr);
  }
  if (args.dv2) {
    for (std::size_t i = 0; i < t.d1; ++i)
      for (std::size_t j = 0; j < t.d2; ++j) args.dv2[j] += partial[i * t.d2 + j];
  }
}

}  // namespace serial

namespace parallel {

void gemm(const GemmArgs& args) {
  const auto m = static_cast<long long>(args.m);
#pragma omp parallel for schedule(static)
  for (long long i = 0; i < m; ++i) {
    gemm_rows(args, static_cast<std::size_t>(i), static_cast<std::size_t>(i) + 1);
  }
}

void tucker_contract(const TuckerArgs& args, Real* out) {
  std::vector<Real> tmp(args.d2 * args.d3);
  const auto d2 = static_cast<long long>(args.d2);
#pragma omp parallel for schedule(static)
  for (long long j = 0; j < d2; ++j) {
    tucker_stage1(args, tmp.data(), static_cast<std::size_t>(j), static_cast<std::size_t>(j) + 1);
  }
  tucker_stage2(args, tmp.data(), out);
}

void tucker_backward(const TuckerBackwardArgs& args) {
  const auto& t = args.fwd;
  std::vector<Real> partial(t.d1 * t.d2);
  const auto d1 = static_cast<long long>(t.d1);
#pragma omp parallel for schedule(static)
  for (long long i = 0; i < d1; ++i) {
    const auto ii = static_cast<std::size_t>(i);
    tucker_backward_slab(args, ii, args.dv2 ? partial.data() + ii * t.d2 : nullptr);
  }
  if (args.dv2) {
    for (std::size_t i = 0; i < t.d1; ++i)
      for (std::size_t j = 0; j < t.d2; ++j) args.dv2[j] += partial[i * t.d2 + j];
  }
}

}  // namespace parallel

namespace {
bool go_parallel(std::size_t work) {
  return work >= g_threshold.load(std::memory_order_relaxed) && !omp_in_parallel() &&
         omp_get_max_threads() > 1;
}
}  // namespace

void gemm(const GemmArgs& args) {
  if (go_parallel(args.m * args.n * args.k) && args.m > 1) {
    parallel::gemm(args);
  } else {
    serial::gemm(args);
  }
}

void tucker_contract(const TuckerArgs& args, Real* out) {
  if (go_parallel(args.d1 * args.d2 * args.d3)) {
    parallel::tucker_contract(args, out);
  } else {
    serial::tucker_contract(args, out);
  }
}

void tucker_backward(const TuckerBackwardArgs& args) {
  if (go_parallel(args.fwd.d1 * args.fwd.d2 * args.fwd.d3)) {
    parallel::tucker_backward(args);
  } else {
    serial::tucker_backward(args);
  }
}

void set_parallel_threshold(std::size_t flops) { g_threshold.store(flops); }
std::size_t parallel_threshold() { return g_threshold.load(); }

}  // namespace fitcarl::kernels
