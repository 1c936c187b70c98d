#include "fitcarl/ops.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "fitcarl/kernels.hpp"

namespace fitcarl {
namespace {

using kernels::GemmArgs;
using kernels::Trans;

void require_same(const char* op, const Var& a, const Var& b) {
  if (a.shape() != b.shape()) throw ShapeError(op, a.shape(), b.shape());
}

void require_rank(const char* op, const Var& a, std::size_t rank) {
  if (a.value().rank() != rank) {
    throw ShapeError(std::string(op) + ": expected rank " + std::to_string(rank) + ", got " +
                     shape_string(a.shape()));
  }
}

// Elementwise op with derivative dy/dx = deriv(x, y).
template <typename Fwd, typename Deriv>
Var unary(Var a, Fwd fwd, Deriv deriv) {
  const Tensor& x = a.value();
  Tensor y(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = fwd(x[i]);
  const auto ia = a.id();
  return a.tape().push(std::move(y), {a}, [ia, deriv](Tape& t, std::uint32_t self, const Tensor& g) {
    if (!t.requires_grad(ia)) return;
    const Tensor& xv = t.value(ia);
    const Tensor& yv = t.value(self);
    Tensor& ga = t.grad_buffer(ia);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * deriv(xv[i], yv[i]);
  });
}

void add_into(Tape& t, std::uint32_t id, const Tensor& g, Real factor = Real{1}) {
  if (!t.requires_grad(id)) return;
  Tensor& dst = t.grad_buffer(id);
  for (std::size_t i = 0; i < g.size(); ++i) dst[i] += factor * g[i];
}

}  // namespace

Var add(Var a, Var b) {
  require_same("add", a, b);
  Tensor y = a.value();
  const Tensor& bv = b.value();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] += bv[i];
  auto ia = a.id(), ib = b.id();
  return a.tape().push(std::move(y), {a, b}, [ia, ib](Tape& t, std::uint32_t, const Tensor& g) {
    add_into(t, ia, g);
    add_into(t, ib, g);
  });
}

Var sub(Var a, Var b) {
  require_same("sub", a, b);
  Tensor y = a.value();
  const Tensor& bv = b.value();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] -= bv[i];
  auto ia = a.id(), ib = b.id();
  return a.tape().push(std::move(y), {a, b}, [ia, ib](Tape& t, std::uint32_t, const Tensor& g) {
    add_into(t, ia, g);
    add_into(t, ib, g, Real{-1});
  });
}

Var mul(Var a, Var b) {
  require_same("mul", a, b);
  Tensor y = a.value();
  const Tensor& bv = b.value();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] *= bv[i];
  auto ia = a.id(), ib = b.id();
  return a.tape().push(std::move(y), {a, b}, [ia, ib](Tape& t, std::uint32_t, const Tensor& g) {
    const Tensor& av = t.value(ia);
    const Tensor& bv = t.value(ib);
    if (t.requires_grad(ia)) {
      Tensor& ga = t.grad_buffer(ia);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * bv[i];
    }
    if (t.requires_grad(ib)) {
      Tensor& gb = t.grad_buffer(ib);
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * av[i];
    }
  });
}

Var scale(Var a, Real factor) {
  return unary(a, [factor](Real x) { return factor * x; }, [factor](Real, Real) { return factor; });
}

Var add_scalar(Var a, Real offset) {
  return unary(a, [offset](Real x) { return x + offset; }, [](Real, Real) { return Real{1}; });
}

Var neg(Var a) { return scale(a, Real{-1}); }

namespace {

// op(B) = B when !trans_b (B is [k,n] or [k]), B^T when trans_b (B is [n,k]).
Var matmul_impl(Var a, Var b, bool trans_b, const char* name) {
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  const bool a_vec = av.rank() == 1, b_vec = bv.rank() == 1;
  if (av.rank() < 1 || av.rank() > 2 || bv.rank() < 1 || bv.rank() > 2 || (a_vec && b_vec) || (trans_b && b_vec)) {
    throw ShapeError(name, av.shape(), bv.shape());
  }
  const std::size_t m = a_vec ? 1 : av.rows();
  const std::size_t k = a_vec ? av.dim(0) : av.cols();
  const std::size_t kb = trans_b ? bv.cols() : bv.dim(0);
  const std::size_t n = trans_b ? bv.rows() : (b_vec ? 1 : bv.cols());
  if (k != kb) throw ShapeError(name, av.shape(), bv.shape());

  Shape out_shape;
  if (!a_vec && !b_vec) out_shape = {m, n};
  else if (!a_vec) out_shape = {m};
  else out_shape = {n};

  Tensor y(out_shape);
  // A matrix-vector product runs as dot products (B^T of a [1,k] row).
  const bool dot_form = trans_b || b_vec;
  kernels::gemm(GemmArgs{Trans::No, dot_form ? Trans::Yes : Trans::No, m, n, k, av.data(), bv.data(), y.data(), false});

  auto ia = a.id(), ib = b.id();
  return a.tape().push(std::move(y), {a, b}, [ia, ib, m, n, k, trans_b, b_vec](Tape& t, std::uint32_t, const Tensor& g) {
    const Tensor& av = t.value(ia);
    const Tensor& bv = t.value(ib);
    if (t.requires_grad(ia)) {
      Real* ga = t.grad_buffer(ia).data();
      if (trans_b) {
        // dA[m,k] += dC[m,n] B[n,k]
        kernels::gemm(GemmArgs{Trans::No, Trans::No, m, k, n, g.data(), bv.data(), ga, true});
      } else if (b_vec) {
        // dA[m,k] += dC[m,1] b[1,k]
        kernels::gemm(GemmArgs{Trans::No, Trans::No, m, k, 1, g.data(), bv.data(), ga, true});
      } else {
        // dA[m,k] += dC[m,n] B^T
        kernels::gemm(GemmArgs{Trans::No, Trans::Yes, m, k, n, g.data(), bv.data(), ga, true});
      }
    }
    if (t.requires_grad(ib)) {
      Real* gb = t.grad_buffer(ib).data();
      if (trans_b) {
        // dB[n,k] += dC^T A
        kernels::gemm(GemmArgs{Trans::Yes, Trans::No, n, k, m, g.data(), av.data(), gb, true});
      } else if (b_vec) {
        // db[1,k] += dC^T[1,m] A[m,k]
        kernels::gemm(GemmArgs{Trans::No, Trans::No, 1, k, m, g.data(), av.data(), gb, true});
      } else {
        // dB[k,n] += A^T dC
        kernels::gemm(GemmArgs{Trans::Yes, Trans::No, k, n, m, av.data(), g.data(), gb, true});
      }
    }
  });
}

}  // namespace

Var matmul(Var a, Var b) { return matmul_impl(a, b, false, "matmul"); }

Var matmul_nt(Var a, Var b) { return matmul_impl(a, b, true, "matmul_nt"); }

Var transpose(Var a) {
  require_rank("transpose", a, 2);
  const Tensor& x = a.value();
  const std::size_t r = x.rows(), c = x.cols();
  Tensor y(Shape{c, r});
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) y.at(j, i) = x.at(i, j);
  auto ia = a.id();
  return a.tape().push(std::move(y), {a}, [ia, r, c](Tape& t, std::uint32_t, const Tensor& g) {
    if (!t.requires_grad(ia)) return;
    Tensor& ga = t.grad_buffer(ia);
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j) ga.at(i, j) += g.at(j, i);
  });
}

Var concat(const std::vector<Var>& parts) {
  if (parts.empty()) throw ShapeError("concat: no parts");
  std::vector<std::uint32_t> ids;
  std::vector<std::size_t> offsets;
  std::vector<Real> data;
  for (const auto& p : parts) {
    require_rank("concat", p, 1);
    ids.push_back(p.id());
    offsets.push_back(data.size());
    auto v = p.value().values();
    data.insert(data.end(), v.begin(), v.end());
  }
  Tape& tape = parts.front().tape();
  return tape.push(Tensor::vector(std::move(data)), parts,
                   [ids, offsets](Tape& t, std::uint32_t, const Tensor& g) {
                     for (std::size_t p = 0; p < ids.size(); ++p) {
                       if (!t.requires_grad(ids[p])) continue;
                       Tensor& gp = t.grad_buffer(ids[p]);
                       for (std::size_t i = 0; i < gp.size(); ++i) gp[i] += g[offsets[p] + i];
                     }
                   });
}

Var concat_cols(const std::vector<Var>& parts) {
  if (parts.empty()) throw ShapeError("concat_cols: no parts");
  const std::size_t rows = parts.front().value().rows();
  std::vector<std::uint32_t> ids;
  std::vector<std::size_t> offsets, widths;
  std::size_t total = 0;
  for (const auto& p : parts) {
    require_rank("concat_cols", p, 2);
    if (p.value().rows() != rows) throw ShapeError("concat_cols", parts.front().shape(), p.shape());
    ids.push_back(p.id());
    offsets.push_back(total);
    widths.push_back(p.value().cols());
    total += p.value().cols();
  }
  Tensor y(Shape{rows, total});
  for (std::size_t p = 0; p < parts.size(); ++p) {
    const Tensor& v = parts[p].value();
    for (std::size_t i = 0; i < rows; ++i)
      for (std::size_t j = 0; j < widths[p]; ++j) y.at(i, offsets[p] + j) = v.at(i, j);
  }
  return parts.front().tape().push(std::move(y), parts,
                                   [ids, offsets, widths, rows](Tape& t, std::uint32_t, const Tensor& g) {
                                     for (std::size_t p = 0; p < ids.size(); ++p) {
                                       if (!t.requires_grad(ids[p])) continue;
                                       Tensor& gp = t.grad_buffer(ids[p]);
                                       for (std::size_t i = 0; i < rows; ++i)
                                         for (std::size_t j = 0; j < widths[p]; ++j)
                                           gp.at(i, j) += g.at(i, offsets[p] + j);
                                     }
                                   });
}

Var stack_rows(const std::vector<Var>& rows) {
  if (rows.empty()) throw ShapeError("stack_rows: no rows");
  const std::size_t width = rows.front().size();
  std::vector<std::uint32_t> ids;
  std::vector<Real> data;
  data.reserve(rows.size() * width);
  for (const auto& r : rows) {
    require_rank("stack_rows", r, 1);
    if (r.size() != width) throw ShapeError("stack_rows", rows.front().shape(), r.shape());
    ids.push_back(r.id());
    auto v = r.value().values();
    data.insert(data.end(), v.begin(), v.end());
  }
  return rows.front().tape().push(Tensor(Shape{rows.size(), width}, std::move(data)), rows,
                                  [ids, width](Tape& t, std::uint32_t, const Tensor& g) {
                                    for (std::size_t r = 0; r < ids.size(); ++r) {
                                      if (!t.requires_grad(ids[r])) continue;
                                      Tensor& gr = t.grad_buffer(ids[r]);
                                      for (std::size_t j = 0; j < width; ++j) gr[j] += g[r * width + j];
                                    }
                                  });
}

Var slice(Var a, std::size_t start, std::size_t length) {
  require_rank("slice", a, 1);
  if (start + length > a.size()) {
    throw ShapeError("slice [" + std::to_string(start) + ", +" + std::to_string(length) + ") out of range for " +
                     shape_string(a.shape()));
  }
  auto v = a.value().values().subspan(start, length);
  auto ia = a.id();
  return a.tape().push(Tensor::vector(std::vector<Real>(v.begin(), v.end())), {a},
                       [ia, start](Tape& t, std::uint32_t, const Tensor& g) {
                         if (!t.requires_grad(ia)) return;
                         Tensor& ga = t.grad_buffer(ia);
                         for (std::size_t i = 0; i < g.size(); ++i) ga[start + i] += g[i];
                       });
}

Var row(Var a, std::size_t index) {
  require_rank("row", a, 2);
  if (index >= a.value().rows()) {
    throw ShapeError("row " + std::to_string(index) + " out of range for " + shape_string(a.shape()));
  }
  auto v = a.value().row(index);
  const std::size_t width = v.size();
  auto ia = a.id();
  return a.tape().push(Tensor::vector(std::vector<Real>(v.begin(), v.end())), {a},
                       [ia, index, width](Tape& t, std::uint32_t, const Tensor& g) {
                         if (!t.requires_grad(ia)) return;
                         Tensor& ga = t.grad_buffer(ia);
                         for (std::size_t j = 0; j < width; ++j) ga[index * width + j] += g[j];
                       });
}

Var reshape(Var a, Shape shape) {
  Tensor y = a.value().reshaped(std::move(shape));
  auto ia = a.id();
  return a.tape().push(std::move(y), {a}, [ia](Tape& t, std::uint32_t, const Tensor& g) { add_into(t, ia, g); });
}

Var pick(Var a, std::size_t index) {
  require_rank("pick", a, 1);
  if (index >= a.size()) throw ShapeError("pick index " + std::to_string(index) + " out of range");
  auto ia = a.id();
  return a.tape().push(Tensor::scalar(a.value()[index]), {a}, [ia, index](Tape& t, std::uint32_t, const Tensor& g) {
    if (t.requires_grad(ia)) t.grad_buffer(ia)[index] += g[0];
  });
}

Var sum(Var a) {
  Real s = 0;
  for (auto v : a.value().values()) s += v;
  auto ia = a.id();
  return a.tape().push(Tensor::scalar(s), {a}, [ia](Tape& t, std::uint32_t, const Tensor& g) {
    if (!t.requires_grad(ia)) return;
    Tensor& ga = t.grad_buffer(ia);
    for (auto& v : ga.values()) v += g[0];
  });
}

Var dot(Var a, Var b) {
  require_same("dot", a, b);
  return sum(mul(a, b));
}

Var rowdot(Var a, Var b) {
  require_rank("rowdot", a, 2);
  require_same("rowdot", a, b);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  const std::size_t r = av.rows(), c = av.cols();
  Tensor y(Shape{r});
  for (std::size_t i = 0; i < r; ++i) {
    Real s = 0;
    for (std::size_t j = 0; j < c; ++j) s += av.at(i, j) * bv.at(i, j);
    y[i] = s;
  }
  auto ia = a.id(), ib = b.id();
  return a.tape().push(std::move(y), {a, b}, [ia, ib, r, c](Tape& t, std::uint32_t, const Tensor& g) {
    const Tensor& av = t.value(ia);
    const Tensor& bv = t.value(ib);
    if (t.requires_grad(ia)) {
      Tensor& ga = t.grad_buffer(ia);
      for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) ga.at(i, j) += g[i] * bv.at(i, j);
    }
    if (t.requires_grad(ib)) {
      Tensor& gb = t.grad_buffer(ib);
      for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) gb.at(i, j) += g[i] * av.at(i, j);
    }
  });
}

Var outer(Var u, Var v) {
  require_rank("outer", u, 1);
  require_rank("outer", v, 1);
  const std::size_t m = u.size(), n = v.size();
  Tensor y(Shape{m, n});
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) y.at(i, j) = u.value()[i] * v.value()[j];
  auto iu = u.id(), iv = v.id();
  return u.tape().push(std::move(y), {u, v}, [iu, iv, m, n](Tape& t, std::uint32_t, const Tensor& g) {
    const Tensor& uv = t.value(iu);
    const Tensor& vv = t.value(iv);
    if (t.requires_grad(iu)) {
      Tensor& gu = t.grad_buffer(iu);
      for (std::size_t i = 0; i < m; ++i) {
        Real s = 0;
        for (std::size_t j = 0; j < n; ++j) s += g.at(i, j) * vv[j];
        gu[i] += s;
      }
    }
    if (t.requires_grad(iv)) {
      Tensor& gv = t.grad_buffer(iv);
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) gv[j] += g.at(i, j) * uv[i];
    }
  });
}

Var add_row(Var m, Var v) {
  require_rank("add_row", m, 2);
  require_rank("add_row", v, 1);
  if (m.value().cols() != v.size()) throw ShapeError("add_row", m.shape(), v.shape());
  const std::size_t r = m.value().rows(), c = m.value().cols();
  Tensor y = m.value();
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) y.at(i, j) += v.value()[j];
  auto im = m.id(), iv = v.id();
  return m.tape().push(std::move(y), {m, v}, [im, iv, r, c](Tape& t, std::uint32_t, const Tensor& g) {
    add_into(t, im, g);
    if (t.requires_grad(iv)) {
      Tensor& gv = t.grad_buffer(iv);
      for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) gv[j] += g.at(i, j);
    }
  });
}

Var mul_row(Var m, Var v) {
  require_rank("mul_row", m, 2);
  require_rank("mul_row", v, 1);
  if (m.value().cols() != v.size()) throw ShapeError("mul_row", m.shape(), v.shape());
  const std::size_t r = m.value().rows(), c = m.value().cols();
  Tensor y = m.value();
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) y.at(i, j) *= v.value()[j];
  auto im = m.id(), iv = v.id();
  return m.tape().push(std::move(y), {m, v}, [im, iv, r, c](Tape& t, std::uint32_t, const Tensor& g) {
    const Tensor& mv = t.value(im);
    const Tensor& vv = t.value(iv);
    if (t.requires_grad(im)) {
      Tensor& gm = t.grad_buffer(im);
      for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) gm.at(i, j) += g.at(i, j) * vv[j];
    }
    if (t.requires_grad(iv)) {
      Tensor& gv = t.grad_buffer(iv);
      for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) gv[j] += g.at(i, j) * mv.at(i, j);
    }
  });
}

namespace {

void softmax_inplace(std::span<Real> x) {
  Real mx = *std::max_element(x.begin(), x.end());
  Real total = 0;
  for (auto& v : x) {
    v = std::exp(v - mx);
    total += v;
  }
  for (auto& v : x) v /= total;
}

void softmax_backward(std::span<const Real> y, std::span<const Real> g, std::span<Real> gx) {
  Real inner = 0;
  for (std::size_t i = 0; i < y.size(); ++i) inner += y[i] * g[i];
  for (std::size_t i = 0; i < y.size(); ++i) gx[i] += y[i] * (g[i] - inner);
}

}  // namespace

Var softmax(Var a) {
  require_rank("softmax", a, 1);
  if (a.size() == 0) throw ShapeError("softmax of an empty vector");
  if (!a.value().all_finite()) throw std::domain_error("softmax: non-finite input");
  Tensor y = a.value();
  softmax_inplace(y.values());
  auto ia = a.id();
  return a.tape().push(std::move(y), {a}, [ia](Tape& t, std::uint32_t self, const Tensor& g) {
    if (!t.requires_grad(ia)) return;
    softmax_backward(t.value(self).values(), g.values(), t.grad_buffer(ia).values());
  });
}

Var softmax_rows(Var a) {
  require_rank("softmax_rows", a, 2);
  if (!a.value().all_finite()) throw std::domain_error("softmax_rows: non-finite input");
  Tensor y = a.value();
  const std::size_t r = y.rows();
  for (std::size_t i = 0; i < r; ++i) softmax_inplace(y.row(i));
  auto ia = a.id();
  return a.tape().push(std::move(y), {a}, [ia, r](Tape& t, std::uint32_t self, const Tensor& g) {
    if (!t.requires_grad(ia)) return;
    const Tensor& yv = t.value(self);
    Tensor& ga = t.grad_buffer(ia);
    for (std::size_t i = 0; i < r; ++i) softmax_backward(yv.row(i), g.row(i), ga.row(i));
  });
}

Var sigmoid(Var a) {
  return unary(
      a,
      [](Real x) {
        if (x >= 0) return Real{1} / (Real{1} + std::exp(-x));
        Real e = std::exp(x);
        return e / (Real{1} + e);
      },
      [](Real, Real y) { return y * (Real{1} - y); });
}

Var tanh(Var a) {
  return unary(a, [](Real x) { return std::tanh(x); }, [](Real, Real y) { return Real{1} - y * y; });
}

Var relu(Var a) {
  return unary(a, [](Real x) { return x > 0 ? x : Real{0}; }, [](Real x, Real) { return x > 0 ? Real{1} : Real{0}; });
}

Var cos(Var a) {
  return unary(a, [](Real x) { return std::cos(x); }, [](Real x, Real) { return -std::sin(x); });
}

Var exp(Var a) {
  return unary(a, [](Real x) { return std::exp(x); }, [](Real, Real y) { return y; });
}

Var log(Var a) {
  return unary(
      a, [](Real x) { return std::log(std::max(x, kLogFloor)); },
      [](Real x, Real) { return x > kLogFloor ? Real{1} / x : Real{0}; });
}

Var l2_norm(Var a) {
  Real s = 0;
  for (auto v : a.value().values()) s += v * v;
  auto ia = a.id();
  return a.tape().push(Tensor::scalar(std::sqrt(s)), {a}, [ia](Tape& t, std::uint32_t self, const Tensor& g) {
    if (!t.requires_grad(ia)) return;
    const Real n = t.value(self)[0];
    if (n == Real{0}) return;
    const Tensor& x = t.value(ia);
    Tensor& ga = t.grad_buffer(ia);
    for (std::size_t i = 0; i < x.size(); ++i) ga[i] += g[0] * x[i] / n;
  });
}

Var layer_norm_rows(Var a, Real eps) {
  require_rank("layer_norm_rows", a, 2);
  const Tensor& x = a.value();
  const std::size_t r = x.rows(), c = x.cols();
  Tensor y(x.shape());
  std::vector<Real> inv_std(r);
  for (std::size_t i = 0; i < r; ++i) {
    auto xi = x.row(i);
    Real mean = 0;
    for (auto v : xi) mean += v;
    mean /= static_cast<Real>(c);
    Real var = 0;
    for (auto v : xi) var += (v - mean) * (v - mean);
    var /= static_cast<Real>(c);
    inv_std[i] = Real{1} / std::sqrt(var + eps);
    auto yi = y.row(i);
    for (std::size_t j = 0; j < c; ++j) yi[j] = (xi[j] - mean) * inv_std[i];
  }
  auto ia = a.id();
  return a.tape().push(std::move(y), {a}, [ia, r, c, inv_std](Tape& t, std::uint32_t self, const Tensor& g) {
    if (!t.requires_grad(ia)) return;
    const Tensor& yv = t.value(self);
    Tensor& ga = t.grad_buffer(ia);
    for (std::size_t i = 0; i < r; ++i) {
      auto yi = yv.row(i);
      auto gi = g.row(i);
      Real mean_g = 0, mean_gy = 0;
      for (std::size_t j = 0; j < c; ++j) {
        mean_g += gi[j];
        mean_gy += gi[j] * yi[j];
      }
      mean_g /= static_cast<Real>(c);
      mean_gy /= static_cast<Real>(c);
      auto out = ga.row(i);
      for (std::size_t j = 0; j < c; ++j) out[j] += inv_std[i] * (gi[j] - mean_g - yi[j] * mean_gy);
    }
  });
}

Var dropout(Var a, Real rate, RngStream& rng) {
  if (rate <= Real{0}) return a;
  if (rate >= Real{1}) throw std::invalid_argument("dropout rate must be < 1");
  Tensor mask(a.shape());
  const Real keep_scale = Real{1} / (Real{1} - rate);
  for (auto& m : mask.values()) m = rng.uniform() < rate ? Real{0} : keep_scale;
  Var mv = a.tape().constant(std::move(mask));
  return mul(a, mv);
}

Var tucker3_rows(Var w, Var v1, Var v2, Var rows) {
  require_rank("tucker3", w, 3);
  const Tensor& wv = w.value();
  const std::size_t d1 = wv.dim(0), d2 = wv.dim(1), d3 = wv.dim(2);
  if (v1.value().rank() != 1 || v1.size() != d1) throw ShapeError("tucker3 (mode 1)", wv.shape(), v1.shape());
  if (v2.value().rank() != 1 || v2.size() != d2) throw ShapeError("tucker3 (mode 2)", wv.shape(), v2.shape());
  const Tensor& rv = rows.value();
  if (rv.rank() != 2 || rv.cols() != d3) throw ShapeError("tucker3 (mode 3)", wv.shape(), rv.shape());
  const std::size_t c = rv.rows();

  kernels::TuckerArgs targs{d1, d2, d3, wv.data(), v1.value().data(), v2.value().data()};
  Tensor m(Shape{d3});
  kernels::tucker_contract(targs, m.data());
  Tensor y(Shape{c});
  kernels::gemm(GemmArgs{Trans::No, Trans::No, c, 1, d3, rv.data(), m.data(), y.data(), false});

  auto iw = w.id(), i1 = v1.id(), i2 = v2.id(), ir = rows.id();
  return w.tape().push(std::move(y), {w, v1, v2, rows},
                       [iw, i1, i2, ir, d1, d2, d3, c, m](Tape& t, std::uint32_t, const Tensor& g) {
                         const Tensor& rv = t.value(ir);
                         if (t.requires_grad(ir)) {
                           Tensor& gr = t.grad_buffer(ir);
                           for (std::size_t a = 0; a < c; ++a)
                             for (std::size_t k = 0; k < d3; ++k) gr.at(a, k) += g[a] * m[k];
                         }
                         const bool need_w = t.requires_grad(iw), need_1 = t.requires_grad(i1),
                                    need_2 = t.requires_grad(i2);
                         if (!need_w && !need_1 && !need_2) return;
                         // dm = rows^T g
                         Tensor dm(Shape{d3});
                         kernels::gemm(GemmArgs{Trans::Yes, Trans::No, d3, 1, c, rv.data(), g.data(), dm.data(), false});
                         kernels::TuckerBackwardArgs b;
                         b.fwd = {d1, d2, d3, t.value(iw).data(), t.value(i1).data(), t.value(i2).data()};
                         b.dm = dm.data();
                         b.dw = need_w ? t.grad_buffer(iw).data() : nullptr;
                         b.dv1 = need_1 ? t.grad_buffer(i1).data() : nullptr;
                         b.dv2 = need_2 ? t.grad_buffer(i2).data() : nullptr;
                         kernels::tucker_backward(b);
                       });
}

Var tucker3(Var w, Var v1, Var v2, Var v3) {
  require_rank("tucker3", v3, 1);
  Var rows = reshape(v3, Shape{1, v3.size()});
  return reshape(tucker3_rows(w, v1, v2, rows), Shape{});
}

Var gru_cell(Var x, Var h, const GruWeights& w) {
  const std::size_t hidden = h.size();
  if (w.w_ih.value().rank() != 2 || w.w_ih.value().rows() != 3 * hidden)
    throw ShapeError("gru_cell (w_ih)", w.w_ih.shape(), h.shape());
  if (w.w_hh.value().rank() != 2 || w.w_hh.value().rows() != 3 * hidden || w.w_hh.value().cols() != hidden)
    throw ShapeError("gru_cell (w_hh)", w.w_hh.shape(), h.shape());
  Var gi = add(matmul(w.w_ih, x), w.b_ih);
  Var gh = add(matmul(w.w_hh, h), w.b_hh);
  Var r = sigmoid(add(slice(gi, 0, hidden), slice(gh, 0, hidden)));
  Var z = sigmoid(add(slice(gi, hidden, hidden), slice(gh, hidden, hidden)));
  Var n = tanh(add(slice(gi, 2 * hidden, hidden), mul(r, slice(gh, 2 * hidden, hidden))));
  return add(n, mul(z, sub(h, n)));
}

}  // namespace fitcarl
