#pragma once

#include <cstddef>
#include <vector>

#include "fitcarl/rng.hpp"
#include "fitcarl/tape.hpp"

// Differentiable primitives. Shapes are explicit: elementwise ops require
// equal shapes, and the only broadcasts are scalar constants and the named
// row-wise ops (add_row, mul_row).
namespace fitcarl {

inline constexpr Real kLogFloor = Real(1e-12);

Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, Real factor);
Var add_scalar(Var a, Real offset);
Var neg(Var a);

/// [m,k]x[k,n] -> [m,n]; [m,k]x[k] -> [m]; [k]x[k,n] -> [n].
Var matmul(Var a, Var b);
/// a b^T: [m,k]x[n,k] -> [m,n]; [k]x[n,k] -> [n].
Var matmul_nt(Var a, Var b);
Var transpose(Var a);

Var concat(const std::vector<Var>& parts);       // rank-1 parts
Var concat_cols(const std::vector<Var>& parts);  // rank-2 parts with equal rows
Var stack_rows(const std::vector<Var>& rows);    // rank-1 rows of equal length
Var slice(Var a, std::size_t start, std::size_t length);
Var row(Var a, std::size_t index);
Var reshape(Var a, Shape shape);
/// Element `index` of a rank-1 tensor as a scalar.
Var pick(Var a, std::size_t index);

Var sum(Var a);
Var dot(Var a, Var b);
/// out[i] = sum_j a[i,j] b[i,j]
Var rowdot(Var a, Var b);
Var outer(Var u, Var v);
Var add_row(Var m, Var v);
Var mul_row(Var m, Var v);

Var softmax(Var a);       // rank-1
Var softmax_rows(Var a);  // rank-2, each row
Var sigmoid(Var a);
Var tanh(Var a);
Var relu(Var a);
Var cos(Var a);
Var exp(Var a);
/// log(max(x, kLogFloor)); zero gradient where the floor is active.
Var log(Var a);

Var l2_norm(Var a);
/// Normalizes each row to zero mean / unit variance (no affine part).
Var layer_norm_rows(Var a, Real eps = Real(1e-5));
Var dropout(Var a, Real rate, RngStream& rng);

/// sum_{i,j,k} w[i,j,k] v1[i] v2[j] v3[k]
Var tucker3(Var w, Var v1, Var v2, Var v3);
/// tucker3 against every row of `rows` ([c, d3]) -> [c]
Var tucker3_rows(Var w, Var v1, Var v2, Var rows);

struct GruWeights {
  Var w_ih;  // [3H, I]  gate order r, z, n
  Var w_hh;  // [3H, H]
  Var b_ih;  // [3H]
  Var b_hh;  // [3H]
};

/// One GRU step: h' = (1 - z) * n + z * h.
Var gru_cell(Var x, Var h, const GruWeights& w);

inline Var operator+(Var a, Var b) { return add(a, b); }
inline Var operator-(Var a, Var b) { return sub(a, b); }
inline Var operator*(Var a, Var b) { return mul(a, b); }
inline Var operator*(Real s, Var a) { return scale(a, s); }

}  // namespace fitcarl
