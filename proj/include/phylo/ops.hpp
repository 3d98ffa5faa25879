#pragma once

#include <cstddef>
#include <vector>

#include "phylo/tape.hpp"

// Differentiable tensor operations. Every function records one node on the
// tape of its first argument and returns a handle to the result.
namespace phylo::ad {

// Elementwise, equal shapes.
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double c);
Var add_scalar(Var a, double c);

Var relu(Var a);
Var elu(Var a, double alpha = 1.0);
Var softplus(Var a);
Var square(Var a);
Var abs(Var a);
Var exp(Var a);
/// Gradient is taken as 0 where the input is 0.
Var sqrt(Var a);

/// x[..., in] * w[in, out] -> [..., out]
Var linear(Var x, Var w);
/// x[..., c] + b[c]
Var add_bias(Var x, Var b);

/// Sum of all elements -> [1].
Var sum(Var a);
Var mean(Var a);
/// Removes `axis` by summing (or averaging) over it. A rank-1 input gives [1].
Var reduce(Var a, std::size_t axis, bool average);
/// Inserts a new axis of length `count` at position `axis`, repeating the input.
Var expand(Var a, std::size_t axis, std::size_t count);

Var permute(Var a, const std::vector<std::size_t>& order);
Var reshape(Var a, Shape shape);
/// Rows of a along axis 0, in the given order (repeats allowed).
Var gather(Var a, const std::vector<std::size_t>& rows);
/// Stacks equal-shaped tensors along a new axis.
Var stack(const std::vector<Var>& parts, std::size_t axis);

/// a[B,m,k] * b[B,k,n] -> [B,m,n]; with transpose_b, b is [B,n,k].
Var bmm(Var a, Var b, bool transpose_b);
/// Softmax over the last axis.
Var softmax_last(Var a);
/// Multi-head softmax(scale * q k^T) v over axis 1 for q, k, v of shape
/// [B,T,heads*dh], head h using channels h*dh..(h+1)*dh. Equals splitting the
/// heads and composing bmm, scale and softmax_last, without the [B*heads,T,T]
/// intermediates or the head split copies.
Var attention(Var q, Var k, Var v, std::size_t heads, double scale);

/// Pair layer on x[P,2,L,C] with per-head weights w[H,5]:
///   y[p,s,i,h*C+c] = w_h0 x[p,s,i,c] + w_h1 x[p,1-s,i,c]
///                  + w_h2 sum_j x[p,s,j,c] + w_h3 sum_j x[p,1-s,j,c] + w_h4
/// Output [P,2,L,H*C]; the structured matrix is never formed.
Var equivariant_pair(Var x, Var w);
/// y[p,c] = w0 * sum_{s,i} x[p,s,i,c] + w1 for x[P,2,L,C], w[2]. Output [P,C].
Var invariant_pair(Var x, Var w);

/// Z[n,d] -> [n,n] Euclidean distances between rows; exactly symmetric.
Var pairwise_euclidean(Var z);
/// Z[n,d] -> Z Z^T, exactly symmetric.
Var gram(Var z);
/// C[n,n] -> C_ii + C_jj - 2 C_ij.
Var inverse_gromov(Var c);
/// [n,n] -> entries with i<j in row-major order.
Var upper_triangle(Var m);
/// v[P] over the pairs i<j in row-major order -> symmetric [n,n], zero diagonal.
Var pairs_to_matrix(Var v, std::size_t n);

/// tr(X Y^-1) - log det(X Y^-1) - n for symmetric positive definite X, Y.
Var logdet_divergence(Var x, Var y);
/// tr(X log X - X log Y - X + Y) for symmetric positive definite X, Y.
Var vonneumann_divergence(Var x, Var y);

/// Eigenvalues below this are raised to it before log/inverse.
inline constexpr double kEigenFloor = 1e-10;
/// Inputs with an eigenvalue below -kNegativeEigenTolerance are rejected.
inline constexpr double kNegativeEigenTolerance = 1e-8;

}  // namespace phylo::ad
