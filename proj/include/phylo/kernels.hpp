#pragma once

#include <cstddef>

// Dense row-major matrix kernels. Every output element is accumulated in a
// fixed order, so the OpenMP and serial versions agree bit for bit.
namespace phylo::kernels {

/// c[m,n] = a[m,k] * b[k,n]
void matmul(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n);
/// c[k,n] += a[m,k]^T * b[m,n]
void matmul_at_b_acc(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n);
/// c[m,k] += a[m,n] * b[k,n]^T
void matmul_a_bt_acc(const double* a, const double* b, double* c, std::size_t m, std::size_t n, std::size_t k);

/// Multi-head softmax self-attention. q, k, v, o are [batch, t, heads * dh];
/// head h of item b uses channels h*dh..(h+1)*dh and computes
/// softmax(scale * q k^T) v over t. The t x t weights are not kept.
void attention(const double* q, const double* k, const double* v, double* o, std::size_t batch, std::size_t t,
               std::size_t heads, std::size_t dh, double scale);
/// Accumulates gradients of attention() into gq, gk, gv (each may be null),
/// recomputing the weights from q and k.
void attention_backward(const double* q, const double* k, const double* v, const double* go, double* gq, double* gk,
                        double* gv, std::size_t batch, std::size_t t, std::size_t heads, std::size_t dh, double scale);

namespace serial {
void attention(const double* q, const double* k, const double* v, double* o, std::size_t batch, std::size_t t,
               std::size_t heads, std::size_t dh, double scale);
void attention_backward(const double* q, const double* k, const double* v, const double* go, double* gq, double* gk,
                        double* gv, std::size_t batch, std::size_t t, std::size_t heads, std::size_t dh, double scale);
void matmul(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n);
void matmul_at_b_acc(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n);
void matmul_a_bt_acc(const double* a, const double* b, double* c, std::size_t m, std::size_t n, std::size_t k);
}  // namespace serial

}  // namespace phylo::kernels
