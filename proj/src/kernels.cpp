#include "phylo/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "phylo/tensor.hpp"

namespace phylo::kernels {

namespace {

// Below this many multiply-adds the threading overhead dominates.
constexpr std::size_t kParallelWork = 1u << 14;

inline void matmul_row(const double* a, const double* b, double* c, std::size_t i, std::size_t k, std::size_t n) {
  double* out = c + i * n;
  for (std::size_t j = 0; j < n; ++j) out[j] = 0.0;
  const double* row = a + i * k;
  for (std::size_t p = 0; p < k; ++p) {
    const double v = row[p];
    const double* brow = b + p * n;
    for (std::size_t j = 0; j < n; ++j) out[j] += v * brow[j];
  }
}

inline void at_b_row(const double* a, const double* b, double* c, std::size_t p, std::size_t m, std::size_t k,
                     std::size_t n) {
  double* out = c + p * n;
  for (std::size_t i = 0; i < m; ++i) {
    const double v = a[i * k + p];
    const double* brow = b + i * n;
    for (std::size_t j = 0; j < n; ++j) out[j] += v * brow[j];
  }
}

inline void a_bt_row(const double* a, const double* b, double* c, std::size_t i, std::size_t n, std::size_t k) {
  const double* row = a + i * n;
  double* out = c + i * k;
  for (std::size_t p = 0; p < k; ++p) {
    const double* brow = b + p * n;
    double s = 0.0;
    for (std::size_t j = 0; j < n; ++j) s += row[j] * brow[j];
    out[p] += s;
  }
}

// Row softmax of scale * q k^T into w[t,t].
void attention_weights(const double* q, const double* k, double* w, std::size_t t, std::size_t d, double scale) {
  std::fill(w, w + t * t, 0.0);
  for (std::size_t i = 0; i < t; ++i) a_bt_row(q, k, w, i, d, t);
  for (std::size_t i = 0; i < t; ++i) {
    double* row = w + i * t;
    for (std::size_t j = 0; j < t; ++j) row[j] *= scale;
    const double mx = *std::max_element(row, row + t);
    for (std::size_t j = 0; j < t; ++j) row[j] = std::exp(row[j] - mx);
    const double total = pairwise_sum(row, t);
    for (std::size_t j = 0; j < t; ++j) row[j] /= total;
  }
}

void attention_group(const double* q, const double* k, const double* v, double* o, std::size_t t, std::size_t d,
                     double scale, std::vector<double>& w) {
  w.resize(t * t);
  attention_weights(q, k, w.data(), t, d, scale);
  for (std::size_t i = 0; i < t; ++i) matmul_row(w.data(), v, o, i, t, d);
}

void attention_group_backward(const double* q, const double* k, const double* v, const double* go, double* gq,
                              double* gk, double* gv, std::size_t t, std::size_t d, double scale,
                              std::vector<double>& w, std::vector<double>& gw) {
  w.resize(t * t);
  gw.assign(t * t, 0.0);
  attention_weights(q, k, w.data(), t, d, scale);
  // o = w v: gv += w^T go, gw = go v^T
  if (gv) {
    for (std::size_t p = 0; p < t; ++p) at_b_row(w.data(), go, gv, p, t, t, d);
  }
  for (std::size_t i = 0; i < t; ++i) a_bt_row(go, v, gw.data(), i, d, t);
  // Through the row softmax, then the scale: gs = scale * w * (gw - <w, gw>).
  for (std::size_t i = 0; i < t; ++i) {
    double* g = gw.data() + i * t;
    const double* row = w.data() + i * t;
    double dot = 0.0;
    for (std::size_t j = 0; j < t; ++j) dot += row[j] * g[j];
    for (std::size_t j = 0; j < t; ++j) g[j] = scale * row[j] * (g[j] - dot);
  }
  // s = q k^T: gq += gs k, gk += gs^T q
  if (gq) {
    for (std::size_t i = 0; i < t; ++i) {
      double* out = gq + i * d;
      const double* g = gw.data() + i * t;
      for (std::size_t j = 0; j < t; ++j) {
        const double c = g[j];
        const double* krow = k + j * d;
        for (std::size_t c2 = 0; c2 < d; ++c2) out[c2] += c * krow[c2];
      }
    }
  }
  if (gk) {
    for (std::size_t p = 0; p < t; ++p) at_b_row(gw.data(), q, gk, p, t, t, d);
  }
}

// Contiguous copies of one head's [t, dh] slices, so the per-head work runs on
// dense rows.
struct HeadScratch {
  std::vector<double> q, k, v, o, w, gw;
};

void gather_head(const double* src, double* dst, std::size_t t, std::size_t ld, std::size_t dh) {
  for (std::size_t i = 0; i < t; ++i) std::copy(src + i * ld, src + i * ld + dh, dst + i * dh);
}

void add_head(const double* src, double* dst, std::size_t t, std::size_t ld, std::size_t dh) {
  for (std::size_t i = 0; i < t; ++i)
    for (std::size_t c = 0; c < dh; ++c) dst[i * ld + c] += src[i * dh + c];
}

void attention_head(const double* q, const double* k, const double* v, double* o, std::size_t t, std::size_t ld,
                    std::size_t dh, double scale, HeadScratch& s) {
  s.q.resize(t * dh);
  s.k.resize(t * dh);
  s.v.resize(t * dh);
  s.o.resize(t * dh);
  gather_head(q, s.q.data(), t, ld, dh);
  gather_head(k, s.k.data(), t, ld, dh);
  gather_head(v, s.v.data(), t, ld, dh);
  attention_group(s.q.data(), s.k.data(), s.v.data(), s.o.data(), t, dh, scale, s.w);
  for (std::size_t i = 0; i < t; ++i) std::copy(s.o.data() + i * dh, s.o.data() + (i + 1) * dh, o + i * ld);
}

void attention_head_backward(const double* q, const double* k, const double* v, const double* go, double* gq,
                             double* gk, double* gv, std::size_t t, std::size_t ld, std::size_t dh, double scale,
                             HeadScratch& s) {
  const std::size_t size = t * dh;
  s.q.resize(size);
  s.k.resize(size);
  s.v.resize(size);
  s.o.resize(4 * size);
  gather_head(q, s.q.data(), t, ld, dh);
  gather_head(k, s.k.data(), t, ld, dh);
  gather_head(v, s.v.data(), t, ld, dh);
  double* g_out = s.o.data();
  gather_head(go, g_out, t, ld, dh);
  double* g_q = g_out + size;
  double* g_k = g_q + size;
  double* g_v = g_k + size;
  std::fill(g_q, g_q + 3 * size, 0.0);
  attention_group_backward(s.q.data(), s.k.data(), s.v.data(), g_out, gq ? g_q : nullptr, gk ? g_k : nullptr,
                           gv ? g_v : nullptr, t, dh, scale, s.w, s.gw);
  if (gq) add_head(g_q, gq, t, ld, dh);
  if (gk) add_head(g_k, gk, t, ld, dh);
  if (gv) add_head(g_v, gv, t, ld, dh);
}

template <class F>
void each_head(std::size_t batch, std::size_t t, std::size_t heads, std::size_t dh, F&& f) {
  const std::size_t ld = heads * dh;
  for (std::size_t g = 0; g < batch * heads; ++g) f((g / heads) * t * ld + (g % heads) * dh);
}

}  // namespace

void attention(const double* q, const double* k, const double* v, double* o, std::size_t batch, std::size_t t,
               std::size_t heads, std::size_t dh, double scale) {
  const std::size_t ld = heads * dh;
  const auto groups = static_cast<std::ptrdiff_t>(batch * heads);
#pragma omp parallel if (batch * heads * t * t * dh >= kParallelWork)
  {
    HeadScratch s;
#pragma omp for schedule(static)
    for (std::ptrdiff_t g = 0; g < groups; ++g) {
      const std::size_t u = static_cast<std::size_t>(g);
      const std::size_t off = (u / heads) * t * ld + (u % heads) * dh;
      attention_head(q + off, k + off, v + off, o + off, t, ld, dh, scale, s);
    }
  }
}

void attention_backward(const double* q, const double* k, const double* v, const double* go, double* gq, double* gk,
                        double* gv, std::size_t batch, std::size_t t, std::size_t heads, std::size_t dh, double scale) {
  const std::size_t ld = heads * dh;
  const auto groups = static_cast<std::ptrdiff_t>(batch * heads);
#pragma omp parallel if (batch * heads * t * t * dh >= kParallelWork)
  {
    HeadScratch s;
#pragma omp for schedule(static)
    for (std::ptrdiff_t g = 0; g < groups; ++g) {
      const std::size_t u = static_cast<std::size_t>(g);
      const std::size_t off = (u / heads) * t * ld + (u % heads) * dh;
      attention_head_backward(q + off, k + off, v + off, go + off, gq ? gq + off : nullptr, gk ? gk + off : nullptr,
                              gv ? gv + off : nullptr, t, ld, dh, scale, s);
    }
  }
}

void matmul(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n) {
  const auto rows = static_cast<std::ptrdiff_t>(m);
#pragma omp parallel for schedule(static) if (m * k * n >= kParallelWork)
  for (std::ptrdiff_t i = 0; i < rows; ++i) matmul_row(a, b, c, static_cast<std::size_t>(i), k, n);
}

void matmul_at_b_acc(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n) {
  const auto rows = static_cast<std::ptrdiff_t>(k);
#pragma omp parallel for schedule(static) if (m * k * n >= kParallelWork)
  for (std::ptrdiff_t p = 0; p < rows; ++p) at_b_row(a, b, c, static_cast<std::size_t>(p), m, k, n);
}

void matmul_a_bt_acc(const double* a, const double* b, double* c, std::size_t m, std::size_t n, std::size_t k) {
  const auto rows = static_cast<std::ptrdiff_t>(m);
#pragma omp parallel for schedule(static) if (m * k * n >= kParallelWork)
  for (std::ptrdiff_t i = 0; i < rows; ++i) a_bt_row(a, b, c, static_cast<std::size_t>(i), n, k);
}

namespace serial {

void attention(const double* q, const double* k, const double* v, double* o, std::size_t batch, std::size_t t,
               std::size_t heads, std::size_t dh, double scale) {
  HeadScratch s;
  each_head(batch, t, heads, dh, [&](std::size_t off) {
    attention_head(q + off, k + off, v + off, o + off, t, heads * dh, dh, scale, s);
  });
}

void attention_backward(const double* q, const double* k, const double* v, const double* go, double* gq, double* gk,
                        double* gv, std::size_t batch, std::size_t t, std::size_t heads, std::size_t dh, double scale) {
  HeadScratch s;
  each_head(batch, t, heads, dh, [&](std::size_t off) {
    attention_head_backward(q + off, k + off, v + off, go + off, gq ? gq + off : nullptr, gk ? gk + off : nullptr,
                            gv ? gv + off : nullptr, t, heads * dh, dh, scale, s);
  });
}

void matmul(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) matmul_row(a, b, c, i, k, n);
}

void matmul_at_b_acc(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t p = 0; p < k; ++p) at_b_row(a, b, c, p, m, k, n);
}

void matmul_a_bt_acc(const double* a, const double* b, double* c, std::size_t m, std::size_t n, std::size_t k) {
  for (std::size_t i = 0; i < m; ++i) a_bt_row(a, b, c, i, n, k);
}

}  // namespace serial

}  // namespace phylo::kernels
