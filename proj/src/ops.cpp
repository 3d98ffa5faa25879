#include "phylo/ops.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>

#include <Eigen/Dense>

#include "phylo/error.hpp"
#include "phylo/kernels.hpp"

namespace phylo::ad {

namespace {

Tape& tape_of(Var v) {
  if (!v.valid()) throw InvalidArgument("operation on an unbound Var");
  return *v.tape();
}

void same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw InvalidArgument(std::string(op) + ": shape mismatch " + shape_string(a.shape()) + " vs " +
                          shape_string(b.shape()));
  }
}

void need_rank(const Tensor& a, std::size_t rank, const char* op) {
  if (a.rank() != rank) {
    throw InvalidArgument(std::string(op) + ": expected rank " + std::to_string(rank) + ", got " +
                          shape_string(a.shape()));
  }
}

void need_square(const Tensor& a, const char* op) {
  if (a.rank() != 2 || a.dim(0) != a.dim(1)) {
    throw InvalidArgument(std::string(op) + ": expected a square matrix, got " + shape_string(a.shape()));
  }
}

template <class F, class DF>
Var unary(Var a, const char* name, F f, DF df) {
  return tape_of(a).record(
      name, {a},
      [f](Inputs in) {
        const Tensor& x = *in[0];
        Tensor y(x.shape());
        for (std::size_t i = 0; i < x.size(); ++i) y[i] = f(x[i]);
        return y;
      },
      [df](Inputs in, const Tensor& y, const Tensor& g, InputGrads gr) {
        if (!gr[0]) return;
        const Tensor& x = *in[0];
        Tensor& gx = *gr[0];
        for (std::size_t i = 0; i < x.size(); ++i) gx[i] += g[i] * df(x[i], y[i]);
      });
}

template <class F, class DA, class DB>
Var binary(Var a, Var b, const char* name, F f, DA da, DB db) {
  same_shape(a.value(), b.value(), name);
  return tape_of(a).record(
      name, {a, b},
      [f, name](Inputs in) {
        same_shape(*in[0], *in[1], name);
        const Tensor& x = *in[0];
        const Tensor& z = *in[1];
        Tensor y(x.shape());
        for (std::size_t i = 0; i < x.size(); ++i) y[i] = f(x[i], z[i]);
        return y;
      },
      [da, db](Inputs in, const Tensor&, const Tensor& g, InputGrads gr) {
        const Tensor& x = *in[0];
        const Tensor& z = *in[1];
        if (gr[0]) {
          for (std::size_t i = 0; i < x.size(); ++i) (*gr[0])[i] += g[i] * da(x[i], z[i]);
        }
        if (gr[1]) {
          for (std::size_t i = 0; i < x.size(); ++i) (*gr[1])[i] += g[i] * db(x[i], z[i]);
        }
      });
}

// [outer, mid, inner] view of a shape around one axis.
struct Split3 {
  std::size_t outer = 1, mid = 1, inner = 1;
};

Split3 split_at(const Shape& s, std::size_t axis) {
  Split3 r;
  for (std::size_t k = 0; k < axis; ++k) r.outer *= s[k];
  r.mid = s[axis];
  for (std::size_t k = axis + 1; k < s.size(); ++k) r.inner *= s[k];
  return r;
}

using EigenMat = Eigen::MatrixXd;

EigenMat to_eigen(const Tensor& t) {
  const std::size_t n = t.dim(0);
  EigenMat m(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) m(i, j) = 0.5 * (t[i * n + j] + t[j * n + i]);
  }
  return m;
}

void add_from_eigen(Tensor& dst, const EigenMat& m, double factor) {
  const std::size_t n = dst.dim(0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) dst[i * n + j] += factor * m(i, j);
  }
}

// Symmetric eigendecomposition with the eigenvalue floor applied.
struct Spectrum {
  EigenMat vectors;
  Eigen::VectorXd values;
};

Spectrum spectrum(const EigenMat& m, const char* what) {
  Eigen::SelfAdjointEigenSolver<EigenMat> solver(m);
  if (solver.info() != Eigen::Success) throw NumericError(std::string(what) + ": eigendecomposition failed");
  Spectrum s{solver.eigenvectors(), solver.eigenvalues()};
  if (s.values.size() > 0 && s.values.minCoeff() < -kNegativeEigenTolerance) {
    throw NumericError(std::string(what) + ": matrix is not positive semidefinite (eigenvalue " +
                       std::to_string(s.values.minCoeff()) + ")");
  }
  for (Eigen::Index i = 0; i < s.values.size(); ++i) s.values(i) = std::max(s.values(i), kEigenFloor);
  return s;
}

EigenMat apply(const Spectrum& s, double (*f)(double)) {
  Eigen::VectorXd v = s.values.unaryExpr(f);
  return s.vectors * v.asDiagonal() * s.vectors.transpose();
}

double log_of(double x) { return std::log(x); }
double inv_of(double x) { return 1.0 / x; }

// (log a - log b) / (a - b), continuous at a == b.
double log_divided_difference(double a, double b) {
  const double d = a - b;
  const double rel = d / b;
  if (std::abs(rel) < 1e-6) return (1.0 - 0.5 * rel + rel * rel / 3.0) / b;
  return std::log1p(rel) / d;
}

}  // namespace

Var add(Var a, Var b) {
  return binary(
      a, b, "add", [](double x, double y) { return x + y; }, [](double, double) { return 1.0; },
      [](double, double) { return 1.0; });
}

Var sub(Var a, Var b) {
  return binary(
      a, b, "sub", [](double x, double y) { return x - y; }, [](double, double) { return 1.0; },
      [](double, double) { return -1.0; });
}

Var mul(Var a, Var b) {
  return binary(
      a, b, "mul", [](double x, double y) { return x * y; }, [](double, double y) { return y; },
      [](double x, double) { return x; });
}

Var scale(Var a, double c) {
  return unary(
      a, "scale", [c](double x) { return c * x; }, [c](double, double) { return c; });
}

Var add_scalar(Var a, double c) {
  return unary(
      a, "add_scalar", [c](double x) { return x + c; }, [](double, double) { return 1.0; });
}

Var relu(Var a) {
  return unary(
      a, "relu", [](double x) { return x > 0.0 ? x : 0.0; }, [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Var elu(Var a, double alpha) {
  return unary(
      a, "elu", [alpha](double x) { return x > 0.0 ? x : alpha * std::expm1(x); },
      [alpha](double x, double y) { return x > 0.0 ? 1.0 : y + alpha; });
}

Var softplus(Var a) {
  return unary(
      a, "softplus",
      [](double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); },
      [](double x, double) { return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x)); });
}

Var square(Var a) {
  return unary(
      a, "square", [](double x) { return x * x; }, [](double x, double) { return 2.0 * x; });
}

Var abs(Var a) {
  return unary(
      a, "abs", [](double x) { return std::abs(x); },
      [](double x, double) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); });
}

Var exp(Var a) {
  return unary(
      a, "exp", [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Var sqrt(Var a) {
  return unary(
      a, "sqrt",
      [](double x) {
        if (x < 0.0) throw NumericError("sqrt of a negative value");
        return std::sqrt(x);
      },
      [](double, double y) { return y > 0.0 ? 0.5 / y : 0.0; });
}

Var linear(Var x, Var w) {
  const Tensor& xv = x.value();
  const Tensor& wv = w.value();
  need_rank(wv, 2, "linear");
  if (xv.shape().back() != wv.dim(0)) {
    throw InvalidArgument("linear: input " + shape_string(xv.shape()) + " does not match weights " +
                          shape_string(wv.shape()));
  }
  return tape_of(x).record(
      "linear", {x, w},
      [](Inputs in) {
        const Tensor& a = *in[0];
        const Tensor& b = *in[1];
        const std::size_t k = b.dim(0), n = b.dim(1), m = a.size() / k;
        Shape s = a.shape();
        s.back() = n;
        Tensor y(s);
        kernels::matmul(a.data().data(), b.data().data(), y.data().data(), m, k, n);
        return y;
      },
      [](Inputs in, const Tensor&, const Tensor& g, InputGrads gr) {
        const Tensor& a = *in[0];
        const Tensor& b = *in[1];
        const std::size_t k = b.dim(0), n = b.dim(1), m = a.size() / k;
        if (gr[0]) kernels::matmul_a_bt_acc(g.data().data(), b.data().data(), gr[0]->data().data(), m, n, k);
        if (gr[1]) kernels::matmul_at_b_acc(a.data().data(), g.data().data(), gr[1]->data().data(), m, k, n);
      });
}

Var add_bias(Var x, Var b) {
  const Tensor& bv = b.value();
  need_rank(bv, 1, "add_bias");
  if (x.value().shape().back() != bv.dim(0)) {
    throw InvalidArgument("add_bias: bias " + shape_string(bv.shape()) + " does not match " +
                          shape_string(x.value().shape()));
  }
  return tape_of(x).record(
      "add_bias", {x, b},
      [](Inputs in) {
        Tensor y = *in[0];
        const Tensor& bias = *in[1];
        const std::size_t c = bias.size();
        for (std::size_t i = 0; i < y.size(); ++i) y[i] += bias[i % c];
        return y;
      },
      [](Inputs in, const Tensor&, const Tensor& g, InputGrads gr) {
        const std::size_t c = in[1]->size();
        if (gr[0]) {
          for (std::size_t i = 0; i < g.size(); ++i) (*gr[0])[i] += g[i];
        }
        if (gr[1]) {
          const std::size_t rows = g.size() / c;
          for (std::size_t j = 0; j < c; ++j) (*gr[1])[j] += pairwise_sum(g.data().data() + j, rows, c);
        }
      });
}

Var sum(Var a) {
  return tape_of(a).record(
      "sum", {a},
      [](Inputs in) { return Tensor::scalar(pairwise_sum(in[0]->data().data(), in[0]->size())); },
      [](Inputs, const Tensor&, const Tensor& g, InputGrads gr) {
        if (!gr[0]) return;
        for (double& v : gr[0]->data()) v += g[0];
      });
}

Var mean(Var a) { return scale(sum(a), 1.0 / static_cast<double>(a.size())); }

Var reduce(Var a, std::size_t axis, bool average) {
  const Shape in_shape = a.value().shape();
  if (axis >= in_shape.size()) throw InvalidArgument("reduce: axis out of range for " + shape_string(in_shape));
  Shape out_shape;
  for (std::size_t k = 0; k < in_shape.size(); ++k) {
    if (k != axis) out_shape.push_back(in_shape[k]);
  }
  if (out_shape.empty()) out_shape.push_back(1);
  const Split3 s = split_at(in_shape, axis);
  const double factor = average ? 1.0 / static_cast<double>(s.mid) : 1.0;
  return tape_of(a).record(
      average ? "reduce_mean" : "reduce_sum", {a},
      [=](Inputs in) {
        Tensor y(out_shape);
        const double* x = in[0]->data().data();
        for (std::size_t o = 0; o < s.outer; ++o) {
          for (std::size_t i = 0; i < s.inner; ++i) {
            y[o * s.inner + i] = factor * pairwise_sum(x + o * s.mid * s.inner + i, s.mid, s.inner);
          }
        }
        return y;
      },
      [=](Inputs, const Tensor&, const Tensor& g, InputGrads gr) {
        if (!gr[0]) return;
        Tensor& gx = *gr[0];
        for (std::size_t o = 0; o < s.outer; ++o) {
          for (std::size_t m = 0; m < s.mid; ++m) {
            for (std::size_t i = 0; i < s.inner; ++i) {
              gx[(o * s.mid + m) * s.inner + i] += factor * g[o * s.inner + i];
            }
          }
        }
      });
}

Var expand(Var a, std::size_t axis, std::size_t count) {
  Shape in_shape = a.value().shape();
  // A [1] tensor is treated as rank 0 when expanding.
  if (in_shape == Shape{1} && axis == 0) in_shape.clear();
  if (axis > in_shape.size()) throw InvalidArgument("expand: axis out of range for " + shape_string(in_shape));
  if (count == 0) throw InvalidArgument("expand: count must be positive");
  Shape out_shape = in_shape;
  out_shape.insert(out_shape.begin() + static_cast<std::ptrdiff_t>(axis), count);
  if (out_shape.size() > Tensor::kMaxRank) throw InvalidArgument("expand: result exceeds rank 4");
  std::size_t outer = 1, inner = 1;
  for (std::size_t k = 0; k < axis; ++k) outer *= in_shape[k];
  for (std::size_t k = axis; k < in_shape.size(); ++k) inner *= in_shape[k];
  return tape_of(a).record(
      "expand", {a},
      [=](Inputs in) {
        Tensor y(out_shape);
        const Tensor& x = *in[0];
        for (std::size_t o = 0; o < outer; ++o) {
          for (std::size_t c = 0; c < count; ++c) {
            std::copy_n(x.data().data() + o * inner, inner, y.data().data() + (o * count + c) * inner);
          }
        }
        return y;
      },
      [=](Inputs, const Tensor&, const Tensor& g, InputGrads gr) {
        if (!gr[0]) return;
        Tensor& gx = *gr[0];
        for (std::size_t o = 0; o < outer; ++o) {
          for (std::size_t i = 0; i < inner; ++i) {
            gx[o * inner + i] += pairwise_sum(g.data().data() + o * count * inner + i, count, inner);
          }
        }
      });
}

namespace {

// Maps each output offset of a permutation to its input offset.
std::vector<std::size_t> permutation_map(const Shape& in_shape, const std::vector<std::size_t>& order) {
  const std::size_t rank = in_shape.size();
  std::vector<std::size_t> in_stride(rank, 1);
  for (std::size_t k = rank - 1; k-- > 0;) in_stride[k] = in_stride[k + 1] * in_shape[k + 1];
  Shape out_shape(rank);
  for (std::size_t k = 0; k < rank; ++k) out_shape[k] = in_shape[order[k]];
  const std::size_t total = shape_size(in_shape);
  std::vector<std::size_t> map(total);
  std::vector<std::size_t> idx(rank, 0);
  for (std::size_t flat = 0; flat < total; ++flat) {
    std::size_t off = 0;
    for (std::size_t k = 0; k < rank; ++k) off += idx[k] * in_stride[order[k]];
    map[flat] = off;
    for (std::size_t k = rank; k-- > 0;) {
      if (++idx[k] < out_shape[k]) break;
      idx[k] = 0;
    }
  }
  return map;
}

}  // namespace

Var permute(Var a, const std::vector<std::size_t>& order) {
  const Shape in_shape = a.value().shape();
  if (order.size() != in_shape.size()) throw InvalidArgument("permute: order length does not match rank");
  std::vector<std::size_t> check = order;
  std::sort(check.begin(), check.end());
  for (std::size_t k = 0; k < check.size(); ++k) {
    if (check[k] != k) throw InvalidArgument("permute: order is not a permutation");
  }
  Shape out_shape(order.size());
  for (std::size_t k = 0; k < order.size(); ++k) out_shape[k] = in_shape[order[k]];
  auto map = std::make_shared<const std::vector<std::size_t>>(permutation_map(in_shape, order));
  return tape_of(a).record(
      "permute", {a},
      [map, out_shape](Inputs in) {
        Tensor y(out_shape);
        const Tensor& x = *in[0];
        for (std::size_t i = 0; i < y.size(); ++i) y[i] = x[(*map)[i]];
        return y;
      },
      [map](Inputs, const Tensor&, const Tensor& g, InputGrads gr) {
        if (!gr[0]) return;
        for (std::size_t i = 0; i < g.size(); ++i) (*gr[0])[(*map)[i]] += g[i];
      });
}

Var reshape(Var a, Shape shape) {
  if (shape_size(shape) != a.size()) {
    throw InvalidArgument("reshape: " + shape_string(a.value().shape()) + " to " + shape_string(shape));
  }
  return tape_of(a).record(
      "reshape", {a}, [shape](Inputs in) { return in[0]->reshaped(shape); },
      [](Inputs, const Tensor&, const Tensor& g, InputGrads gr) {
        if (!gr[0]) return;
        for (std::size_t i = 0; i < g.size(); ++i) (*gr[0])[i] += g[i];
      });
}

Var gather(Var a, const std::vector<std::size_t>& rows) {
  const Shape in_shape = a.value().shape();
  if (rows.empty()) throw InvalidArgument("gather: no rows");
  for (std::size_t r : rows) {
    if (r >= in_shape[0]) throw InvalidArgument("gather: row index out of range");
  }
  Shape out_shape = in_shape;
  out_shape[0] = rows.size();
  const std::size_t width = a.size() / in_shape[0];
  return tape_of(a).record(
      "gather", {a},
      [rows, out_shape, width](Inputs in) {
        Tensor y(out_shape);
        const double* x = in[0]->data().data();
        for (std::size_t r = 0; r < rows.size(); ++r) std::copy_n(x + rows[r] * width, width, y.data().data() + r * width);
        return y;
      },
      [rows, width](Inputs, const Tensor&, const Tensor& g, InputGrads gr) {
        if (!gr[0]) return;
        double* gx = gr[0]->data().data();
        for (std::size_t r = 0; r < rows.size(); ++r) {
          for (std::size_t k = 0; k < width; ++k) gx[rows[r] * width + k] += g[r * width + k];
        }
      });
}

Var stack(const std::vector<Var>& parts, std::size_t axis) {
  if (parts.empty()) throw InvalidArgument("stack: no inputs");
  const Shape in_shape = parts[0].value().shape();
  for (const Var& p : parts) same_shape(parts[0].value(), p.value(), "stack");
  if (axis > in_shape.size()) throw InvalidArgument("stack: axis out of range");
  Shape out_shape = in_shape;
  const std::size_t count = parts.size();
  out_shape.insert(out_shape.begin() + static_cast<std::ptrdiff_t>(axis), count);
  if (out_shape.size() > Tensor::kMaxRank) throw InvalidArgument("stack: result exceeds rank 4");
  std::size_t outer = 1, inner = 1;
  for (std::size_t k = 0; k < axis; ++k) outer *= in_shape[k];
  for (std::size_t k = axis; k < in_shape.size(); ++k) inner *= in_shape[k];
  return tape_of(parts[0]).record(
      "stack", parts,
      [=](Inputs in) {
        Tensor y(out_shape);
        for (std::size_t o = 0; o < outer; ++o) {
          for (std::size_t c = 0; c < count; ++c) {
            std::copy_n(in[c]->data().data() + o * inner, inner, y.data().data() + (o * count + c) * inner);
          }
        }
        return y;
      },
      [=](Inputs, const Tensor&, const Tensor& g, InputGrads gr) {
        for (std::size_t c = 0; c < count; ++c) {
          if (!gr[c]) continue;
          for (std::size_t o = 0; o < outer; ++o) {
            for (std::size_t i = 0; i < inner; ++i) (*gr[c])[o * inner + i] += g[(o * count + c) * inner + i];
          }
        }
      });
}

Var bmm(Var a, Var b, bool transpose_b) {
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  need_rank(av, 3, "bmm");
  need_rank(bv, 3, "bmm");
  const std::size_t batch = av.dim(0), m = av.dim(1), k = av.dim(2);
  const std::size_t n = transpose_b ? bv.dim(1) : bv.dim(2);
  const std::size_t bk = transpose_b ? bv.dim(2) : bv.dim(1);
  if (bv.dim(0) != batch || bk != k) {
    throw InvalidArgument("bmm: incompatible shapes " + shape_string(av.shape()) + " and " + shape_string(bv.shape()));
  }
  const auto nb = static_cast<std::ptrdiff_t>(batch);
  return tape_of(a).record(
      transpose_b ? "bmm_nt" : "bmm", {a, b},
      [=](Inputs in) {
        Tensor y(Shape{batch, m, n});
        const double* pa = in[0]->data().data();
        const double* pb = in[1]->data().data();
        double* py = y.data().data();
#pragma omp parallel for schedule(static) if (batch * m * n * k >= 16384)
        for (std::ptrdiff_t t = 0; t < nb; ++t) {
          const double* at = pa + t * m * k;
          const double* bt = pb + t * k * n;
          double* yt = py + t * m * n;
          if (transpose_b) {
            kernels::serial::matmul_a_bt_acc(at, bt, yt, m, k, n);
          } else {
            kernels::serial::matmul(at, bt, yt, m, k, n);
          }
        }
        return y;
      },
      [=](Inputs in, const Tensor&, const Tensor& g, InputGrads gr) {
        const double* pa = in[0]->data().data();
        const double* pb = in[1]->data().data();
        const double* pg = g.data().data();
        double* ga = gr[0] ? gr[0]->data().data() : nullptr;
        double* gb = gr[1] ? gr[1]->data().data() : nullptr;
#pragma omp parallel for schedule(static) if (batch * m * n * k >= 16384)
        for (std::ptrdiff_t t = 0; t < nb; ++t) {
          const double* at = pa + t * m * k;
          const double* bt = pb + t * k * n;
          const double* gt = pg + t * m * n;
          if (transpose_b) {
            // y = a b^T with b[n,k]: ga += g b, gb += g^T a
            if (ga) {
              std::vector<double> tmp(m * k);
              kernels::serial::matmul(gt, bt, tmp.data(), m, n, k);
              double* dst = ga + t * m * k;
              for (std::size_t i = 0; i < m * k; ++i) dst[i] += tmp[i];
            }
            if (gb) kernels::serial::matmul_at_b_acc(gt, at, gb + t * n * k, m, n, k);
          } else {
            if (ga) kernels::serial::matmul_a_bt_acc(gt, bt, ga + t * m * k, m, n, k);
            if (gb) kernels::serial::matmul_at_b_acc(at, gt, gb + t * k * n, m, k, n);
          }
        }
      });
}

Var softmax_last(Var a) {
  return tape_of(a).record(
      "softmax", {a},
      [](Inputs in) {
        const Tensor& x = *in[0];
        Tensor y(x.shape());
        const std::size_t c = x.shape().back(), rows = x.size() / c;
        for (std::size_t r = 0; r < rows; ++r) {
          const double* xr = x.data().data() + r * c;
          double* yr = y.data().data() + r * c;
          const double mx = *std::max_element(xr, xr + c);
          for (std::size_t j = 0; j < c; ++j) yr[j] = std::exp(xr[j] - mx);
          const double total = pairwise_sum(yr, c);
          for (std::size_t j = 0; j < c; ++j) yr[j] /= total;
        }
        return y;
      },
      [](Inputs, const Tensor& y, const Tensor& g, InputGrads gr) {
        if (!gr[0]) return;
        const std::size_t c = y.shape().back(), rows = y.size() / c;
        std::vector<double> prod(c);
        for (std::size_t r = 0; r < rows; ++r) {
          const double* yr = y.data().data() + r * c;
          const double* gr_ = g.data().data() + r * c;
          for (std::size_t j = 0; j < c; ++j) prod[j] = yr[j] * gr_[j];
          const double dot = pairwise_sum(prod.data(), c);
          for (std::size_t j = 0; j < c; ++j) (*gr[0])[r * c + j] += yr[j] * (gr_[j] - dot);
        }
      });
}

Var attention(Var q, Var k, Var v, std::size_t heads, double scale) {
  const Tensor& qv = q.value();
  need_rank(qv, 3, "attention");
  if (k.shape() != qv.shape() || v.shape() != qv.shape()) {
    throw InvalidArgument("attention: q, k, v shapes differ: " + shape_string(qv.shape()) + ", " +
                          shape_string(k.shape()) + ", " + shape_string(v.shape()));
  }
  if (heads == 0 || qv.dim(2) % heads != 0) {
    throw InvalidArgument("attention: " + std::to_string(heads) + " heads do not divide width " +
                          std::to_string(qv.dim(2)));
  }
  const std::size_t B = qv.dim(0), T = qv.dim(1), dh = qv.dim(2) / heads;
  return tape_of(q).record(
      "attention", {q, k, v},
      [=](Inputs in) {
        Tensor y(in[0]->shape());
        kernels::attention(in[0]->data().data(), in[1]->data().data(), in[2]->data().data(), y.data().data(), B, T,
                           heads, dh, scale);
        return y;
      },
      [=](Inputs in, const Tensor&, const Tensor& g, InputGrads gr) {
        auto ptr = [](Tensor* t) { return t ? t->data().data() : nullptr; };
        kernels::attention_backward(in[0]->data().data(), in[1]->data().data(), in[2]->data().data(),
                                    g.data().data(), ptr(gr[0]), ptr(gr[1]), ptr(gr[2]), B, T, heads, dh, scale);
      });
}

Var equivariant_pair(Var x, Var w) {
  const Tensor& xv = x.value();
  const Tensor& wv = w.value();
  need_rank(xv, 4, "equivariant_pair");
  need_rank(wv, 2, "equivariant_pair");
  if (xv.dim(1) != 2) throw InvalidArgument("equivariant_pair: axis 1 must hold the two sequences of a pair");
  if (wv.dim(1) != 5) throw InvalidArgument("equivariant_pair: weights must be [heads, 5]");
  const std::size_t P = xv.dim(0), L = xv.dim(2), C = xv.dim(3), H = wv.dim(0);
  const std::size_t HC = H * C;
  const auto np = static_cast<std::ptrdiff_t>(P);
  return tape_of(x).record(
      "equivariant_pair", {x, w},
      [=](Inputs in) {
        Tensor y(Shape{P, 2, L, HC});
        const double* px = in[0]->data().data();
        const double* pw = in[1]->data().data();
        double* py = y.data().data();
#pragma omp parallel for schedule(static) if (P * L * HC >= 16384)
        for (std::ptrdiff_t p = 0; p < np; ++p) {
          const double* xp = px + p * 2 * L * C;
          double* yp = py + p * 2 * L * HC;
          std::vector<double> S(2 * C);
          for (std::size_t s = 0; s < 2; ++s) {
            for (std::size_t c = 0; c < C; ++c) S[s * C + c] = pairwise_sum(xp + s * L * C + c, L, C);
          }
          for (std::size_t s = 0; s < 2; ++s) {
            const std::size_t o = 1 - s;
            for (std::size_t i = 0; i < L; ++i) {
              const double* self = xp + (s * L + i) * C;
              const double* other = xp + (o * L + i) * C;
              double* out = yp + (s * L + i) * HC;
              for (std::size_t h = 0; h < H; ++h) {
                const double* wh = pw + h * 5;
                for (std::size_t c = 0; c < C; ++c) {
                  out[h * C + c] = wh[0] * self[c] + wh[1] * other[c] + wh[2] * S[s * C + c] +
                                   wh[3] * S[o * C + c] + wh[4];
                }
              }
            }
          }
        }
        return y;
      },
      [=](Inputs in, const Tensor&, const Tensor& g, InputGrads gr) {
        const double* px = in[0]->data().data();
        const double* pw = in[1]->data().data();
        const double* pg = g.data().data();
        double* gx = gr[0] ? gr[0]->data().data() : nullptr;
        std::vector<double> partial(gr[1] ? P * H * 5 : 0, 0.0);
#pragma omp parallel for schedule(static) if (P * L * HC >= 16384)
        for (std::ptrdiff_t p = 0; p < np; ++p) {
          const double* xp = px + p * 2 * L * C;
          const double* gp = pg + p * 2 * L * HC;
          std::vector<double> G(2 * HC);
          for (std::size_t s = 0; s < 2; ++s) {
            for (std::size_t j = 0; j < HC; ++j) G[s * HC + j] = pairwise_sum(gp + s * L * HC + j, L, HC);
          }
          if (gx) {
            double* gxp = gx + p * 2 * L * C;
            for (std::size_t s = 0; s < 2; ++s) {
              const std::size_t o = 1 - s;
              for (std::size_t i = 0; i < L; ++i) {
                const double* gself = gp + (s * L + i) * HC;
                const double* gother = gp + (o * L + i) * HC;
                double* dst = gxp + (s * L + i) * C;
                for (std::size_t h = 0; h < H; ++h) {
                  const double* wh = pw + h * 5;
                  for (std::size_t c = 0; c < C; ++c) {
                    const std::size_t j = h * C + c;
                    dst[c] += wh[0] * gself[j] + wh[1] * gother[j] + wh[2] * G[s * HC + j] + wh[3] * G[o * HC + j];
                  }
                }
              }
            }
          }
          if (gr[1]) {
            std::vector<double> S(2 * C);
            for (std::size_t s = 0; s < 2; ++s) {
              for (std::size_t c = 0; c < C; ++c) S[s * C + c] = pairwise_sum(xp + s * L * C + c, L, C);
            }
            double* part = partial.data() + p * H * 5;
            for (std::size_t h = 0; h < H; ++h) {
              double a0 = 0.0, a1 = 0.0, a2 = 0.0, a3 = 0.0, a4 = 0.0;
              for (std::size_t s = 0; s < 2; ++s) {
                const std::size_t o = 1 - s;
                for (std::size_t i = 0; i < L; ++i) {
                  const double* gi = gp + (s * L + i) * HC + h * C;
                  const double* self = xp + (s * L + i) * C;
                  const double* other = xp + (o * L + i) * C;
                  for (std::size_t c = 0; c < C; ++c) {
                    a0 += self[c] * gi[c];
                    a1 += other[c] * gi[c];
                  }
                }
                for (std::size_t c = 0; c < C; ++c) {
                  const double Gs = G[s * HC + h * C + c];
                  a2 += S[s * C + c] * Gs;
                  a3 += S[o * C + c] * Gs;
                  a4 += Gs;
                }
              }
              part[h * 5 + 0] = a0;
              part[h * 5 + 1] = a1;
              part[h * 5 + 2] = a2;
              part[h * 5 + 3] = a3;
              part[h * 5 + 4] = a4;
            }
          }
        }
        if (gr[1]) {
          Tensor& gw = *gr[1];
          for (std::size_t k = 0; k < H * 5; ++k) gw[k] += pairwise_sum(partial.data() + k, P, H * 5);
        }
      });
}

Var invariant_pair(Var x, Var w) {
  const Tensor& xv = x.value();
  need_rank(xv, 4, "invariant_pair");
  if (xv.dim(1) != 2) throw InvalidArgument("invariant_pair: axis 1 must hold the two sequences of a pair");
  if (w.value().shape() != Shape{2}) throw InvalidArgument("invariant_pair: weights must be [2]");
  const std::size_t P = xv.dim(0), L = xv.dim(2), C = xv.dim(3);
  return tape_of(x).record(
      "invariant_pair", {x, w},
      [=](Inputs in) {
        Tensor y(Shape{P, C});
        const double* px = in[0]->data().data();
        const double w0 = (*in[1])[0], w1 = (*in[1])[1];
        for (std::size_t p = 0; p < P; ++p) {
          for (std::size_t c = 0; c < C; ++c) y[p * C + c] = w0 * pairwise_sum(px + p * 2 * L * C + c, 2 * L, C) + w1;
        }
        return y;
      },
      [=](Inputs in, const Tensor&, const Tensor& g, InputGrads gr) {
        const double* px = in[0]->data().data();
        const double w0 = (*in[1])[0];
        if (gr[0]) {
          double* gx = gr[0]->data().data();
          for (std::size_t p = 0; p < P; ++p) {
            for (std::size_t k = 0; k < 2 * L; ++k) {
              for (std::size_t c = 0; c < C; ++c) gx[(p * 2 * L + k) * C + c] += w0 * g[p * C + c];
            }
          }
        }
        if (gr[1]) {
          std::vector<double> t(P * C);
          for (std::size_t p = 0; p < P; ++p) {
            for (std::size_t c = 0; c < C; ++c) t[p * C + c] = g[p * C + c] * pairwise_sum(px + p * 2 * L * C + c, 2 * L, C);
          }
          (*gr[1])[0] += pairwise_sum(t.data(), t.size());
          (*gr[1])[1] += pairwise_sum(g.data().data(), g.size());
        }
      });
}

Var pairwise_euclidean(Var z) {
  need_rank(z.value(), 2, "pairwise_euclidean");
  return tape_of(z).record(
      "pairwise_euclidean", {z},
      [](Inputs in) {
        const Tensor& Z = *in[0];
        const std::size_t n = Z.dim(0), d = Z.dim(1);
        Tensor D(Shape{n, n});
        for (std::size_t i = 0; i < n; ++i) {
          for (std::size_t j = i + 1; j < n; ++j) {
            double s = 0.0;
            for (std::size_t k = 0; k < d; ++k) {
              const double diff = Z[i * d + k] - Z[j * d + k];
              s += diff * diff;
            }
            D[i * n + j] = D[j * n + i] = std::sqrt(s);
          }
        }
        return D;
      },
      [](Inputs in, const Tensor& D, const Tensor& g, InputGrads gr) {
        if (!gr[0]) return;
        const Tensor& Z = *in[0];
        const std::size_t n = Z.dim(0), d = Z.dim(1);
        Tensor& gz = *gr[0];
        for (std::size_t i = 0; i < n; ++i) {
          for (std::size_t j = i + 1; j < n; ++j) {
            const double dist = D[i * n + j];
            if (!(dist > 0.0)) continue;
            const double coef = (g[i * n + j] + g[j * n + i]) / dist;
            for (std::size_t k = 0; k < d; ++k) {
              const double diff = Z[i * d + k] - Z[j * d + k];
              gz[i * d + k] += coef * diff;
              gz[j * d + k] -= coef * diff;
            }
          }
        }
      });
}

Var gram(Var z) {
  need_rank(z.value(), 2, "gram");
  return tape_of(z).record(
      "gram", {z},
      [](Inputs in) {
        const Tensor& Z = *in[0];
        const std::size_t n = Z.dim(0), d = Z.dim(1);
        Tensor G(Shape{n, n});
        for (std::size_t i = 0; i < n; ++i) {
          for (std::size_t j = i; j < n; ++j) {
            double s = 0.0;
            for (std::size_t k = 0; k < d; ++k) s += Z[i * d + k] * Z[j * d + k];
            G[i * n + j] = G[j * n + i] = s;
          }
        }
        return G;
      },
      [](Inputs in, const Tensor&, const Tensor& g, InputGrads gr) {
        if (!gr[0]) return;
        const Tensor& Z = *in[0];
        const std::size_t n = Z.dim(0), d = Z.dim(1);
        Tensor& gz = *gr[0];
        for (std::size_t i = 0; i < n; ++i) {
          for (std::size_t j = 0; j < n; ++j) {
            const double coef = g[i * n + j] + g[j * n + i];
            for (std::size_t k = 0; k < d; ++k) gz[i * d + k] += coef * Z[j * d + k];
          }
        }
      });
}

Var inverse_gromov(Var c) {
  need_square(c.value(), "inverse_gromov");
  return tape_of(c).record(
      "inverse_gromov", {c},
      [](Inputs in) {
        const Tensor& C = *in[0];
        const std::size_t n = C.dim(0);
        Tensor D(Shape{n, n});
        for (std::size_t i = 0; i < n; ++i) {
          for (std::size_t j = i + 1; j < n; ++j) {
            D[i * n + j] = D[j * n + i] = C[i * n + i] + C[j * n + j] - 2.0 * C[i * n + j];
          }
        }
        return D;
      },
      [](Inputs in, const Tensor&, const Tensor& g, InputGrads gr) {
        if (!gr[0]) return;
        const std::size_t n = in[0]->dim(0);
        Tensor& gc = *gr[0];
        for (std::size_t i = 0; i < n; ++i) {
          for (std::size_t j = i + 1; j < n; ++j) {
            const double gij = g[i * n + j] + g[j * n + i];
            gc[i * n + i] += gij;
            gc[j * n + j] += gij;
            gc[i * n + j] -= 2.0 * gij;
          }
        }
      });
}

Var upper_triangle(Var m) {
  need_square(m.value(), "upper_triangle");
  const std::size_t n = m.value().dim(0);
  if (n < 2) throw InvalidArgument("upper_triangle: need at least 2 rows");
  return tape_of(m).record(
      "upper_triangle", {m},
      [n](Inputs in) {
        Tensor y(Shape{n * (n - 1) / 2});
        std::size_t k = 0;
        for (std::size_t i = 0; i < n; ++i) {
          for (std::size_t j = i + 1; j < n; ++j) y[k++] = (*in[0])[i * n + j];
        }
        return y;
      },
      [n](Inputs, const Tensor&, const Tensor& g, InputGrads gr) {
        if (!gr[0]) return;
        std::size_t k = 0;
        for (std::size_t i = 0; i < n; ++i) {
          for (std::size_t j = i + 1; j < n; ++j) (*gr[0])[i * n + j] += g[k++];
        }
      });
}

Var pairs_to_matrix(Var v, std::size_t n) {
  if (n < 2 || v.value().shape() != Shape{n * (n - 1) / 2}) {
    throw InvalidArgument("pairs_to_matrix: expected " + std::to_string(n * (n - 1) / 2) + " pair values");
  }
  return tape_of(v).record(
      "pairs_to_matrix", {v},
      [n](Inputs in) {
        Tensor M(Shape{n, n});
        std::size_t k = 0;
        for (std::size_t i = 0; i < n; ++i) {
          for (std::size_t j = i + 1; j < n; ++j) {
            M[i * n + j] = M[j * n + i] = (*in[0])[k++];
          }
        }
        return M;
      },
      [n](Inputs, const Tensor&, const Tensor& g, InputGrads gr) {
        if (!gr[0]) return;
        std::size_t k = 0;
        for (std::size_t i = 0; i < n; ++i) {
          for (std::size_t j = i + 1; j < n; ++j) (*gr[0])[k++] += g[i * n + j] + g[j * n + i];
        }
      });
}

Var logdet_divergence(Var x, Var y) {
  need_square(x.value(), "logdet_divergence");
  same_shape(x.value(), y.value(), "logdet_divergence");
  return tape_of(x).record(
      "logdet_divergence", {x, y},
      [](Inputs in) {
        const EigenMat X = to_eigen(*in[0]);
        const EigenMat Y = to_eigen(*in[1]);
        const Spectrum sx = spectrum(X, "logdet_divergence");
        const Spectrum sy = spectrum(Y, "logdet_divergence");
        const EigenMat Yinv = apply(sy, inv_of);
        const double tr = (X.cwiseProduct(Yinv)).sum();
        const double logdet = sx.values.array().log().sum() - sy.values.array().log().sum();
        return Tensor::scalar(tr - logdet - static_cast<double>(X.rows()));
      },
      [](Inputs in, const Tensor&, const Tensor& g, InputGrads gr) {
        const EigenMat X = to_eigen(*in[0]);
        const EigenMat Y = to_eigen(*in[1]);
        const EigenMat Yinv = apply(spectrum(Y, "logdet_divergence"), inv_of);
        if (gr[0]) add_from_eigen(*gr[0], Yinv - apply(spectrum(X, "logdet_divergence"), inv_of), g[0]);
        if (gr[1]) add_from_eigen(*gr[1], Yinv - Yinv * X * Yinv, g[0]);
      });
}

Var vonneumann_divergence(Var x, Var y) {
  need_square(x.value(), "vonneumann_divergence");
  same_shape(x.value(), y.value(), "vonneumann_divergence");
  return tape_of(x).record(
      "vonneumann_divergence", {x, y},
      [](Inputs in) {
        const EigenMat X = to_eigen(*in[0]);
        const EigenMat Y = to_eigen(*in[1]);
        const EigenMat logX = apply(spectrum(X, "vonneumann_divergence"), log_of);
        const EigenMat logY = apply(spectrum(Y, "vonneumann_divergence"), log_of);
        const double v = (X * (logX - logY)).trace() - X.trace() + Y.trace();
        return Tensor::scalar(v);
      },
      [](Inputs in, const Tensor&, const Tensor& g, InputGrads gr) {
        const EigenMat X = to_eigen(*in[0]);
        const EigenMat Y = to_eigen(*in[1]);
        const Spectrum sy = spectrum(Y, "vonneumann_divergence");
        const EigenMat logY = apply(sy, log_of);
        if (gr[0]) add_from_eigen(*gr[0], apply(spectrum(X, "vonneumann_divergence"), log_of) - logY, g[0]);
        if (gr[1]) {
          // Derivative of tr(X log Y) in Y via divided differences of log.
          const Eigen::Index n = Y.rows();
          EigenMat inner = sy.vectors.transpose() * X * sy.vectors;
          for (Eigen::Index i = 0; i < n; ++i) {
            for (Eigen::Index j = 0; j < n; ++j) inner(i, j) *= log_divided_difference(sy.values(i), sy.values(j));
          }
          const EigenMat d = sy.vectors * inner * sy.vectors.transpose();
          add_from_eigen(*gr[1], EigenMat::Identity(n, n) - d, g[0]);
        }
      });
}

}  // namespace phylo::ad
