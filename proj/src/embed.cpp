#include "phylo/embed.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "phylo/error.hpp"
#include "phylo/rng.hpp"

namespace phylo::embed {

SquareMatrix Embedding::distances() const {
  const std::size_t n = labels.size();
  SquareMatrix m(labels);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < dims; ++k) {
        const double diff = at(i, k) - at(j, k);
        s += diff * diff;
      }
      m(i, j) = m(j, i) = std::sqrt(s);
    }
  }
  return m;
}

Embedding llr_embed(const DistanceMatrix& d, std::uint64_t seed) {
  const std::size_t n = d.size();
  if (n < 2) throw InvalidArgument("llr_embed needs at least 2 points");
  Embedding e;
  e.labels = d.labels();
  e.dims = static_cast<std::size_t>(std::floor(std::log2(static_cast<double>(n))));
  e.coords.assign(n * e.dims, 0.0);
  Rng rng = Rng(seed).substream("llr");
  std::vector<std::size_t> pool(n);
  for (std::size_t i = 0; i < e.dims; ++i) {
    // Partial Fisher-Yates: the first `size` entries form a uniform subset.
    std::iota(pool.begin(), pool.end(), 0);
    const std::size_t size = std::size_t{1} << i;
    for (std::size_t k = 0; k < size; ++k) std::swap(pool[k], pool[k + rng.index(n - k)]);
    std::vector<std::size_t> subset(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(size));
    std::sort(subset.begin(), subset.end());
    for (std::size_t x = 0; x < n; ++x) {
      double best = std::numeric_limits<double>::infinity();
      for (std::size_t a : subset) best = std::min(best, d(x, a));
      e.coords[x * e.dims + i] = best;
    }
    e.subsets.push_back(std::move(subset));
  }
  return e;
}

DistortionReport measure_distortion(const SquareMatrix& d1, const SquareMatrix& d2) {
  if (d1.labels() != d2.labels()) throw InvalidArgument("measure_distortion: label sets differ");
  const std::size_t n = d1.size();
  if (n < 2) throw InvalidArgument("measure_distortion: need at least 2 points");
  DistortionReport r;
  double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double a = d1(i, j);
      if (!(a > 0.0)) {
        throw InvalidArgument("measure_distortion: zero reference distance between " + d1.labels()[i] + " and " +
                              d1.labels()[j]);
      }
      const double ratio = d2(i, j) / a;
      if (ratio < lo) {
        lo = ratio;
        r.contract_a = d1.labels()[i];
        r.contract_b = d1.labels()[j];
      }
      if (ratio > hi) {
        hi = ratio;
        r.expand_a = d1.labels()[i];
        r.expand_b = d1.labels()[j];
      }
    }
  }
  r.r = lo;
  if (lo <= 0.0) {
    r.injective = false;
    r.rho = std::numeric_limits<double>::infinity();
  } else {
    r.rho = hi / lo;
  }
  return r;
}

MetricAudit audit_metric(const SquareMatrix& d, const AuditOptions& opts) {
  const std::size_t n = d.size();
  const double tol = opts.tolerance;
  MetricAudit a;
  for (std::size_t i = 0; i < n; ++i) {
    if (std::abs(d(i, i)) > tol) a.zero_diagonal = false;
    for (std::size_t j = 0; j < n; ++j) {
      if (!(d(i, j) >= -tol)) a.nonnegative = false;
      if (!(std::abs(d(i, j) - d(j, i)) <= tol)) a.is_symmetric = false;
    }
  }
  a.is_dissimilarity = a.zero_diagonal && a.nonnegative && a.is_symmetric;

  struct Worst {
    double margin = 0.0;
    std::size_t i = 0, j = 0, k = 0;
    bool any = false;
  };
  auto consider = [&](Worst& w, std::size_t& count, std::size_t i, std::size_t j, std::size_t k) {
    // d(i,k) <= d(i,j) + d(j,k)
    const double m = d(i, k) - d(i, j) - d(j, k);
    if (m > tol) {
      ++count;
      if (!w.any || m > w.margin) w = {m, i, j, k, true};
    }
  };

  Worst worst;
  std::size_t count = 0;
  a.exhaustive = opts.force_exhaustive || n <= opts.exhaustive_limit;
  if (a.exhaustive) {
    std::vector<Worst> per_row(n);
    std::vector<std::size_t> per_count(n, 0);
    const auto rows = static_cast<std::ptrdiff_t>(n);
#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t ii = 0; ii < rows; ++ii) {
      const auto i = static_cast<std::size_t>(ii);
      for (std::size_t k = i + 1; k < n; ++k) {
        for (std::size_t j = 0; j < n; ++j) {
          if (j != i && j != k) consider(per_row[i], per_count[i], i, j, k);
        }
      }
    }
    // Deterministic merge: row order, strict improvement.
    for (std::size_t i = 0; i < n; ++i) {
      count += per_count[i];
      if (per_row[i].any && (!worst.any || per_row[i].margin > worst.margin)) worst = per_row[i];
    }
    a.triples_checked = n < 3 ? 0 : n * (n - 1) / 2 * (n - 2);
  } else {
    Rng rng = Rng(opts.seed).substream("audit");
    for (std::size_t s = 0; s < opts.samples; ++s) {
      const std::size_t i = rng.index(n);
      std::size_t j = rng.index(n - 1);
      if (j >= i) ++j;
      std::size_t k = rng.index(n - 2);
      if (k >= std::min(i, j)) ++k;
      if (k >= std::max(i, j)) ++k;
      consider(worst, count, std::min(i, k), j, std::max(i, k));
    }
    a.triples_checked = opts.samples;
  }
  a.triangle_violations = count;
  if (worst.any) {
    a.worst_margin = worst.margin;
    a.worst_i = d.labels()[worst.i];
    a.worst_j = d.labels()[worst.j];
    a.worst_k = d.labels()[worst.k];
  }
  a.is_metric = a.is_dissimilarity && count == 0;
  return a;
}

}  // namespace phylo::embed
