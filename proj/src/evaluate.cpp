#include "phylo/evaluate.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <ostream>

#include "phylo/error.hpp"
#include "phylo/matrix.hpp"
#include "phylo/splits.hpp"

namespace phylo::eval {

Method Method::analytic(dist::DistanceKind k) {
  switch (k) {
    case dist::DistanceKind::Hamming: return {MethodKind::Hamming, "hamming", nullptr};
    case dist::DistanceKind::JC: return {MethodKind::JC, "jc", nullptr};
    case dist::DistanceKind::K2P: return {MethodKind::K2P, "k2p", nullptr};
  }
  return {};
}

Method parse_method(const std::string& s) {
  if (s == "truth") return Method::truth();
  return Method::analytic(dist::parse_distance_kind(s));
}

DistanceMatrix method_distances(const Method& m, const Instance& inst, const dist::SaturationPolicy& policy) {
  switch (m.kind) {
    case MethodKind::Truth: return patristic_matrix(inst.tree);
    case MethodKind::Hamming: return dist::distance_matrix(inst.alignment, dist::DistanceKind::Hamming, policy);
    case MethodKind::JC: return dist::distance_matrix(inst.alignment, dist::DistanceKind::JC, policy);
    case MethodKind::K2P: return dist::distance_matrix(inst.alignment, dist::DistanceKind::K2P, policy);
    case MethodKind::Network:
      if (!m.network) throw InvalidArgument("network method '" + m.name + "' has no network");
      return m.network->predict(inst.alignment);
  }
  throw InvalidArgument("unhandled method");
}

double quantile_sorted(const std::vector<double>& sorted, double q) {
  if (sorted.empty()) throw InvalidArgument("quantile of an empty sample");
  const double h = (static_cast<double>(sorted.size()) - 1.0) * q;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

MethodSummary summarize(const std::string& method, std::vector<double> values) {
  MethodSummary s;
  s.method = method;
  s.count = values.size();
  if (values.empty()) return s;
  s.mean = pairwise_sum(values.data(), values.size()) / static_cast<double>(values.size());
  std::sort(values.begin(), values.end());
  s.median = quantile_sorted(values, 0.5);
  s.q25 = quantile_sorted(values, 0.25);
  s.q75 = quantile_sorted(values, 0.75);
  return s;
}

Evaluation evaluate_pipeline(const std::vector<Method>& methods, const std::vector<Instance>& instances,
                             nj::Variant builder, const dist::SaturationPolicy& policy, bool collapse_zero_length) {
  const std::size_t nm = methods.size(), ni = instances.size();
  std::vector<double> rf(ni * nm, 0.0);
  std::vector<std::exception_ptr> errors(ni);
  const auto total = static_cast<std::ptrdiff_t>(ni);
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t i = 0; i < total; ++i) {
    try {
      for (std::size_t m = 0; m < nm; ++m) {
        const PhyloTree est = nj::build_tree(method_distances(methods[m], instances[i], policy), builder);
        rf[i * nm + m] = rf_distance(est, instances[i].tree, collapse_zero_length);
      }
    } catch (...) {
      errors[i] = std::current_exception();
    }
  }
  for (std::size_t i = 0; i < ni; ++i) {
    if (!errors[i]) continue;
    const std::string where = "instance " + instances[i].name + ": ";
    try {
      std::rethrow_exception(errors[i]);
    } catch (const NumericError& e) {
      throw NumericError(where + e.what());
    } catch (const InvalidArgument& e) {
      throw InvalidArgument(where + e.what());
    } catch (const IoError& e) {
      throw IoError(where + e.what());
    }
  }
  Evaluation ev;
  for (std::size_t i = 0; i < ni; ++i) {
    for (std::size_t m = 0; m < nm; ++m) ev.instances.push_back({instances[i].name, methods[m].name, rf[i * nm + m]});
  }
  for (std::size_t m = 0; m < nm; ++m) {
    std::vector<double> col(ni);
    for (std::size_t i = 0; i < ni; ++i) col[i] = rf[i * nm + m];
    ev.summary.push_back(summarize(methods[m].name, std::move(col)));
  }
  return ev;
}

void write_summary_csv(std::ostream& out, const std::vector<MethodSummary>& rows) {
  out << "method,count,mean_rf,median_rf,q25_rf,q75_rf\n";
  out.precision(17);
  for (const auto& r : rows) {
    out << r.method << "," << r.count << "," << r.mean << "," << r.median << "," << r.q25 << "," << r.q75 << "\n";
  }
}

void write_instances_csv(std::ostream& out, const std::vector<InstanceResult>& rows) {
  out << "instance,method,rf\n";
  out.precision(17);
  for (const auto& r : rows) out << r.instance << "," << r.method << "," << r.rf << "\n";
}

}  // namespace phylo::eval
