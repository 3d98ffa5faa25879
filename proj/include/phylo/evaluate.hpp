#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "phylo/alignment.hpp"
#include "phylo/distance.hpp"
#include "phylo/network.hpp"
#include "phylo/nj.hpp"
#include "phylo/tree.hpp"

namespace phylo::eval {

enum class MethodKind { Truth, Hamming, JC, K2P, Network };

/// A way of turning an instance into a distance matrix.
struct Method {
  MethodKind kind = MethodKind::JC;
  std::string name;                      ///< column label in reports
  const net::Network* network = nullptr;  ///< MethodKind::Network only; not owned

  static Method truth() { return {MethodKind::Truth, "truth", nullptr}; }
  static Method analytic(dist::DistanceKind k);
  static Method learned(const net::Network& n, std::string name) { return {MethodKind::Network, std::move(name), &n}; }
};

/// Parses "truth", "hamming", "jc" or "k2p".
Method parse_method(const std::string& s);

struct Instance {
  std::string name;
  PhyloTree tree;
  Alignment alignment;
};

struct InstanceResult {
  std::string instance;
  std::string method;
  double rf = 0.0;
};

struct MethodSummary {
  std::string method;
  std::size_t count = 0;
  double mean = 0.0;
  double median = 0.0;
  double q25 = 0.0;
  double q75 = 0.0;
};

struct Evaluation {
  std::vector<InstanceResult> instances;  ///< instance-major, methods in the given order
  std::vector<MethodSummary> summary;     ///< one row per method
};

/// Distances for one instance under one method (labels in alignment order).
DistanceMatrix method_distances(const Method& m, const Instance& inst, const dist::SaturationPolicy& policy);

/// RF between NJ/BIONJ on each method's distances and the true tree, for every
/// (instance, method); parallel over instances, results in input order.
/// `collapse_zero_length` drops zero-length internal edges before comparing splits.
Evaluation evaluate_pipeline(const std::vector<Method>& methods, const std::vector<Instance>& instances,
                             nj::Variant builder = nj::Variant::NJ, const dist::SaturationPolicy& policy = {},
                             bool collapse_zero_length = false);

/// Linear-interpolation quantile of sorted data (R type 7).
double quantile_sorted(const std::vector<double>& sorted, double q);
MethodSummary summarize(const std::string& method, std::vector<double> values);

void write_summary_csv(std::ostream& out, const std::vector<MethodSummary>& rows);
void write_instances_csv(std::ostream& out, const std::vector<InstanceResult>& rows);

}  // namespace phylo::eval
