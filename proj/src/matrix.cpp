#include "phylo/matrix.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "phylo/error.hpp"
#include "phylo/io_util.hpp"

namespace phylo {

SquareMatrix::SquareMatrix(std::vector<std::string> labels, double fill)
    : labels_(std::move(labels)), values_(labels_.size() * labels_.size(), fill) {}

SquareMatrix::SquareMatrix(std::vector<std::string> labels, std::vector<double> values)
    : labels_(std::move(labels)), values_(std::move(values)) {
  if (values_.size() != labels_.size() * labels_.size()) {
    throw InvalidArgument("matrix values do not match label count");
  }
}

std::size_t SquareMatrix::index_of(const std::string& label) const {
  const auto it = std::find(labels_.begin(), labels_.end(), label);
  if (it == labels_.end()) throw InvalidArgument("unknown label '" + label + "'");
  return static_cast<std::size_t>(it - labels_.begin());
}

SquareMatrix SquareMatrix::permuted(std::span<const std::size_t> order) const {
  const std::size_t n = size();
  if (order.size() != n) throw InvalidArgument("permutation length mismatch");
  std::vector<std::string> labels(n);
  std::vector<double> values(n * n);
  for (std::size_t a = 0; a < n; ++a) {
    labels[a] = labels_[order[a]];
    for (std::size_t b = 0; b < n; ++b) values[a * n + b] = (*this)(order[a], order[b]);
  }
  return SquareMatrix(std::move(labels), std::move(values));
}

DistanceMatrix::DistanceMatrix(SquareMatrix m) : SquareMatrix(std::move(m)) {
  const std::size_t n = size();
  for (std::size_t i = 0; i < n; ++i) {
    if ((*this)(i, i) != 0.0) throw InvalidArgument("distance matrix diagonal must be zero");
    for (std::size_t j = i + 1; j < n; ++j) {
      const double v = (*this)(i, j);
      if (!std::isfinite(v)) {
        throw InvalidArgument("non-finite distance between " + labels()[i] + " and " + labels()[j]);
      }
      if (v < 0.0) throw InvalidArgument("negative distance between " + labels()[i] + " and " + labels()[j]);
      if (v != (*this)(j, i)) throw InvalidArgument("distance matrix is not symmetric");
    }
  }
}

CovarianceMatrix::CovarianceMatrix(SquareMatrix m) : SquareMatrix(std::move(m)) {
  const std::size_t n = size();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i; j < n; ++j) {
      if (!std::isfinite((*this)(i, j))) throw InvalidArgument("non-finite covariance");
      if ((*this)(i, j) != (*this)(j, i)) throw InvalidArgument("covariance matrix is not symmetric");
    }
  }
}

namespace {

struct Adjacency {
  std::vector<std::vector<std::pair<int, double>>> edges;
};

Adjacency build_adjacency(const PhyloTree& t) {
  Adjacency adj;
  adj.edges.resize(t.node_count());
  for (int id = 0; id < static_cast<int>(t.node_count()); ++id) {
    const TreeNode& n = t.node(id);
    if (n.parent >= 0) {
      adj.edges[id].emplace_back(n.parent, n.length);
      adj.edges[n.parent].emplace_back(id, n.length);
    }
  }
  return adj;
}

// Distances from `source` to every node, by tree traversal.
void distances_from(const Adjacency& adj, int source, std::vector<double>& dist, std::vector<int>& stack) {
  std::fill(dist.begin(), dist.end(), -1.0);
  dist[source] = 0.0;
  stack.assign(1, source);
  while (!stack.empty()) {
    const int u = stack.back();
    stack.pop_back();
    for (const auto& [v, w] : adj.edges[u]) {
      if (dist[v] < 0.0) {
        dist[v] = dist[u] + w;
        stack.push_back(v);
      }
    }
  }
}

// Row i fills (i, j) and (j, i) for j > i only, so rows never touch the same
// cell and the result is exactly symmetric.
void fill_row(const PhyloTree& t, const Adjacency& adj, std::size_t i, SquareMatrix& m,
              std::vector<double>& dist, std::vector<int>& stack) {
  const auto& leaves = t.leaves();
  distances_from(adj, leaves[i], dist, stack);
  for (std::size_t j = i + 1; j < leaves.size(); ++j) {
    m(i, j) = dist[leaves[j]];
    m(j, i) = dist[leaves[j]];
  }
}

}  // namespace

DistanceMatrix patristic_matrix(const PhyloTree& tree) {
  const Adjacency adj = build_adjacency(tree);
  const std::size_t n = tree.leaf_count();
  SquareMatrix m(tree.leaf_labels());
#pragma omp parallel
  {
    std::vector<double> dist(tree.node_count());
    std::vector<int> stack;
#pragma omp for schedule(dynamic, 4)
    for (std::size_t i = 0; i < n; ++i) fill_row(tree, adj, i, m, dist, stack);
  }
  return DistanceMatrix(std::move(m));
}

namespace serial {
DistanceMatrix patristic_matrix(const PhyloTree& tree) {
  const Adjacency adj = build_adjacency(tree);
  SquareMatrix m(tree.leaf_labels());
  std::vector<double> dist(tree.node_count());
  std::vector<int> stack;
  for (std::size_t i = 0; i < tree.leaf_count(); ++i) fill_row(tree, adj, i, m, dist, stack);
  return DistanceMatrix(std::move(m));
}
}  // namespace serial

CovarianceMatrix covariance_matrix(const PhyloTree& tree) {
  if (!tree.rooted()) throw InvalidArgument("covariance_matrix requires a rooted tree");
  const std::vector<double> depth = tree.depths();
  const auto& leaves = tree.leaves();
  const std::size_t n = leaves.size();

  // Ancestor chains, root last.
  std::vector<std::vector<int>> chain(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (int v = leaves[i]; v >= 0; v = tree.node(v).parent) chain[i].push_back(v);
  }
  SquareMatrix m(tree.leaf_labels());
  for (std::size_t i = 0; i < n; ++i) {
    m(i, i) = depth[leaves[i]];
    for (std::size_t j = i + 1; j < n; ++j) {
      const auto& a = chain[i];
      const auto& b = chain[j];
      std::size_t k = 0;
      while (k < a.size() && k < b.size() && a[a.size() - 1 - k] == b[b.size() - 1 - k]) ++k;
      const double c = depth[a[a.size() - k]];
      m(i, j) = c;
      m(j, i) = c;
    }
  }
  return CovarianceMatrix(std::move(m));
}

DistanceMatrix inverse_gromov(const SquareMatrix& c) {
  const std::size_t n = c.size();
  SquareMatrix d(c.labels());
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      if (c(i, j) != c(j, i)) throw InvalidArgument("inverse_gromov: input is not symmetric");
      double v = c(i, i) + c(j, j) - 2.0 * c(i, j);
      if (v < -1e-9) {
        throw NumericError("inverse_gromov: negative squared distance between " + c.labels()[i] +
                           " and " + c.labels()[j] + " (input not PSD)");
      }
      if (v < 0.0) v = 0.0;
      d(i, j) = v;
      d(j, i) = v;
    }
  }
  return DistanceMatrix(std::move(d));
}

double diameter(const PhyloTree& tree) {
  const DistanceMatrix d = patristic_matrix(tree);
  double best = 0.0;
  for (double v : d.values()) best = std::max(best, v);
  return best;
}

void write_tsv(std::ostream& out, const SquareMatrix& m) {
  const std::size_t n = m.size();
  for (const auto& l : m.labels()) out << '\t' << l;
  out << '\n';
  char buf[64];
  for (std::size_t i = 0; i < n; ++i) {
    out << m.labels()[i];
    for (std::size_t j = 0; j < n; ++j) {
      const auto r = std::to_chars(buf, buf + sizeof buf, m(i, j));
      out << '\t';
      out.write(buf, r.ptr - buf);
    }
    out << '\n';
  }
}

namespace {
std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  for (;;) {
    const std::size_t tab = line.find('\t', start);
    fields.push_back(line.substr(start, tab == std::string::npos ? std::string::npos : tab - start));
    if (tab == std::string::npos) break;
    start = tab + 1;
  }
  if (!fields.empty() && !fields.back().empty() && fields.back().back() == '\r') fields.back().pop_back();
  return fields;
}
}  // namespace

SquareMatrix read_tsv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw ParseError("tsv: empty input");
  std::vector<std::string> header = split_tabs(line);
  if (header.empty() || !header.front().empty()) throw ParseError("tsv: header must start with a tab");
  header.erase(header.begin());
  const std::size_t n = header.size();
  SquareMatrix m(header);
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::getline(in, line)) throw ParseError("tsv: expected " + std::to_string(n) + " rows");
    const auto fields = split_tabs(line);
    if (fields.size() != n + 1) throw ParseError("tsv: row " + std::to_string(i + 1) + " has wrong width");
    if (fields[0] != header[i]) throw ParseError("tsv: row label '" + fields[0] + "' does not match header");
    for (std::size_t j = 0; j < n; ++j) {
      const std::string& f = fields[j + 1];
      double v = 0.0;
      const auto r = std::from_chars(f.data(), f.data() + f.size(), v);
      if (r.ec != std::errc{} || r.ptr != f.data() + f.size()) {
        throw ParseError("tsv: bad number '" + f + "' in row " + std::to_string(i + 1));
      }
      m(i, j) = v;
    }
  }
  return m;
}

void write_tsv_file(const std::filesystem::path& path, const SquareMatrix& m) {
  std::ostringstream buf;
  write_tsv(buf, m);
  write_file_atomic(path, buf.str());
}

SquareMatrix read_tsv_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  return read_tsv(in);
}

}  // namespace phylo
