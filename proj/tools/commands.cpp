#include "commands.hpp"

#include <omp.h>

#include <CLI11.hpp>
#include <algorithm>
#include <cmath>
#include <deque>
#include <exception>
#include <fstream>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>

#include "phylo/distance.hpp"
#include "phylo/embed.hpp"
#include "phylo/error.hpp"
#include "phylo/evaluate.hpp"
#include "phylo/io_util.hpp"
#include "phylo/newick.hpp"
#include "phylo/nj.hpp"
#include "phylo/reference_nets.hpp"
#include "phylo/seqio.hpp"
#include "phylo/simulate.hpp"
#include "phylo/train.hpp"
#include "phylo/weights_io.hpp"

namespace phylo::cli {

namespace fs = std::filesystem;

namespace {

const std::vector<KeySpec> kTreeKeys = {
    {"n", "20", "taxa per tree"},
    {"lambda", "1", "birth rate of the birth-death tree prior"},
    {"mu", "0.5", "death rate of the birth-death tree prior (< lambda)"},
};

const std::vector<KeySpec> kModelKeys = {
    {"model", "jc", "substitution model: jc, k2p or hky"},
    {"kappa", "2", "transition/transversion ratio (k2p, hky)"},
    {"gamma", "0", "shape of Gamma site-rate variation; 0 disables it"},
    {"freqs", "0.25,0.25,0.25,0.25", "stationary A,C,G,T frequencies (hky)"},
};

const std::vector<KeySpec> kSaturationKeys = {
    {"saturation", "ceiling", "saturated corrected distances: ceiling (report the cap) or error (abort)"},
    {"ceiling", "5", "value reported for saturated distances"},
};

const KeySpec kThreads{"threads", "0", "worker threads; 0 uses the OpenMP default"};

std::vector<KeySpec> join(std::initializer_list<std::vector<KeySpec>> parts) {
  std::vector<KeySpec> out;
  for (const auto& p : parts) out.insert(out.end(), p.begin(), p.end());
  return out;
}

std::vector<KeySpec> with_default(std::vector<KeySpec> keys, const std::string& key, const std::string& value) {
  for (KeySpec& k : keys)
    if (k.key == key) k.default_value = value;
  return keys;
}

std::vector<CommandSpec> build_commands() {
  std::vector<CommandSpec> c;
  c.push_back({"simulate", "Simulate birth-death trees and alignments (one .nwk and one alignment file per replicate)",
               join({{{"out", "sim", "output directory"},
                      {"replicates", "10", "number of tree/alignment pairs"},
                      {"L", "500", "alignment length (500 for training sets, 1000 for test sets)"}},
                     kTreeKeys,
                     kModelKeys,
                     {{"format", "fasta", "alignment format: fasta or phylip"},
                      {"seed", "1", "top-level seed"},
                      kThreads}})});
  c.push_back({"infer", "Distance matrix and NJ/BIONJ tree for each alignment",
               join({{{"input", "", "alignment file, or a directory of .fasta/.fa/.phy/.phylip files"},
                      {"out", "infer", "output directory (<name>.nwk per alignment)"},
                      {"method", "jc", "hamming, jc, k2p, or network (uses checkpoint)"},
                      {"checkpoint", "", "weights file for method=network"},
                      {"builder", "nj", "tree builder: nj or bionj"}},
                     kSaturationKeys,
                     {{"matrices", "false", "also write <name>.tsv distance matrices"}, kThreads}})});
  c.push_back({"train", "Train a distance network on simulated data; writes model.phyw and history.csv",
               join({{{"out", "train", "output directory"},
                      {"architecture", "SitesAttentionP",
                       "SitesInvariantS, FullInvariantS, SitesAttentionP, HybridAttentionSP, FullAttentionS, "
                       "FullAttentionSP, or ReferenceHamming/ReferenceJC/ReferenceK2P (fixed weights, no training)"},
                      {"head", "auto", "output head: euclidean, inner, pair, or auto (pair for P networks, euclidean "
                                       "otherwise)"},
                      {"channels", "64", "hidden channels"},
                      {"heads", "4", "attention heads (must divide channels)"},
                      {"embedding", "0", "S-network embedding width; 0 picks max(8, 4*ceil(log2 n))"},
                      {"scalar_hidden", "32", "hidden width of the pair scalar map"}},
                     // Desk-scale sizes: one 8-taxon, 200-site example trains in seconds.
                     with_default(kTreeKeys, "n", "8"),
                     {{"val_n", "0", "taxa per validation tree; 0 uses n"},
                      {"L", "200", "alignment length"}},
                     kModelKeys,
                     {{"train_size", "100", "training alignments"},
                      {"val_size", "50", "validation alignments"},
                      {"epochs", "100", "last epoch to run (counted across resumes)"},
                      {"patience", "10", "epochs without validation improvement before stopping"},
                      {"batch", "4", "alignments per optimizer step"},
                      {"lr", "0.01", "initial Adam learning rate (cosine decay)"},
                      {"horizon", "0", "cosine decay length in steps; 0 spans all epochs"},
                      {"loss", "mae", "mae, mse, l21, logdet or vonneumann"},
                      {"loss_gamma", "1", "divergence losses compare exp(-loss_gamma * D)"},
                      {"builder", "nj", "tree builder for validation RF: nj or bionj"},
                      {"resume", "", "checkpoint to continue from; epoch numbering continues"},
                      {"seed", "1", "top-level seed"},
                      kThreads}})});
  c.push_back({"eval", "RF distance between inferred and true trees for a directory of <name>.nwk + alignment pairs",
               join({{{"input", "", "directory with <name>.nwk and matching <name>.fasta/.phy files"},
                      {"out", "eval", "output directory (summary.csv, instances.csv)"},
                      {"methods", "jc", "comma list of truth, hamming, jc, k2p, network"},
                      {"checkpoint", "", "weights file for the network method"},
                      {"builder", "nj", "tree builder: nj or bionj"},
                      {"collapse", "false", "ignore zero-length internal edges when comparing splits"}},
                     kSaturationKeys,
                     {kThreads}})});
  c.push_back({"audit", "Check a TSV distance matrix for metric properties",
               {{"input", "", "TSV distance matrix"},
                {"out", "audit", "output directory (audit.txt)"},
                {"exhaustive_limit", "64", "check every triple up to this many taxa"},
                {"exhaustive", "false", "check every triple regardless of size"},
                {"samples", "1000000", "random triples above the limit"},
                {"tolerance", "1e-9", "slack allowed in each check"},
                {"seed", "1", "seed for sampled triples"},
                kThreads}});
  c.push_back({"embed", "Random-subset Euclidean embedding of a TSV distance matrix and its distortion",
               {{"input", "", "TSV distance matrix with positive off-diagonal entries"},
                {"out", "embed", "output directory (embedding.tsv, distortion.txt)"},
                {"seed", "1", "seed of the first embedding"},
                {"seeds", "1", "embeddings tried (seed, seed+1, ...); the least distorted is kept"},
                kThreads}});
  return c;
}

class Settings {
 public:
  explicit Settings(const Config& c) : c_(c) {}

  const std::string& str(const std::string& k) const {
    const auto it = c_.find(k);
    if (it == c_.end()) throw InvalidArgument("missing key '" + k + "'");
    return it->second;
  }

  const std::string& required(const std::string& k) const {
    const std::string& v = str(k);
    if (v.empty()) throw InvalidArgument("key '" + k + "' is required");
    return v;
  }

  double real(const std::string& k) const {
    const std::string& v = str(k);
    try {
      std::size_t used = 0;
      const double x = std::stod(v, &used);
      if (used == v.size() && std::isfinite(x)) return x;
    } catch (const std::exception&) {
    }
    throw InvalidArgument("key '" + k + "': expected a number, got '" + v + "'");
  }

  std::size_t count(const std::string& k) const {
    const std::string& v = str(k);
    try {
      std::size_t used = 0;
      if (!v.empty() && v[0] != '-') {
        const unsigned long long x = std::stoull(v, &used);
        if (used == v.size()) return static_cast<std::size_t>(x);
      }
    } catch (const std::exception&) {
    }
    throw InvalidArgument("key '" + k + "': expected a nonnegative integer, got '" + v + "'");
  }

  bool flag(const std::string& k) const {
    const std::string& v = str(k);
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw InvalidArgument("key '" + k + "': expected true or false, got '" + v + "'");
  }

  std::vector<std::string> list(const std::string& k) const {
    std::vector<std::string> out;
    std::stringstream in(str(k));
    std::string item;
    while (std::getline(in, item, ',')) {
      if (!item.empty()) out.push_back(item);
    }
    if (out.empty()) throw InvalidArgument("key '" + k + "' needs at least one entry");
    return out;
  }

 private:
  const Config& c_;
};

sim::BDParams tree_params(const Settings& s, const std::string& taxa_key = "n") {
  sim::BDParams p;
  p.lambda = s.real("lambda");
  p.mu = s.real("mu");
  p.n = static_cast<int>(s.count(taxa_key));
  p.validate();
  return p;
}

sim::SubstModel subst_model(const Settings& s) {
  sim::SubstModel m;
  switch (sim::parse_model_kind(s.str("model"))) {
    case sim::ModelKind::JC: m = sim::SubstModel::jc(); break;
    case sim::ModelKind::K2P: m = sim::SubstModel::k2p(s.real("kappa")); break;
    case sim::ModelKind::HKY: {
      const auto parts = s.list("freqs");
      if (parts.size() != 4) throw InvalidArgument("key 'freqs': expected four comma-separated frequencies");
      sim::Vec4 f{};
      for (std::size_t i = 0; i < 4; ++i) f[i] = Settings(Config{{"f", parts[i]}}).real("f");
      m = sim::SubstModel::hky(s.real("kappa"), f);
      break;
    }
  }
  const double g = s.real("gamma");
  if (g < 0.0) throw InvalidArgument("key 'gamma': must be 0 (off) or a positive shape");
  if (g > 0.0) m.gamma_shape = g;
  m.validate();
  return m;
}

dist::SaturationPolicy saturation(const Settings& s) {
  const std::string& mode = s.str("saturation");
  if (mode == "error") return dist::SaturationPolicy::error();
  if (mode != "ceiling") throw InvalidArgument("key 'saturation': expected ceiling or error, got '" + mode + "'");
  const auto p = dist::SaturationPolicy::capped(s.real("ceiling"));
  p.validate();
  return p;
}

bool is_alignment_path(const fs::path& p) {
  const std::string ext = p.extension().string();
  return ext == ".fasta" || ext == ".fa" || ext == ".fas" || ext == ".phy" || ext == ".phylip";
}

std::vector<fs::path> alignment_inputs(const fs::path& input) {
  if (!fs::exists(input)) throw IoError("input not found: " + input.string());
  if (!fs::is_directory(input)) return {input};
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(input)) {
    if (e.is_regular_file() && is_alignment_path(e.path())) out.push_back(e.path());
  }
  std::sort(out.begin(), out.end());
  if (out.empty()) throw IoError("no alignment files in " + input.string());
  return out;
}

net::Network load_network(const Settings& s) {
  return net::load_checkpoint(s.required("checkpoint")).network;
}

std::string csv_text(const std::function<void(std::ostream&)>& write) {
  std::ostringstream out;
  write(out);
  return out.str();
}

void cmd_simulate(const Settings& s, const fs::path& out, std::ostream& log) {
  const sim::BDParams tree = tree_params(s);
  const sim::SubstModel model = subst_model(s);
  const std::size_t L = s.count("L"), reps = s.count("replicates");
  if (L == 0) throw InvalidArgument("key 'L' must be positive");
  const std::string& fmt = s.str("format");
  if (fmt != "fasta" && fmt != "phylip") throw InvalidArgument("key 'format': expected fasta or phylip");
  const SeqFormat format = fmt == "fasta" ? SeqFormat::Fasta : SeqFormat::Phylip;
  const std::string ext = fmt == "fasta" ? ".fasta" : ".phy";
  const Rng root = Rng(s.count("seed")).substream("simulate");
  const std::size_t width = std::to_string(std::max<std::size_t>(reps, 1)).size();

  std::vector<std::exception_ptr> errors(reps);
  const auto total = static_cast<std::ptrdiff_t>(reps);
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t i = 0; i < total; ++i) {
    try {
      Rng r = root.substream("replicate", static_cast<std::uint64_t>(i));
      const std::uint64_t tree_seed = r.next_u64(), seq_seed = r.next_u64();
      const PhyloTree t = sim::simulate_bd_tree(tree, tree_seed);
      const Alignment a = sim::evolve_alignment(t, model, L, seq_seed);
      std::string stem = std::to_string(i + 1);
      stem = "rep" + std::string(width - std::min(width, stem.size()), '0') + stem;
      write_newick_file(out / (stem + ".nwk"), {t});
      write_alignment_file(out / (stem + ext), a, format);
    } catch (...) {
      errors[static_cast<std::size_t>(i)] = std::current_exception();
    }
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  log << "simulated " << reps << " replicates (" << tree.n << " taxa, " << L << " sites) into " << out.string()
      << "\n";
}

void cmd_infer(const Settings& s, const fs::path& out, std::ostream& log) {
  const auto inputs = alignment_inputs(s.required("input"));
  const std::string& method = s.str("method");
  std::optional<net::Network> network;
  dist::DistanceKind kind = dist::DistanceKind::JC;
  if (method == "network") {
    network.emplace(load_network(s));
  } else {
    kind = dist::parse_distance_kind(method);
  }
  const nj::Variant builder = nj::parse_variant(s.str("builder"));
  const dist::SaturationPolicy policy = saturation(s);
  const bool matrices = s.flag("matrices");

  for (const fs::path& path : inputs) {
    const Alignment a = read_alignment_file(path);
    const DistanceMatrix d = network ? network->predict(a) : dist::distance_matrix(a, kind, policy);
    bool all_zero = true;
    for (std::size_t i = 0; i < d.size() && all_zero; ++i)
      for (std::size_t j = i + 1; j < d.size(); ++j) all_zero = all_zero && d(i, j) == 0.0;
    if (all_zero) {
      throw NumericError(path.filename().string() +
                         ": degenerate all-zero distance matrix (sequences are indistinguishable); "
                         "a tree built from it would be an arbitrary star");
    }
    const PhyloTree t = nj::build_tree(d, builder);
    const std::string stem = path.stem().string();
    write_newick_file(out / (stem + ".nwk"), {t});
    if (matrices) write_tsv_file(out / (stem + ".tsv"), d);
    log << stem << ": " << a.taxa() << " taxa, " << a.length() << " sites -> " << (out / (stem + ".nwk")).string()
        << "\n";
  }
}

/// History rows of an earlier run up to `last_epoch`, header excluded.
std::vector<std::string> earlier_history(const fs::path& path, std::size_t last_epoch) {
  std::vector<std::string> rows;
  if (!fs::exists(path)) return rows;
  std::istringstream in(read_file(path));
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line)) {
    const auto comma = line.find(',');
    if (comma == std::string::npos) continue;
    try {
      if (std::stoull(line.substr(0, comma)) <= last_epoch) rows.push_back(line);
    } catch (const std::exception&) {
    }
  }
  return rows;
}

void cmd_train(const Settings& s, const fs::path& out, std::ostream& log) {
  const std::uint64_t seed = s.count("seed");
  net::NetworkSpec spec;
  spec.architecture = net::parse_architecture(s.str("architecture"));
  const std::string& head = s.str("head");
  spec.head = head == "auto" ? net::Head::PairScalar : net::parse_head(head);
  spec.channels = s.count("channels");
  spec.heads = s.count("heads");
  spec.embedding = s.count("embedding");
  spec.scalar_hidden = s.count("scalar_hidden");
  spec.taxa = s.count("n");
  spec.sites = s.count("L");
  const fs::path weights = out / "model.phyw", history = out / "history.csv";

  if (net::is_reference(spec.architecture)) {
    const net::Network net(spec, 0);
    net::save_checkpoint(weights, net);
    write_file_atomic(history, csv_text([](std::ostream& o) { train::write_history_csv(o, {}); }));
    log << "wrote fixed-weight " << net::to_string(spec.architecture) << " for " << spec.sites << " sites ("
        << net.parameter_count() << " parameters) to " << weights.string() << "\n";
    return;
  }

  train::DataConfig data;
  data.tree = tree_params(s);
  data.model = subst_model(s);
  data.sites = spec.sites;
  data.seed = seed;
  train::DataConfig val_data = data;
  if (s.count("val_n") != 0) val_data.tree = tree_params(s, "val_n");

  train::TrainConfig cfg;
  cfg.adam.learning_rate = s.real("lr");
  cfg.horizon = s.count("horizon");
  cfg.max_epochs = s.count("epochs");
  cfg.patience = s.count("patience");
  cfg.batch_size = s.count("batch");
  cfg.seed = seed;
  cfg.loss.kind = train::parse_loss_kind(s.str("loss"));
  cfg.loss.gamma = s.real("loss_gamma");
  cfg.validation_builder = nj::parse_variant(s.str("builder"));
  cfg.validate();

  std::optional<net::Network> net;
  std::size_t start_epoch = 0;
  std::vector<std::string> rows;
  if (!s.str("resume").empty()) {
    net::Checkpoint cp = net::load_checkpoint(s.str("resume"));
    start_epoch = cp.epoch;
    net.emplace(std::move(cp.network));
    rows = earlier_history(fs::path(s.str("resume")).parent_path() / "history.csv", start_epoch);
    log << "resuming " << net::to_string(net->spec().architecture) << " after epoch " << start_epoch << "\n";
  } else {
    net.emplace(spec, Rng(seed).substream("network").next_u64());
  }
  log << net->parameter_count() << " parameters\n";

  const auto train_set = train::simulate_examples(data, "train", s.count("train_size"));
  const auto val_set = train::simulate_examples(val_data, "validation", s.count("val_size"));
  const train::TrainResult result =
      train::fit(*net, train_set, val_set, cfg, start_epoch, [&](const train::EpochRecord& r) {
        log << "epoch " << r.epoch << " loss " << r.train_loss << " val_rf " << r.validation_rf << " lr "
            << r.learning_rate << "\n";
      });
  const std::size_t last = start_epoch + result.history.size();
  net::save_checkpoint(weights, *net, last);

  std::string text = csv_text([&](std::ostream& o) { train::write_history_csv(o, result.history); });
  const auto header_end = text.find('\n') + 1;
  std::string merged = text.substr(0, header_end);
  for (const auto& r : rows) merged += r + "\n";
  merged += text.substr(header_end);
  write_file_atomic(history, merged);
  if (result.best_epoch != 0) {
    log << "best epoch " << result.best_epoch << " (validation RF " << result.best_validation_rf << ")"
        << (result.stopped_early ? ", stopped early" : "") << "\n";
  }
}

void cmd_eval(const Settings& s, const fs::path& out, std::ostream& log) {
  const fs::path dir = s.required("input");
  if (!fs::is_directory(dir)) throw IoError("input is not a directory: " + dir.string());
  std::vector<fs::path> trees;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ".nwk") trees.push_back(e.path());
  }
  std::sort(trees.begin(), trees.end());
  if (trees.empty()) throw IoError("no .nwk files in " + dir.string());

  std::vector<eval::Instance> instances;
  for (const fs::path& tp : trees) {
    const std::string stem = tp.stem().string();
    std::optional<fs::path> ap;
    for (const char* ext : {".fasta", ".fa", ".fas", ".phy", ".phylip"}) {
      if (fs::exists(dir / (stem + ext))) {
        ap = dir / (stem + ext);
        break;
      }
    }
    if (!ap) throw IoError("no alignment next to " + tp.string());
    auto parsed = read_newick_file(tp);
    if (parsed.size() != 1) throw IoError(tp.string() + ": expected exactly one tree");
    Alignment a = read_alignment_file(*ap);
    auto tl = parsed[0].leaf_labels();
    auto al = a.labels();
    std::sort(tl.begin(), tl.end());
    std::sort(al.begin(), al.end());
    if (tl != al) throw IoError(stem + ": tree and alignment name different taxa");
    instances.push_back({stem, std::move(parsed[0]), std::move(a)});
  }

  std::optional<net::Network> network;
  std::vector<eval::Method> methods;
  for (const std::string& m : s.list("methods")) {
    if (m == "network") {
      if (!network) network.emplace(load_network(s));
      methods.push_back(eval::Method::learned(*network, "network"));
    } else {
      methods.push_back(eval::parse_method(m));
    }
  }
  const eval::Evaluation ev = eval::evaluate_pipeline(methods, instances, nj::parse_variant(s.str("builder")),
                                                      saturation(s), s.flag("collapse"));
  write_file_atomic(out / "summary.csv", csv_text([&](std::ostream& o) { eval::write_summary_csv(o, ev.summary); }));
  write_file_atomic(out / "instances.csv",
                    csv_text([&](std::ostream& o) { eval::write_instances_csv(o, ev.instances); }));
  eval::write_summary_csv(log, ev.summary);
}

void cmd_audit(const Settings& s, const fs::path& out, std::ostream& log) {
  const SquareMatrix m = read_tsv_file(s.required("input"));
  embed::AuditOptions o;
  o.exhaustive_limit = s.count("exhaustive_limit");
  o.force_exhaustive = s.flag("exhaustive");
  o.samples = s.count("samples");
  o.tolerance = s.real("tolerance");
  o.seed = s.count("seed");
  const embed::MetricAudit a = embed::audit_metric(m, o);
  std::ostringstream text;
  text << "taxa=" << m.size() << "\n"
       << "is_metric=" << (a.is_metric ? "true" : "false") << "\n"
       << "is_dissimilarity=" << (a.is_dissimilarity ? "true" : "false") << "\n"
       << "is_symmetric=" << (a.is_symmetric ? "true" : "false") << "\n"
       << "zero_diagonal=" << (a.zero_diagonal ? "true" : "false") << "\n"
       << "nonnegative=" << (a.nonnegative ? "true" : "false") << "\n"
       << "triangle_violations=" << a.triangle_violations << "\n"
       << "triples_checked=" << a.triples_checked << "\n"
       << "exhaustive=" << (a.exhaustive ? "true" : "false") << "\n"
       << "worst_margin=" << a.worst_margin << "\n";
  if (a.triangle_violations > 0) {
    text << "worst_triple=" << a.worst_i << "," << a.worst_j << "," << a.worst_k << "\n";
  }
  write_file_atomic(out / "audit.txt", text.str());
  log << text.str();
}

void cmd_embed(const Settings& s, const fs::path& out, std::ostream& log) {
  const DistanceMatrix d(read_tsv_file(s.required("input")));
  const std::size_t seeds = s.count("seeds");
  if (seeds == 0) throw InvalidArgument("key 'seeds' must be positive");
  const std::uint64_t first = s.count("seed");
  std::optional<embed::Embedding> best;
  embed::DistortionReport best_report;
  std::uint64_t best_seed = first;
  std::size_t injective = 0;
  bool non_expansive = true;
  for (std::size_t k = 0; k < seeds; ++k) {
    embed::Embedding e = embed::llr_embed(d, first + k);
    for (std::size_t c = 0; c < e.dims; ++c)
      for (std::size_t i = 0; i < d.size(); ++i)
        for (std::size_t j = 0; j < d.size(); ++j) non_expansive = non_expansive && std::abs(e.at(i, c) - e.at(j, c)) <= d(i, j);
    const embed::DistortionReport r = embed::measure_distortion(d, e.distances());
    injective += r.injective;
    if (!best || r.rho < best_report.rho) {
      best = std::move(e);
      best_report = r;
      best_seed = first + k;
    }
  }
  std::ostringstream coords;
  coords << "label";
  for (std::size_t c = 0; c < best->dims; ++c) coords << "\tx" << c + 1;
  coords << "\n";
  coords.precision(17);
  for (std::size_t i = 0; i < best->labels.size(); ++i) {
    coords << best->labels[i];
    for (std::size_t c = 0; c < best->dims; ++c) coords << "\t" << best->at(i, c);
    coords << "\n";
  }
  write_file_atomic(out / "embedding.tsv", coords.str());
  std::ostringstream text;
  text << "points=" << d.size() << "\n"
       << "dims=" << best->dims << "\n"
       << "seed=" << best_seed << "\n"
       << "seeds_tried=" << seeds << "\n"
       << "injective_seeds=" << injective << "\n"
       << "non_expansive=" << (non_expansive ? "true" : "false") << "\n"
       << "r=" << best_report.r << "\n"
       << "distortion=" << best_report.rho << "\n"
       << "most_expanded=" << best_report.expand_a << "," << best_report.expand_b << "\n"
       << "most_contracted=" << best_report.contract_a << "," << best_report.contract_b << "\n";
  write_file_atomic(out / "distortion.txt", text.str());
  log << text.str();
}

}  // namespace

const std::vector<CommandSpec>& commands() {
  static const std::vector<CommandSpec> all = build_commands();
  return all;
}

const CommandSpec& command(const std::string& name) {
  for (const auto& c : commands()) {
    if (c.name == name) return c;
  }
  throw InvalidArgument("unknown command '" + name + "'");
}

Config parse_config(const std::string& text) {
  Config out;
  std::istringstream in(text);
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto start = line.find_first_not_of(" \t");
    if (start == std::string::npos || line[start] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw InvalidArgument("config line " + std::to_string(number) + ": expected key=value, got '" + line + "'");
    }
    auto trim = [](std::string v) {
      const auto a = v.find_first_not_of(" \t"), b = v.find_last_not_of(" \t");
      return a == std::string::npos ? std::string() : v.substr(a, b - a + 1);
    };
    out[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return out;
}

Config read_config_file(const fs::path& path) { return parse_config(read_file(path)); }

Config resolve_config(const CommandSpec& cmd, const Config& file, const Config& flags) {
  Config cfg;
  for (const auto& k : cmd.keys) cfg[k.key] = k.default_value;
  for (const Config* layer : {&file, &flags}) {
    for (const auto& [key, value] : *layer) {
      if (key == "command") {
        if (value != cmd.name) throw InvalidArgument("config is for command '" + value + "', not '" + cmd.name + "'");
        continue;
      }
      if (!cfg.count(key)) throw InvalidArgument("unknown key '" + key + "' for command '" + cmd.name + "'");
      cfg[key] = value;
    }
  }
  return cfg;
}

std::string manifest_text(const CommandSpec& cmd, const Config& cfg) {
  std::string out = "command=" + cmd.name + "\n";
  for (const auto& k : cmd.keys) out += k.key + "=" + cfg.at(k.key) + "\n";
  return out;
}

void execute(const std::string& name, const Config& cfg, std::ostream& log) {
  const CommandSpec& cmd = command(name);
  const Settings s(cfg);
  const std::size_t threads = s.count("threads");
  if (threads > 0) omp_set_num_threads(static_cast<int>(threads));
  const fs::path out = s.required("out");
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec) throw IoError("cannot create output directory " + out.string() + ": " + ec.message());

  if (name == "simulate") cmd_simulate(s, out, log);
  else if (name == "infer") cmd_infer(s, out, log);
  else if (name == "train") cmd_train(s, out, log);
  else if (name == "eval") cmd_eval(s, out, log);
  else if (name == "audit") cmd_audit(s, out, log);
  else if (name == "embed") cmd_embed(s, out, log);
  write_file_atomic(out / "manifest.txt", manifest_text(cmd, cfg));
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Distance-based phylogenetic inference with permutation-equivariant networks.\n"
               "Every key can be given as --key value or in a key=value --config file;\n"
               "flags override the file, which overrides the defaults. Each run writes\n"
               "<out>/manifest.txt, which can be passed back with --config to repeat it.",
               "phylodnn"};
  app.require_subcommand(1);
  struct Bound {
    const CommandSpec* spec = nullptr;
    CLI::App* sub = nullptr;
    std::string config_path;
    std::map<std::string, std::string> values;
    std::map<std::string, CLI::Option*> options;
  };
  std::deque<Bound> bound;
  for (const CommandSpec& c : commands()) {
    Bound& b = bound.emplace_back();
    b.spec = &c;
    b.sub = app.add_subcommand(c.name, c.summary);
    b.sub->add_option("--config", b.config_path, "key=value file applied before flags (a manifest.txt works)");
    for (const KeySpec& k : c.keys) {
      const std::string shown = !k.default_value.empty() ? "default " + k.default_value
                                : k.key == "input"        ? "required"
                                                          : "optional";
      b.options[k.key] = b.sub->add_option("--" + k.key, b.values[k.key], k.help + " [" + shown + "]");
    }
  }

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kConfigError;
  }

  const Bound* chosen = nullptr;
  for (const Bound& b : bound) {
    if (b.sub->parsed()) chosen = &b;
  }
  if (!chosen) return kConfigError;

  try {
    Config flags;
    for (const auto& [key, option] : chosen->options) {
      if (option->count() > 0) flags[key] = chosen->values.at(key);
    }
    const Config file = chosen->config_path.empty() ? Config{} : read_config_file(chosen->config_path);
    const Config cfg = resolve_config(*chosen->spec, file, flags);
    execute(chosen->spec->name, cfg, out);
    return kOk;
  } catch (const InvalidArgument& e) {
    err << "configuration error: " << e.what() << "\n";
    return kConfigError;
  } catch (const ParseError& e) {
    err << "input error: " << e.what() << "\n";
    return kIoError;
  } catch (const IoError& e) {
    err << "i/o error: " << e.what() << "\n";
    return kIoError;
  } catch (const NumericError& e) {
    err << "numeric error: " << e.what() << "\n";
    return kNumericError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kFailure;
  }
}

}  // namespace phylo::cli
