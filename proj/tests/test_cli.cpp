#include <fstream>
#include <sstream>

#include "commands.hpp"
#include "doctest.h"
#include "phylo/error.hpp"
#include "phylo/io_util.hpp"
#include "phylo/newick.hpp"
#include "phylo/seqio.hpp"
#include "phylo/splits.hpp"
#include "phylo/weights_io.hpp"
#include "support.hpp"

using namespace phylo;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out, err;
};

Result invoke(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::vector<std::string> files(const fs::path& dir) {
  std::vector<std::string> out;
  for (const auto& e : fs::directory_iterator(dir)) out.push_back(e.path().filename().string());
  std::sort(out.begin(), out.end());
  return out;
}

void same_tree(const fs::path& a, const fs::path& b) {
  REQUIRE(files(a) == files(b));
  for (const auto& f : files(a)) {
    if (f == "manifest.txt") continue;
    CHECK_MESSAGE(read_file(a / f) == read_file(b / f), f);
  }
}

}  // namespace

TEST_CASE("simulate writes consistent replicates and reruns byte for byte") {
  const fs::path dir = testing::temp_dir("cli-sim");
  const auto a = invoke({"simulate", "--out", (dir / "a").string(), "--replicates", "3", "--seed", "4"});
  REQUIRE_MESSAGE(a.code == 0, a.err);
  CHECK(files(dir / "a") == std::vector<std::string>{"manifest.txt", "rep1.fasta", "rep1.nwk", "rep2.fasta",
                                                     "rep2.nwk", "rep3.fasta", "rep3.nwk"});
  for (int r = 1; r <= 3; ++r) {
    const std::string stem = "rep" + std::to_string(r);
    const Alignment aln = read_alignment_file(dir / "a" / (stem + ".fasta"));
    const PhyloTree t = read_newick_file(dir / "a" / (stem + ".nwk")).at(0);
    CHECK(aln.length() == 500);
    CHECK(aln.taxa() == 20);
    auto tl = t.leaf_labels(), al = aln.labels();
    std::sort(tl.begin(), tl.end());
    std::sort(al.begin(), al.end());
    CHECK(tl == al);
  }
  REQUIRE(invoke({"simulate", "--out", (dir / "b").string(), "--replicates", "3", "--seed", "4"}).code == 0);
  same_tree(dir / "a", dir / "b");
  cli::Config ma = cli::read_config_file(dir / "a" / "manifest.txt");
  cli::Config mb = cli::read_config_file(dir / "b" / "manifest.txt");
  ma.erase("out");
  mb.erase("out");
  CHECK(ma == mb);

  // Rerunning from the manifest reproduces the outputs.
  const auto c = invoke({"simulate", "--config", (dir / "a" / "manifest.txt").string(), "--out", (dir / "c").string()});
  REQUIRE(c.code == 0);
  same_tree(dir / "a", dir / "c");
}

TEST_CASE("config precedence: defaults, then file, then flags") {
  const fs::path dir = testing::temp_dir("cli-config");
  write_file_atomic(dir / "cfg.txt", "# small run\nn = 6\nL=30\nreplicates=1\nformat=phylip\n");
  REQUIRE(invoke({"simulate", "--config", (dir / "cfg.txt").string(), "--n", "7", "--out", (dir / "o").string()}).code ==
          0);
  const Alignment a = read_alignment_file(dir / "o" / "rep1.phy");
  CHECK(a.taxa() == 7);
  CHECK(a.length() == 30);
  const cli::Config m = cli::read_config_file(dir / "o" / "manifest.txt");
  CHECK(m.at("command") == "simulate");
  CHECK(m.at("n") == "7");
  CHECK(m.at("L") == "30");
  CHECK(m.at("lambda") == "1");

  const cli::CommandSpec& sim = cli::command("simulate");
  CHECK_THROWS_AS(cli::resolve_config(sim, {{"bogus", "1"}}, {}), InvalidArgument);
  CHECK_THROWS_AS(cli::resolve_config(sim, {{"command", "train"}}, {}), InvalidArgument);
  CHECK_THROWS_AS(cli::parse_config("no equals sign"), InvalidArgument);
}

TEST_CASE("exit codes") {
  const fs::path dir = testing::temp_dir("cli-exit");
  CHECK(invoke({"simulate", "--out", dir.string(), "--n", "two"}).code == cli::kConfigError);
  CHECK(invoke({"simulate", "--out", dir.string(), "--mu", "3"}).code == cli::kConfigError);
  CHECK(invoke({"simulate", "--nonsense", "1"}).code == cli::kConfigError);
  CHECK(invoke({"frobnicate"}).code == cli::kConfigError);
  CHECK(invoke({"infer", "--input", (dir / "missing.fasta").string(), "--out", dir.string()}).code == cli::kIoError);
  CHECK(invoke({"simulate", "--config", (dir / "missing.txt").string()}).code == cli::kIoError);
  write_file_atomic(dir / "bad.fasta", ">a\nACGU\n>b\nACGT\n>c\nACGT\n");
  CHECK(invoke({"infer", "--input", (dir / "bad.fasta").string(), "--out", dir.string()}).code == cli::kIoError);
}

TEST_CASE("help documents every key") {
  for (const auto& c : cli::commands()) {
    const auto r = invoke({c.name, "--help"});
    CHECK(r.code == 0);
    for (const auto& k : c.keys) CHECK_MESSAGE(r.out.find("--" + k.key) != std::string::npos, c.name << " " << k.key);
  }
  const auto top = invoke({"--help"});
  CHECK(top.code == 0);
  for (const auto& c : cli::commands()) CHECK(top.out.find(c.name) != std::string::npos);
}

TEST_CASE("infer rejects an all-identical alignment") {
  const fs::path dir = testing::temp_dir("cli-degenerate");
  write_file_atomic(dir / "same.fasta", ">a\nACGTAC\n>b\nACGTAC\n>c\nACGTAC\n>d\nACGTAC\n");
  const auto r = invoke({"infer", "--input", (dir / "same.fasta").string(), "--method", "hamming", "--out",
                      (dir / "o").string()});
  CHECK(r.code == cli::kNumericError);
  CHECK(r.err.find("degenerate") != std::string::npos);
}

TEST_CASE("infer builds trees from simulated data and from a reference checkpoint") {
  const fs::path dir = testing::temp_dir("cli-infer");
  REQUIRE(invoke({"simulate", "--out", (dir / "sim").string(), "--replicates", "2", "--L", "1000"}).code == 0);
  const auto jc = invoke({"infer", "--input", (dir / "sim").string(), "--out", (dir / "jc").string(), "--matrices",
                       "true"});
  REQUIRE_MESSAGE(jc.code == 0, jc.err);
  const PhyloTree t = read_newick_file(dir / "jc" / "rep1.nwk").at(0);
  CHECK(t.leaf_count() == 20);
  CHECK(fs::exists(dir / "jc" / "rep1.tsv"));

  REQUIRE(invoke({"train", "--architecture", "ReferenceHamming", "--L", "1000", "--out", (dir / "ref").string()}).code ==
          0);
  const auto net = invoke({"infer", "--input", (dir / "sim").string(), "--method", "network", "--checkpoint",
                        (dir / "ref" / "model.phyw").string(), "--out", (dir / "net").string()});
  REQUIRE_MESSAGE(net.code == 0, net.err);
  REQUIRE(invoke({"infer", "--input", (dir / "sim").string(), "--method", "hamming", "--out", (dir / "ham").string()})
              .code == 0);
  for (const char* f : {"rep1.nwk", "rep2.nwk"}) {
    const PhyloTree a = read_newick_file(dir / "net" / f).at(0), b = read_newick_file(dir / "ham" / f).at(0);
    CHECK(splits(a) == splits(b));
  }
  CHECK(invoke({"infer", "--input", (dir / "sim").string(), "--method", "network", "--checkpoint",
             (dir / "none.phyw").string(), "--out", (dir / "x").string()})
            .code == cli::kIoError);
}

TEST_CASE("train writes a checkpoint and resumes epoch numbering") {
  const fs::path dir = testing::temp_dir("cli-train");
  const std::vector<std::string> base{"train", "--n", "5", "--L", "20", "--channels", "4", "--heads", "2",
                                      "--scalar_hidden", "4", "--train_size", "4", "--val_size", "2"};
  auto with = [&](std::vector<std::string> extra) {
    std::vector<std::string> a = base;
    a.insert(a.end(), extra.begin(), extra.end());
    return invoke(a);
  };
  const auto first = with({"--epochs", "1", "--out", (dir / "a").string()});
  REQUIRE_MESSAGE(first.code == 0, first.err);
  CHECK(fs::exists(dir / "a" / "model.phyw"));
  CHECK(fs::exists(dir / "a" / "model.phyw.manifest"));
  std::istringstream h1(read_file(dir / "a" / "history.csv"));
  std::string line;
  std::vector<std::string> rows;
  while (std::getline(h1, line)) rows.push_back(line);
  REQUIRE(rows.size() == 2);
  CHECK(rows[1].rfind("1,", 0) == 0);

  const auto resumed =
      with({"--epochs", "3", "--resume", (dir / "a" / "model.phyw").string(), "--out", (dir / "a").string()});
  REQUIRE_MESSAGE(resumed.code == 0, resumed.err);
  std::istringstream h2(read_file(dir / "a" / "history.csv"));
  rows.clear();
  while (std::getline(h2, line)) rows.push_back(line);
  REQUIRE(rows.size() == 4);
  CHECK(rows[2].rfind("2,", 0) == 0);
  CHECK(rows[3].rfind("3,", 0) == 0);
  CHECK(net::load_checkpoint(dir / "a" / "model.phyw").epoch == 3);
}

TEST_CASE("eval reports one row per method over shared instances") {
  const fs::path dir = testing::temp_dir("cli-eval");
  REQUIRE(invoke({"simulate", "--out", (dir / "sim").string(), "--replicates", "4", "--n", "8", "--L", "300"}).code ==
          0);
  const auto r = invoke({"eval", "--input", (dir / "sim").string(), "--methods", "truth,jc", "--out",
                      (dir / "o").string()});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  std::istringstream csv(read_file(dir / "o" / "summary.csv"));
  std::string header, truth, jc;
  std::getline(csv, header);
  std::getline(csv, truth);
  std::getline(csv, jc);
  CHECK(truth.rfind("truth,4,0,0,0,0", 0) == 0);
  CHECK(jc.rfind("jc,4,", 0) == 0);
  fs::remove(dir / "sim" / "rep2.fasta");
  CHECK(invoke({"eval", "--input", (dir / "sim").string(), "--out", (dir / "o").string()}).code == cli::kIoError);
}

TEST_CASE("audit and embed on a tree metric") {
  const fs::path dir = testing::temp_dir("cli-metric");
  write_tsv_file(dir / "d.tsv", patristic_matrix(testing::bd_tree(16, 3)));
  const auto a = invoke({"audit", "--input", (dir / "d.tsv").string(), "--out", (dir / "a").string()});
  REQUIRE(a.code == 0);
  CHECK(read_file(dir / "a" / "audit.txt").find("is_metric=true") != std::string::npos);
  const auto e = invoke({"embed", "--input", (dir / "d.tsv").string(), "--seeds", "20", "--out", (dir / "e").string()});
  REQUIRE_MESSAGE(e.code == 0, e.err);
  const cli::Config report = cli::read_config_file(dir / "e" / "distortion.txt");
  CHECK(report.at("dims") == "4");
  CHECK(report.at("non_expansive") == "true");
  CHECK(fs::exists(dir / "e" / "embedding.tsv"));
}
