#include <sstream>

#include "doctest.h"
#include "phylo/error.hpp"
#include "phylo/io_util.hpp"
#include "phylo/seqio.hpp"
#include "phylo/simulate.hpp"
#include "support.hpp"

using namespace phylo;

TEST_CASE("fasta round trip with and without wrapping") {
  const Alignment a = sim::evolve_alignment(testing::bd_tree(20, 2), sim::SubstModel::jc(), 1000, 3);
  for (std::size_t width : {0, 60, 7}) {
    std::stringstream ss;
    write_fasta(ss, a, width);
    CHECK(read_fasta(ss) == a);
  }
}

TEST_CASE("phylip round trip") {
  const Alignment a = sim::evolve_alignment(testing::bd_tree(20, 2), sim::SubstModel::jc(), 1000, 3);
  std::stringstream ss;
  write_phylip(ss, a);
  CHECK(read_phylip(ss) == a);
  std::stringstream split("2 6\nx ACG\nTAC\ny AAAAAA\n");
  const Alignment b = read_phylip(split);
  CHECK(b.sequence(0) == "ACGTAC");
}

TEST_CASE("fasta is case-insensitive on input") {
  std::stringstream ss(">a\nacgt\n>b\nACGA\n");
  const Alignment a = read_fasta(ss);
  CHECK(a.sequence(0) == "ACGT");
}

TEST_CASE("ragged and illegal records are named") {
  std::stringstream ragged(">one\nACGT\n>two\nACG\n");
  try {
    read_fasta(ragged);
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(std::string(e.what()).find("two") != std::string::npos);
  }
  std::stringstream iupac(">one\nACGT\n>two\nACGN\n");
  try {
    read_fasta(iupac);
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(std::string(e.what()).find("two") != std::string::npos);
  }
  std::stringstream phy("2 4\na ACGT\nb AC\n");
  CHECK_THROWS_AS(read_phylip(phy), ParseError);
  std::stringstream dup(">a\nACGT\n>a\nACGA\n");
  CHECK_THROWS_AS(read_fasta(dup), ParseError);
}

TEST_CASE("files round trip by extension and writes are atomic") {
  const auto dir = testing::temp_dir("seqio");
  const Alignment a = sim::evolve_alignment(testing::bd_tree(6, 2), sim::SubstModel::jc(), 50, 3);
  CHECK(format_for_path("x.phy") == SeqFormat::Phylip);
  CHECK(format_for_path("x.fasta") == SeqFormat::Fasta);
  write_alignment_file(dir / "a.phy", a, SeqFormat::Phylip);
  write_alignment_file(dir / "a.fa", a, SeqFormat::Fasta);
  CHECK(read_alignment_file(dir / "a.phy") == a);
  CHECK(read_alignment_file(dir / "a.fa") == a);
  CHECK_THROWS_AS(read_alignment_file(dir / "missing.fa"), IoError);
  write_file_atomic(dir / "t.txt", "hello");
  CHECK(read_file(dir / "t.txt") == "hello");
  std::size_t entries = 0;
  for (const auto& e : std::filesystem::directory_iterator(dir)) entries += e.is_regular_file();
  CHECK(entries == 3);
  CHECK_THROWS_AS(write_file_atomic(dir / "no" / "such" / "dir.txt", "x"), IoError);
}
