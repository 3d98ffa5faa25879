#include <fstream>
#include <sstream>

#include "doctest.h"
#include "phylo/error.hpp"
#include "phylo/io_util.hpp"
#include "phylo/reference_nets.hpp"
#include "phylo/weights_io.hpp"
#include "support.hpp"

using namespace phylo;
using namespace phylo::net;

namespace {

Network small_net() {
  NetworkSpec s;
  s.architecture = Architecture::HybridAttentionSP;
  s.channels = 4;
  s.heads = 2;
  s.scalar_hidden = 3;
  s.taxa = 6;
  return Network(s, 11);
}

std::string serialized(const Network& n, std::size_t epoch) {
  std::ostringstream out(std::ios::binary);
  write_weights(out, n, epoch);
  return out.str();
}

}  // namespace

TEST_CASE("weights round trip bit for bit") {
  const Network net = small_net();
  std::istringstream in(serialized(net, 17), std::ios::binary);
  const Checkpoint cp = read_weights(in);
  CHECK(cp.epoch == 17);
  CHECK(cp.network.describe() == net.describe());
  REQUIRE(cp.network.params().size() == net.params().size());
  for (std::size_t i = 0; i < net.params().size(); ++i) {
    CHECK(cp.network.params().name(i) == net.params().name(i));
    CHECK(cp.network.params().value(i) == net.params().value(i));
  }
}

TEST_CASE("checkpoint files and manifest") {
  const auto dir = testing::temp_dir("weights");
  const Network net = small_net();
  save_checkpoint(dir / "model.phyw", net, 3);
  const Checkpoint cp = load_checkpoint(dir / "model.phyw");
  CHECK(cp.epoch == 3);
  CHECK(cp.network.params().value(0) == net.params().value(0));
  std::ifstream m(dir / "model.phyw.manifest");
  std::stringstream text;
  text << m.rdbuf();
  CHECK(text.str().find("architecture=HybridAttentionSP") != std::string::npos);
  CHECK(text.str().find("epoch=3") != std::string::npos);
  CHECK(text.str().find("param.input.w=") != std::string::npos);
  CHECK_THROWS_AS(load_checkpoint(dir / "missing.phyw"), IoError);
}

TEST_CASE("malformed weights are parse errors") {
  const std::string good = serialized(small_net(), 0);
  auto load = [](const std::string& bytes) {
    std::istringstream in(bytes, std::ios::binary);
    return read_weights(in);
  };
  CHECK_THROWS_AS(load("XXXX" + good.substr(4)), ParseError);
  CHECK_THROWS_AS(load(good.substr(0, good.size() / 2)), ParseError);
  CHECK_THROWS_AS(load(""), ParseError);
  std::string bad_version = good;
  bad_version[4] = 9;
  CHECK_THROWS_AS(load(bad_version), ParseError);
  std::string bad_arch = good;
  const auto at = bad_arch.find("HybridAttentionSP");
  REQUIRE(at != std::string::npos);
  bad_arch[at] = 'X';
  CHECK_THROWS_AS(load(bad_arch), ParseError);
}

TEST_CASE("reference networks survive a round trip") {
  const Network net = build_reference_net(ReferenceTarget::JC, 40);
  std::istringstream in(serialized(net, 0), std::ios::binary);
  const Checkpoint cp = read_weights(in);
  CHECK(cp.network.spec().sites == 40);
  for (std::size_t i = 0; i < net.params().size(); ++i) CHECK(cp.network.params().value(i) == net.params().value(i));
}
