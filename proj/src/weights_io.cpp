#include "phylo/weights_io.hpp"

#include <bit>
#include <cstring>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

#include "phylo/error.hpp"
#include "phylo/io_util.hpp"

namespace phylo::net {

namespace {

static_assert(std::endian::native == std::endian::little, "weights files assume a little-endian host");

constexpr char kMagic[4] = {'P', 'H', 'Y', 'W'};

template <class T>
void put(std::ostream& out, T v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.write(buf, sizeof(T));
}

void put_string(std::ostream& out, const std::string& s) {
  put<std::uint32_t>(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

class Reader {
 public:
  explicit Reader(std::istream& in) : in_(in) {}

  template <class T>
  T get(const char* what) {
    char buf[sizeof(T)];
    read(buf, sizeof(T), what);
    T v;
    std::memcpy(&v, buf, sizeof(T));
    return v;
  }

  std::string get_string(const char* what, std::size_t limit = 1u << 20) {
    const auto n = get<std::uint32_t>(what);
    if (n > limit) throw ParseError(std::string("weights file: implausible length for ") + what, pos_);
    std::string s(n, '\0');
    read(s.data(), n, what);
    return s;
  }

  void read(char* dst, std::size_t n, const char* what) {
    in_.read(dst, static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in_.gcount()) != n) {
      throw ParseError(std::string("weights file truncated while reading ") + what, pos_);
    }
    pos_ += n;
  }

  std::size_t pos() const noexcept { return pos_; }

 private:
  std::istream& in_;
  std::size_t pos_ = 0;
};

std::string header_text(const NetworkSpec& s, std::size_t epoch) {
  std::ostringstream h;
  h << "architecture=" << to_string(s.architecture) << "\n"
    << "head=" << to_string(s.head) << "\n"
    << "channels=" << s.channels << "\n"
    << "heads=" << s.heads << "\n"
    << "embedding=" << s.embedding << "\n"
    << "scalar_hidden=" << s.scalar_hidden << "\n"
    << "taxa=" << s.taxa << "\n"
    << "sites=" << s.sites << "\n"
    << "epoch=" << epoch << "\n";
  return h.str();
}

std::size_t to_size(const std::map<std::string, std::string>& kv, const std::string& key, std::size_t offset) {
  const auto it = kv.find(key);
  if (it == kv.end()) throw ParseError("weights header is missing '" + key + "'", offset);
  try {
    std::size_t used = 0;
    const unsigned long long v = std::stoull(it->second, &used);
    if (used != it->second.size()) throw std::invalid_argument(key);
    return static_cast<std::size_t>(v);
  } catch (const std::exception&) {
    throw ParseError("weights header has a bad value for '" + key + "'", offset);
  }
}

}  // namespace

void write_weights(std::ostream& out, const Network& net, std::size_t epoch) {
  out.write(kMagic, 4);
  put<std::uint32_t>(out, kWeightsVersion);
  put_string(out, header_text(net.spec(), epoch));
  const ParamSet& ps = net.params();
  put<std::uint32_t>(out, static_cast<std::uint32_t>(ps.size()));
  for (std::size_t i = 0; i < ps.size(); ++i) {
    put_string(out, ps.name(i));
    const Tensor& t = ps.value(i);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(t.rank()));
    for (std::size_t d : t.shape()) put<std::uint64_t>(out, d);
    for (double v : t.data()) put<double>(out, v);
  }
  if (!out) throw IoError("failed writing weights");
}

Checkpoint read_weights(std::istream& in) {
  Reader r(in);
  char magic[4];
  r.read(magic, 4, "magic");
  if (std::memcmp(magic, kMagic, 4) != 0) throw ParseError("not a weights file (bad magic)", 0);
  const auto version = r.get<std::uint32_t>("version");
  if (version != kWeightsVersion) {
    throw ParseError("unsupported weights version " + std::to_string(version), 4);
  }
  const std::size_t header_at = r.pos();
  std::map<std::string, std::string> kv;
  {
    std::istringstream h(r.get_string("header"));
    std::string line;
    while (std::getline(h, line)) {
      if (line.empty()) continue;
      const auto eq = line.find('=');
      if (eq == std::string::npos) throw ParseError("malformed weights header line '" + line + "'", header_at);
      kv[line.substr(0, eq)] = line.substr(eq + 1);
    }
  }
  NetworkSpec spec;
  try {
    spec.architecture = parse_architecture(kv.count("architecture") ? kv["architecture"] : "");
    spec.head = parse_head(kv.count("head") ? kv["head"] : "");
  } catch (const InvalidArgument& e) {
    throw ParseError(std::string("weights header: ") + e.what(), header_at);
  }
  spec.channels = to_size(kv, "channels", header_at);
  spec.heads = to_size(kv, "heads", header_at);
  spec.embedding = to_size(kv, "embedding", header_at);
  spec.scalar_hidden = to_size(kv, "scalar_hidden", header_at);
  spec.taxa = to_size(kv, "taxa", header_at);
  spec.sites = to_size(kv, "sites", header_at);
  const std::size_t epoch = to_size(kv, "epoch", header_at);

  Checkpoint cp{Network(spec, 0), epoch};
  ParamSet& ps = cp.network.params();
  const auto count = r.get<std::uint32_t>("parameter count");
  if (count != ps.size()) {
    throw ParseError("weights file has " + std::to_string(count) + " parameters, architecture expects " +
                         std::to_string(ps.size()),
                     r.pos());
  }
  for (std::uint32_t k = 0; k < count; ++k) {
    const std::size_t at = r.pos();
    const std::string name = r.get_string("parameter name", 4096);
    const auto index = ps.find(name);
    if (!index) throw ParseError("unexpected parameter '" + name + "'", at);
    const auto rank = r.get<std::uint32_t>("rank");
    if (rank == 0 || rank > Tensor::kMaxRank) throw ParseError("bad rank for '" + name + "'", at);
    Shape shape(rank);
    for (auto& d : shape) d = static_cast<std::size_t>(r.get<std::uint64_t>("dimension"));
    Tensor& dst = ps.value(*index);
    if (shape != dst.shape()) {
      throw ParseError("parameter '" + name + "' has shape " + shape_string(shape) + ", expected " +
                           shape_string(dst.shape()),
                       at);
    }
    for (double& v : dst.data()) v = r.get<double>("values");
  }
  return cp;
}

void save_checkpoint(const std::filesystem::path& path, const Network& net, std::size_t epoch) {
  std::ostringstream bin(std::ios::binary);
  write_weights(bin, net, epoch);
  write_file_atomic(path, bin.str());
  std::ostringstream manifest;
  manifest << "format=PHYW\nversion=" << kWeightsVersion << "\nepoch=" << epoch << "\n" << net.describe();
  for (std::size_t i = 0; i < net.params().size(); ++i) {
    manifest << "param." << net.params().name(i) << "=" << shape_string(net.params().value(i).shape()) << "\n";
  }
  write_file_atomic(path.string() + ".manifest", manifest.str());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::istringstream in(read_file(path), std::ios::binary);
  return read_weights(in);
}

}  // namespace phylo::net
