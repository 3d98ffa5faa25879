#include "phylo/seqio.hpp"

#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "phylo/error.hpp"
#include "phylo/io_util.hpp"

namespace phylo {
namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

void check_record(const std::string& name, const std::string& seq, std::size_t expected) {
  if (seq.size() != expected) {
    throw ParseError("record '" + name + "' has " + std::to_string(seq.size()) + " characters, expected " +
                     std::to_string(expected));
  }
  for (std::size_t i = 0; i < seq.size(); ++i) {
    if (state_index(seq[i]) < 0) {
      throw ParseError("record '" + name + "': illegal character '" + std::string(1, seq[i]) +
                       "' at site " + std::to_string(i + 1));
    }
  }
}

Alignment build(std::vector<std::string> names, const std::vector<std::string>& seqs) {
  if (names.empty()) throw ParseError("alignment has no records");
  const std::size_t len = seqs.front().size();
  for (std::size_t i = 0; i < names.size(); ++i) check_record(names[i], seqs[i], len);
  try {
    return Alignment(std::move(names), seqs);
  } catch (const InvalidArgument& e) {
    throw ParseError(e.what());
  }
}

}  // namespace

Alignment read_fasta(std::istream& in) {
  std::vector<std::string> names, seqs;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line[0] == '>') {
      names.push_back(trim(line.substr(1)));
      if (names.back().empty()) throw ParseError("fasta: empty record name");
      seqs.emplace_back();
      continue;
    }
    if (names.empty()) throw ParseError("fasta: sequence data before the first '>' header");
    for (char c : line) {
      if (c != ' ' && c != '\t') seqs.back().push_back(c);
    }
  }
  return build(std::move(names), seqs);
}

void write_fasta(std::ostream& out, const Alignment& a, std::size_t width) {
  for (std::size_t i = 0; i < a.taxa(); ++i) {
    out << '>' << a.labels()[i] << '\n';
    const std::string s = a.sequence(i);
    if (width == 0) {
      out << s << '\n';
      continue;
    }
    for (std::size_t p = 0; p < s.size(); p += width) out << s.substr(p, width) << '\n';
  }
}

Alignment read_phylip(std::istream& in) {
  std::string line;
  std::size_t n = 0, len = 0;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    std::istringstream header(line);
    if (!(header >> n >> len) || n == 0 || len == 0) throw ParseError("phylip: bad header '" + trim(line) + "'");
    break;
  }
  if (n == 0) throw ParseError("phylip: missing header");

  std::vector<std::string> names, seqs;
  while (names.size() < n || (!seqs.empty() && seqs.back().size() < len)) {
    if (!std::getline(in, line)) {
      if (!names.empty() && seqs.back().size() < len) check_record(names.back(), seqs.back(), len);
      throw ParseError("phylip: expected " + std::to_string(n) + " records, found " + std::to_string(names.size()));
    }
    const std::string t = trim(line);
    if (t.empty()) continue;
    std::istringstream fields(t);
    if (seqs.empty() || seqs.back().size() >= len) {
      std::string name;
      fields >> name;
      names.push_back(name);
      seqs.emplace_back();
    }
    std::string chunk;
    while (fields >> chunk) seqs.back() += chunk;
    if (seqs.back().size() > len) check_record(names.back(), seqs.back(), len);
  }
  while (std::getline(in, line)) {
    if (!trim(line).empty()) throw ParseError("phylip: unexpected data after " + std::to_string(n) + " records");
  }
  return build(std::move(names), seqs);
}

void write_phylip(std::ostream& out, const Alignment& a) {
  out << a.taxa() << ' ' << a.length() << '\n';
  for (std::size_t i = 0; i < a.taxa(); ++i) out << a.labels()[i] << "  " << a.sequence(i) << '\n';
}

SeqFormat format_for_path(const std::filesystem::path& path) {
  const std::string ext = path.extension().string();
  return (ext == ".phy" || ext == ".phylip") ? SeqFormat::Phylip : SeqFormat::Fasta;
}

Alignment read_alignment_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  try {
    return format_for_path(path) == SeqFormat::Phylip ? read_phylip(in) : read_fasta(in);
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

void write_alignment_file(const std::filesystem::path& path, const Alignment& a, SeqFormat format) {
  std::ostringstream buf;
  if (format == SeqFormat::Phylip) {
    write_phylip(buf, a);
  } else {
    write_fasta(buf, a);
  }
  write_file_atomic(path, buf.str());
}

}  // namespace phylo
