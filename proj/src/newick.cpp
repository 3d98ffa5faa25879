#include "phylo/newick.hpp"

#include <charconv>
#include <fstream>

#include "phylo/error.hpp"
#include "phylo/io_util.hpp"

namespace phylo {
namespace {

bool is_delimiter(char c) {
  switch (c) {
    case '(': case ')': case '[': case ']': case '\'': case ':': case ';': case ',':
    case ' ': case '\t': case '\n': case '\r':
      return true;
    default:
      return false;
  }
}

class NewickParser {
 public:
  explicit NewickParser(std::string_view text) : text_(text) {}

  PhyloTree parse() {
    skip_ws();
    const int root = parse_subtree(-1);
    skip_ws();
    if (peek() == ':') {
      ++pos_;
      (void)parse_length();  // a root edge carries no split; dropped
      skip_ws();
    }
    expect(';');
    skip_ws();
    if (pos_ != text_.size()) fail("trailing characters after ';'");
    return PhyloTree(std::move(nodes_), root);
  }

 private:
  [[noreturn]] void fail(const std::string& msg) const { throw ParseError("newick: " + msg, pos_); }

  char peek() const { return pos_ < text_.size() ? text_[pos_] : '\0'; }

  void skip_ws() {
    while (pos_ < text_.size() && (text_[pos_] == ' ' || text_[pos_] == '\t' ||
                                   text_[pos_] == '\n' || text_[pos_] == '\r')) {
      ++pos_;
    }
    if (peek() == '[') fail("comments are not supported");
  }

  void expect(char c) {
    if (peek() != c) fail(std::string("expected '") + c + "'");
    ++pos_;
  }

  int parse_subtree(int parent) {
    const int id = static_cast<int>(nodes_.size());
    nodes_.push_back(TreeNode{});
    nodes_[id].parent = parent;
    skip_ws();
    if (peek() == '(') {
      ++pos_;
      for (;;) {
        const int child = parse_subtree(id);
        nodes_[id].children.push_back(child);
        skip_ws();
        if (peek() == ',') {
          ++pos_;
          continue;
        }
        expect(')');
        break;
      }
      skip_ws();
      nodes_[id].label = parse_label(/*required=*/false);
    } else {
      nodes_[id].label = parse_label(/*required=*/true);
    }
    skip_ws();
    if (parent >= 0) {
      if (peek() != ':') fail("missing branch length");
      ++pos_;
      nodes_[id].length = parse_length();
    }
    return id;
  }

  std::string parse_label(bool required) {
    std::string label;
    if (peek() == '\'') {
      ++pos_;
      for (;;) {
        if (pos_ >= text_.size()) fail("unterminated quoted label");
        const char c = text_[pos_++];
        if (c == '\'') {
          if (peek() == '\'') {
            label.push_back('\'');
            ++pos_;
            continue;
          }
          break;
        }
        label.push_back(c);
      }
      if (label.empty() && required) fail("empty leaf label");
      return label;
    }
    const std::size_t start = pos_;
    while (pos_ < text_.size() && !is_delimiter(text_[pos_])) ++pos_;
    label.assign(text_.substr(start, pos_ - start));
    if (label.empty() && required) fail("missing leaf label");
    return label;
  }

  double parse_length() {
    skip_ws();
    const std::size_t start = pos_;
    while (pos_ < text_.size() && !is_delimiter(text_[pos_])) ++pos_;
    const std::string_view token = text_.substr(start, pos_ - start);
    double value = 0.0;
    const auto [end, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
    if (ec != std::errc{} || end != token.data() + token.size() || token.empty()) {
      pos_ = start;
      fail("invalid branch length '" + std::string(token) + "'");
    }
    if (value < 0.0) {
      pos_ = start;
      fail("negative branch length");
    }
    return value;
  }

  std::string_view text_;
  std::size_t pos_ = 0;
  std::vector<TreeNode> nodes_;
};

void append_label(std::string& out, const std::string& label) {
  bool quote = label.empty();
  for (char c : label) quote = quote || is_delimiter(c);
  if (!quote) {
    out += label;
    return;
  }
  out.push_back('\'');
  for (char c : label) {
    if (c == '\'') out.push_back('\'');
    out.push_back(c);
  }
  out.push_back('\'');
}

void append_length(std::string& out, double x) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  out.append(buf, res.ptr);
}

void write_subtree(const PhyloTree& t, int id, std::string& out) {
  const TreeNode& n = t.node(id);
  if (!n.is_leaf()) {
    out.push_back('(');
    for (std::size_t i = 0; i < n.children.size(); ++i) {
      if (i) out.push_back(',');
      write_subtree(t, n.children[i], out);
    }
    out.push_back(')');
    if (!n.label.empty()) append_label(out, n.label);
  } else {
    append_label(out, n.label);
  }
  if (id != t.root()) {
    out.push_back(':');
    append_length(out, n.length);
  }
}

}  // namespace

PhyloTree parse_newick(std::string_view text) { return NewickParser(text).parse(); }

std::string to_newick(const PhyloTree& tree) {
  std::string out;
  write_subtree(tree, tree.root(), out);
  out.push_back(';');
  return out;
}

std::vector<PhyloTree> read_newick_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<PhyloTree> trees;
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    trees.push_back(parse_newick(line));
  }
  return trees;
}

void write_newick_file(const std::filesystem::path& path, const std::vector<PhyloTree>& trees) {
  std::string buf;
  for (const auto& t : trees) {
    buf += to_newick(t);
    buf.push_back('\n');
  }
  write_file_atomic(path, buf);
}

}  // namespace phylo
