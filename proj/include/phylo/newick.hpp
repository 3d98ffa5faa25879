#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "phylo/tree.hpp"

namespace phylo {

/// Parses one Newick tree terminated by ';'.
///
/// Every non-root node needs a branch length. Single-quoted labels are
/// supported (with '' as an escaped quote); bracket comments are rejected.
/// Throws ParseError (with byte offset) or InvalidArgument (duplicate leaf
/// label, negative length).
PhyloTree parse_newick(std::string_view text);

/// Newick text with shortest round-trip formatting of branch lengths.
std::string to_newick(const PhyloTree& tree);

/// One tree per non-blank line.
std::vector<PhyloTree> read_newick_file(const std::filesystem::path& path);
void write_newick_file(const std::filesystem::path& path, const std::vector<PhyloTree>& trees);

}  // namespace phylo
