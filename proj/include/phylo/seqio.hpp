#pragma once

#include <filesystem>
#include <iosfwd>

#include "phylo/alignment.hpp"

namespace phylo {

/// FASTA reader. Sequences may span lines. Throws ParseError naming the
/// offending record on ragged rows or illegal characters.
Alignment read_fasta(std::istream& in);
/// Wraps sequence lines at `width` characters (0 disables wrapping).
void write_fasta(std::ostream& out, const Alignment& a, std::size_t width = 60);

/// Sequential PHYLIP: "n L" header, then one record per taxon, name and
/// sequence separated by whitespace. Sequence characters may continue on
/// following lines until L characters have been read.
Alignment read_phylip(std::istream& in);
void write_phylip(std::ostream& out, const Alignment& a);

enum class SeqFormat { Fasta, Phylip };

/// Format from the extension: .phy/.phylip -> PHYLIP, anything else FASTA.
SeqFormat format_for_path(const std::filesystem::path& path);
Alignment read_alignment_file(const std::filesystem::path& path);
void write_alignment_file(const std::filesystem::path& path, const Alignment& a, SeqFormat format);

}  // namespace phylo
