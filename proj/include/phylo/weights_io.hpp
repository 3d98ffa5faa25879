#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>

#include "phylo/network.hpp"

namespace phylo::net {

/// Binary weights layout (little endian):
///   "PHYW", u32 version,
///   u32 header length, header text ("key=value" lines: architecture, head,
///     channels, heads, embedding, scalar_hidden, taxa, sites, epoch),
///   u32 parameter count, then per parameter:
///     u32 name length, name, u32 rank, u64 dims[rank], f64 values.
inline constexpr std::uint32_t kWeightsVersion = 1;

struct Checkpoint {
  Network network;
  std::size_t epoch = 0;  ///< training epochs completed when saved
};

void write_weights(std::ostream& out, const Network& net, std::size_t epoch = 0);
Checkpoint read_weights(std::istream& in);

/// Writes `path` and a readable `path.manifest` next to it, both atomically.
void save_checkpoint(const std::filesystem::path& path, const Network& net, std::size_t epoch = 0);
/// Throws IoError when the file is missing, ParseError when it is malformed.
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace phylo::net
