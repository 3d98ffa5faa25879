#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "phylo/tensor.hpp"

namespace phylo {

/// Nucleotide states, in the order used by every rate matrix and one-hot
/// channel: A, C, G, T.
inline constexpr int kNumStates = 4;
inline constexpr char kStateChars[kNumStates] = {'A', 'C', 'G', 'T'};

/// State index of a nucleotide character (case-insensitive), or -1.
int state_index(char c) noexcept;
/// Encodes a nucleotide string; throws InvalidArgument on any other character.
std::vector<std::uint8_t> encode_sequence(std::string_view seq);

/// n x L matrix of nucleotide states with taxon labels.
class Alignment {
 public:
  Alignment() = default;
  /// Throws InvalidArgument on ragged rows, illegal characters or duplicate labels.
  Alignment(std::vector<std::string> labels, const std::vector<std::string>& sequences);
  Alignment(std::vector<std::string> labels, std::size_t length, std::vector<std::uint8_t> states);

  std::size_t taxa() const noexcept { return labels_.size(); }
  std::size_t length() const noexcept { return length_; }
  const std::vector<std::string>& labels() const noexcept { return labels_; }

  std::span<const std::uint8_t> row(std::size_t i) const noexcept {
    return {states_.data() + i * length_, length_};
  }
  std::uint8_t state(std::size_t taxon, std::size_t site) const noexcept {
    return states_[taxon * length_ + site];
  }
  std::string sequence(std::size_t i) const;

  /// Same alignment with rows reordered: result row k is row order[k].
  Alignment permuted_rows(std::span<const std::size_t> order) const;

  /// One-hot view, shape [taxa, site, channel] with channels A, C, G, T.
  Tensor one_hot() const;

  bool operator==(const Alignment&) const = default;

 private:
  std::vector<std::string> labels_;
  std::size_t length_ = 0;
  std::vector<std::uint8_t> states_;
};

}  // namespace phylo
