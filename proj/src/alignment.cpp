#include "phylo/alignment.hpp"

#include <unordered_set>

#include "phylo/error.hpp"

namespace phylo {

int state_index(char c) noexcept {
  switch (c) {
    case 'A': case 'a': return 0;
    case 'C': case 'c': return 1;
    case 'G': case 'g': return 2;
    case 'T': case 't': return 3;
    default: return -1;
  }
}

std::vector<std::uint8_t> encode_sequence(std::string_view seq) {
  std::vector<std::uint8_t> out(seq.size());
  for (std::size_t i = 0; i < seq.size(); ++i) {
    const int s = state_index(seq[i]);
    if (s < 0) {
      throw InvalidArgument(std::string("illegal character '") + seq[i] + "' at position " +
                            std::to_string(i + 1));
    }
    out[i] = static_cast<std::uint8_t>(s);
  }
  return out;
}

namespace {
void check_labels(const std::vector<std::string>& labels) {
  std::unordered_set<std::string> seen;
  for (const auto& l : labels) {
    if (l.empty()) throw InvalidArgument("empty taxon label");
    if (!seen.insert(l).second) throw InvalidArgument("duplicate taxon label '" + l + "'");
  }
}
}  // namespace

Alignment::Alignment(std::vector<std::string> labels, const std::vector<std::string>& sequences)
    : labels_(std::move(labels)) {
  if (labels_.size() != sequences.size()) throw InvalidArgument("label and sequence counts differ");
  check_labels(labels_);
  length_ = sequences.empty() ? 0 : sequences.front().size();
  states_.reserve(labels_.size() * length_);
  for (std::size_t i = 0; i < sequences.size(); ++i) {
    if (sequences[i].size() != length_) {
      throw InvalidArgument("sequence '" + labels_[i] + "' has length " + std::to_string(sequences[i].size()) +
                            ", expected " + std::to_string(length_));
    }
    try {
      const auto enc = encode_sequence(sequences[i]);
      states_.insert(states_.end(), enc.begin(), enc.end());
    } catch (const InvalidArgument& e) {
      throw InvalidArgument("sequence '" + labels_[i] + "': " + e.what());
    }
  }
}

Alignment::Alignment(std::vector<std::string> labels, std::size_t length, std::vector<std::uint8_t> states)
    : labels_(std::move(labels)), length_(length), states_(std::move(states)) {
  check_labels(labels_);
  if (states_.size() != labels_.size() * length_) throw InvalidArgument("alignment state count mismatch");
  for (std::uint8_t s : states_) {
    if (s >= kNumStates) throw InvalidArgument("alignment state out of range");
  }
}

std::string Alignment::sequence(std::size_t i) const {
  std::string s(length_, '?');
  for (std::size_t j = 0; j < length_; ++j) s[j] = kStateChars[state(i, j)];
  return s;
}

Alignment Alignment::permuted_rows(std::span<const std::size_t> order) const {
  if (order.size() != taxa()) throw InvalidArgument("permutation length mismatch");
  std::vector<std::string> labels;
  std::vector<std::uint8_t> states;
  states.reserve(states_.size());
  for (std::size_t k : order) {
    labels.push_back(labels_.at(k));
    const auto r = row(k);
    states.insert(states.end(), r.begin(), r.end());
  }
  return Alignment(std::move(labels), length_, std::move(states));
}

Tensor Alignment::one_hot() const {
  Tensor t(Shape{taxa(), length_, static_cast<std::size_t>(kNumStates)});
  auto d = t.data();
  for (std::size_t i = 0; i < taxa(); ++i) {
    for (std::size_t j = 0; j < length_; ++j) d[(i * length_ + j) * kNumStates + state(i, j)] = 1.0;
  }
  t.with_roles({Axis::Taxa, Axis::Site, Axis::Channel});
  return t;
}

}  // namespace phylo
