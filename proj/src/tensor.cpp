#include "phylo/tensor.hpp"

#include <algorithm>

#include "phylo/error.hpp"

namespace phylo {

std::string to_string(Axis a) {
  switch (a) {
    case Axis::Any: return "any";
    case Axis::Taxa: return "taxa";
    case Axis::Pair: return "pair";
    case Axis::Block: return "block";
    case Axis::Site: return "site";
    case Axis::Channel: return "channel";
    case Axis::Batch: return "batch";
  }
  return "?";
}

std::size_t shape_size(const Shape& s) noexcept {
  std::size_t n = 1;
  for (std::size_t d : s) n *= d;
  return n;
}

std::string shape_string(const Shape& s) {
  std::string out = "[";
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(s[i]);
  }
  return out + "]";
}

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)) {
  if (shape_.empty() || shape_.size() > kMaxRank) throw InvalidArgument("tensor rank must be 1..4");
  data_.assign(shape_size(shape_), fill);
}

Tensor::Tensor(Shape shape, std::vector<double> data) : shape_(std::move(shape)), data_(std::move(data)) {
  if (shape_.empty() || shape_.size() > kMaxRank) throw InvalidArgument("tensor rank must be 1..4");
  if (shape_size(shape_) != data_.size()) {
    throw InvalidArgument("tensor data length does not match shape " + shape_string(shape_));
  }
}

std::size_t Tensor::offset(std::initializer_list<std::size_t> idx) const {
  if (idx.size() != shape_.size()) throw InvalidArgument("tensor index rank mismatch");
  std::size_t off = 0, k = 0;
  for (std::size_t i : idx) {
    if (i >= shape_[k]) throw InvalidArgument("tensor index out of range");
    off = off * shape_[k++] + i;
  }
  return off;
}

double& Tensor::at(std::initializer_list<std::size_t> idx) { return data_[offset(idx)]; }
double Tensor::at(std::initializer_list<std::size_t> idx) const { return data_[offset(idx)]; }

Tensor& Tensor::with_roles(std::vector<Axis> roles) {
  if (roles.size() != shape_.size()) throw InvalidArgument("axis role count must equal rank");
  for (std::size_t i = 0; i < roles.size(); ++i) {
    if (roles[i] == Axis::Any) continue;
    if (std::count(roles.begin(), roles.end(), roles[i]) > 1) {
      throw InvalidArgument("duplicate axis role " + to_string(roles[i]));
    }
  }
  roles_ = std::move(roles);
  return *this;
}

Tensor Tensor::reshaped(Shape shape) const {
  if (shape_size(shape) != data_.size()) throw InvalidArgument("reshape changes element count");
  return Tensor(std::move(shape), data_);
}

void Tensor::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

double pairwise_sum(const double* values, std::size_t count, std::size_t stride) noexcept {
  if (count <= 8) {
    double s = 0.0;
    for (std::size_t i = 0; i < count; ++i) s += values[i * stride];
    return s;
  }
  const std::size_t half = count / 2;
  return pairwise_sum(values, half, stride) + pairwise_sum(values + half * stride, count - half, stride);
}

}  // namespace phylo
