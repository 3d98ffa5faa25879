#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace phylo {

/// Semantic role of a tensor axis.
enum class Axis : std::uint8_t { Any, Taxa, Pair, Block, Site, Channel, Batch };

std::string to_string(Axis a);

using Shape = std::vector<std::size_t>;

/// Dense row-major tensor of doubles with at most four axes.
class Tensor {
 public:
  static constexpr std::size_t kMaxRank = 4;

  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> data);

  static Tensor scalar(double v) { return Tensor(Shape{1}, std::vector<double>{v}); }

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
  std::size_t size() const noexcept { return data_.size(); }

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }
  std::vector<double>& storage() noexcept { return data_; }

  double& operator[](std::size_t i) noexcept { return data_[i]; }
  double operator[](std::size_t i) const noexcept { return data_[i]; }
  double& at(std::initializer_list<std::size_t> idx);
  double at(std::initializer_list<std::size_t> idx) const;

  /// Optional axis roles; non-Any roles must be unique.
  const std::vector<Axis>& roles() const noexcept { return roles_; }
  Tensor& with_roles(std::vector<Axis> roles);

  Tensor reshaped(Shape shape) const;
  void fill(double v);

  bool operator==(const Tensor& o) const { return shape_ == o.shape_ && data_ == o.data_; }

 private:
  std::size_t offset(std::initializer_list<std::size_t> idx) const;

  Shape shape_;
  std::vector<double> data_;
  std::vector<Axis> roles_;
};

std::size_t shape_size(const Shape& s) noexcept;
std::string shape_string(const Shape& s);

/// Sum of values[i * stride] for i < count, by recursive pairwise halving.
/// The association order depends only on count, never on threading.
double pairwise_sum(const double* values, std::size_t count, std::size_t stride = 1) noexcept;

}  // namespace phylo
