#pragma once

#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "phylo/tensor.hpp"

namespace phylo::ad {

class Tape;

/// Handle to a value recorded on a Tape. Cheap to copy; valid while the tape lives.
class Var {
 public:
  Var() = default;

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  std::size_t size() const { return value().size(); }
  std::size_t id() const noexcept { return id_; }
  Tape* tape() const noexcept { return tape_; }
  bool valid() const noexcept { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

using Inputs = std::span<const Tensor* const>;
/// grads[k] is null when input k does not need a gradient.
using InputGrads = std::span<Tensor* const>;
using ForwardFn = std::function<Tensor(Inputs inputs)>;
using BackwardFn =
    std::function<void(Inputs inputs, const Tensor& output, const Tensor& grad_output, InputGrads grads)>;

/// Records a graph of tensor operations and runs reverse-mode differentiation.
///
/// Every recorded node keeps its forward function, so replay() recomputes all
/// values from the leaves with the same arithmetic in the same order.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Leaf that never receives a gradient.
  Var constant(Tensor value);
  /// Leaf that receives a gradient (a parameter or a differentiated input).
  Var variable(Tensor value);

  Var record(std::string_view op, std::vector<Var> inputs, ForwardFn forward, BackwardFn backward);

  const Tensor& value(Var v) const;
  std::string_view op_name(Var v) const;
  std::size_t size() const noexcept { return nodes_.size(); }

  /// Reverse sweep from a single-element output. Throws InvalidArgument on a
  /// non-scalar loss. Leaf gradients accumulate until clear_gradients();
  /// interior gradients are released once propagated.
  void backward(Var loss);
  /// Gradient with respect to a leaf; zeros when none reached it.
  Tensor gradient(Var v) const;
  void clear_gradients();

  /// Replaces a leaf's value; call replay() to propagate.
  void set_value(Var leaf, Tensor value);
  /// Recomputes every non-leaf node from its inputs.
  void replay();

 private:
  struct Node {
    std::string op;
    Tensor value;
    Tensor grad;
    bool has_grad = false;
    bool requires_grad = false;
    std::vector<std::size_t> inputs;
    ForwardFn forward;
    BackwardFn backward;
  };

  Var push(Node node);
  void check(Var v) const;

  std::vector<Node> nodes_;
};

}  // namespace phylo::ad
