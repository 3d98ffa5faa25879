#include "phylo/tape.hpp"

#include "phylo/error.hpp"

namespace phylo::ad {

const Tensor& Var::value() const {
  if (!tape_) throw InvalidArgument("use of an unbound Var");
  return tape_->value(*this);
}

Var Tape::push(Node node) {
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

void Tape::check(Var v) const {
  if (v.tape_ != this || v.id_ >= nodes_.size()) throw InvalidArgument("Var does not belong to this tape");
}

Var Tape::constant(Tensor value) {
  Node n;
  n.op = "constant";
  n.value = std::move(value);
  return push(std::move(n));
}

Var Tape::variable(Tensor value) {
  Node n;
  n.op = "variable";
  n.value = std::move(value);
  n.requires_grad = true;
  return push(std::move(n));
}

Var Tape::record(std::string_view op, std::vector<Var> inputs, ForwardFn forward, BackwardFn backward) {
  Node n;
  n.op = std::string(op);
  std::vector<const Tensor*> in;
  in.reserve(inputs.size());
  for (Var v : inputs) {
    check(v);
    n.inputs.push_back(v.id_);
    n.requires_grad = n.requires_grad || nodes_[v.id_].requires_grad;
    in.push_back(&nodes_[v.id_].value);
  }
  n.value = forward(in);
  n.forward = std::move(forward);
  n.backward = std::move(backward);
  return push(std::move(n));
}

const Tensor& Tape::value(Var v) const {
  check(v);
  return nodes_[v.id_].value;
}

std::string_view Tape::op_name(Var v) const {
  check(v);
  return nodes_[v.id_].op;
}

void Tape::backward(Var loss) {
  check(loss);
  Node& out = nodes_[loss.id_];
  if (out.value.size() != 1) {
    throw InvalidArgument("backward() needs a scalar loss, got shape " + shape_string(out.value.shape()));
  }
  // Interior gradients belong to a single sweep; only leaves accumulate.
  for (std::size_t id = 0; id <= loss.id_; ++id) {
    if (nodes_[id].forward) {
      nodes_[id].grad = Tensor();
      nodes_[id].has_grad = false;
    }
  }
  if (!out.has_grad) {
    out.grad = Tensor(out.value.shape(), 0.0);
    out.has_grad = true;
  }
  out.grad[0] += 1.0;

  std::vector<const Tensor*> in;
  std::vector<Tensor*> grads;
  for (std::size_t id = loss.id_ + 1; id-- > 0;) {
    Node& node = nodes_[id];
    if (!node.has_grad || !node.backward || !node.requires_grad) continue;
    in.clear();
    grads.clear();
    for (std::size_t k : node.inputs) {
      Node& src = nodes_[k];
      in.push_back(&src.value);
      if (src.requires_grad) {
        if (!src.has_grad) {
          src.grad = Tensor(src.value.shape(), 0.0);
          src.has_grad = true;
        }
        grads.push_back(&src.grad);
      } else {
        grads.push_back(nullptr);
      }
    }
    node.backward(in, node.value, node.grad, grads);
    if (node.forward) {
      node.grad = Tensor();
      node.has_grad = false;
    }
  }
}

Tensor Tape::gradient(Var v) const {
  check(v);
  const Node& n = nodes_[v.id_];
  return n.has_grad ? n.grad : Tensor(n.value.shape(), 0.0);
}

void Tape::clear_gradients() {
  for (Node& n : nodes_) {
    n.grad = Tensor();
    n.has_grad = false;
  }
}

void Tape::set_value(Var leaf, Tensor value) {
  check(leaf);
  Node& n = nodes_[leaf.id_];
  if (n.forward) throw InvalidArgument("set_value on a non-leaf node");
  if (value.shape() != n.value.shape()) throw InvalidArgument("set_value changes the shape");
  n.value = std::move(value);
}

void Tape::replay() {
  std::vector<const Tensor*> in;
  for (Node& n : nodes_) {
    if (!n.forward) continue;
    in.clear();
    for (std::size_t k : n.inputs) in.push_back(&nodes_[k].value);
    n.value = n.forward(in);
  }
}

}  // namespace phylo::ad
