#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <utility>
#include <vector>

#include "fitcarl/params.hpp"
#include "fitcarl/tensor.hpp"

namespace fitcarl {

class Tape;

/// Handle to a value recorded on a Tape.
class Var {
 public:
  Var() = default;
  Var(Tape* tape, std::uint32_t id) : tape_(tape), id_(id) {}

  Tape& tape() const { return *tape_; }
  std::uint32_t id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  std::size_t size() const { return value().size(); }
  Real item() const { return value().item(); }

 private:
  Tape* tape_ = nullptr;
  std::uint32_t id_ = 0;
};

/// Reverse-mode autodiff record.
///
/// Nodes are appended in evaluation order, which is a topological order, so
/// backward() walks them from the loss down to the first node. A tape is
/// owned by one thread. With recording disabled the tape only holds forward
/// values (inference mode).
class Tape {
 public:
  /// Receives the node's own id and its upstream gradient; accumulates into
  /// the gradients of the node's inputs.
  using BackwardFn = std::function<void(Tape&, std::uint32_t self, const Tensor& upstream)>;

  explicit Tape(const ParamStore* params = nullptr, bool record = true);
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool recording() const { return record_; }
  std::size_t size() const { return nodes_.size(); }
  const ParamStore* params() const { return params_; }

  Var constant(Tensor value);
  /// Differentiable leaf that is not bound to a parameter.
  Var input(Tensor value);
  /// Leaf bound to a whole parameter tensor (cached per tape).
  Var param(ParamId id);
  /// Leaf bound to one row of a rank-2 parameter (cached per tape).
  Var param_row(ParamId id, std::size_t row);

  const Tensor& value(std::uint32_t id) const;
  bool requires_grad(std::uint32_t id) const { return nodes_[id].requires_grad; }

  /// Records an op result. `fn` is dropped when no input needs a gradient.
  Var push(Tensor value, std::initializer_list<Var> inputs, BackwardFn fn);
  Var push(Tensor value, const std::vector<Var>& inputs, BackwardFn fn);

  /// Gradient buffer of a node, allocated as zeros on first use.
  Tensor& grad_buffer(std::uint32_t id);
  void accumulate(std::uint32_t id, const Tensor& grad);

  /// Runs the backward pass from a scalar loss.
  void backward(Var loss);
  /// Gradient of the last backward() w.r.t. `v`; zeros when unreached.
  Tensor grad(Var v) const;

  /// Adds parameter-leaf gradients into `out` (rows scatter into their row).
  void accumulate_into(Gradients& out) const;

 private:
  struct Node {
    Tensor value;
    const Tensor* external = nullptr;
    Tensor grad;
    BackwardFn backward;
    bool requires_grad = false;
  };
  struct ParamLeaf {
    std::uint32_t node;
    ParamId param;
    std::int64_t row;  // -1 for whole tensor
  };

  const ParamStore* params_;
  bool record_;
  std::vector<Node> nodes_;
  std::vector<ParamLeaf> param_leaves_;
  std::map<std::pair<ParamId, std::int64_t>, std::uint32_t> leaf_cache_;
};

}  // namespace fitcarl
