#include "fitcarl/tape.hpp"

#include <cassert>
#include <stdexcept>

namespace fitcarl {

const Tensor& Var::value() const { return tape_->value(id_); }

Tape::Tape(const ParamStore* params, bool record) : params_(params), record_(record) {
  nodes_.reserve(256);
}

const Tensor& Tape::value(std::uint32_t id) const {
  const auto& n = nodes_[id];
  return n.external ? *n.external : n.value;
}

Var Tape::constant(Tensor value) {
  nodes_.push_back(Node{std::move(value), nullptr, {}, {}, false});
  return Var(this, static_cast<std::uint32_t>(nodes_.size() - 1));
}

Var Tape::input(Tensor value) {
  nodes_.push_back(Node{std::move(value), nullptr, {}, {}, record_});
  return Var(this, static_cast<std::uint32_t>(nodes_.size() - 1));
}

Var Tape::param(ParamId id) {
  if (!params_) throw std::logic_error("Tape::param: tape has no parameter store");
  auto key = std::make_pair(id, std::int64_t{-1});
  if (auto it = leaf_cache_.find(key); it != leaf_cache_.end()) return Var(this, it->second);
  nodes_.push_back(Node{{}, &params_->value(id), {}, {}, record_});
  auto node = static_cast<std::uint32_t>(nodes_.size() - 1);
  leaf_cache_.emplace(key, node);
  param_leaves_.push_back(ParamLeaf{node, id, -1});
  return Var(this, node);
}

Var Tape::param_row(ParamId id, std::size_t row) {
  if (!params_) throw std::logic_error("Tape::param_row: tape has no parameter store");
  auto key = std::make_pair(id, static_cast<std::int64_t>(row));
  if (auto it = leaf_cache_.find(key); it != leaf_cache_.end()) return Var(this, it->second);
  const auto& full = params_->value(id);
  if (full.rank() != 2 || row >= full.rows()) {
    throw ShapeError("param_row: row " + std::to_string(row) + " out of range for " +
                     params_->name(id) + shape_string(full.shape()));
  }
  auto r = full.row(row);
  nodes_.push_back(Node{Tensor(Shape{r.size()}, std::vector<Real>(r.begin(), r.end())), nullptr, {}, {},
                        record_});
  auto node = static_cast<std::uint32_t>(nodes_.size() - 1);
  leaf_cache_.emplace(key, node);
  param_leaves_.push_back(ParamLeaf{node, id, static_cast<std::int64_t>(row)});
  return Var(this, node);
}

Var Tape::push(Tensor value, std::initializer_list<Var> inputs, BackwardFn fn) {
  bool needs = false;
  if (record_) {
    for (const auto& in : inputs) needs = needs || nodes_[in.id()].requires_grad;
  }
#ifndef NDEBUG
  assert(value.all_finite() && "non-finite value produced by a tensor op");
#endif
  nodes_.push_back(Node{std::move(value), nullptr, {}, needs ? std::move(fn) : BackwardFn{}, needs});
  return Var(this, static_cast<std::uint32_t>(nodes_.size() - 1));
}

Var Tape::push(Tensor value, const std::vector<Var>& inputs, BackwardFn fn) {
  bool needs = false;
  if (record_) {
    for (const auto& in : inputs) needs = needs || nodes_[in.id()].requires_grad;
  }
#ifndef NDEBUG
  assert(value.all_finite() && "non-finite value produced by a tensor op");
#endif
  nodes_.push_back(Node{std::move(value), nullptr, {}, needs ? std::move(fn) : BackwardFn{}, needs});
  return Var(this, static_cast<std::uint32_t>(nodes_.size() - 1));
}

Tensor& Tape::grad_buffer(std::uint32_t id) {
  auto& n = nodes_[id];
  if (n.grad.empty() && value(id).size() > 0) n.grad = Tensor(value(id).shape());
  return n.grad;
}

void Tape::accumulate(std::uint32_t id, const Tensor& grad) {
  if (!nodes_[id].requires_grad) return;
  auto& buf = grad_buffer(id);
  if (buf.size() != grad.size()) throw ShapeError("accumulate", buf.shape(), grad.shape());
  for (std::size_t i = 0; i < buf.size(); ++i) buf[i] += grad[i];
}

void Tape::backward(Var loss) {
  if (loss.value().size() != 1) {
    throw ShapeError("backward: loss must be scalar, got " + shape_string(loss.shape()));
  }
  if (!record_) throw std::logic_error("backward on a non-recording tape");
  for (auto& n : nodes_) n.grad = Tensor();
  if (!nodes_[loss.id()].requires_grad) return;
  grad_buffer(loss.id()).fill(Real{1});
  for (std::int64_t i = loss.id(); i >= 0; --i) {
    auto& n = nodes_[static_cast<std::size_t>(i)];
    if (!n.backward || n.grad.empty()) continue;
    n.backward(*this, static_cast<std::uint32_t>(i), n.grad);
  }
}

Tensor Tape::grad(Var v) const {
  const auto& n = nodes_[v.id()];
  if (n.grad.empty()) return Tensor(value(v.id()).shape());
  return n.grad;
}

void Tape::accumulate_into(Gradients& out) const {
  for (const auto& leaf : param_leaves_) {
    const auto& g = nodes_[leaf.node].grad;
    if (g.empty()) continue;
    auto& dst = out[leaf.param];
    if (leaf.row < 0) {
      for (std::size_t i = 0; i < g.size(); ++i) dst[i] += g[i];
    } else {
      auto row = dst.row(static_cast<std::size_t>(leaf.row));
      for (std::size_t i = 0; i < g.size(); ++i) row[i] += g[i];
    }
  }
}

}  // namespace fitcarl
