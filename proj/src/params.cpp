#include "fitcarl/params.hpp"

#include <stdexcept>

namespace fitcarl {

ParamId ParamStore::add(std::string name, Tensor init) {
  if (index_.contains(name)) throw std::invalid_argument("duplicate parameter name: " + name);
  auto id = static_cast<ParamId>(values_.size());
  index_.emplace(name, id);
  names_.push_back(std::move(name));
  values_.push_back(std::move(init));
  return id;
}

std::size_t ParamStore::total_elements() const {
  std::size_t n = 0;
  for (const auto& v : values_) n += v.size();
  return n;
}

std::optional<ParamId> ParamStore::find(std::string_view name) const {
  auto it = index_.find(std::string(name));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

ParamId ParamStore::id(std::string_view name) const {
  auto found = find(name);
  if (!found) throw std::out_of_range("unknown parameter: " + std::string(name));
  return *found;
}

Gradients::Gradients(const ParamStore& params) {
  grads_.reserve(params.size());
  for (ParamId i = 0; i < params.size(); ++i) grads_.emplace_back(params.value(i).shape());
}

void Gradients::add(const Gradients& other) {
  if (other.grads_.size() != grads_.size()) throw std::invalid_argument("Gradients::add: size mismatch");
  for (std::size_t p = 0; p < grads_.size(); ++p) {
    auto dst = grads_[p].values();
    auto src = other.grads_[p].values();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
  }
}

void Gradients::scale(Real factor) {
  for (auto& g : grads_)
    for (auto& v : g.values()) v *= factor;
}

void Gradients::zero() {
  for (auto& g : grads_) g.fill(Real{0});
}

bool Gradients::all_finite() const {
  for (const auto& g : grads_)
    if (!g.all_finite()) return false;
  return true;
}

}  // namespace fitcarl
