#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "fitcarl/tensor.hpp"

namespace fitcarl {

using ParamId = std::uint32_t;

/// Named, ordered collection of learnable tensors. Insertion order is the
/// canonical order used by checkpoints and the optimizer.
class ParamStore {
 public:
  ParamId add(std::string name, Tensor init);

  std::size_t size() const { return values_.size(); }
  std::size_t total_elements() const;

  const Tensor& value(ParamId id) const { return values_.at(id); }
  Tensor& value(ParamId id) { return values_.at(id); }
  const std::string& name(ParamId id) const { return names_.at(id); }

  std::optional<ParamId> find(std::string_view name) const;
  ParamId id(std::string_view name) const;

  friend bool operator==(const ParamStore& a, const ParamStore& b) {
    return a.names_ == b.names_ && a.values_ == b.values_;
  }

 private:
  std::vector<std::string> names_;
  std::vector<Tensor> values_;
  std::unordered_map<std::string, ParamId> index_;
};

/// Dense gradient buffers shaped like a ParamStore.
class Gradients {
 public:
  Gradients() = default;
  explicit Gradients(const ParamStore& params);

  std::size_t size() const { return grads_.size(); }
  Tensor& operator[](ParamId id) { return grads_.at(id); }
  const Tensor& operator[](ParamId id) const { return grads_.at(id); }

  void add(const Gradients& other);
  void scale(Real factor);
  void zero();
  bool all_finite() const;

 private:
  std::vector<Tensor> grads_;
};

}  // namespace fitcarl
