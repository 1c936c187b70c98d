#pragma once

#include <cstdint>
#include <iosfwd>
#include <vector>

#include "fitcarl/params.hpp"

namespace fitcarl {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Adam moments for every parameter of a ParamStore.
struct AdamState {
  AdamConfig config;
  std::uint64_t step = 0;
  std::vector<Tensor> m;
  std::vector<Tensor> v;

  AdamState() = default;
  AdamState(const ParamStore& params, AdamConfig cfg);

  friend bool operator==(const AdamState& a, const AdamState& b) {
    return a.step == b.step && a.m == b.m && a.v == b.v && a.config.lr == b.config.lr &&
           a.config.beta1 == b.config.beta1 && a.config.beta2 == b.config.beta2 && a.config.eps == b.config.eps;
  }
};

/// One bias-corrected Adam update. Parameters whose gradient is identically
/// zero at this step keep their value but still advance their moments.
void adam_step(ParamStore& params, const Gradients& grads, AdamState& state);

void write_adam_state(std::ostream& out, const AdamState& state);
AdamState read_adam_state(std::istream& in);

}  // namespace fitcarl
