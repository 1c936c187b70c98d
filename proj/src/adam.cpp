#include "fitcarl/adam.hpp"

#include <cmath>
#include <stdexcept>

#include "fitcarl/binary_io.hpp"

namespace fitcarl {

AdamState::AdamState(const ParamStore& params, AdamConfig cfg) : config(cfg) {
  for (ParamId i = 0; i < params.size(); ++i) {
    m.emplace_back(params.value(i).shape());
    v.emplace_back(params.value(i).shape());
  }
}

void adam_step(ParamStore& params, const Gradients& grads, AdamState& state) {
  if (grads.size() != params.size() || state.m.size() != params.size()) {
    throw std::invalid_argument("adam_step: parameter/gradient/state count mismatch");
  }
  state.step += 1;
  const double b1 = state.config.beta1, b2 = state.config.beta2;
  const double correction1 = 1.0 - std::pow(b1, static_cast<double>(state.step));
  const double correction2 = 1.0 - std::pow(b2, static_cast<double>(state.step));
  const double lr = state.config.lr, eps = state.config.eps;
  for (ParamId p = 0; p < params.size(); ++p) {
    Tensor& w = params.value(p);
    const Tensor& g = grads[p];
    Tensor& m = state.m[p];
    Tensor& v = state.v[p];
    if (g.shape() != w.shape() || m.shape() != w.shape()) throw ShapeError("adam_step", w.shape(), g.shape());
    const auto n = static_cast<long long>(w.size());
#pragma omp parallel for schedule(static) if (n > (1 << 15))
    for (long long i = 0; i < n; ++i) {
      const double gi = g[i];
      const double mi = b1 * m[i] + (1.0 - b1) * gi;
      const double vi = b2 * v[i] + (1.0 - b2) * gi * gi;
      m[i] = static_cast<Real>(mi);
      v[i] = static_cast<Real>(vi);
      const double mhat = mi / correction1;
      const double vhat = vi / correction2;
      w[i] -= static_cast<Real>(lr * mhat / (std::sqrt(vhat) + eps));
    }
  }
}

void write_adam_state(std::ostream& out, const AdamState& state) {
  io::write_pod(out, state.config.lr);
  io::write_pod(out, state.config.beta1);
  io::write_pod(out, state.config.beta2);
  io::write_pod(out, state.config.eps);
  io::write_pod(out, state.step);
  io::write_pod(out, static_cast<std::uint64_t>(state.m.size()));
  for (std::size_t i = 0; i < state.m.size(); ++i) {
    io::write_tensor(out, state.m[i]);
    io::write_tensor(out, state.v[i]);
  }
}

AdamState read_adam_state(std::istream& in) {
  AdamState s;
  s.config.lr = io::read_pod<double>(in);
  s.config.beta1 = io::read_pod<double>(in);
  s.config.beta2 = io::read_pod<double>(in);
  s.config.eps = io::read_pod<double>(in);
  s.step = io::read_pod<std::uint64_t>(in);
  auto n = io::read_pod<std::uint64_t>(in);
  for (std::uint64_t i = 0; i < n; ++i) {
    s.m.push_back(io::read_tensor(in));
    s.v.push_back(io::read_tensor(in));
  }
  return s;
}

}  // namespace fitcarl
