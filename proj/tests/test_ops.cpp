#include <gtest/gtest.h>

#include <cmath>
#include <functional>

#include "fitcarl/ops.hpp"
#include "fitcarl/rng.hpp"

namespace fitcarl {
namespace {

using Fn = std::function<Var(const std::vector<Var>&)>;

Tensor random_tensor(Shape shape, RngStream& rng, double scale = 1.0) {
  Tensor t(std::move(shape));
  for (auto& v : t.values()) v = rng.normal(0.0, scale);
  return t;
}

// Max relative error between reverse-mode and central-difference gradients
// of sum(w * fn(inputs)) for a fixed random weighting w.
double grad_error(const Fn& fn, std::vector<Tensor> inputs, std::uint64_t seed = 1) {
  RngStream rng(seed, "weights");
  Tensor weights;
  auto value = [&](const std::vector<Tensor>& xs) {
    Tape tape;
    std::vector<Var> vs;
    for (const auto& x : xs) vs.push_back(tape.input(x));
    Var out = fn(vs);
    if (weights.empty()) weights = random_tensor(out.shape(), rng);
    return sum(out * tape.constant(weights)).item();
  };
  value(inputs);
  Tape tape;
  std::vector<Var> vs;
  for (const auto& x : inputs) vs.push_back(tape.input(x));
  Var loss = sum(fn(vs) * tape.constant(weights));
  tape.backward(loss);
  double worst = 0.0;
  const double h = 1e-6;
  for (std::size_t a = 0; a < inputs.size(); ++a) {
    const Tensor g = tape.grad(vs[a]);
    for (std::size_t i = 0; i < inputs[a].size(); ++i) {
      const Real saved = inputs[a][i];
      inputs[a][i] = saved + h;
      const double up = value(inputs);
      inputs[a][i] = saved - h;
      const double down = value(inputs);
      inputs[a][i] = saved;
      const double numeric = (up - down) / (2 * h);
      worst = std::max(worst, std::abs(numeric - g[i]) / std::max({std::abs(numeric), std::abs(g[i]), 1e-6}));
    }
  }
  return worst;
}

class OpsGrad : public ::testing::Test {
 protected:
  RngStream rng{7, "ops"};
};

TEST_F(OpsGrad, Elementwise) {
  const Tensor a = random_tensor({3, 4}, rng), b = random_tensor({3, 4}, rng);
  EXPECT_LT(grad_error([](auto& v) { return v[0] + v[1]; }, {a, b}), 1e-7);
  EXPECT_LT(grad_error([](auto& v) { return v[0] - v[1]; }, {a, b}), 1e-7);
  EXPECT_LT(grad_error([](auto& v) { return v[0] * v[1]; }, {a, b}), 1e-7);
  EXPECT_LT(grad_error([](auto& v) { return scale(add_scalar(neg(v[0]), 0.3), 2.5); }, {a}), 1e-7);
  EXPECT_LT(grad_error([](auto& v) { return sigmoid(v[0]); }, {a}), 1e-7);
  EXPECT_LT(grad_error([](auto& v) { return tanh(v[0]); }, {a}), 1e-7);
  EXPECT_LT(grad_error([](auto& v) { return cos(v[0]); }, {a}), 1e-7);
  EXPECT_LT(grad_error([](auto& v) { return exp(v[0]); }, {a}), 1e-7);
}

TEST_F(OpsGrad, LogAndRelu) {
  Tensor pos = random_tensor({5}, rng);
  for (auto& v : pos.values()) v = std::abs(v) + 0.5;
  EXPECT_LT(grad_error([](auto& v) { return log(v[0]); }, {pos}), 1e-7);
  Tensor away = random_tensor({6}, rng);
  for (auto& v : away.values()) v += v > 0 ? 0.1 : -0.1;
  EXPECT_LT(grad_error([](auto& v) { return relu(v[0]); }, {away}), 1e-7);
}

TEST_F(OpsGrad, MatrixProducts) {
  const Tensor a = random_tensor({3, 4}, rng), b = random_tensor({4, 5}, rng), bt = random_tensor({5, 4}, rng);
  const Tensor x = random_tensor({4}, rng), y = random_tensor({3}, rng);
  EXPECT_LT(grad_error([](auto& v) { return matmul(v[0], v[1]); }, {a, b}), 1e-7);
  EXPECT_LT(grad_error([](auto& v) { return matmul(v[0], v[1]); }, {a, x}), 1e-7);
  EXPECT_LT(grad_error([](auto& v) { return matmul(v[0], v[1]); }, {y, a}), 1e-7);
  EXPECT_LT(grad_error([](auto& v) { return matmul_nt(v[0], v[1]); }, {a, bt}), 1e-7);
  EXPECT_LT(grad_error([](auto& v) { return matmul_nt(v[0], v[1]); }, {x, bt}), 1e-7);
  EXPECT_LT(grad_error([](auto& v) { return transpose(v[0]); }, {a}), 1e-7);
  EXPECT_LT(grad_error([](auto& v) { return outer(v[0], v[1]); }, {y, x}), 1e-7);
  EXPECT_LT(grad_error([](auto& v) { return rowdot(v[0], v[1]); }, {a, random_tensor({3, 4}, rng)}), 1e-7);
  EXPECT_LT(grad_error([](auto& v) { return dot(v[0], v[1]); }, {x, random_tensor({4}, rng)}), 1e-7);
}

TEST_F(OpsGrad, Shaping) {
  const Tensor a = random_tensor({3, 4}, rng), b = random_tensor({3, 2}, rng);
  const Tensor x = random_tensor({4}, rng), y = random_tensor({2}, rng);
  EXPECT_LT(grad_error([](auto& v) { return concat({v[0], v[1]}); }, {x, y}), 1e-7);
  EXPECT_LT(grad_error([](auto& v) { return concat_cols({v[0], v[1]}); }, {a, b}), 1e-7);
  EXPECT_LT(grad_error([](auto& v) { return stack_rows({v[0], v[1], v[0]}); }, {x, random_tensor({4}, rng)}), 1e-7);
  EXPECT_LT(grad_error([](auto& v) { return slice(v[0], 1, 2); }, {x}), 1e-7);
  EXPECT_LT(grad_error([](auto& v) { return row(v[0], 2); }, {a}), 1e-7);
  EXPECT_LT(grad_error([](auto& v) { return reshape(v[0], {2, 6}); }, {a}), 1e-7);
  EXPECT_LT(grad_error([](auto& v) { return pick(v[0], 3); }, {x}), 1e-7);
  EXPECT_LT(grad_error([](auto& v) { return add_row(v[0], v[1]); }, {a, x}), 1e-7);
  EXPECT_LT(grad_error([](auto& v) { return mul_row(v[0], v[1]); }, {a, x}), 1e-7);
}

TEST_F(OpsGrad, Normalizers) {
  const Tensor x = random_tensor({5}, rng), a = random_tensor({3, 4}, rng);
  EXPECT_LT(grad_error([](auto& v) { return softmax(v[0]); }, {x}), 1e-7);
  EXPECT_LT(grad_error([](auto& v) { return softmax_rows(v[0]); }, {a}), 1e-7);
  EXPECT_LT(grad_error([](auto& v) { return layer_norm_rows(v[0]); }, {a}), 1e-6);
  EXPECT_LT(grad_error([](auto& v) { return l2_norm(v[0]); }, {x}), 1e-7);
  EXPECT_LT(grad_error([](auto& v) { return sum(v[0]); }, {a}), 1e-7);
}

TEST_F(OpsGrad, Tucker) {
  const Tensor w = random_tensor({3, 2, 4}, rng), a = random_tensor({3}, rng), b = random_tensor({2}, rng);
  EXPECT_LT(grad_error([](auto& v) { return tucker3(v[0], v[1], v[2], v[3]); }, {w, a, b, random_tensor({4}, rng)}),
            1e-6);
  EXPECT_LT(grad_error([](auto& v) { return tucker3_rows(v[0], v[1], v[2], v[3]); },
                       {w, a, b, random_tensor({5, 4}, rng)}),
            1e-6);
}

TEST_F(OpsGrad, GruCell) {
  const std::size_t in = 3, hid = 2;
  auto fn = [](auto& v) { return gru_cell(v[0], v[1], GruWeights{v[2], v[3], v[4], v[5]}); };
  EXPECT_LT(grad_error(fn, {random_tensor({in}, rng), random_tensor({hid}, rng), random_tensor({3 * hid, in}, rng),
                            random_tensor({3 * hid, hid}, rng), random_tensor({3 * hid}, rng),
                            random_tensor({3 * hid}, rng)}),
            1e-7);
}

TEST(Ops, SoftmaxIsStableForLargeLogits) {
  Tape tape;
  const Tensor p = softmax(tape.constant(Tensor::vector({1000.0, 999.0, -1000.0}))).value();
  EXPECT_TRUE(p.all_finite());
  EXPECT_NEAR(p[0], 1.0 / (1.0 + std::exp(-1.0)), 1e-12);
  EXPECT_NEAR(p[2], 0.0, 1e-300);
}

TEST(Ops, LogIsFlooredAndHasNoGradientBelowTheFloor) {
  Tape tape;
  Var x = tape.input(Tensor::vector({0.0, 2.0}));
  Var y = log(x);
  EXPECT_DOUBLE_EQ(y.value()[0], std::log(1e-12));
  tape.backward(sum(y));
  EXPECT_EQ(tape.grad(x)[0], 0.0);
  EXPECT_DOUBLE_EQ(tape.grad(x)[1], 0.5);
}

TEST(Ops, ShapeMismatchThrows) {
  Tape tape;
  Var a = tape.constant(Tensor({2, 3}));
  Var b = tape.constant(Tensor({4, 2}));
  EXPECT_THROW(matmul(a, b), ShapeError);
  EXPECT_THROW(add(a, b), ShapeError);
}

TEST(Ops, TuckerMatchesTripleLoop) {
  RngStream rng(3, "tucker");
  Tensor w = random_tensor({3, 2, 3}, rng), a = random_tensor({3}, rng), b = random_tensor({2}, rng),
         c = random_tensor({3}, rng);
  Tape tape;
  const double got = tucker3(tape.constant(w), tape.constant(a), tape.constant(b), tape.constant(c)).item();
  double want = 0.0;
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 2; ++j)
      for (std::size_t k = 0; k < 3; ++k) want += w.at(i, j, k) * a[i] * b[j] * c[k];
  EXPECT_NEAR(got, want, 1e-12);
}

TEST(Ops, GruWithZeroWeightsAveragesCandidateAndState) {
  // Zero weights: r = z = 0.5 and n = tanh(0) = 0, so h' = 0.5 h.
  Tape tape;
  Var x = tape.constant(Tensor::vector({0.3, -1.0}));
  Var h = tape.constant(Tensor::vector({0.8, -0.4, 2.0}));
  GruWeights w{tape.constant(Tensor({9, 2})), tape.constant(Tensor({9, 3})), tape.constant(Tensor({9})),
               tape.constant(Tensor({9}))};
  const Tensor out = gru_cell(x, h, w).value();
  ASSERT_EQ(out.size(), 3u);
  EXPECT_NEAR(out[0], 0.4, 1e-15);
  EXPECT_NEAR(out[1], -0.2, 1e-15);
  EXPECT_NEAR(out[2], 1.0, 1e-15);
}

TEST(Tape, ParamRowGradientsScatterIntoTheirRow) {
  ParamStore store;
  const ParamId id = store.add("table", Tensor::matrix(3, 2, {1, 2, 3, 4, 5, 6}));
  Tape tape(&store);
  Var r1 = tape.param_row(id, 1);
  Var again = tape.param_row(id, 1);
  EXPECT_EQ(r1.id(), again.id());
  tape.backward(sum(r1 * r1));
  Gradients g(store);
  tape.accumulate_into(g);
  EXPECT_EQ(g[id], Tensor::matrix(3, 2, {0, 0, 6, 8, 0, 0}));
}

TEST(Tape, InferenceTapeRecordsNoGradient) {
  ParamStore store;
  const ParamId id = store.add("w", Tensor::vector({1.0, 2.0}));
  Tape tape(&store, false);
  Var y = sum(tape.param(id));
  EXPECT_FALSE(tape.requires_grad(y.id()));
  EXPECT_DOUBLE_EQ(y.item(), 3.0);
}

}  // namespace
}  // namespace fitcarl
