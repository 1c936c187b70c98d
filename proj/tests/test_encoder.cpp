#include <gtest/gtest.h>

#include <cmath>
#include <complex>
#include <sstream>

#include "fitcarl/encoder.hpp"
#include "fitcarl/pretrain.hpp"
#include "support.hpp"

namespace fitcarl {
namespace {

using testing::toy_config;
using testing::toy_split;

void randomize(FitcarlModel& model, std::uint64_t seed, double scale) {
  RngStream rng(seed, "randomize");
  auto& p = model.params();
  for (ParamId id = 0; id < p.size(); ++id)
    for (auto& v : p.value(id).values()) v = static_cast<Real>(rng.normal(0.0, scale));
}

Tensor encode(const FitcarlModel& m, const std::vector<NeighborToken>& tokens, double cls_time) {
  Tape tape(&m.params(), false);
  Forward f(m, tape);
  return encode_entity(f, tokens, cls_time).value();
}

double max_diff(const Tensor& a, const Tensor& b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a[i] - b[i]));
  return d;
}

TEST(Neighborhood, UnseenEntityBecomesTheObject) {
  const auto n = neighborhood(7, {{7, 1, 3, 2}, {4, 3, 7, 5}});
  ASSERT_EQ(n.size(), 2u);
  EXPECT_EQ(n[0], (NeighborToken{3, 2, 2}));
  EXPECT_EQ(n[1], (NeighborToken{4, 3, 5}));
}

TEST(Neighborhood, MeanSupportTime) {
  EXPECT_DOUBLE_EQ(mean_support_time({{0, 1, 2, 3}, {0, 1, 2, 6}}), 4.5);
}

class EncoderOnToy : public ::testing::Test {
 protected:
  OogSplit split = toy_split();
  ModelConfig cfg = [] {
    ModelConfig c = toy_config(4);
    c.layers = 2;
    return c;
  }();
  FitcarlModel model{cfg, split.num_entities(), split.vocab.relations.num_ids(), 3};
  std::vector<NeighborToken> tokens = {{1, 2, 0}, {4, 3, 3}, {5, 1, 5}};
  void SetUp() override { randomize(model, 8, 0.5); }
};

TEST_F(EncoderOnToy, TimeEncodingMatchesClosedForm) {
  Tape tape(&model.params(), false);
  Forward f(model, tape);
  const auto& p = model.params();
  const Tensor& omega = p.value(model.ids().omega);
  const Tensor& phi = p.value(model.ids().phi);
  for (std::int64_t dt : {-3, 0, 2, 11}) {
    const Tensor h = f.time_diff(dt).value();
    ASSERT_EQ(h.size(), cfg.dim);
    for (std::size_t k = 0; k < cfg.dim; ++k)
      EXPECT_NEAR(h[k], std::sqrt(1.0 / cfg.dim) * std::cos(omega[k] * dt + phi[k]), 1e-15);
  }
  const Tensor node = f.node(2, 3, 3).value();
  ASSERT_EQ(node.size(), 2 * cfg.dim);
  const Tensor zero = f.time_diff(0).value();
  for (std::size_t k = 0; k < cfg.dim; ++k) EXPECT_EQ(node[cfg.dim + k], zero[k]);
}

TEST_F(EncoderOnToy, OutputIsInvariantToTokenOrder) {
  const Tensor a = encode(model, tokens, 4.0);
  const Tensor b = encode(model, {tokens[2], tokens[0], tokens[1]}, 4.0);
  EXPECT_LT(max_diff(a, b), 1e-12);
}

TEST_F(EncoderOnToy, OutputDependsOnTokenTimesAndClsTime) {
  const Tensor a = encode(model, tokens, 4.0);
  auto moved = tokens;
  moved[1].time = 1;
  EXPECT_GT(max_diff(a, encode(model, moved, 4.0)), 1e-6);
  EXPECT_GT(max_diff(a, encode(model, tokens, 2.0)), 1e-6);
}

TEST_F(EncoderOnToy, WithoutTemporalTermsTimesAreIgnored) {
  model.mutable_config().ablation.no_temporal = true;
  FitcarlModel m(model.config(), split.num_entities(), split.vocab.relations.num_ids(), 3);
  randomize(m, 8, 0.5);
  auto moved = tokens;
  moved[1].time = 1;
  moved[2].time = 0;
  EXPECT_EQ(encode(m, tokens, 4.0), encode(m, moved, 1.0));
}

TEST_F(EncoderOnToy, AttentionRowsAreDistributions) {
  Tape tape(&model.params(), false);
  Forward f(model, tape);
  std::vector<AttentionTrace> trace;
  encode_entity(f, tokens, 4.0, &trace);
  EXPECT_EQ(trace.size(), cfg.layers * cfg.heads);
  for (const auto& t : trace) {
    const std::size_t n = tokens.size() + 1;
    ASSERT_EQ(t.probs.size(), n * n);
    for (std::size_t i = 0; i < n; ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < n; ++j) s += t.probs[i * n + j];
      EXPECT_NEAR(s, 1.0, 1e-12);
    }
  }
}

TEST_F(EncoderOnToy, TaskEntitiesUseTheEncoderAndOthersTheTable) {
  EpisodeTask task;
  task.which = MetaSet::Train;
  task.shots = 2;
  task.entities.push_back({7, {{7, 1, 1, 0}, {3, 1, 7, 2}}, {{7, 1, 5, 3}}});
  Tape tape(&model.params(), false);
  Forward f(model, tape);
  f.attach_task(&task, 7, 3);
  const Tensor h7 = f.entity(7).value();
  EXPECT_EQ(h7, encode(model, neighborhood(7, task.entities[0].support), 3.0));
  EXPECT_NE(h7, f.embedding(7).value());
  EXPECT_EQ(f.entity(2).value(), f.embedding(2).value());
  const ReprCache cache = encode_all_unseen(model, task, 7, 3);
  EXPECT_EQ(cache.at(7), h7);
}

TEST(ComplexScore, MatchesStdComplexOracle) {
  RngStream rng(3, "emb");
  const ComplexEmbedding emb = init_embedding(5, 7, 6, 0.7, rng);
  const std::size_t k = emb.dim / 2;
  for (EntityId s = 0; s < 5; ++s) {
    for (RelationId r = 0; r < 7; ++r) {
      const EntityId o = (s + 2 * r + 1) % 5;
      std::complex<double> acc = 0.0;
      for (std::size_t i = 0; i < k; ++i) {
        const std::complex<double> es(emb.entities.at(s, i), emb.entities.at(s, k + i));
        const std::complex<double> wr(emb.relations.at(r, i), emb.relations.at(r, k + i));
        const std::complex<double> eo(emb.entities.at(o, i), emb.entities.at(o, k + i));
        acc += es * wr * std::conj(eo);
      }
      EXPECT_NEAR(complex_score(emb, s, r, o), acc.real(), 1e-14);
    }
  }
  EXPECT_THROW(complex_score(emb, 5, 0, 0), std::out_of_range);
  EXPECT_THROW(init_embedding(5, 7, 5, 0.1, rng), std::invalid_argument);
}

TEST(Pretrain, LossDecreasesAndRoundTrips) {
  const OogSplit s = toy_split();
  PretrainConfig c;
  c.dim = 8;
  c.epochs = 40;
  c.batch_size = 8;
  c.neg_ratio = 4;
  c.lr = 0.05;
  c.seed = 2;
  std::vector<double> losses;
  const ComplexEmbedding a = pretrain(s.background, s.num_entities(), s.vocab.relations.num_ids(), c, &losses);
  ASSERT_EQ(losses.size(), 40u);
  EXPECT_LT(losses.back(), 0.5 * losses.front());
  const ComplexEmbedding b = pretrain(s.background, s.num_entities(), s.vocab.relations.num_ids(), c);
  EXPECT_EQ(a, b);
  // True facts outscore a corrupted object on average.
  double pos = 0.0, neg = 0.0;
  for (const auto& q : s.background.quads()) {
    pos += complex_score(a, q.subject, q.relation, q.object);
    neg += complex_score(a, q.subject, q.relation, (q.object + 3) % 7);
  }
  EXPECT_GT(pos, neg);
  std::stringstream buf;
  write_embedding(buf, a);
  EXPECT_EQ(read_embedding(buf), a);
}

TEST(Pretrain, LoadsIntoTheModelTables) {
  const OogSplit s = toy_split();
  RngStream rng(1, "emb");
  const ComplexEmbedding emb = init_embedding(s.num_entities(), s.vocab.relations.num_ids(), 4, 0.3, rng);
  FitcarlModel m(toy_config(4), s.num_entities(), s.vocab.relations.num_ids(), 1);
  m.load_embeddings(emb);
  EXPECT_EQ(m.params().value(m.ids().entity), emb.entities);
  EXPECT_EQ(m.params().value(m.ids().relation), emb.relations);
}

}  // namespace
}  // namespace fitcarl
