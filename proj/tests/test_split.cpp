#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <set>
#include <sstream>
#include <tuple>

#include "fitcarl/adam.hpp"
#include "fitcarl/synthetic.hpp"
#include "support.hpp"

namespace fitcarl {
namespace {

using testing::random_split;
using testing::toy_split;

using NamedQuad = std::tuple<std::string, std::string, std::string, Timestamp>;

// Reloading renumbers entities in first-seen order, so compare by name.
std::vector<NamedQuad> named(const OogSplit& s, const std::vector<Quadruple>& quads) {
  std::vector<NamedQuad> out;
  for (const auto& q : quads)
    out.emplace_back(s.vocab.entities.name(q.subject), s.vocab.relations.name(q.relation),
                     s.vocab.entities.name(q.object), q.timestamp);
  return out;
}

void expect_same_split(const OogSplit& a, const OogSplit& b) {
  EXPECT_EQ(named(a, a.background.quads()), named(b, b.background.quads()));
  for (int g = 0; g < 3; ++g) {
    EXPECT_EQ(named(a, a.facts[g]), named(b, b.facts[g]));
    std::set<std::string> ua, ub;
    for (EntityId e : a.unseen[g]) ua.insert(a.vocab.entities.name(e));
    for (EntityId e : b.unseen[g]) ub.insert(b.vocab.entities.name(e));
    EXPECT_EQ(ua, ub);
  }
  for (EntityId e = 0; e < a.num_entities(); ++e) {
    const auto other = b.vocab.entities.find(a.vocab.entities.name(e));
    if (!other) {
      EXPECT_TRUE(a.concepts.concepts_of(e).empty());
      continue;
    }
    std::set<std::string> ca, cb;
    for (auto c : a.concepts.concepts_of(e)) ca.insert(a.concepts.names().name(c));
    for (auto c : b.concepts.concepts_of(*other)) cb.insert(b.concepts.names().name(c));
    EXPECT_EQ(ca, cb);
  }
}

void expect_partition(const OogSplit& split, const EpisodeTask& task) {
  for (const auto& es : task.entities) {
    EXPECT_EQ(es.support.size(), task.shots);
    std::vector<Quadruple> all = es.support;
    all.insert(all.end(), es.query.begin(), es.query.end());
    std::sort(all.begin(), all.end());
    auto facts = facts_of(split, task.which, es.entity);
    std::sort(facts.begin(), facts.end());
    EXPECT_EQ(all, facts);
    EXPECT_TRUE(std::adjacent_find(all.begin(), all.end()) == all.end());
  }
}

TEST(Split, ToySplitIsValid) {
  const OogSplit s = toy_split();
  EXPECT_EQ(s.group_of(7), MetaSet::Train);
  EXPECT_EQ(s.group_of(9), MetaSet::Test);
  EXPECT_FALSE(s.group_of(3).has_value());
}

TEST(Split, CrossGroupFactIsRejected) {
  OogSplit s = toy_split();
  s.facts[0].push_back({7, 1, 8, 0});
  try {
    validate_split(s);
    FAIL() << "no error";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("e8"), std::string::npos) << e.what();
  }
}

TEST(Split, BackgroundWithUnseenEntityIsRejected) {
  OogSplit s = toy_split();
  auto quads = s.background.quads();
  quads.push_back({0, 1, 9, 0});
  s.background = TkgStore(10, quads);
  EXPECT_THROW(validate_split(s), DataError);
}

TEST(Split, MakeSplitSatisfiesInvariantsAndIsDeterministic) {
  const OogSplit a = random_split(3, 200, 5, 30, 2000);
  const OogSplit b = random_split(3, 200, 5, 30, 2000);
  EXPECT_NO_THROW(validate_split(a));
  EXPECT_EQ(a.unseen, b.unseen);
  EXPECT_EQ(a.facts, b.facts);
  EXPECT_EQ(a.background.quads(), b.background.quads());
  EXPECT_EQ(a.unseen[0].size(), 20u);
  EXPECT_EQ(a.unseen[1].size(), 10u);
  EXPECT_EQ(a.unseen[2].size(), 10u);
  const OogSplit c = random_split(4, 200, 5, 30, 2000);
  EXPECT_NE(a.unseen, c.unseen);
}

TEST(Split, MakeSplitRejectsBadFractions) {
  const OogSplit a = random_split(3, 50, 3, 10, 300);
  EXPECT_THROW(make_split(a.vocab, a.axis, a.background, a.concepts, {0.5, 0.4, 0.3}, 1), std::invalid_argument);
  EXPECT_THROW(make_split(a.vocab, a.axis, a.background, a.concepts, {0.0, 0.1, 0.1}, 1), std::invalid_argument);
}

TEST(Split, SaveLoadRoundTrip) {
  const OogSplit a = random_split(5, 60, 3, 10, 500);
  const auto dir = std::filesystem::temp_directory_path() / "fitcarl_split_roundtrip";
  std::filesystem::remove_all(dir);
  save_split(a, dir);
  const OogSplit b = load_split(dir);
  std::filesystem::remove_all(dir);
  expect_same_split(a, b);
}

TEST(Tasks, SupportAndQueryPartitionEveryEntity) {
  const OogSplit s = random_split(7, 120, 4, 20, 1500);
  for (auto which : {MetaSet::Train, MetaSet::Valid, MetaSet::Test}) {
    for (std::size_t k : {1u, 2u, 3u}) {
      RngStream rng(1, "task");
      const EpisodeTask t = sample_task(s, which, k, rng);
      expect_partition(s, t);
      for (const auto& es : t.entities) EXPECT_GT(facts_of(s, which, es.entity).size(), k);
    }
  }
}

TEST(Tasks, EntitiesWithAtMostKFactsAreSkipped) {
  const OogSplit s = toy_split();  // five facts per unseen entity
  RngStream rng(1, "task");
  EXPECT_EQ(sample_task(s, MetaSet::Train, 4, rng).entities.size(), 1u);
  EXPECT_TRUE(sample_task(s, MetaSet::Train, 5, rng).entities.empty());
  EXPECT_THROW(sample_task(s, MetaSet::Train, 0, rng), std::invalid_argument);
}

TEST(Tasks, SameStreamPositionGivesTheSameTask) {
  const OogSplit s = random_split(7, 120, 4, 20, 1500);
  RngStream a(9, "task"), b(9, "task");
  const auto ta = sample_task(s, MetaSet::Train, 2, a), tb = sample_task(s, MetaSet::Train, 2, b);
  ASSERT_EQ(ta.entities.size(), tb.entities.size());
  for (std::size_t i = 0; i < ta.entities.size(); ++i) EXPECT_EQ(ta.entities[i].support, tb.entities[i].support);
  // A fact between two unseen entities of the group is a query of both.
  std::size_t want = 0;
  for (EntityId e : s.unseen[0]) {
    const auto n = facts_of(s, MetaSet::Train, e).size();
    if (n > 2) want += n - 2;
  }
  EXPECT_EQ(ta.num_queries(), want);
}

TEST(Queries, SubjectSideFactsUseTheInverseRelation) {
  EpisodeTask t;
  t.shots = 1;
  t.entities.push_back({7, {{7, 1, 2, 0}}, {{7, 1, 4, 7}, {4, 3, 7, 7}, {7, 3, 1, 2}, {5, 1, 7, 9}}});
  const auto q = derive_queries(t, 7);
  ASSERT_EQ(q.size(), 4u);
  EXPECT_EQ(q[0], (LpQuery{7, 1, 7, 4}));
  EXPECT_EQ(q[1], (LpQuery{7, 4, 7, 4}));
  EXPECT_EQ(q[2], (LpQuery{7, 3, 2, 1}));
  EXPECT_EQ(q[3], (LpQuery{7, 2, 9, 5}));
  EXPECT_THROW(derive_queries(t, 8), std::invalid_argument);
  EXPECT_EQ(derive_all_queries(t).size(), 4u);
}

TEST(Stats, CountsMatchTheSplit) {
  const OogSplit s = toy_split();
  const SplitStats st = compute_stats(s);
  EXPECT_EQ(st.entities, 10u);
  EXPECT_EQ(st.relations, 2u);
  EXPECT_EQ(st.background, 12u);
  EXPECT_EQ(st.unseen, (std::array<std::size_t, 3>{1, 1, 1}));
  EXPECT_EQ(st.meta_facts, (std::array<std::size_t, 3>{5, 5, 5}));
}

TEST(Synthetic, GeneratedSplitIsValidAndReloads) {
  SyntheticConfig c;
  c.seed = 11;
  const OogSplit s = make_synthetic(c);
  EXPECT_NO_THROW(validate_split(s));
  EXPECT_EQ(s.unseen[0].size(), c.unseen_train);
  EXPECT_EQ(s.unseen[1].size(), c.unseen_valid);
  EXPECT_EQ(s.unseen[2].size(), c.unseen_test);
  EXPECT_EQ(s.num_entities(), c.entities);
  // Objects of relation r carry concept r.
  for (const auto& q : s.background.quads()) {
    const auto cs = s.concepts.concepts_of(q.object);
    const ConceptId want = (q.relation - 1) / 2;
    if (!cs.empty()) EXPECT_NE(std::find(cs.begin(), cs.end(), want), cs.end());
  }
  const auto dir = std::filesystem::temp_directory_path() / "fitcarl_synth_roundtrip";
  std::filesystem::remove_all(dir);
  save_split(s, dir);
  const OogSplit r = load_split(dir);
  std::filesystem::remove_all(dir);
  expect_same_split(s, r);
}

TEST(Synthetic, RejectsImpossibleConfigs) {
  SyntheticConfig c;
  c.concepts = c.relations;
  EXPECT_THROW(make_synthetic(c), std::invalid_argument);
}

TEST(Rng, SameSeedAndNameReproduce) {
  RngStream a(42, "task"), b(42, "task"), c(42, "action");
  bool differs = false;
  for (int i = 0; i < 100; ++i) {
    const double x = a.uniform();
    EXPECT_EQ(x, b.uniform());
    differs = differs || x != c.uniform();
  }
  EXPECT_TRUE(differs);
  EXPECT_EQ(RngStream(1, "x").child(3).uniform(), RngStream(1, "x").child(3).uniform());
  EXPECT_NE(RngStream(1, "x").child(3).uniform(), RngStream(1, "x").child(4).uniform());
}

TEST(Rng, UniformMeanAndRange) {
  RngStream r(42, "mean");
  double sum = 0.0;
  const int n = 1000000;
  for (int i = 0; i < n; ++i) {
    const double u = r.uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    sum += u;
  }
  EXPECT_NEAR(sum / n, 0.5, 0.01);
}

TEST(Rng, SamplingWithoutReplacementIsDistinct) {
  RngStream r(1, "sample");
  for (int t = 0; t < 100; ++t) {
    const auto s = r.sample_without_replacement(20, 7);
    ASSERT_EQ(s.size(), 7u);
    EXPECT_EQ(std::set<std::size_t>(s.begin(), s.end()).size(), 7u);
    for (auto v : s) EXPECT_LT(v, 20u);
  }
}

TEST(Adam, ZeroGradientKeepsParameters) {
  ParamStore p;
  const ParamId id = p.add("w", Tensor::vector({1.0, -2.0}));
  AdamState st(p, {});
  Gradients g(p);
  adam_step(p, g, st);
  EXPECT_EQ(p.value(id), Tensor::vector({1.0, -2.0}));
  EXPECT_EQ(st.step, 1u);
}

TEST(Adam, ConstantGradientMatchesClosedForm) {
  // With constant g the bias-corrected moments are exactly g and g^2, so every
  // step moves by lr * g / (|g| + eps).
  ParamStore p;
  const ParamId id = p.add("w", Tensor::vector({0.0, 0.0}));
  AdamConfig cfg;
  cfg.lr = 0.01;
  AdamState st(p, cfg);
  Gradients g(p);
  g[id] = Tensor::vector({0.5, -3.0});
  for (int k = 1; k <= 50; ++k) {
    adam_step(p, g, st);
    EXPECT_NEAR(p.value(id)[0], -k * 0.01 * 0.5 / (0.5 + 1e-8), 1e-12);
    EXPECT_NEAR(p.value(id)[1], k * 0.01 * 3.0 / (3.0 + 1e-8), 1e-12);
  }
}

TEST(Adam, StateRoundTripsBitExactly) {
  ParamStore p;
  const ParamId id = p.add("w", Tensor::vector({0.3, 0.1, -0.7}));
  AdamState st(p, {});
  Gradients g(p);
  g[id] = Tensor::vector({0.2, -0.4, 1e-3});
  adam_step(p, g, st);
  std::stringstream buf;
  write_adam_state(buf, st);
  EXPECT_EQ(read_adam_state(buf), st);
}

}  // namespace
}  // namespace fitcarl
