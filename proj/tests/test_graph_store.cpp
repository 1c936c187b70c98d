#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "fitcarl/graph_store.hpp"
#include "fitcarl/rng.hpp"

namespace fitcarl {
namespace {

namespace fs = std::filesystem;

class TempDir {
 public:
  TempDir() {
    path_ = fs::temp_directory_path() / ("fitcarl_gs_" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()) +
                                         "_" + ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  fs::path write(const std::string& name, const std::string& text) const {
    std::ofstream(path_ / name) << text;
    return path_ / name;
  }

 private:
  fs::path path_;
};

TEST(RelationIds, LayoutAndInverses) {
  RelationVocab v;
  EXPECT_EQ(v.intern("a"), 1u);
  EXPECT_EQ(v.intern("b"), 3u);
  EXPECT_EQ(v.intern("a"), 1u);
  EXPECT_EQ(v.num_ids(), 5u);
  EXPECT_EQ(RelationVocab::inverse_of(1), 2u);
  EXPECT_EQ(RelationVocab::inverse_of(2), 1u);
  EXPECT_EQ(RelationVocab::inverse_of(kSelfLoop), kSelfLoop);
  EXPECT_TRUE(RelationVocab::is_inverse(4));
  EXPECT_FALSE(RelationVocab::is_inverse(3));
  EXPECT_EQ(v.name(4), "b^-1");
  EXPECT_EQ(v.name(0), "SELF_LOOP");
  EXPECT_EQ(v.find("b"), 3u);
  EXPECT_FALSE(v.find("c").has_value());
}

TEST(TkgStore, OutEdgesHoldBothDirectionsInFileOrder) {
  TkgStore s(4, {{0, 1, 1, 5}, {2, 3, 0, 1}, {0, 3, 2, 2}});
  const auto e0 = s.out_edges(0);
  ASSERT_EQ(e0.size(), 3u);
  EXPECT_EQ(e0[0], (Edge{1, 1, 5}));
  EXPECT_EQ(e0[1], (Edge{4, 2, 1}));
  EXPECT_EQ(e0[2], (Edge{3, 2, 2}));
  ASSERT_EQ(s.out_edges(1).size(), 1u);
  EXPECT_EQ(s.out_edges(1)[0], (Edge{2, 0, 5}));
  EXPECT_TRUE(s.out_edges(3).empty());
  EXPECT_EQ(s.time_span(), std::make_pair(1, 5));
  EXPECT_EQ(s.entities(), (std::vector<EntityId>{0, 1, 2}));
  EXPECT_EQ(s.distinct_timestamps(), 3u);
  EXPECT_EQ(s.num_edges(), 6u);
}

TEST(TkgStore, RandomStoresMatchEdgeCountingOracle) {
  RngStream rng(9, "store");
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 2 + rng.uniform_index(20);
    std::vector<Quadruple> quads;
    std::multimap<EntityId, Edge> oracle;
    const std::size_t m = rng.uniform_index(60);
    for (std::size_t k = 0; k < m; ++k) {
      Quadruple q{static_cast<EntityId>(rng.uniform_index(n)),
                  RelationVocab::original_id(static_cast<std::uint32_t>(rng.uniform_index(3))),
                  static_cast<EntityId>(rng.uniform_index(n)), static_cast<Timestamp>(rng.uniform_index(10))};
      quads.push_back(q);
    }
    for (const auto& q : quads) oracle.insert({q.subject, Edge{q.relation, q.object, q.timestamp}});
    for (const auto& q : quads)
      oracle.insert({q.object, Edge{RelationVocab::inverse_of(q.relation), q.subject, q.timestamp}});
    TkgStore s(n, quads);
    for (EntityId e = 0; e < n; ++e) {
      auto [lo, hi] = oracle.equal_range(e);
      std::vector<Edge> want;
      for (auto it = lo; it != hi; ++it) want.push_back(it->second);
      const auto got = s.out_edges(e);
      ASSERT_EQ(got.size(), want.size());
      // Multiset equality; edge order is checked separately.
      for (const auto& w : want)
        EXPECT_EQ(std::count(got.begin(), got.end(), w), std::count(want.begin(), want.end(), w));
    }
  }
}

TEST(TkgStore, InvalidQuadsThrow) {
  EXPECT_THROW(TkgStore(2, {{0, 1, 2, 0}}), DataError);
  EXPECT_THROW(TkgStore(2, {{0, 1, 1, -1}}), DataError);
}

TEST(TkgStore, BinaryRoundTrip) {
  TkgStore s(5, {{0, 1, 4, 3}, {3, 3, 1, 2}});
  std::stringstream buf;
  write_store(buf, s);
  const TkgStore r = read_store(buf);
  EXPECT_EQ(r.quads(), s.quads());
  EXPECT_EQ(r.num_entities(), 5u);
}

TEST(Loading, IntegerTimestampsKeepTheirValues) {
  TempDir dir;
  const auto p = dir.write("a.txt", "x\tlikes\ty\t12\ny\tvisits\tz\t3\n");
  Vocabulary vocab;
  TimeAxis axis;
  const TkgStore s = load_quadruples(p, vocab, VocabMode::Build, &axis);
  EXPECT_FALSE(axis.dates);
  ASSERT_EQ(s.quads().size(), 2u);
  EXPECT_EQ(s.quads()[0], (Quadruple{0, 1, 1, 12}));
  EXPECT_EQ(s.quads()[1], (Quadruple{1, 3, 2, 3}));
  EXPECT_EQ(vocab.entities.size(), 3u);
}

TEST(Loading, DatesBecomeDayOffsetsFromTheEarliestDate) {
  TempDir dir;
  const auto a = dir.write("a.txt", "x\tr\ty\t2014-01-03\n");
  const auto b = dir.write("b.txt", "y\tr\tz\t2014-01-01\nz\tr\tx\t2014-03-01\n");
  Vocabulary vocab;
  const auto loaded = load_quadruple_files({a, b}, vocab, VocabMode::Build);
  EXPECT_TRUE(loaded.axis.dates);
  EXPECT_EQ(loaded.files[0][0].timestamp, 2);
  EXPECT_EQ(loaded.files[1][0].timestamp, 0);
  EXPECT_EQ(loaded.files[1][1].timestamp, 59);
  EXPECT_EQ(loaded.axis.format(59), "2014-03-01");
}

TEST(Loading, MalformedInputThrows) {
  TempDir dir;
  Vocabulary vocab;
  EXPECT_THROW(load_quadruples(dir.write("f.txt", "x\tr\ty\n"), vocab, VocabMode::Build), DataError);
  EXPECT_THROW(load_quadruples(dir.write("g.txt", "x\tr\ty\tnoon\n"), vocab, VocabMode::Build), DataError);
  EXPECT_THROW(load_quadruple_files({dir.write("h.txt", "x\tr\ty\t3\n"), dir.write("i.txt", "x\tr\ty\t2014-01-01\n")},
                                    vocab, VocabMode::Build),
               DataError);
  EXPECT_THROW(load_quadruples(fs::path("/nonexistent/quads.txt"), vocab, VocabMode::Build), DataError);
}

TEST(Loading, FrozenVocabularyRejectsNewNames) {
  TempDir dir;
  Vocabulary vocab;
  load_quadruples(dir.write("a.txt", "x\tr\ty\t1\n"), vocab, VocabMode::Build);
  EXPECT_THROW(load_quadruples(dir.write("b.txt", "x\tr\tw\t1\n"), vocab, VocabMode::Frozen), DataError);
}

TEST(Concepts, PriorCountsObjectConceptsPerFact) {
  // Relation 1 objects: e1 {A}, e2 {A, B}; inverse relation 2 counts subject e0 {B}.
  TkgStore bg(3, {{0, 1, 1, 0}, {0, 1, 2, 0}});
  ConceptTable t(3);
  const auto A = t.names().intern("A"), B = t.names().intern("B");
  t.add_concept(0, B);
  t.add_concept(1, A);
  t.add_concept(2, A);
  t.add_concept(2, B);
  compute_concept_prior(bg, 3, t);
  EXPECT_DOUBLE_EQ(t.prior_prob(1, A), 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(t.prior_prob(1, B), 1.0 / 3.0);
  EXPECT_DOUBLE_EQ(t.prior_prob(2, B), 1.0);
  EXPECT_DOUBLE_EQ(t.prior_prob(2, A), 0.0);
  EXPECT_FALSE(t.has_prior(kSelfLoop));
  EXPECT_DOUBLE_EQ(t.concept_mass(1, 2), 1.0);
  EXPECT_DOUBLE_EQ(t.concept_mass(1, 1), 2.0 / 3.0);
}

TEST(Concepts, RandomPriorsMatchCountingOracle) {
  RngStream rng(4, "prior");
  const std::size_t n = 15, rels = 3, nc = 4;
  std::vector<Quadruple> quads;
  for (int k = 0; k < 80; ++k)
    quads.push_back({static_cast<EntityId>(rng.uniform_index(n)),
                     RelationVocab::original_id(static_cast<std::uint32_t>(rng.uniform_index(rels))),
                     static_cast<EntityId>(rng.uniform_index(n)), 0});
  ConceptTable t(n);
  for (std::size_t c = 0; c < nc; ++c) t.names().intern("c" + std::to_string(c));
  for (EntityId e = 0; e < n; ++e)
    for (ConceptId c = 0; c < nc; ++c)
      if (rng.uniform() < 0.4) t.add_concept(e, c);
  TkgStore bg(n, quads);
  compute_concept_prior(bg, 1 + 2 * rels, t);
  for (RelationId r = 1; r < 1 + 2 * rels; ++r) {
    std::vector<double> count(nc, 0.0);
    for (const auto& q : quads) {
      const bool inverse = RelationVocab::is_inverse(r);
      if (q.relation != (inverse ? RelationVocab::inverse_of(r) : r)) continue;
      for (const auto c : t.concepts_of(inverse ? q.subject : q.object)) count[c] += 1;
    }
    double total = 0;
    for (double c : count) total += c;
    for (ConceptId c = 0; c < nc; ++c)
      EXPECT_NEAR(t.prior_prob(r, c), total > 0 ? count[c] / total : 0.0, 1e-15) << r << " " << c;
  }
}

TEST(Concepts, LoadingUnionsRepeatedEntities) {
  TempDir dir;
  Vocabulary vocab;
  vocab.entities.intern("x");
  vocab.entities.intern("y");
  const auto t = load_concepts(dir.write("c.txt", "x\tA|B\nx\tC\n"), vocab);
  EXPECT_EQ(t.concepts_of(0).size(), 3u);
  EXPECT_TRUE(t.concepts_of(1).empty());
}

}  // namespace
}  // namespace fitcarl
