#include "fitcarl/synthetic.hpp"

#include <algorithm>
#include <cstdio>
#include <stdexcept>

namespace fitcarl {

namespace {

std::string padded(const char* prefix, std::size_t i, int width) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%s%0*zu", prefix, width, i);
  return buf;
}

}  // namespace

OogSplit make_synthetic(const SyntheticConfig& c) {
  const std::size_t num_objects = c.entities / 2;
  const std::size_t num_subjects = c.entities - num_objects;
  if (c.relations == 0 || c.timestamps == 0) throw std::invalid_argument("synthetic: need relations and timestamps");
  if (c.concepts <= c.relations) throw std::invalid_argument("synthetic: need more concepts than relations");
  if (num_objects < c.relations) throw std::invalid_argument("synthetic: fewer object entities than relations");
  if (c.unseen_train + c.unseen_valid + c.unseen_test >= num_subjects) {
    throw std::invalid_argument("synthetic: " + std::to_string(num_subjects) +
                                " subjects cannot host the requested unseen entities");
  }
  if (c.segment_length == 0) throw std::invalid_argument("synthetic: segment length must be positive");
  if (c.unseen_train == 0 || c.unseen_valid == 0 || c.unseen_test == 0) {
    throw std::invalid_argument("synthetic: every group needs at least one unseen entity");
  }

  RngStream rng(c.seed, "synthetic");
  OogSplit split;
  for (std::size_t e = 0; e < c.entities; ++e) split.vocab.entities.intern(padded("e", e, 3));
  for (std::size_t r = 0; r < c.relations; ++r) split.vocab.relations.intern(padded("r", r, 2));

  ConceptTable concepts(c.entities);
  for (std::size_t k = 0; k < c.concepts; ++k) concepts.names().intern(padded("c", k, 2));
  const std::size_t subject_concepts = c.concepts - c.relations;
  for (std::size_t e = 0; e < c.entities; ++e) {
    const auto concept_id = e < num_objects ? e % c.relations : c.relations + (e - num_objects) % subject_concepts;
    concepts.add_concept(static_cast<EntityId>(e), static_cast<ConceptId>(concept_id));
  }
  std::vector<std::vector<EntityId>> pool(c.relations);
  for (std::size_t e = 0; e < num_objects; ++e) pool[e % c.relations].push_back(static_cast<EntityId>(e));

  const auto T = static_cast<Timestamp>(c.timestamps);
  auto clamp_time = [&](std::int64_t t) { return static_cast<Timestamp>(std::clamp<std::int64_t>(t, 0, T - 1)); };

  // Each relation has one active object per time segment.
  const std::size_t segments = (c.timestamps + c.segment_length - 1) / c.segment_length;
  std::vector<std::vector<EntityId>> active(c.relations, std::vector<EntityId>(segments));
  for (std::size_t r = 0; r < c.relations; ++r)
    for (auto& a : active[r]) a = pool[r][rng.uniform_index(pool[r].size())];

  std::vector<Quadruple> quads;
  for (std::size_t i = 0; i < num_subjects; ++i) {
    const auto s = static_cast<EntityId>(num_objects + i);
    const auto period = static_cast<std::int64_t>(rng.uniform_index(c.timestamps));
    for (std::size_t r = 0; r < c.relations; ++r) {
      for (std::size_t k = 0; k < c.facts_per_relation; ++k) {
        const auto jitter = static_cast<std::int64_t>(rng.uniform_index(2 * c.time_spread + 1)) - c.time_spread;
        const Timestamp t = clamp_time(period + jitter);
        quads.push_back({s, RelationVocab::original_id(static_cast<std::uint32_t>(r)),
                         active[r][static_cast<std::size_t>(t) / c.segment_length], t});
      }
    }
    for (std::size_t k = 0; k < c.noise_facts; ++k) {
      const auto r = rng.uniform_index(c.relations);
      quads.push_back({s, RelationVocab::original_id(static_cast<std::uint32_t>(r)),
                       pool[r][rng.uniform_index(pool[r].size())],
                       static_cast<Timestamp>(rng.uniform_index(c.timestamps))});
    }
  }
  std::sort(quads.begin(), quads.end(), [](const Quadruple& a, const Quadruple& b) {
    if (a.timestamp != b.timestamp) return a.timestamp < b.timestamp;
    return a < b;
  });
  quads.erase(std::unique(quads.begin(), quads.end()), quads.end());

  std::vector<int> group(c.entities, -1);
  auto order = rng.sample_without_replacement(num_subjects, c.unseen_train + c.unseen_valid + c.unseen_test);
  const std::size_t counts[3] = {c.unseen_train, c.unseen_valid, c.unseen_test};
  std::size_t cursor = 0;
  for (int g = 0; g < 3; ++g) {
    for (std::size_t i = 0; i < counts[g]; ++i) {
      const auto p = order[cursor++];
      const auto e = static_cast<EntityId>(num_objects + p);
      group[e] = g;
      split.unseen[g].push_back(e);
    }
    std::sort(split.unseen[g].begin(), split.unseen[g].end());
  }

  std::vector<Quadruple> background;
  std::vector<bool> in_background(c.entities, false);
  for (const auto& q : quads) {
    if (group[q.subject] == -1 && group[q.object] == -1) {
      background.push_back(q);
      in_background[q.subject] = in_background[q.object] = true;
    }
  }
  // Objects left out of the background get one fact from a background subject.
  std::vector<EntityId> hosts;
  for (std::size_t i = 0; i < num_subjects; ++i) {
    if (group[num_objects + i] == -1) hosts.push_back(static_cast<EntityId>(num_objects + i));
  }
  for (std::size_t o = 0; o < num_objects; ++o) {
    if (in_background[o]) continue;
    const auto t = static_cast<Timestamp>(rng.uniform_index(c.timestamps));
    background.push_back({hosts[rng.uniform_index(hosts.size())],
                          RelationVocab::original_id(static_cast<std::uint32_t>(o % c.relations)),
                          static_cast<EntityId>(o), t});
    in_background[o] = true;
  }
  std::stable_sort(background.begin(), background.end(),
                   [](const Quadruple& a, const Quadruple& b) { return a.timestamp < b.timestamp; });
  // Meta facts whose other endpoint is missing from the background would
  // make that endpoint look unseen as well.
  for (const auto& q : quads) {
    const int g = group[q.subject] != -1 ? group[q.subject] : group[q.object];
    if (g == -1) continue;
    const EntityId other = group[q.subject] != -1 ? q.object : q.subject;
    if (in_background[other]) split.facts[g].push_back(q);
  }
  split.background = TkgStore(c.entities, std::move(background));
  split.concepts = std::move(concepts);
  compute_concept_prior(split.background, split.vocab.relations.num_ids(), split.concepts);
  validate_split(split);
  return split;
}

}  // namespace fitcarl
