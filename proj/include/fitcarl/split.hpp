#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "fitcarl/graph_store.hpp"
#include "fitcarl/rng.hpp"

namespace fitcarl {

enum class MetaSet : std::uint8_t { Train = 0, Valid = 1, Test = 2 };

const char* meta_set_name(MetaSet which);
MetaSet parse_meta_set(const std::string& name);

/// Background graph plus three disjoint groups of unseen entities and the
/// facts touching them. No fact links entities of two different groups and
/// the background contains no unseen entity.
struct OogSplit {
  Vocabulary vocab;
  TimeAxis axis;
  TkgStore background;
  std::array<std::vector<EntityId>, 3> unseen;  // sorted ids
  std::array<std::vector<Quadruple>, 3> facts;
  ConceptTable concepts;  // priors computed over the background

  std::size_t num_entities() const { return vocab.entities.size(); }
  const std::vector<EntityId>& unseen_set(MetaSet which) const { return unseen[static_cast<int>(which)]; }
  const std::vector<Quadruple>& fact_set(MetaSet which) const { return facts[static_cast<int>(which)]; }
  /// Group of an unseen entity, nullopt for background entities.
  std::optional<MetaSet> group_of(EntityId e) const;
};

/// Throws DataError naming the offending entity or quadruple.
void validate_split(const OogSplit& split);

/// Reads background.txt, meta_train.txt, meta_valid.txt, meta_test.txt and
/// concepts.txt from `dir`. Unseen entities of a group are the entities of
/// its file that never occur in the background.
OogSplit load_split(const std::filesystem::path& dir);
void save_split(const OogSplit& split, const std::filesystem::path& dir);

struct SplitFractions {
  double train = 0.08;
  double valid = 0.01;
  double test = 0.01;
};

/// Randomly selects unseen entities from `store`, keeps every fact without
/// an unseen entity as background and drops facts linking two groups.
OogSplit make_split(const Vocabulary& vocab, const TimeAxis& axis, const TkgStore& store,
                    const ConceptTable& concepts, const SplitFractions& fractions, std::uint64_t seed);

struct EntityShots {
  EntityId entity = 0;
  std::vector<Quadruple> support;  // in sampling order
  std::vector<Quadruple> query;    // in file order
};

/// One meta-learning task: K-shot support and query sets for every usable
/// unseen entity of a group.
struct EpisodeTask {
  MetaSet which = MetaSet::Train;
  std::size_t shots = 0;
  std::vector<EntityShots> entities;  // sorted by entity id

  const EntityShots* find(EntityId e) const;
  bool contains(EntityId e) const { return find(e) != nullptr; }
  std::size_t num_queries() const;
};

/// All facts of `e` within a group's fact set, in file order.
std::vector<Quadruple> facts_of(const OogSplit& split, MetaSet which, EntityId e);

/// Samples K support facts uniformly without replacement for every entity of
/// the group; entities with at most K facts are skipped.
EpisodeTask sample_task(const OogSplit& split, MetaSet which, std::size_t shots, RngStream& rng);

/// Link-prediction query (source, relation, ?, time) with its answer.
struct LpQuery {
  EntityId source = 0;
  RelationId relation = 0;
  Timestamp time = 0;
  EntityId answer = 0;

  friend bool operator==(const LpQuery&, const LpQuery&) = default;
};

/// Rewrites query facts of `e` into object-prediction queries starting at e.
std::vector<LpQuery> derive_queries(const EpisodeTask& task, EntityId e);
std::vector<LpQuery> derive_all_queries(const EpisodeTask& task);

/// Table-1 style dataset statistics.
struct SplitStats {
  std::size_t entities = 0, relations = 0, timestamps = 0;
  std::array<std::size_t, 3> unseen{};
  std::size_t background = 0;
  std::array<std::size_t, 3> meta_facts{};
};

SplitStats compute_stats(const OogSplit& split);

}  // namespace fitcarl
