#pragma once

#include <cstdint>

#include "fitcarl/split.hpp"

namespace fitcarl {

/// Generated TKG with a planted concept rule: the objects of relation r all
/// carry concept r. Half of the entities are objects, the other half are
/// subjects. Time is cut into segments and each relation has one active
/// object per segment. A subject is active around its own period and links
/// to the active object of every relation at the time of each fact, plus a
/// few random facts. The answer of a query is then reachable in three hops
/// (unseen -> support object -> subject active at the same time -> answer).
struct SyntheticConfig {
  std::size_t entities = 200;
  std::size_t relations = 10;
  std::size_t timestamps = 50;
  std::size_t concepts = 20;
  std::size_t facts_per_relation = 1;
  std::size_t noise_facts = 2;  // random extra facts per subject
  Timestamp time_spread = 2;    // facts fall within +-spread of the subject's period
  std::size_t segment_length = 10;
  std::size_t unseen_train = 24;
  std::size_t unseen_valid = 6;
  std::size_t unseen_test = 10;
  std::uint64_t seed = 0;
};

OogSplit make_synthetic(const SyntheticConfig& config);

}  // namespace fitcarl
