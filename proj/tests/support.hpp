#pragma once

#include <string>
#include <vector>

#include "fitcarl/evaluation.hpp"
#include "fitcarl/model.hpp"
#include "fitcarl/split.hpp"
#include "fitcarl/trainer.hpp"

namespace fitcarl::testing {

/// Ten entities, two relations, timestamps 0..5. e0..e6 form the background,
/// e7, e8 and e9 are the unseen entities of train, valid and test with five
/// facts each.
OogSplit toy_split();

/// Small model config for the toy split.
ModelConfig toy_config(std::size_t dim = 4);

struct GradCheck {
  std::size_t checked = 0;
  double max_rel_error = 0.0;
  std::string worst;  // parameter name and index
  bool trajectories_stable = true;
};

/// Central finite differences of the episode loss against the analytic
/// gradient for every parameter element. Sampled trajectories are recorded
/// at every probe; a probe that flips a sampled action is reported.
GradCheck check_episode_gradients(FitcarlModel& model, const OogSplit& split, const EpisodeTask& task,
                                  const RngStream& episode_rng, double h = 1e-5);

/// Scores every endpoint by enumerating all length-L trajectories, each step
/// on a fresh tape. Ranking is by score desc, then entity id.
struct Enumeration {
  std::vector<ScoredEntity> ranking;
  std::size_t trajectories = 0;
};
Enumeration enumerate_trajectories(const FitcarlModel& model, const ActionGraph& graph, const EpisodeTask* task,
                                   const LpQuery& query);

/// Random split with `entities` entities and dense facts, for property tests.
OogSplit random_split(std::uint64_t seed, std::size_t entities, std::size_t relations, std::size_t timestamps,
                      std::size_t facts);

}  // namespace fitcarl::testing
