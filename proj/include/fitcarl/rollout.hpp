#pragma once

#include <vector>

#include "fitcarl/policy.hpp"

namespace fitcarl {

/// Values stored for one sampled step.
struct RolloutStep {
  SearchState state;
  ActionCandidate action;
  double pi = 0.0;
  double reward = 0.0;
  double kl = 0.0;
};

struct Rollout {
  LpQuery query;
  std::vector<RolloutStep> steps;
};

/// Everything a training rollout reads besides the model.
struct RolloutEnv {
  const ActionGraph& graph;
  const ConceptTable& concepts;
  const EpisodeTask& task;
};

/// Samples an L-step trajectory from pi and returns the query's loss
/// sum_l gamma^l (eta KL_l - log pi_l R_l) on the tape of `f`.
Var rollout_loss(Forward& f, const RolloutEnv& env, const LpQuery& query, RngStream& rng, Rollout* record = nullptr);

/// Episode loss from stored values: the sum of every query's discounted
/// terms divided by `total_queries`.
double episode_loss(const std::vector<Rollout>& rollouts, double gamma, double eta, std::size_t total_queries);

}  // namespace fitcarl
