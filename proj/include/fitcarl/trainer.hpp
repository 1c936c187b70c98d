#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <vector>

#include "fitcarl/adam.hpp"
#include "fitcarl/checkpoint.hpp"
#include "fitcarl/evaluation.hpp"
#include "fitcarl/rollout.hpp"

namespace fitcarl {

struct TrainConfig {
  std::size_t shots = 1;
  std::size_t episodes = 1000;
  AdamConfig adam;
  std::uint64_t seed = 0;
  /// Meta-validation cadence in episodes; 0 disables validation.
  std::size_t valid_every = 50;
  std::size_t valid_beam = 100;
  std::vector<std::uint64_t> valid_seeds{1};
  std::size_t workers = 1;
};

struct EpisodeResult {
  double loss = 0.0;
  std::size_t queries = 0;
  Gradients grads;
};

/// Rolls out every query of the task against a parameter snapshot. Thread
/// gradients are summed in thread order, so a fixed worker count gives a
/// fixed result. `record` receives the per-query trajectories in query order.
EpisodeResult run_episode(const FitcarlModel& model, const OogSplit& split, const EpisodeTask& task,
                          const RngStream& episode_rng, std::size_t workers, std::vector<Rollout>* record = nullptr);

struct CurvePoint {
  std::size_t episode = 0;
  double loss = 0.0;
  std::optional<double> valid_mrr;
};

struct TrainResult {
  Checkpoint best;
  Checkpoint last;
  /// Validation MRR of the initial parameters (when validation ran).
  std::optional<double> initial_mrr;
  double best_mrr = 0.0;
  std::size_t best_episode = 0;
  std::vector<CurvePoint> curve;
};

/// Task of training episode `episode`.
EpisodeTask training_task(const OogSplit& split, std::size_t shots, std::uint64_t seed, std::size_t episode);

/// Episodic meta-training. Validation runs before the first episode, every
/// `valid_every` episodes and after the last one; the best validation MRR
/// decides the retained checkpoint.
TrainResult meta_train(const OogSplit& split, FitcarlModel model, const TrainConfig& config);

/// CSV `episode,loss,valid_mrr` (empty valid_mrr between validations).
/// Episode numbers count completed episodes, starting at 1.
void write_curve_csv(std::ostream& out, const std::vector<CurvePoint>& curve);

}  // namespace fitcarl
