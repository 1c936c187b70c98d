#include <gtest/gtest.h>


#include "support.hpp"

namespace fitcarl {
namespace {

TEST(Gradients, EpisodeLossMatchesFiniteDifferences) {
  const OogSplit split = testing::toy_split();
  ModelConfig cfg = testing::toy_config(4);
  cfg.reward_gradient = true;
  FitcarlModel model(cfg, split.num_entities(), split.vocab.relations.num_ids(), 3);
  RngStream task_rng(11, "task");
  const EpisodeTask task = sample_task(split, MetaSet::Train, 3, task_rng);
  ASSERT_EQ(task.num_queries(), 2u);
  const auto check = testing::check_episode_gradients(model, split, task, RngStream(5, "episode"));
  EXPECT_TRUE(check.trajectories_stable);
  EXPECT_LT(check.max_rel_error, 1e-4) << check.worst;
}

}  // namespace
}  // namespace fitcarl
