#include "fitcarl/rollout.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace fitcarl {

namespace {

std::size_t sample_index(const Tensor& probs, RngStream& rng) {
  const double u = rng.uniform();
  double acc = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    acc += probs[i];
    if (u < acc) return i;
  }
  return probs.size() - 1;
}

}  // namespace

Var rollout_loss(Forward& f, const RolloutEnv& env, const LpQuery& query, RngStream& rng, Rollout* record) {
  const auto& cfg = f.config();
  f.attach_task(&env.task, query.source, query.time);
  RngStream actions = rng.child("actions");
  RngStream random_base = rng.child("action_space");

  SearchState state = initial_state(query);
  Var hidden = initial_history(f, state);
  Var loss;
  if (record) {
    record->query = query;
    record->steps.clear();
  }
  const bool use_kl = !cfg.ablation.no_concept && cfg.eta > 0.0 &&
                      !(cfg.empty_prior_zero_kl && !env.concepts.has_prior(query.relation));
  double discount = 1.0;
  for (std::size_t l = 0; l < cfg.steps; ++l) {
    auto cands = sample_action_space(env.graph, state, f.model(), &random_base);
    StepOutput out = policy_step(f, state, hidden, cands);
    const std::size_t pick_idx = sample_index(out.pi.value(), actions);
    const ActionCandidate& a = cands[pick_idx];

    Var log_pi = log(pick(out.pi, pick_idx));
    Var r = reward(f, a.entity, query.answer);
    Var term = neg(log_pi * r);
    double kl_value = 0.0;
    if (use_kl) {
      Var kl = concept_kl(out.pi, concept_action_prob(env.concepts, query.relation, cands));
      kl_value = kl.item();
      term = term + scale(kl, static_cast<Real>(cfg.eta));
    }
    term = scale(term, static_cast<Real>(discount));
    loss = loss.valid() ? loss + term : term;

    if (record) record->steps.push_back({state, a, out.pi.value()[pick_idx], r.item(), kl_value});
    state = transition(state, a);
    if (l + 1 < cfg.steps) hidden = encode_history(f, hidden, f.relation(a.relation), f.node(a.entity, a.time, state.query_time));
    discount *= cfg.gamma;
  }
  return loss;
}

double episode_loss(const std::vector<Rollout>& rollouts, double gamma, double eta, std::size_t total_queries) {
  if (total_queries == 0) return 0.0;
  double total = 0.0;
  for (const auto& ro : rollouts) {
    double discount = 1.0;
    for (const auto& s : ro.steps) {
      total += discount * (eta * s.kl - std::log(std::max(s.pi, 1e-12)) * s.reward);
      discount *= gamma;
    }
  }
  return total / static_cast<double>(total_queries);
}

}  // namespace fitcarl
