#include "support.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>

namespace fitcarl::testing {

OogSplit toy_split() {
  OogSplit split;
  for (int e = 0; e < 10; ++e) split.vocab.entities.intern("e" + std::to_string(e));
  const RelationId a = split.vocab.relations.intern("likes");
  const RelationId b = split.vocab.relations.intern("visits");

  std::vector<Quadruple> background = {
      {0, a, 1, 0}, {1, b, 2, 1}, {2, a, 3, 1}, {3, b, 4, 2}, {4, a, 5, 3}, {5, b, 6, 4},
      {6, a, 0, 5}, {0, b, 3, 2}, {1, a, 4, 3}, {2, b, 5, 0}, {3, a, 6, 4}, {4, b, 0, 5},
  };
  split.background = TkgStore(10, std::move(background));
  split.facts[0] = {{7, a, 1, 0}, {7, b, 2, 1}, {3, a, 7, 2}, {7, a, 5, 3}, {7, b, 6, 4}};
  split.facts[1] = {{8, a, 0, 1}, {8, b, 4, 2}, {2, b, 8, 3}, {8, a, 6, 4}, {8, b, 3, 5}};
  split.facts[2] = {{9, b, 1, 0}, {9, a, 3, 2}, {5, a, 9, 3}, {9, b, 0, 4}, {9, a, 2, 5}};
  split.unseen = {std::vector<EntityId>{7}, std::vector<EntityId>{8}, std::vector<EntityId>{9}};

  ConceptTable concepts(10);
  const auto person = concepts.names().intern("person");
  const auto place = concepts.names().intern("place");
  for (EntityId e = 0; e < 10; ++e) concepts.add_concept(e, e % 2 == 0 ? person : place);
  concepts.add_concept(3, person);
  split.concepts = std::move(concepts);
  compute_concept_prior(split.background, split.vocab.relations.num_ids(), split.concepts);
  validate_split(split);
  return split;
}

ModelConfig toy_config(std::size_t dim) {
  ModelConfig c;
  c.dim = dim;
  c.heads = 2;
  c.layers = 1;
  c.action_cap = 50;
  c.steps = 2;
  c.eta = 0.5;
  c.theta = 1.0;
  return c;
}

namespace {

double episode_value(const FitcarlModel& model, const OogSplit& split, const EpisodeTask& task,
                     const RngStream& rng, std::vector<Rollout>& record) {
  return run_episode(model, split, task, rng, 1, &record).loss;
}

bool same_paths(const std::vector<Rollout>& a, const std::vector<Rollout>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].steps.size() != b[i].steps.size()) return false;
    for (std::size_t l = 0; l < a[i].steps.size(); ++l) {
      if (!(a[i].steps[l].action == b[i].steps[l].action)) return false;
    }
  }
  return true;
}

}  // namespace

GradCheck check_episode_gradients(FitcarlModel& model, const OogSplit& split, const EpisodeTask& task,
                                  const RngStream& episode_rng, double h) {
  std::vector<Rollout> base_paths;
  const EpisodeResult base = run_episode(model, split, task, episode_rng, 1, &base_paths);
  GradCheck out;
  auto& params = model.params();
  std::vector<Rollout> paths;
  for (ParamId id = 0; id < params.size(); ++id) {
    Tensor& value = params.value(id);
    for (std::size_t i = 0; i < value.size(); ++i) {
      const Real saved = value[i];
      value[i] = saved + h;
      const double up = episode_value(model, split, task, episode_rng, paths);
      out.trajectories_stable = out.trajectories_stable && same_paths(paths, base_paths);
      value[i] = saved - h;
      const double down = episode_value(model, split, task, episode_rng, paths);
      out.trajectories_stable = out.trajectories_stable && same_paths(paths, base_paths);
      value[i] = saved;

      const double numeric = (up - down) / (2.0 * h);
      const double analytic = base.grads[id][i];
      // Entries where both sides vanish are compared on an absolute floor.
      const double denom = std::max({std::abs(numeric), std::abs(analytic), 1e-6});
      const double rel = std::abs(numeric - analytic) / denom;
      ++out.checked;
      if (rel > out.max_rel_error) {
        out.max_rel_error = rel;
        out.worst = params.name(id) + "[" + std::to_string(i) + "]";
      }
    }
  }
  return out;
}

namespace {

void walk(const FitcarlModel& model, const ActionGraph& graph, const EpisodeTask* task, const LpQuery& query,
          const SearchState& state, const Tensor& hidden, double score, std::map<EntityId, double>& best,
          std::size_t& count) {
  if (state.step == model.config().steps) {
    ++count;
    auto [it, inserted] = best.emplace(state.entity, score);
    if (!inserted) {
      if (model.config().beam_sum) {
        const double hi = std::max(it->second, score), lo = std::min(it->second, score);
        it->second = hi + std::log1p(std::exp(lo - hi));
      } else {
        it->second = std::max(it->second, score);
      }
    }
    return;
  }
  Tape tape(&model.params(), false);
  Forward f(model, tape);
  f.attach_task(task, query.source, query.time);
  const auto cands = sample_action_space(graph, state, model, nullptr);
  const Tensor pi = policy_step(f, state, tape.constant(hidden), cands).pi.value();
  for (std::size_t j = 0; j < cands.size(); ++j) {
    Tape t2(&model.params(), false);
    Forward g(model, t2);
    g.attach_task(task, query.source, query.time);
    const SearchState next = transition(state, cands[j]);
    const Tensor h = encode_history(g, t2.constant(hidden), g.relation(cands[j].relation),
                                    g.node(cands[j].entity, cands[j].time, query.time))
                         .value();
    walk(model, graph, task, query, next, h, score + std::log(std::max<double>(pi[j], 1e-12)), best, count);
  }
}

}  // namespace

Enumeration enumerate_trajectories(const FitcarlModel& model, const ActionGraph& graph, const EpisodeTask* task,
                                   const LpQuery& query) {
  Tape tape(&model.params(), false);
  Forward f(model, tape);
  f.attach_task(task, query.source, query.time);
  const SearchState start = initial_state(query);
  const Tensor h0 = initial_history(f, start).value();
  std::map<EntityId, double> best;
  Enumeration out;
  walk(model, graph, task, query, start, h0, 0.0, best, out.trajectories);
  for (const auto& [e, s] : best) out.ranking.push_back({e, s});
  std::stable_sort(out.ranking.begin(), out.ranking.end(), [](const ScoredEntity& a, const ScoredEntity& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.entity < b.entity;
  });
  return out;
}

OogSplit random_split(std::uint64_t seed, std::size_t entities, std::size_t relations, std::size_t timestamps,
                      std::size_t facts) {
  RngStream rng(seed, "random_split");
  Vocabulary vocab;
  for (std::size_t e = 0; e < entities; ++e) vocab.entities.intern("n" + std::to_string(e));
  for (std::size_t r = 0; r < relations; ++r) vocab.relations.intern("p" + std::to_string(r));
  std::vector<Quadruple> quads;
  for (std::size_t k = 0; k < facts; ++k) {
    const auto s = static_cast<EntityId>(rng.uniform_index(entities));
    auto o = static_cast<EntityId>(rng.uniform_index(entities - 1));
    if (o >= s) ++o;
    quads.push_back({s, RelationVocab::original_id(static_cast<std::uint32_t>(rng.uniform_index(relations))), o,
                     static_cast<Timestamp>(rng.uniform_index(timestamps))});
  }
  std::sort(quads.begin(), quads.end());
  quads.erase(std::unique(quads.begin(), quads.end()), quads.end());
  TkgStore store(entities, std::move(quads));
  ConceptTable concepts(entities);
  for (std::size_t c = 0; c < 4; ++c) concepts.names().intern("k" + std::to_string(c));
  for (std::size_t e = 0; e < entities; ++e) concepts.add_concept(static_cast<EntityId>(e), static_cast<ConceptId>(e % 4));
  SplitFractions fr{0.1, 0.05, 0.05};
  return make_split(vocab, TimeAxis{}, store, concepts, fr, seed);
}

}  // namespace fitcarl::testing
