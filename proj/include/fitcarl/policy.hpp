#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "fitcarl/encoder.hpp"

namespace fitcarl {

struct SearchState {
  EntityId entity = 0;
  Timestamp time = 0;
  EntityId source = 0;
  RelationId query_relation = 0;
  Timestamp query_time = 0;
  std::size_t step = 0;

  friend bool operator==(const SearchState&, const SearchState&) = default;
};

SearchState initial_state(const LpQuery& q);

struct ActionCandidate {
  RelationId relation = 0;
  EntityId entity = 0;
  Timestamp time = 0;
  bool self_loop = false;

  friend bool operator==(const ActionCandidate&, const ActionCandidate&) = default;
};

SearchState transition(const SearchState& s, const ActionCandidate& a);

/// Traversable edges: the background graph plus the support facts of every
/// unseen entity of a task (query facts are never included).
class ActionGraph {
 public:
  ActionGraph(const TkgStore& background, const EpisodeTask* task);

  /// Background edges of e in file order, then support edges in task order.
  std::vector<Edge> out_edges(EntityId e) const;

 private:
  const TkgStore& background_;
  std::unordered_map<EntityId, std::vector<Edge>> extra_;
};

/// Keeps up to `cap` outgoing edges of the current node and appends the
/// self-loop. `random_base` seeds random sampling; the stream used for a node
/// depends only on (entity, time, step), so repeated visits agree.
std::vector<ActionCandidate> sample_action_space(const ActionGraph& graph, const SearchState& state,
                                                 const FitcarlModel& model, const RngStream* random_base);

/// Same, over an explicit edge list.
std::vector<ActionCandidate> sample_from_edges(const std::vector<Edge>& edges, const SearchState& state,
                                               const FitcarlModel& model, const RngStream* random_base);

/// GRU step on (h_r || node).
Var encode_history(Forward& f, Var hidden, Var relation, Var node);
/// Hidden state after step 0: dummy relation and the query node.
Var initial_history(Forward& f, const SearchState& s);

/// Per-candidate relation rows [n, d] and node rows [n, node_dim].
struct CandidateFeatures {
  Var relations;
  Var nodes;
};
CandidateFeatures candidate_features(Forward& f, const SearchState& s, const std::vector<ActionCandidate>& cands);

/// P(a | s, hist) over the candidates.
Var action_scores(Forward& f, const SearchState& s, Var hidden, const std::vector<ActionCandidate>& cands);
Var action_scores(Forward& f, const SearchState& s, Var hidden, const std::vector<ActionCandidate>& cands,
                  const CandidateFeatures& feats);
/// History-independent confidence over the candidates.
Var confidence(Forward& f, const SearchState& s, const std::vector<ActionCandidate>& cands);
Var confidence(Forward& f, const SearchState& s, const CandidateFeatures& feats);
/// softmax(P * conf), or P itself when the confidence learner is ablated.
Var combine_policy(Var p, Var conf, const Ablation& ablation);

/// softmax of the concept mass of each candidate under P(c | r_q). An empty
/// prior yields the uniform distribution.
Tensor concept_action_prob(const ConceptTable& concepts, RelationId query_relation,
                           const std::vector<ActionCandidate>& cands);
/// sum_a pi(a) (log pi(a) - log p(a)); `p` is a constant.
Var concept_kl(Var pi, const Tensor& p);

/// sigmoid(theta - ||h_answer - h_action||).
Var reward(Forward& f, EntityId action_entity, EntityId answer);

/// Every distribution computed for one search step.
struct StepOutput {
  Var p;
  Var conf;
  Var pi;
};

StepOutput policy_step(Forward& f, const SearchState& s, Var hidden, const std::vector<ActionCandidate>& cands);

struct PathHop {
  SearchState from;
  ActionCandidate action;
  double prob = 0.0;
  double conf = 0.0;
};

struct PathTrace {
  std::vector<PathHop> hops;
};

/// One line per hop: `(entity@time) -[relation, p=..., conf=...]-> (entity@time)`.
std::string format_trace(const PathTrace& trace, const Vocabulary& vocab, const TimeAxis& axis);

}  // namespace fitcarl
