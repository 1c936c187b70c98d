#include "fitcarl/policy.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <set>
#include <sstream>
#include <stdexcept>

namespace fitcarl {

SearchState initial_state(const LpQuery& q) {
  return SearchState{q.source, q.time, q.source, q.relation, q.time, 0};
}

SearchState transition(const SearchState& s, const ActionCandidate& a) {
  SearchState next = s;
  next.entity = a.entity;
  next.time = a.time;
  next.step = s.step + 1;
  return next;
}

ActionGraph::ActionGraph(const TkgStore& background, const EpisodeTask* task) : background_(background) {
  if (!task) return;
  std::set<Quadruple> seen;
  for (const auto& shots : task->entities) {
    for (const auto& q : shots.support) {
      if (!seen.insert(q).second) continue;
      extra_[q.subject].push_back(Edge{q.relation, q.object, q.timestamp});
      extra_[q.object].push_back(Edge{RelationVocab::inverse_of(q.relation), q.subject, q.timestamp});
    }
  }
}

std::vector<Edge> ActionGraph::out_edges(EntityId e) const {
  std::vector<Edge> out;
  if (e < background_.num_entities()) {
    auto span = background_.out_edges(e);
    out.assign(span.begin(), span.end());
  }
  if (auto it = extra_.find(e); it != extra_.end()) out.insert(out.end(), it->second.begin(), it->second.end());
  return out;
}

namespace {

std::uint64_t node_key(const SearchState& s) {
  std::uint64_t k = mix64(static_cast<std::uint64_t>(s.entity) + 1);
  k = mix64(k ^ static_cast<std::uint64_t>(static_cast<std::uint32_t>(s.time)));
  return mix64(k ^ static_cast<std::uint64_t>(s.step));
}

}  // namespace

std::vector<ActionCandidate> sample_from_edges(const std::vector<Edge>& edges, const SearchState& state,
                                               const FitcarlModel& model, const RngStream* random_base) {
  const auto& cfg = model.config();
  const std::size_t cap = cfg.action_cap;
  std::vector<std::size_t> keep;
  if (edges.size() <= cap) {
    keep.resize(edges.size());
    std::iota(keep.begin(), keep.end(), std::size_t{0});
  } else {
    switch (cfg.sampling_mode()) {
      case SamplingMode::TimeAdaptive: {
        std::vector<double> score(edges.size());
        for (std::size_t i = 0; i < edges.size(); ++i) {
          score[i] = Forward::time_score(model, static_cast<double>(state.query_time) - edges[i].timestamp);
        }
        keep.resize(edges.size());
        std::iota(keep.begin(), keep.end(), std::size_t{0});
        std::stable_sort(keep.begin(), keep.end(), [&](std::size_t a, std::size_t b) { return score[a] > score[b]; });
        keep.resize(cap);
        break;
      }
      case SamplingMode::TimeProximity: {
        keep.resize(edges.size());
        std::iota(keep.begin(), keep.end(), std::size_t{0});
        auto gap = [&](std::size_t i) { return std::abs(static_cast<std::int64_t>(state.time) - edges[i].timestamp); };
        std::stable_sort(keep.begin(), keep.end(), [&](std::size_t a, std::size_t b) { return gap(a) < gap(b); });
        keep.resize(cap);
        break;
      }
      case SamplingMode::Random: {
        if (!random_base) throw std::invalid_argument("random action sampling needs a random stream");
        RngStream rng = random_base->child(node_key(state));
        keep = rng.sample_without_replacement(edges.size(), cap);
        std::sort(keep.begin(), keep.end());
        break;
      }
    }
  }
  std::vector<ActionCandidate> out;
  out.reserve(keep.size() + 1);
  for (auto i : keep) out.push_back({edges[i].relation, edges[i].target, edges[i].timestamp, false});
  out.push_back({kSelfLoop, state.entity, state.time, true});
  return out;
}

std::vector<ActionCandidate> sample_action_space(const ActionGraph& graph, const SearchState& state,
                                                 const FitcarlModel& model, const RngStream* random_base) {
  return sample_from_edges(graph.out_edges(state.entity), state, model, random_base);
}

Var encode_history(Forward& f, Var hidden, Var relation, Var node) {
  Tape& t = f.tape();
  const auto& ids = f.ids();
  GruWeights w{t.param(ids.gru_w_ih), t.param(ids.gru_w_hh), t.param(ids.gru_b_ih), t.param(ids.gru_b_hh)};
  return gru_cell(concat({relation, node}), hidden, w);
}

Var initial_history(Forward& f, const SearchState& s) {
  Var zero = f.tape().constant(Tensor(Shape{f.config().hist_dim()}));
  return encode_history(f, zero, f.tape().param(f.ids().dummy_relation), f.node(s.source, s.query_time, s.query_time));
}

CandidateFeatures candidate_features(Forward& f, const SearchState& s, const std::vector<ActionCandidate>& cands) {
  if (cands.empty()) throw std::invalid_argument("empty candidate set");
  std::vector<Var> rel, ent;
  rel.reserve(cands.size());
  ent.reserve(cands.size());
  for (const auto& a : cands) {
    rel.push_back(f.relation(a.relation));
    ent.push_back(f.entity(a.entity));
  }
  CandidateFeatures out;
  out.relations = stack_rows(rel);
  out.nodes = stack_rows(ent);
  if (f.config().ablation.use_time()) {
    std::vector<double> dts;
    dts.reserve(cands.size());
    for (const auto& a : cands) dts.push_back(static_cast<double>(s.query_time) - a.time);
    out.nodes = concat_cols({out.nodes, f.time_diffs(dts)});
  }
  return out;
}

namespace {

Var time_terms(Forward& f, const std::vector<ActionCandidate>& cands, Timestamp ref) {
  std::vector<double> dts;
  dts.reserve(cands.size());
  for (const auto& a : cands) dts.push_back(static_cast<double>(a.time) - ref);
  return matmul(f.time_diffs(dts), f.tape().param(f.ids().w_dt));
}

}  // namespace

Var action_scores(Forward& f, const SearchState& s, Var hidden, const std::vector<ActionCandidate>& cands,
                  const CandidateFeatures& feats) {
  Tape& t = f.tape();
  const auto& ids = f.ids();
  Var h_hist = matmul(t.param(ids.w_hist), hidden);
  Var h_q = matmul(t.param(ids.w_query),
                   concat({f.relation(s.query_relation), f.node(s.source, s.query_time, s.query_time)}));
  Var h_a = matmul_nt(concat_cols({feats.relations, feats.nodes}), t.param(ids.w_action));  // [n, 2d]

  Var phi_hist = matmul(h_a, h_hist);
  Var phi_q = matmul(h_a, h_q);
  if (f.config().ablation.use_time()) {
    phi_hist = phi_hist + time_terms(f, cands, s.time);
    phi_q = phi_q + time_terms(f, cands, s.query_time);
  }
  // Two-way softmax between the history and the query.
  Var att_hist = sigmoid(phi_hist - phi_q);
  Var att_q = sigmoid(phi_q - phi_hist);
  Var mixed = outer(att_hist, h_hist) + outer(att_q, h_q);
  Var logits = rowdot(h_a, matmul_nt(mixed, t.param(ids.w_score)));
  return softmax(logits);
}

Var action_scores(Forward& f, const SearchState& s, Var hidden, const std::vector<ActionCandidate>& cands) {
  return action_scores(f, s, hidden, cands, candidate_features(f, s, cands));
}

Var confidence(Forward& f, const SearchState& s, const CandidateFeatures& feats) {
  Var psi = tucker3_rows(f.tape().param(f.ids().core), f.node(s.source, s.query_time, s.query_time),
                         f.relation(s.query_relation), feats.nodes);
  return softmax(psi);
}

Var confidence(Forward& f, const SearchState& s, const std::vector<ActionCandidate>& cands) {
  return confidence(f, s, candidate_features(f, s, cands));
}

Var combine_policy(Var p, Var conf, const Ablation& ablation) {
  if (ablation.no_confidence) return p;
  return softmax(p * conf);
}

Tensor concept_action_prob(const ConceptTable& concepts, RelationId query_relation,
                           const std::vector<ActionCandidate>& cands) {
  const std::size_t n = cands.size();
  Tensor out(Shape{n});
  if (n == 0) return out;
  if (!concepts.has_prior(query_relation)) {
    out.fill(static_cast<Real>(1.0 / static_cast<double>(n)));
    return out;
  }
  std::vector<double> mass(n);
  double top = -1.0;
  for (std::size_t i = 0; i < n; ++i) {
    mass[i] = cands[i].entity < concepts.num_entities() ? concepts.concept_mass(query_relation, cands[i].entity) : 0.0;
    top = std::max(top, mass[i]);
  }
  double z = 0.0;
  for (auto& m : mass) z += (m = std::exp(m - top));
  for (std::size_t i = 0; i < n; ++i) out[i] = static_cast<Real>(mass[i] / z);
  return out;
}

Var concept_kl(Var pi, const Tensor& p) {
  if (pi.shape() != p.shape()) throw ShapeError("concept_kl", pi.shape(), p.shape());
  Tensor log_p(p.shape());
  for (std::size_t i = 0; i < p.size(); ++i) log_p[i] = std::log(std::max(p[i], kLogFloor));
  Tape& t = pi.tape();
  return sum(pi * (log(pi) - t.constant(std::move(log_p))));
}

Var reward(Forward& f, EntityId action_entity, EntityId answer) {
  Var dist = l2_norm(f.entity(answer) - f.entity(action_entity));
  Var r = sigmoid(add_scalar(neg(dist), static_cast<Real>(f.config().theta)));
  if (f.config().reward_gradient) return r;
  return f.tape().constant(r.value());
}

StepOutput policy_step(Forward& f, const SearchState& s, Var hidden, const std::vector<ActionCandidate>& cands) {
  StepOutput out;
  const CandidateFeatures feats = candidate_features(f, s, cands);
  out.p = action_scores(f, s, hidden, cands, feats);
  if (f.config().ablation.no_confidence) {
    out.conf = f.tape().constant(Tensor(Shape{cands.size()}, static_cast<Real>(1.0 / static_cast<double>(cands.size()))));
  } else {
    out.conf = confidence(f, s, feats);
  }
  out.pi = combine_policy(out.p, out.conf, f.config().ablation);
  return out;
}

std::string format_trace(const PathTrace& trace, const Vocabulary& vocab, const TimeAxis& axis) {
  std::ostringstream os;
  auto node = [&](EntityId e, Timestamp t) { return "(" + vocab.entities.name(e) + "@" + axis.format(t) + ")"; };
  for (const auto& hop : trace.hops) {
    char probs[64];
    std::snprintf(probs, sizeof probs, "p=%.4f, conf=%.4f", hop.prob, hop.conf);
    os << node(hop.from.entity, hop.from.time) << " -[" << vocab.relations.name(hop.action.relation) << ", " << probs
       << "]-> " << node(hop.action.entity, hop.action.time) << '\n';
  }
  return os.str();
}

}  // namespace fitcarl
