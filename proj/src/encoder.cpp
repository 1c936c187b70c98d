#include "fitcarl/encoder.hpp"

#include <cmath>
#include <stdexcept>

namespace fitcarl {

std::vector<NeighborToken> neighborhood(EntityId e, const std::vector<Quadruple>& support) {
  std::vector<NeighborToken> out;
  out.reserve(support.size());
  for (const auto& q : support) {
    if (q.subject == e) {
      out.push_back({q.object, RelationVocab::inverse_of(q.relation), q.timestamp});
    } else if (q.object == e) {
      out.push_back({q.subject, q.relation, q.timestamp});
    } else {
      throw std::invalid_argument("support quad does not touch entity " + std::to_string(e));
    }
  }
  return out;
}

double mean_support_time(const std::vector<Quadruple>& support) {
  if (support.empty()) return 0.0;
  double s = 0.0;
  for (const auto& q : support) s += q.timestamp;
  return s / static_cast<double>(support.size());
}

Forward::Forward(const FitcarlModel& model, Tape& tape, RngStream* dropout_rng)
    : model_(model), tape_(tape), dropout_rng_(dropout_rng) {}

Var Forward::time_diff(std::int64_t dt) {
  if (auto it = time_cache_.find(dt); it != time_cache_.end()) return it->second;
  Var v = reshape(time_diffs({static_cast<double>(dt)}), Shape{config().dim});
  time_cache_.emplace(dt, v);
  return v;
}

Var Forward::time_diffs(const std::vector<double>& dts) {
  const std::size_t d = config().dim;
  const Shape shape{dts.size()};
  Var t = tape_.constant(Tensor(shape, std::vector<Real>(dts.begin(), dts.end())));
  Var arg = add_row(outer(t, tape_.param(ids().omega)), tape_.param(ids().phi));
  return scale(cos(arg), static_cast<Real>(std::sqrt(1.0 / static_cast<double>(d))));
}

double Forward::time_score(const FitcarlModel& model, double dt) {
  const auto& p = model.params();
  const auto& ids = model.ids();
  const Tensor& w = p.value(ids.w_dt);
  const Tensor& omega = p.value(ids.omega);
  const Tensor& phi = p.value(ids.phi);
  double s = 0.0;
  for (std::size_t k = 0; k < w.size(); ++k) s += w[k] * std::cos(omega[k] * dt + phi[k]);
  return s * std::sqrt(1.0 / static_cast<double>(w.size()));
}

Var Forward::relation(RelationId r) {
  if (r >= model_.num_relation_ids()) throw std::out_of_range("unknown relation id " + std::to_string(r));
  return tape_.param_row(ids().relation, r);
}

Var Forward::embedding(EntityId e) {
  if (e >= model_.num_entities()) throw std::out_of_range("unknown entity id " + std::to_string(e));
  return tape_.param_row(ids().entity, e);
}

void Forward::attach_task(const EpisodeTask* task, EntityId source, Timestamp query_time) {
  task_ = task;
  source_ = source;
  query_time_ = query_time;
  overrides_.clear();
}

Var Forward::entity(EntityId e) {
  if (auto it = overrides_.find(e); it != overrides_.end()) return it->second;
  const EntityShots* shots = task_ ? task_->find(e) : nullptr;
  if (!shots) return embedding(e);
  const bool share = shared_ && !tape_.recording();
  if (share) {
    if (auto it = shared_->find(e); it != shared_->end()) {
      Var v = tape_.constant(it->second);
      overrides_[e] = v;
      return v;
    }
  }
  double cls_time = query_time_;
  if (e != source_ && !config().cls_time_per_query) cls_time = mean_support_time(shots->support);
  Var h = encode_entity(*this, neighborhood(e, shots->support), cls_time);
  overrides_[e] = h;
  if (share) shared_->emplace(e, h.value());
  return h;
}

Var Forward::node(EntityId e, Timestamp t, Timestamp query_time) {
  Var h = entity(e);
  if (!config().ablation.use_time()) return h;
  return concat({h, time_diff(static_cast<std::int64_t>(query_time) - t)});
}

namespace {

std::vector<Var> meta_rows(Forward& f, const std::vector<NeighborToken>& tokens) {
  Tape& tape = f.tape();
  Var w = tape.param(f.ids().meta_w);
  Var b = tape.param(f.ids().meta_b);
  std::vector<Var> rows;
  rows.reserve(tokens.size());
  for (const auto& tok : tokens) {
    rows.push_back(matmul(w, concat({f.embedding(tok.neighbor), f.relation(tok.relation)})) + b);
  }
  return rows;
}

Var affine_norm(Var x, Var gain, Var bias) { return add_row(mul_row(layer_norm_rows(x), gain), bias); }

Var maybe_dropout(Forward& f, Var x) {
  const double rate = f.config().dropout;
  if (rate <= 0.0 || !f.dropout_rng() || !f.tape().recording()) return x;
  return dropout(x, static_cast<Real>(rate), *f.dropout_rng());
}

}  // namespace

Var meta_representations(Forward& f, const std::vector<NeighborToken>& tokens) {
  if (tokens.empty()) throw std::invalid_argument("meta_representations: empty support");
  return stack_rows(meta_rows(f, tokens));
}

Var encode_entity(Forward& f, const std::vector<NeighborToken>& tokens, double cls_time,
                  std::vector<AttentionTrace>* trace) {
  Tape& tape = f.tape();
  const auto& cfg = f.config();
  const auto& ids = f.ids();
  const std::size_t n = tokens.size() + 1;

  std::vector<Var> rows{tape.param(ids.cls)};
  for (Var r : meta_rows(f, tokens)) rows.push_back(r);
  Var x = stack_rows(rows);

  Var te;
  const bool use_pos = cfg.ablation.use_time_position();
  if (use_pos) {
    std::vector<double> times{cls_time};
    for (const auto& tok : tokens) times.push_back(tok.time);
    std::vector<double> diffs;
    diffs.reserve(n * n);
    for (std::size_t u = 0; u < n; ++u)
      for (std::size_t v = 0; v < n; ++v) diffs.push_back(times[u] - times[v]);
    te = f.time_diffs(diffs);
  }

  const Real inv_sqrt_dh = static_cast<Real>(1.0 / std::sqrt(static_cast<double>(cfg.head_dim())));
  for (std::size_t l = 0; l < ids.layers.size(); ++l) {
    const auto& layer = ids.layers[l];
    Var mixed;
    for (std::size_t h = 0; h < cfg.heads; ++h) {
      Var q = matmul_nt(x, tape.param(layer.w_query[h]));
      Var k = matmul_nt(x, tape.param(layer.w_key[h]));
      Var v = matmul_nt(x, tape.param(layer.w_value[h]));
      Var logits = scale(matmul_nt(q, k), inv_sqrt_dh);
      if (use_pos) logits = logits + reshape(matmul(te, tape.param(layer.w_pos[h])), Shape{n, n});
      Var att = softmax_rows(logits);
      if (trace) trace->push_back({l, h, logits.value(), att.value()});
      Var out = matmul_nt(matmul(att, v), tape.param(layer.w_out[h]));
      mixed = h == 0 ? out : mixed + out;
    }
    mixed = maybe_dropout(f, add_row(mixed, tape.param(layer.b_out)));
    x = affine_norm(x + mixed, tape.param(layer.ln1_gain), tape.param(layer.ln1_bias));
    Var hidden = relu(add_row(matmul_nt(x, tape.param(layer.ff1_w)), tape.param(layer.ff1_b)));
    Var ff = maybe_dropout(f, add_row(matmul_nt(hidden, tape.param(layer.ff2_w)), tape.param(layer.ff2_b)));
    x = affine_norm(x + ff, tape.param(layer.ln2_gain), tape.param(layer.ln2_bias));
  }
  return row(x, 0);
}

ReprCache encode_all_unseen(const FitcarlModel& model, const EpisodeTask& task, EntityId source,
                            Timestamp query_time) {
  Tape tape(&model.params(), false);
  Forward f(model, tape);
  f.attach_task(&task, source, query_time);
  ReprCache out;
  for (const auto& shots : task.entities) out.emplace(shots.entity, f.entity(shots.entity).value());
  return out;
}

}  // namespace fitcarl
