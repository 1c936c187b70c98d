#pragma once

#include <cstdint>
#include <map>
#include <unordered_map>
#include <vector>

#include "fitcarl/model.hpp"
#include "fitcarl/ops.hpp"
#include "fitcarl/split.hpp"

namespace fitcarl {

/// Representations of unseen entities kept as plain values so that several
/// inference tapes can share them.
using ReprCache = std::unordered_map<EntityId, Tensor>;

/// One neighbor token of an unseen entity: (neighbor, relation toward the
/// unseen entity, time).
struct NeighborToken {
  EntityId neighbor = 0;
  RelationId relation = 0;
  Timestamp time = 0;
  friend bool operator==(const NeighborToken&, const NeighborToken&) = default;
};

/// Rewrites support quads so that the unseen entity is always the object.
std::vector<NeighborToken> neighborhood(EntityId e, const std::vector<Quadruple>& support);

/// Per-tape view of a model. Caches parameter-derived values for the tape's
/// lifetime and resolves entity representations, replacing the embedding
/// rows of a task's unseen entities by their encoder output.
class Forward {
 public:
  Forward(const FitcarlModel& model, Tape& tape, RngStream* dropout_rng = nullptr);

  const FitcarlModel& model() const { return model_; }
  const ModelConfig& config() const { return model_.config(); }
  const ModelParamIds& ids() const { return model_.ids(); }
  Tape& tape() { return tape_; }

  /// sqrt(1/d) cos(omega * dt + phi), shape [d]; cached per dt.
  Var time_diff(std::int64_t dt);
  /// Batched time encoding, shape [n, d].
  Var time_diffs(const std::vector<double>& dts);
  /// Raw time-score w_dt . h_dt without a tape.
  static double time_score(const FitcarlModel& model, double dt);

  Var relation(RelationId r);
  /// Embedding-table row of e, ignoring the unseen-entity override.
  Var embedding(EntityId e);
  /// Representation of e: encoder output for unseen entities of the attached
  /// task, embedding row otherwise.
  Var entity(EntityId e);
  /// (h_e || h_{t_q - t}), or h_e alone when temporal terms are ablated.
  Var node(EntityId e, Timestamp t, Timestamp query_time);

  /// Unseen entities of `task` get encoder representations. The query source
  /// is encoded with CLS time `query_time`; the others with the mean time of
  /// their supports (or `query_time` under cls_time_per_query).
  void attach_task(const EpisodeTask* task, EntityId source, Timestamp query_time);
  /// Shares encoder outputs across inference tapes (ignored when recording).
  void share_cache(ReprCache* cache) { shared_ = cache; }

  /// Overrides the representation of an entity.
  void set_entity(EntityId e, Var h) { overrides_[e] = h; }

  RngStream* dropout_rng() { return dropout_rng_; }

 private:
  const FitcarlModel& model_;
  Tape& tape_;
  RngStream* dropout_rng_;
  const EpisodeTask* task_ = nullptr;
  EntityId source_ = 0;
  Timestamp query_time_ = 0;
  ReprCache* shared_ = nullptr;
  std::unordered_map<EntityId, Var> overrides_;
  std::map<std::int64_t, Var> time_cache_;
};

/// Affine maps W_meta (h_neighbor || h_relation) + b for each token, in
/// support order; shape [K, d].
Var meta_representations(Forward& f, const std::vector<NeighborToken>& tokens);

/// Attention probabilities of one layer and head, [K+1, K+1].
struct AttentionTrace {
  std::size_t layer = 0;
  std::size_t head = 0;
  Tensor logits;
  Tensor probs;
};

/// Time-aware Transformer over [CLS] + neighbor tokens; returns the final
/// CLS output [d]. `cls_time` may be fractional.
Var encode_entity(Forward& f, const std::vector<NeighborToken>& tokens, double cls_time,
                  std::vector<AttentionTrace>* trace = nullptr);

/// Encoder outputs of every unseen entity of a task as values. The source
/// entity (if any) is encoded at `query_time`.
ReprCache encode_all_unseen(const FitcarlModel& model, const EpisodeTask& task, EntityId source,
                            Timestamp query_time);

/// Mean support timestamp.
double mean_support_time(const std::vector<Quadruple>& support);

}  // namespace fitcarl
