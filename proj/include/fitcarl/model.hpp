#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fitcarl/params.hpp"
#include "fitcarl/pretrain.hpp"
#include "fitcarl/rng.hpp"

namespace fitcarl {

/// Ablation switches. E implies A1 and D and drops every time-difference term.
struct Ablation {
  bool random_sample = false;     // A1
  bool time_proximity = false;    // A2
  bool no_confidence = false;     // B
  bool no_concept = false;        // C
  bool no_time_position = false;  // D
  bool no_temporal = false;       // E

  /// Parses a comma/space separated list such as "A1,B".
  static Ablation parse(const std::string& text);
  std::string to_string() const;

  bool use_time_position() const { return !no_time_position && !no_temporal; }
  bool use_time() const { return !no_temporal; }

  friend bool operator==(const Ablation&, const Ablation&) = default;
};

enum class SamplingMode { TimeAdaptive, Random, TimeProximity };

struct ModelConfig {
  std::size_t dim = 100;
  std::size_t heads = 2;
  std::size_t layers = 2;
  std::size_t action_cap = 50;
  std::size_t steps = 3;  // L
  double gamma = 0.95;
  double eta = 1e-9;
  double theta = 5.0;
  double dropout = 0.0;
  Ablation ablation;
  /// CLS time of non-query unseen entities: t_q when set, mean support time otherwise.
  bool cls_time_per_query = false;
  /// Let gradients flow through the reward (off: reward is a constant weight).
  bool reward_gradient = false;
  /// Empty concept prior: zero the KL term instead of regularizing toward uniform.
  bool empty_prior_zero_kl = false;
  /// Beam endpoints: sum probabilities of duplicate endpoints instead of max log-prob.
  bool beam_sum = false;

  SamplingMode sampling_mode() const;
  std::size_t node_dim() const { return ablation.use_time() ? 2 * dim : dim; }
  std::size_t hist_dim() const { return dim + node_dim(); }
  std::size_t head_dim() const { return dim / heads; }
  void validate() const;

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

struct TransformerLayerIds {
  std::vector<ParamId> w_query, w_key, w_value, w_out, w_pos;  // one per head
  ParamId b_out = 0;
  ParamId ln1_gain = 0, ln1_bias = 0;
  ParamId ff1_w = 0, ff1_b = 0, ff2_w = 0, ff2_b = 0;
  ParamId ln2_gain = 0, ln2_bias = 0;
};

struct ModelParamIds {
  ParamId entity = 0;    // [N, d]
  ParamId relation = 0;  // [R_ids, d], row 0 is SELF_LOOP
  ParamId omega = 0, phi = 0;  // time-difference encoding
  ParamId cls = 0;
  ParamId meta_w = 0, meta_b = 0;  // R^{2d} -> R^d
  std::vector<TransformerLayerIds> layers;
  ParamId gru_w_ih = 0, gru_w_hh = 0, gru_b_ih = 0, gru_b_hh = 0;
  ParamId dummy_relation = 0;
  ParamId w_hist = 0;    // W1: hist -> 2d
  ParamId w_query = 0;   // W2: (r_q || node) -> 2d
  ParamId w_action = 0;  // W3: (r_a || node) -> 2d
  ParamId w_score = 0;   // W4: 2d x 2d
  ParamId core = 0;      // node x d x node
  ParamId w_dt = 0;      // d
};

/// All learnable tensors of the agent and encoder.
class FitcarlModel {
 public:
  FitcarlModel() = default;
  FitcarlModel(const ModelConfig& config, std::size_t num_entities, std::size_t num_relation_ids,
               std::uint64_t seed);

  /// Wraps parameters restored from a checkpoint.
  static FitcarlModel restore(const ModelConfig& config, std::size_t num_entities, std::size_t num_relation_ids,
                              ParamStore params);

  /// Copies pretrained rows into the entity/relation tables (SELF_LOOP keeps
  /// its own initialization when the embedding has no such row).
  void load_embeddings(const ComplexEmbedding& emb);

  const ModelConfig& config() const { return config_; }
  ModelConfig& mutable_config() { return config_; }
  const ParamStore& params() const { return params_; }
  ParamStore& params() { return params_; }
  const ModelParamIds& ids() const { return ids_; }
  std::size_t num_entities() const { return num_entities_; }
  std::size_t num_relation_ids() const { return num_relation_ids_; }

 private:
  ModelConfig config_;
  std::size_t num_entities_ = 0;
  std::size_t num_relation_ids_ = 0;
  ParamStore params_;
  ModelParamIds ids_;
};

/// Rebuilds parameter ids for a store restored from a checkpoint.
ModelParamIds bind_param_ids(const ParamStore& params, const ModelConfig& config);

}  // namespace fitcarl
