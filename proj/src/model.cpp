#include "fitcarl/model.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace fitcarl {

Ablation Ablation::parse(const std::string& text) {
  Ablation a;
  std::string token;
  auto flush = [&] {
    if (token.empty()) return;
    std::string t;
    for (char c : token) t.push_back(static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
    if (t == "A1") a.random_sample = true;
    else if (t == "A2") a.time_proximity = true;
    else if (t == "B") a.no_confidence = true;
    else if (t == "C") a.no_concept = true;
    else if (t == "D") a.no_time_position = true;
    else if (t == "E") a.no_temporal = true;
    else if (t != "NONE") throw std::invalid_argument("unknown ablation '" + token + "' (expected A1,A2,B,C,D,E)");
    token.clear();
  };
  for (char c : text) {
    if (c == ',' || c == ' ' || c == '+' || c == ';') flush();
    else token.push_back(c);
  }
  flush();
  return a;
}

std::string Ablation::to_string() const {
  std::vector<std::string> parts;
  if (random_sample) parts.push_back("A1");
  if (time_proximity) parts.push_back("A2");
  if (no_confidence) parts.push_back("B");
  if (no_concept) parts.push_back("C");
  if (no_time_position) parts.push_back("D");
  if (no_temporal) parts.push_back("E");
  if (parts.empty()) return "none";
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) out += (i ? "," : "") + parts[i];
  return out;
}

SamplingMode ModelConfig::sampling_mode() const {
  if (ablation.no_temporal || ablation.random_sample) return SamplingMode::Random;
  if (ablation.time_proximity) return SamplingMode::TimeProximity;
  return SamplingMode::TimeAdaptive;
}

void ModelConfig::validate() const {
  if (dim == 0) throw std::invalid_argument("dim must be positive");
  if (heads == 0 || dim % heads != 0) throw std::invalid_argument("dim must be divisible by the number of heads");
  if (layers == 0) throw std::invalid_argument("transformer needs at least one layer");
  if (action_cap == 0) throw std::invalid_argument("action-space cap must be >= 1");
  if (steps == 0) throw std::invalid_argument("search steps L must be >= 1");
  if (!(gamma >= 0.0 && gamma < 1.0)) throw std::invalid_argument("gamma must lie in [0, 1)");
  if (eta < 0.0) throw std::invalid_argument("eta must be non-negative");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw std::invalid_argument("dropout must lie in [0, 1)");
  if (ablation.random_sample && ablation.time_proximity) {
    throw std::invalid_argument("ablations A1 and A2 are mutually exclusive");
  }
}

namespace {

Tensor normal_tensor(Shape shape, double stddev, RngStream& rng) {
  Tensor t(std::move(shape));
  for (auto& v : t.values()) v = static_cast<Real>(rng.normal(0.0, stddev));
  return t;
}

Tensor uniform_tensor(Shape shape, double bound, RngStream& rng) {
  Tensor t(std::move(shape));
  for (auto& v : t.values()) v = static_cast<Real>((2.0 * rng.uniform() - 1.0) * bound);
  return t;
}

Tensor filled(Shape shape, Real value) { return Tensor(std::move(shape), value); }

std::string layer_name(std::size_t l, const std::string& what) { return "encoder.layer" + std::to_string(l) + "." + what; }
std::string head_name(std::size_t l, std::size_t h, const std::string& what) {
  return layer_name(l, "head" + std::to_string(h) + "." + what);
}

}  // namespace

FitcarlModel::FitcarlModel(const ModelConfig& config, std::size_t num_entities, std::size_t num_relation_ids,
                           std::uint64_t seed)
    : config_(config), num_entities_(num_entities), num_relation_ids_(num_relation_ids) {
  config_.validate();
  RngStream rng(seed, "model_init");
  const std::size_t d = config_.dim, dh = config_.head_dim(), node = config_.node_dim(), hist = config_.hist_dim();
  const auto inv_sqrt = [](std::size_t n) { return 1.0 / std::sqrt(static_cast<double>(n)); };

  auto& p = params_;
  ids_.entity = p.add("entity", normal_tensor({num_entities, d}, 0.1, rng));
  ids_.relation = p.add("relation", normal_tensor({num_relation_ids, d}, 0.1, rng));

  // Log-spaced frequencies cover day-level up to multi-year differences.
  Tensor omega(Shape{d});
  for (std::size_t k = 0; k < d; ++k) {
    const double frac = d > 1 ? static_cast<double>(k) / static_cast<double>(d - 1) : 0.0;
    omega[k] = static_cast<Real>(std::pow(10.0, -3.0 * frac));
  }
  ids_.omega = p.add("time.omega", std::move(omega));
  ids_.phi = p.add("time.phi", filled({d}, 0));

  ids_.cls = p.add("encoder.cls", normal_tensor({d}, 0.1, rng));
  ids_.meta_w = p.add("encoder.meta_w", normal_tensor({d, 2 * d}, inv_sqrt(2 * d), rng));
  ids_.meta_b = p.add("encoder.meta_b", filled({d}, 0));
  for (std::size_t l = 0; l < config_.layers; ++l) {
    TransformerLayerIds layer;
    for (std::size_t h = 0; h < config_.heads; ++h) {
      layer.w_query.push_back(p.add(head_name(l, h, "w_query"), normal_tensor({dh, d}, inv_sqrt(d), rng)));
      layer.w_key.push_back(p.add(head_name(l, h, "w_key"), normal_tensor({dh, d}, inv_sqrt(d), rng)));
      layer.w_value.push_back(p.add(head_name(l, h, "w_value"), normal_tensor({dh, d}, inv_sqrt(d), rng)));
      layer.w_out.push_back(p.add(head_name(l, h, "w_out"), normal_tensor({d, dh}, inv_sqrt(d), rng)));
      layer.w_pos.push_back(p.add(head_name(l, h, "w_pos"), normal_tensor({d}, inv_sqrt(d), rng)));
    }
    layer.b_out = p.add(layer_name(l, "b_out"), filled({d}, 0));
    layer.ln1_gain = p.add(layer_name(l, "ln1_gain"), filled({d}, 1));
    layer.ln1_bias = p.add(layer_name(l, "ln1_bias"), filled({d}, 0));
    layer.ff1_w = p.add(layer_name(l, "ff1_w"), normal_tensor({2 * d, d}, inv_sqrt(d), rng));
    layer.ff1_b = p.add(layer_name(l, "ff1_b"), filled({2 * d}, 0));
    layer.ff2_w = p.add(layer_name(l, "ff2_w"), normal_tensor({d, 2 * d}, inv_sqrt(2 * d), rng));
    layer.ff2_b = p.add(layer_name(l, "ff2_b"), filled({d}, 0));
    layer.ln2_gain = p.add(layer_name(l, "ln2_gain"), filled({d}, 1));
    layer.ln2_bias = p.add(layer_name(l, "ln2_bias"), filled({d}, 0));
    ids_.layers.push_back(std::move(layer));
  }

  const double gru_bound = inv_sqrt(hist);
  ids_.gru_w_ih = p.add("policy.gru_w_ih", uniform_tensor({3 * hist, hist}, gru_bound, rng));
  ids_.gru_w_hh = p.add("policy.gru_w_hh", uniform_tensor({3 * hist, hist}, gru_bound, rng));
  ids_.gru_b_ih = p.add("policy.gru_b_ih", uniform_tensor({3 * hist}, gru_bound, rng));
  ids_.gru_b_hh = p.add("policy.gru_b_hh", uniform_tensor({3 * hist}, gru_bound, rng));
  ids_.dummy_relation = p.add("policy.dummy_relation", normal_tensor({d}, 0.1, rng));
  ids_.w_hist = p.add("policy.w_hist", normal_tensor({2 * d, hist}, inv_sqrt(hist), rng));
  ids_.w_query = p.add("policy.w_query", normal_tensor({2 * d, d + node}, inv_sqrt(d + node), rng));
  ids_.w_action = p.add("policy.w_action", normal_tensor({2 * d, d + node}, inv_sqrt(d + node), rng));
  // Small so that action logits and confidence scores start unsaturated.
  ids_.w_score = p.add("policy.w_score", normal_tensor({2 * d, 2 * d}, 0.1 * inv_sqrt(2 * d), rng));
  ids_.core = p.add("policy.core", normal_tensor({node, d, node}, 0.1 * inv_sqrt(node * d), rng));
  ids_.w_dt = p.add("policy.w_dt", filled({d}, static_cast<Real>(inv_sqrt(d))));
}

FitcarlModel FitcarlModel::restore(const ModelConfig& config, std::size_t num_entities, std::size_t num_relation_ids,
                                   ParamStore params) {
  FitcarlModel m;
  m.config_ = config;
  m.config_.validate();
  m.num_entities_ = num_entities;
  m.num_relation_ids_ = num_relation_ids;
  m.params_ = std::move(params);
  m.ids_ = bind_param_ids(m.params_, m.config_);
  const auto& ent = m.params_.value(m.ids_.entity);
  if (ent.rows() != num_entities || ent.cols() != config.dim) {
    throw std::invalid_argument("restored entity table does not match the model configuration");
  }
  return m;
}

ModelParamIds bind_param_ids(const ParamStore& p, const ModelConfig& config) {
  ModelParamIds ids;
  ids.entity = p.id("entity");
  ids.relation = p.id("relation");
  ids.omega = p.id("time.omega");
  ids.phi = p.id("time.phi");
  ids.cls = p.id("encoder.cls");
  ids.meta_w = p.id("encoder.meta_w");
  ids.meta_b = p.id("encoder.meta_b");
  for (std::size_t l = 0; l < config.layers; ++l) {
    TransformerLayerIds layer;
    for (std::size_t h = 0; h < config.heads; ++h) {
      layer.w_query.push_back(p.id(head_name(l, h, "w_query")));
      layer.w_key.push_back(p.id(head_name(l, h, "w_key")));
      layer.w_value.push_back(p.id(head_name(l, h, "w_value")));
      layer.w_out.push_back(p.id(head_name(l, h, "w_out")));
      layer.w_pos.push_back(p.id(head_name(l, h, "w_pos")));
    }
    layer.b_out = p.id(layer_name(l, "b_out"));
    layer.ln1_gain = p.id(layer_name(l, "ln1_gain"));
    layer.ln1_bias = p.id(layer_name(l, "ln1_bias"));
    layer.ff1_w = p.id(layer_name(l, "ff1_w"));
    layer.ff1_b = p.id(layer_name(l, "ff1_b"));
    layer.ff2_w = p.id(layer_name(l, "ff2_w"));
    layer.ff2_b = p.id(layer_name(l, "ff2_b"));
    layer.ln2_gain = p.id(layer_name(l, "ln2_gain"));
    layer.ln2_bias = p.id(layer_name(l, "ln2_bias"));
    ids.layers.push_back(std::move(layer));
  }
  ids.gru_w_ih = p.id("policy.gru_w_ih");
  ids.gru_w_hh = p.id("policy.gru_w_hh");
  ids.gru_b_ih = p.id("policy.gru_b_ih");
  ids.gru_b_hh = p.id("policy.gru_b_hh");
  ids.dummy_relation = p.id("policy.dummy_relation");
  ids.w_hist = p.id("policy.w_hist");
  ids.w_query = p.id("policy.w_query");
  ids.w_action = p.id("policy.w_action");
  ids.w_score = p.id("policy.w_score");
  ids.core = p.id("policy.core");
  ids.w_dt = p.id("policy.w_dt");
  return ids;
}

void FitcarlModel::load_embeddings(const ComplexEmbedding& emb) {
  if (emb.dim != config_.dim) {
    throw std::invalid_argument("embedding dimension " + std::to_string(emb.dim) + " does not match model dim " +
                                std::to_string(config_.dim));
  }
  auto copy_rows = [](const Tensor& src, Tensor& dst) {
    const std::size_t rows = std::min(src.empty() ? 0 : src.rows(), dst.rows());
    for (std::size_t i = 0; i < rows; ++i) {
      auto s = src.row(i);
      std::copy(s.begin(), s.end(), dst.row(i).begin());
    }
  };
  copy_rows(emb.entities, params_.value(ids_.entity));
  copy_rows(emb.relations, params_.value(ids_.relation));
}

}  // namespace fitcarl
