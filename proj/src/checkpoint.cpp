#include "fitcarl/checkpoint.hpp"

#include <fstream>

#include "fitcarl/binary_io.hpp"

namespace fitcarl {

namespace {

constexpr std::string_view kMagic = "FITCARL1";
constexpr std::uint32_t kVersion = 1;

void write_flag(std::ostream& out, bool b) { io::write_pod<std::uint8_t>(out, b ? 1 : 0); }
bool read_flag(std::istream& in) { return io::read_pod<std::uint8_t>(in) != 0; }

}  // namespace

bool operator==(const Checkpoint& a, const Checkpoint& b) {
  return a.seed == b.seed && a.episodes_done == b.episodes_done && a.model.config() == b.model.config() &&
         a.model.num_entities() == b.model.num_entities() &&
         a.model.num_relation_ids() == b.model.num_relation_ids() && a.model.params() == b.model.params() &&
         a.adam == b.adam;
}

void write_model_config(std::ostream& out, const ModelConfig& c) {
  io::write_pod<std::uint64_t>(out, c.dim);
  io::write_pod<std::uint64_t>(out, c.heads);
  io::write_pod<std::uint64_t>(out, c.layers);
  io::write_pod<std::uint64_t>(out, c.action_cap);
  io::write_pod<std::uint64_t>(out, c.steps);
  io::write_pod(out, c.gamma);
  io::write_pod(out, c.eta);
  io::write_pod(out, c.theta);
  io::write_pod(out, c.dropout);
  io::write_string(out, c.ablation.to_string());
  write_flag(out, c.cls_time_per_query);
  write_flag(out, c.reward_gradient);
  write_flag(out, c.empty_prior_zero_kl);
  write_flag(out, c.beam_sum);
}

ModelConfig read_model_config(std::istream& in) {
  ModelConfig c;
  c.dim = io::read_pod<std::uint64_t>(in);
  c.heads = io::read_pod<std::uint64_t>(in);
  c.layers = io::read_pod<std::uint64_t>(in);
  c.action_cap = io::read_pod<std::uint64_t>(in);
  c.steps = io::read_pod<std::uint64_t>(in);
  c.gamma = io::read_pod<double>(in);
  c.eta = io::read_pod<double>(in);
  c.theta = io::read_pod<double>(in);
  c.dropout = io::read_pod<double>(in);
  c.ablation = Ablation::parse(io::read_string(in));
  c.cls_time_per_query = read_flag(in);
  c.reward_gradient = read_flag(in);
  c.empty_prior_zero_kl = read_flag(in);
  c.beam_sum = read_flag(in);
  return c;
}

void write_checkpoint(std::ostream& out, const Checkpoint& ckpt) {
  io::write_magic(out, kMagic);
  io::write_pod(out, kVersion);
  write_model_config(out, ckpt.model.config());
  io::write_pod<std::uint64_t>(out, ckpt.model.num_entities());
  io::write_pod<std::uint64_t>(out, ckpt.model.num_relation_ids());
  io::write_pod(out, ckpt.seed);
  io::write_pod(out, ckpt.episodes_done);
  const auto& params = ckpt.model.params();
  io::write_pod<std::uint64_t>(out, params.size());
  for (ParamId i = 0; i < params.size(); ++i) {
    io::write_string(out, params.name(i));
    io::write_tensor(out, params.value(i));
  }
  write_adam_state(out, ckpt.adam);
}

Checkpoint read_checkpoint(std::istream& in) {
  io::expect_magic(in, kMagic, "checkpoint");
  const auto version = io::read_pod<std::uint32_t>(in);
  if (version != kVersion) throw io::FormatError("unsupported checkpoint version " + std::to_string(version));
  ModelConfig config = read_model_config(in);
  const auto num_entities = io::read_pod<std::uint64_t>(in);
  const auto num_relations = io::read_pod<std::uint64_t>(in);
  Checkpoint ckpt;
  ckpt.seed = io::read_pod<std::uint64_t>(in);
  ckpt.episodes_done = io::read_pod<std::uint64_t>(in);
  ParamStore params;
  const auto n = io::read_pod<std::uint64_t>(in);
  for (std::uint64_t i = 0; i < n; ++i) {
    std::string name = io::read_string(in);
    params.add(std::move(name), io::read_tensor(in));
  }
  ckpt.model = FitcarlModel::restore(config, num_entities, num_relations, std::move(params));
  ckpt.adam = read_adam_state(in);
  if (!ckpt.adam.m.empty() && ckpt.adam.m.size() != ckpt.model.params().size()) {
    throw io::FormatError("checkpoint optimizer state does not match its parameters");
  }
  return ckpt;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write checkpoint " + path.string());
  write_checkpoint(out, ckpt);
  if (!out) throw std::runtime_error("failed writing checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint " + path.string());
  return read_checkpoint(in);
}

}  // namespace fitcarl
