#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>

#include "fitcarl/adam.hpp"
#include "fitcarl/model.hpp"

namespace fitcarl {

/// Model parameters, configuration, optimizer moments and the position of
/// the training random streams (root seed plus completed episodes).
struct Checkpoint {
  FitcarlModel model;
  AdamState adam;
  std::uint64_t seed = 0;
  std::uint64_t episodes_done = 0;
};

bool operator==(const Checkpoint& a, const Checkpoint& b);

void write_model_config(std::ostream& out, const ModelConfig& config);
ModelConfig read_model_config(std::istream& in);

void write_checkpoint(std::ostream& out, const Checkpoint& ckpt);
Checkpoint read_checkpoint(std::istream& in);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace fitcarl
