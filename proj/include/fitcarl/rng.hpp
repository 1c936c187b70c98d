#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <string_view>
#include <vector>

namespace fitcarl {

/// Mixes a 64-bit value (splitmix64 finalizer).
std::uint64_t mix64(std::uint64_t x);

/// FNV-1a over the bytes of `text`.
std::uint64_t hash_name(std::string_view text);

/// A named, independently seeded random stream.
///
/// Streams are derived from (root seed, name) so that two components asking
/// for different names never share state, and the same (seed, name) pair
/// always reproduces the same sequence. Sub-streams are derived by name or by
/// an integer index (episode number, query number, ...).
class RngStream {
 public:
  RngStream(std::uint64_t root_seed, std::string_view name);

  RngStream child(std::string_view name) const;
  RngStream child(std::uint64_t index) const;

  /// Uniform double in [0, 1).
  double uniform();
  /// Uniform integer in [0, n).
  std::uint64_t uniform_index(std::uint64_t n);
  double normal(double mean = 0.0, double stddev = 1.0);

  /// Samples `k` distinct indices from [0, n) uniformly, in sampling order.
  std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t k);

  std::uint64_t key() const { return key_; }
  std::uint64_t draws() const { return draws_; }

  std::mt19937_64& engine() { return engine_; }

 private:
  explicit RngStream(std::uint64_t key);

  std::uint64_t key_;
  std::uint64_t draws_ = 0;
  std::mt19937_64 engine_;
};

}  // namespace fitcarl
