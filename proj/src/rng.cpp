#include "fitcarl/rng.hpp"

#include <numeric>
#include <stdexcept>

namespace fitcarl {

std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t hash_name(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

RngStream::RngStream(std::uint64_t key) : key_(key), engine_(mix64(key)) {}

RngStream::RngStream(std::uint64_t root_seed, std::string_view name)
    : RngStream(mix64(root_seed) ^ hash_name(name)) {}

RngStream RngStream::child(std::string_view name) const {
  return RngStream(mix64(key_ ^ hash_name(name)));
}

RngStream RngStream::child(std::uint64_t index) const {
  return RngStream(mix64(key_ + mix64(index + 0x632be59bd9b4e019ULL)));
}

double RngStream::uniform() {
  ++draws_;
  // 53 random mantissa bits.
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

std::uint64_t RngStream::uniform_index(std::uint64_t n) {
  if (n == 0) throw std::invalid_argument("uniform_index: n must be positive");
  ++draws_;
  std::uniform_int_distribution<std::uint64_t> dist(0, n - 1);
  return dist(engine_);
}

double RngStream::normal(double mean, double stddev) {
  ++draws_;
  std::normal_distribution<double> dist(mean, stddev);
  return dist(engine_);
}

std::vector<std::size_t> RngStream::sample_without_replacement(std::size_t n, std::size_t k) {
  if (k > n) throw std::invalid_argument("sample_without_replacement: k > n");
  std::vector<std::size_t> pool(n);
  std::iota(pool.begin(), pool.end(), std::size_t{0});
  for (std::size_t i = 0; i < k; ++i) {
    auto j = i + static_cast<std::size_t>(uniform_index(n - i));
    std::swap(pool[i], pool[j]);
  }
  pool.resize(k);
  return pool;
}

}  // namespace fitcarl
