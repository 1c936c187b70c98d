#pragma once

#include <cstdint>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <type_traits>

#include "fitcarl/tensor.hpp"

// Little helpers for the versioned binary formats (store, embeddings,
// checkpoints). Values are written in host byte order.
namespace fitcarl::io {

class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

template <typename T>
void write_pod(std::ostream& out, const T& value) {
  static_assert(std::is_trivially_copyable_v<T>);
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T read_pod(std::istream& in) {
  static_assert(std::is_trivially_copyable_v<T>);
  T value{};
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (!in) throw FormatError("unexpected end of binary stream");
  return value;
}

void write_magic(std::ostream& out, std::string_view magic);
/// Throws FormatError naming `what` when the magic does not match.
void expect_magic(std::istream& in, std::string_view magic, std::string_view what);

void write_string(std::ostream& out, std::string_view s);
std::string read_string(std::istream& in);

void write_tensor(std::ostream& out, const Tensor& t);
Tensor read_tensor(std::istream& in);

}  // namespace fitcarl::io
