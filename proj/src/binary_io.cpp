#include "fitcarl/binary_io.hpp"

#include <vector>

namespace fitcarl::io {

void write_magic(std::ostream& out, std::string_view magic) { out.write(magic.data(), static_cast<std::streamsize>(magic.size())); }

void expect_magic(std::istream& in, std::string_view magic, std::string_view what) {
  std::string got(magic.size(), '\0');
  in.read(got.data(), static_cast<std::streamsize>(got.size()));
  if (!in || got != magic) {
    throw FormatError(std::string(what) + ": bad magic header (expected " + std::string(magic) + ")");
  }
}

void write_string(std::ostream& out, std::string_view s) {
  write_pod(out, static_cast<std::uint64_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string read_string(std::istream& in) {
  auto n = read_pod<std::uint64_t>(in);
  if (n > (1ULL << 32)) throw FormatError("string length out of range");
  std::string s(n, '\0');
  in.read(s.data(), static_cast<std::streamsize>(n));
  if (!in) throw FormatError("unexpected end of binary stream");
  return s;
}

void write_tensor(std::ostream& out, const Tensor& t) {
  write_pod(out, static_cast<std::uint32_t>(t.rank()));
  for (auto d : t.shape()) write_pod(out, static_cast<std::uint64_t>(d));
  // Always stored as float64 so checkpoints are precision independent.
  for (auto v : t.values()) write_pod(out, static_cast<double>(v));
}

Tensor read_tensor(std::istream& in) {
  auto rank = read_pod<std::uint32_t>(in);
  if (rank > 8) throw FormatError("tensor rank out of range");
  Shape shape(rank);
  for (auto& d : shape) d = static_cast<std::size_t>(read_pod<std::uint64_t>(in));
  const auto n = shape_size(shape);
  if (n > (1ULL << 34)) throw FormatError("tensor size out of range");
  std::vector<Real> data(n);
  for (auto& v : data) v = static_cast<Real>(read_pod<double>(in));
  return Tensor(std::move(shape), std::move(data));
}

}  // namespace fitcarl::io
