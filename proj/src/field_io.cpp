#include "bidomain/field_io.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <ostream>

namespace bidomain {

namespace {

template <typename T>
void put_le(std::ostream& out, T value) {
  static_assert(std::is_trivially_copyable_v<T>);
  unsigned char bytes[sizeof(T)];
  std::memcpy(bytes, &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  out.write(reinterpret_cast<const char*>(bytes), sizeof(T));
}

template <typename T>
T get_le(std::istream& in) {
  unsigned char bytes[sizeof(T)];
  if (!in.read(reinterpret_cast<char*>(bytes), sizeof(T))) throw InvalidArgument("field dump truncated");
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  T value;
  std::memcpy(&value, bytes, sizeof(T));
  return value;
}

std::uint8_t boundary_byte(const GridSpec& grid) {
  if (grid.all_periodic()) return 0;
  if (grid.all_box()) return 1;
  std::uint8_t mask = 0x80;
  for (int a = 0; a < grid.dim(); ++a)
    if (grid.boundary(a) == Boundary::neumann_box) mask |= static_cast<std::uint8_t>(1u << a);
  return mask;
}

std::vector<Boundary> decode_boundary(std::uint8_t byte, int dim) {
  if (byte == 0) return std::vector<Boundary>(dim, Boundary::periodic);
  if (byte == 1) return std::vector<Boundary>(dim, Boundary::neumann_box);
  if (!(byte & 0x80)) throw InvalidArgument("field dump has an unknown boundary kind");
  std::vector<Boundary> out(dim);
  for (int a = 0; a < dim; ++a) out[a] = (byte >> a) & 1u ? Boundary::neumann_box : Boundary::periodic;
  return out;
}

}  // namespace

void write_field_dump(std::ostream& out, const ScalarField& f, ScalarKind kind) {
  const auto& grid = f.grid();
  out.write("BDK1", 4);
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(grid.dim()));
  for (int a = 0; a < grid.dim(); ++a) put_le<std::uint32_t>(out, static_cast<std::uint32_t>(grid.points(a)));
  for (int a = 0; a < grid.dim(); ++a) put_le<double>(out, grid.extent(a));
  put_le<std::uint8_t>(out, boundary_byte(grid));
  put_le<std::uint8_t>(out, static_cast<std::uint8_t>(kind));
  for (Index j = 0; j < f.size(); ++j) {
    put_le<double>(out, f[j].real());
    if (kind == ScalarKind::complex) put_le<double>(out, f[j].imag());
  }
}

void write_field_dump(const std::string& path, const ScalarField& f, ScalarKind kind) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InvalidArgument("cannot open " + path + " for writing");
  write_field_dump(out, f, kind);
}

ScalarField read_field_dump(std::istream& in) {
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, "BDK1", 4) != 0) throw InvalidArgument("not a BDK1 field dump");
  const auto d = static_cast<int>(get_le<std::uint32_t>(in));
  if (d < 1 || d > 3) throw InvalidArgument("field dump has invalid dimension");
  std::vector<Index> points(d);
  std::vector<double> extents(d);
  for (auto& n : points) n = static_cast<Index>(get_le<std::uint32_t>(in));
  for (auto& e : extents) e = get_le<double>(in);
  const auto boundaries = decode_boundary(get_le<std::uint8_t>(in), d);
  const auto kind = get_le<std::uint8_t>(in);
  if (kind > 1) throw InvalidArgument("field dump has an unknown scalar kind");
  GridSpec grid(extents, points, boundaries);
  VectorXcd values(grid.size());
  for (Index j = 0; j < grid.size(); ++j) {
    const double re = get_le<double>(in);
    const double im = kind == 1 ? get_le<double>(in) : 0.0;
    values[j] = Complex(re, im);
  }
  return ScalarField(std::move(grid), std::move(values));
}

ScalarField read_field_dump(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidArgument("cannot open " + path);
  return read_field_dump(in);
}

void write_field_csv(std::ostream& out, const ScalarField& f, ScalarKind kind) {
  const auto& grid = f.grid();
  for (int a = 0; a < grid.dim(); ++a) out << 'i' << a << ',';
  out << (kind == ScalarKind::complex ? "re,im" : "value") << '\n';
  out << std::setprecision(17);
  for (Index j = 0; j < f.size(); ++j) {
    const auto idx = grid.unflatten(j);
    for (int a = 0; a < grid.dim(); ++a) out << idx[a] << ',';
    out << f[j].real();
    if (kind == ScalarKind::complex) out << ',' << f[j].imag();
    out << '\n';
  }
}

}  // namespace bidomain
