#pragma once

#include <iosfwd>
#include <string>

#include "bidomain/grid_fields.hpp"

namespace bidomain {

enum class ScalarKind : std::uint8_t { real = 0, complex = 1 };

/// Binary field dump, little-endian:
///   "BDK1" | u32 d | u32 n_1..n_d | f64 extent_1..extent_d |
///   u8 boundary | u8 scalar kind | values
/// Boundary byte: 0 periodic, 1 neumann box, 0x80|mask for mixed grids
/// (bit a set when axis a is a box axis). Real dumps store one f64 per
/// node, complex dumps store (re, im) pairs.
void write_field_dump(std::ostream& out, const ScalarField& f, ScalarKind kind = ScalarKind::complex);
void write_field_dump(const std::string& path, const ScalarField& f, ScalarKind kind = ScalarKind::complex);
ScalarField read_field_dump(std::istream& in);
ScalarField read_field_dump(const std::string& path);

/// Plain-text export: one row per node with index columns then value columns.
void write_field_csv(std::ostream& out, const ScalarField& f, ScalarKind kind = ScalarKind::complex);

}  // namespace bidomain
