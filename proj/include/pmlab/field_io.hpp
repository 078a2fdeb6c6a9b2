#pragma once

#include <string>

#include "pmlab/grid.hpp"

namespace pmlab {

/// Snapshot format: a text header (dims, extents, steps, flags) terminated by
/// a "data" line, followed by the flat cell values as little-endian 64-bit
/// floats in time-major order. Round trips are bit-exact.
void write_field_snapshot(const std::string& path, const ScalarField& f);
ScalarField read_field_snapshot(const std::string& path);

/// Human-readable CSV export (t, x..., value), intended for small grids.
void write_field_csv(const std::string& path, const ScalarField& f);

}  // namespace pmlab
