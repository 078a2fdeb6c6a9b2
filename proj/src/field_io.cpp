#include "pmlab/field_io.hpp"

#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

namespace pmlab {

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void put_le64(std::ostream& os, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, sizeof(bits));
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(bits >> (8 * i));
  os.write(reinterpret_cast<const char*>(b), 8);
}

double get_le64(std::istream& is) {
  unsigned char b[8];
  is.read(reinterpret_cast<char*>(b), 8);
  if (!is) throw DomainError("truncated field snapshot");
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  double v;
  std::memcpy(&v, &bits, sizeof(v));
  return v;
}

}  // namespace

void write_field_snapshot(const std::string& path, const ScalarField& f) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DomainError("cannot open " + path + " for writing");
  const SpaceTimeGrid& g = f.grid;
  os << "pmlab-field 1\n";
  os << "spatial_dim " << g.spatial_dim << "\n";
  os << "time_cells " << g.time_cells << "\n";
  os << "cells";
  for (int a = 0; a < g.spatial_dim; ++a) os << " " << g.cells[a];
  os << "\n";
  os << "time_extent " << fmt(g.t_min) << " " << fmt(g.t_max) << "\n";
  for (int a = 0; a < g.spatial_dim; ++a)
    os << "extent " << fmt(g.x_min[a]) << " " << fmt(g.x_max[a]) << "\n";
  os << "steps " << fmt(g.h) << " " << fmt(g.ht) << "\n";
  os << "nonneg " << (f.nonneg ? 1 : 0) << "\n";
  os << "data\n";
  for (Index i = 0; i < g.cell_count(); ++i) put_le64(os, f.values[i]);
  if (!os) throw DomainError("failed writing " + path);
}

ScalarField read_field_snapshot(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DomainError("cannot open " + path);
  std::string line;
  if (!std::getline(is, line) || line != "pmlab-field 1")
    throw DomainError(path + ": not a pmlab field snapshot");
  int n = 0, nt = 0, nonneg = 0;
  std::array<int, kMaxSpatialDim> nx{};
  std::array<double, kMaxSpatialDim> xmin{}, xmax{};
  double tmin = 0, tmax = 0;
  int extent_axis = 0;
  while (std::getline(is, line)) {
    if (line == "data") break;
    std::istringstream ls(line);
    std::string key;
    ls >> key;
    if (key == "spatial_dim") {
      ls >> n;
    } else if (key == "time_cells") {
      ls >> nt;
    } else if (key == "cells") {
      for (int a = 0; a < n; ++a) ls >> nx[a];
    } else if (key == "time_extent") {
      ls >> tmin >> tmax;
    } else if (key == "extent") {
      if (extent_axis >= kMaxSpatialDim) throw DomainError("too many extents");
      ls >> xmin[extent_axis] >> xmax[extent_axis];
      ++extent_axis;
    } else if (key == "steps") {
      double ignored;
      ls >> ignored >> ignored;  // recomputed from extents and counts
    } else if (key == "nonneg") {
      ls >> nonneg;
    } else {
      throw DomainError(path + ": unknown header key " + key);
    }
    if (!ls) throw DomainError(path + ": malformed header line: " + line);
  }
  if (line != "data") throw DomainError(path + ": missing data section");
  SpaceTimeGrid g(n, xmin, xmax, nx, tmin, tmax, nt);
  ScalarField f(g, nonneg != 0);
  for (Index i = 0; i < g.cell_count(); ++i) f.values[i] = get_le64(is);
  return f;
}

void write_field_csv(const std::string& path, const ScalarField& f) {
  std::ofstream os(path);
  if (!os) throw DomainError("cannot open " + path + " for writing");
  const SpaceTimeGrid& g = f.grid;
  os << "t";
  for (int a = 0; a < g.spatial_dim; ++a) os << ",x" << a;
  os << ",value\n";
  const Index ns = g.spatial_count();
  for (int it = 0; it < g.time_cells; ++it) {
    std::array<int, kMaxSpatialDim> ix{};
    for (Index s = 0; s < ns; ++s) {
      os << fmt(g.t_center(it));
      for (int a = 0; a < g.spatial_dim; ++a)
        os << "," << fmt(g.x_center(a, ix[a]));
      os << "," << fmt(f.values[static_cast<Index>(it) * ns + s]) << "\n";
      for (int a = g.spatial_dim - 1; a >= 0; --a) {
        if (++ix[a] < g.cells[a]) break;
        ix[a] = 0;
      }
    }
  }
}

}  // namespace pmlab
