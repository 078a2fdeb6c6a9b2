#include "pmlab/grid.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "pmlab/parallel.hpp"

namespace pmlab {

namespace {

bool is_nonneg_integer(double q) {
  return q >= 0.0 && q == std::floor(q) && q < 64;
}

/// Per-axis decomposition of a real interval against a uniform cell axis:
/// index range [lo_idx, hi_idx] of touched cells plus the coverage fraction
/// of the two end cells. Interior cells have fraction 1.
struct AxisCover {
  int lo_idx = 0;
  int hi_idx = -1;  // inclusive; empty when hi_idx < lo_idx
  double lo_frac = 0.0;
  double hi_frac = 0.0;
  bool single = false;  // lo_idx == hi_idx; fraction stored in lo_frac
};

AxisCover axis_cover(double a, double b, double origin, double step, int count) {
  AxisCover c;
  a = std::max(a, origin);
  b = std::min(b, origin + step * count);
  if (b - a <= 0.0) return c;  // empty
  double fa = (a - origin) / step;
  double fb = (b - origin) / step;
  int ia = std::clamp(static_cast<int>(std::floor(fa)), 0, count - 1);
  int ib = std::clamp(static_cast<int>(std::ceil(fb)) - 1, 0, count - 1);
  // Degenerate floating point: make sure interval endpoints map consistently.
  if (ib < ia) ib = ia;
  c.lo_idx = ia;
  c.hi_idx = ib;
  if (ia == ib) {
    c.single = true;
    c.lo_frac = (b - a) / step;
    c.hi_frac = c.lo_frac;
    return c;
  }
  c.lo_frac = (origin + step * (ia + 1) - a) / step;
  c.hi_frac = (b - (origin + step * ib)) / step;
  return c;
}

}  // namespace

SpaceTimeGrid::SpaceTimeGrid(int n, std::array<double, kMaxSpatialDim> xmin,
                             std::array<double, kMaxSpatialDim> xmax,
                             std::array<int, kMaxSpatialDim> nx, double tmin,
                             double tmax, int nt)
    : spatial_dim(n),
      x_min(xmin),
      x_max(xmax),
      t_min(tmin),
      t_max(tmax),
      cells(nx),
      time_cells(nt) {
  if (n < 1 || n > kMaxSpatialDim) throw ConfigError("spatial_dim out of range");
  if (nt < 1) throw ConfigError("time_cells must be positive");
  for (int a = 0; a < n; ++a) {
    if (nx[a] < 1) throw ConfigError("cells_per_axis must be positive");
    if (!(xmax[a] > xmin[a])) throw ConfigError("empty spatial extent");
  }
  if (!(tmax > tmin)) throw ConfigError("empty time extent");
  h = (xmax[0] - xmin[0]) / nx[0];
  ht = (tmax - tmin) / nt;
  for (int a = 1; a < n; ++a) {
    double ha = (xmax[a] - xmin[a]) / nx[a];
    if (std::abs(ha - h) > 1e-12 * std::abs(h))
      throw ConfigError("spatial step must be identical on every axis");
  }
}

SpaceTimeGrid SpaceTimeGrid::line(double x0, double x1, int nx, double t0,
                                  double t1, int nt) {
  return SpaceTimeGrid(1, {x0, 0, 0}, {x1, 0, 0}, {nx, 0, 0}, t0, t1, nt);
}

SpaceTimeGrid SpaceTimeGrid::plane(double x0, double x1, int nx, double y0,
                                   double y1, int ny, double t0, double t1,
                                   int nt) {
  return SpaceTimeGrid(2, {x0, y0, 0}, {x1, y1, 0}, {nx, ny, 0}, t0, t1, nt);
}

Index SpaceTimeGrid::cell_count() const {
  return static_cast<Index>(time_cells) * spatial_count();
}

Index SpaceTimeGrid::spatial_count() const {
  Index c = 1;
  for (int a = 0; a < spatial_dim; ++a) c *= cells[a];
  return c;
}

double SpaceTimeGrid::cell_volume() const {
  return ht * spatial_cell_volume();
}

double SpaceTimeGrid::spatial_cell_volume() const {
  double v = 1.0;
  for (int a = 0; a < spatial_dim; ++a) v *= h;
  return v;
}

Index SpaceTimeGrid::index(int it,
                           const std::array<int, kMaxSpatialDim>& ix) const {
  Index idx = it;
  for (int a = 0; a < spatial_dim; ++a) idx = idx * cells[a] + ix[a];
  return idx;
}

SpaceTimeGrid SpaceTimeGrid::refined(int factor) const {
  std::array<int, kMaxSpatialDim> nx = cells;
  for (int a = 0; a < spatial_dim; ++a) nx[a] *= factor;
  return SpaceTimeGrid(spatial_dim, x_min, x_max, nx, t_min, t_max,
                       time_cells * factor);
}

ScalarField::ScalarField(SpaceTimeGrid g, bool nonneg_flag)
    : grid(std::move(g)), nonneg(nonneg_flag) {
  values = ArrayX::Zero(grid.cell_count());
}

void ScalarField::validate() const {
  if (!values.allFinite()) throw DomainError("field has non-finite values");
  if (nonneg && (values < 0.0).any())
    throw DomainError("nonneg field has negative values");
}

ScalarField ScalarField::sample(
    const SpaceTimeGrid& g,
    const std::function<double(const std::array<double, kMaxSpatialDim>&,
                               double)>& f,
    bool nonneg_flag) {
  ScalarField out(g, nonneg_flag);
  const Index ns = g.spatial_count();
  for (int it = 0; it < g.time_cells; ++it) {
    const double t = g.t_center(it);
    std::array<int, kMaxSpatialDim> ix{};
    for (Index s = 0; s < ns; ++s) {
      std::array<double, kMaxSpatialDim> x{};
      for (int a = 0; a < g.spatial_dim; ++a) x[a] = g.x_center(a, ix[a]);
      out.values[static_cast<Index>(it) * ns + s] = f(x, t);
      // advance the mixed-radix spatial index
      for (int a = g.spatial_dim - 1; a >= 0; --a) {
        if (++ix[a] < g.cells[a]) break;
        ix[a] = 0;
      }
    }
  }
  return out;
}

ScalarField ScalarField::constant(const SpaceTimeGrid& g, double c) {
  ScalarField out(g, c >= 0.0);
  out.values.setConstant(c);
  return out;
}

double Cylinder::volume(int spatial_dim) const {
  double v = duration();
  for (int a = 0; a < spatial_dim; ++a) v *= 2.0 * radius;
  return v;
}

bool Cylinder::inside(const SpaceTimeGrid& g, double tol) const {
  const double st = tol * std::max(1.0, std::abs(g.t_max - g.t_min));
  if (t_lo() < g.t_min - st || t_hi() > g.t_max + st) return false;
  for (int a = 0; a < g.spatial_dim; ++a) {
    const double sx = tol * std::max(1.0, g.x_max[a] - g.x_min[a]);
    if (x_lo(a) < g.x_min[a] - sx || x_hi(a) > g.x_max[a] + sx) return false;
  }
  return true;
}

bool Cylinder::contains(const Cylinder& other, int spatial_dim,
                        double tol) const {
  if (other.t_lo() < t_lo() - tol || other.t_hi() > t_hi() + tol) return false;
  for (int a = 0; a < spatial_dim; ++a)
    if (other.x_lo(a) < x_lo(a) - tol || other.x_hi(a) > x_hi(a) + tol)
      return false;
  return true;
}

bool Cylinder::intersects(const Cylinder& other, int spatial_dim) const {
  if (t_lo() >= other.t_hi() || other.t_lo() >= t_hi()) return false;
  for (int a = 0; a < spatial_dim; ++a)
    if (x_lo(a) >= other.x_hi(a) || other.x_lo(a) >= x_hi(a)) return false;
  return true;
}

TimeCoverage time_coverage(const SpaceTimeGrid& g, const Cylinder& Q) {
  AxisCover c = axis_cover(Q.t_lo(), Q.t_hi(), g.t_min, g.ht, g.time_cells);
  TimeCoverage tc;
  if (c.hi_idx < c.lo_idx) return tc;
  tc.first = c.lo_idx;
  const int count = c.hi_idx - c.lo_idx + 1;
  tc.weight.assign(count, 1.0);
  if (c.single) {
    tc.weight[0] = c.lo_frac;
  } else {
    tc.weight.front() = c.lo_frac;
    tc.weight.back() = c.hi_frac;
  }
  return tc;
}

void for_each_covered_cell(const SpaceTimeGrid& g, const Cylinder& Q,
                           const std::function<void(Index, double)>& visit) {
  std::array<AxisCover, kMaxSpatialDim + 1> cov;
  cov[0] = axis_cover(Q.t_lo(), Q.t_hi(), g.t_min, g.ht, g.time_cells);
  if (cov[0].hi_idx < cov[0].lo_idx) return;
  for (int a = 0; a < g.spatial_dim; ++a) {
    cov[a + 1] =
        axis_cover(Q.x_lo(a), Q.x_hi(a), g.x_min[a], g.h, g.cells[a]);
    if (cov[a + 1].hi_idx < cov[a + 1].lo_idx) return;
  }
  const int n = g.spatial_dim;
  std::array<int, kMaxSpatialDim + 1> idx{};
  std::array<double, kMaxSpatialDim + 1> wpart{};
  auto axis_weight = [&](int axis, int i) -> double {
    const AxisCover& c = cov[axis];
    if (c.single) return c.lo_frac;
    if (i == c.lo_idx) return c.lo_frac;
    if (i == c.hi_idx) return c.hi_frac;
    return 1.0;
  };
  for (idx[0] = cov[0].lo_idx; idx[0] <= cov[0].hi_idx; ++idx[0]) {
    wpart[0] = axis_weight(0, idx[0]);
    // nested loops over up to 3 spatial axes
    std::array<int, kMaxSpatialDim> ix{};
    std::function<void(int, double)> rec = [&](int a, double w) {
      if (a == n) {
        visit(g.index(idx[0], ix), w);
        return;
      }
      for (int i = cov[a + 1].lo_idx; i <= cov[a + 1].hi_idx; ++i) {
        ix[a] = i;
        rec(a + 1, w * axis_weight(a + 1, i));
      }
    };
    rec(0, wpart[0]);
  }
}

void for_each_covered_slice_cell(
    const SpaceTimeGrid& g, const Cylinder& Q, int it,
    const std::function<void(Index, double)>& visit) {
  const int n = g.spatial_dim;
  std::array<AxisCover, kMaxSpatialDim> cov;
  for (int a = 0; a < n; ++a) {
    cov[a] = axis_cover(Q.x_lo(a), Q.x_hi(a), g.x_min[a], g.h, g.cells[a]);
    if (cov[a].hi_idx < cov[a].lo_idx) return;
  }
  auto axis_weight = [&](int a, int i) -> double {
    const AxisCover& c = cov[a];
    if (c.single) return c.lo_frac;
    if (i == c.lo_idx) return c.lo_frac;
    if (i == c.hi_idx) return c.hi_frac;
    return 1.0;
  };
  std::array<int, kMaxSpatialDim> ix{};
  std::function<void(int, double)> rec = [&](int a, double w) {
    if (a == n) {
      visit(g.index(it, ix), w);
      return;
    }
    for (int i = cov[a].lo_idx; i <= cov[a].hi_idx; ++i) {
      ix[a] = i;
      rec(a + 1, w * axis_weight(a, i));
    }
  };
  rec(0, 1.0);
}

double power_value(double v, double q) {
  if (q == 1.0) return v;
  if (q == 2.0) return v * v;
  if (is_nonneg_integer(q)) {
    double r = 1.0;
    int e = static_cast<int>(q);
    double base = v;
    while (e > 0) {
      if (e & 1) r *= base;
      base *= base;
      e >>= 1;
    }
    return r;
  }
  if (v < 0.0) throw DomainError("negative value with fractional power");
  if (v == 0.0) return 0.0;
  return std::pow(v, q);
}

PrefixSumTable::PrefixSumTable(const ScalarField& f, double power)
    : grid_(f.grid), power_(power) {
  if (!(power > 0.0)) throw DomainError("prefix table power must be positive");
  if (!is_nonneg_integer(power) && (f.values < 0.0).any())
    throw DomainError("fractional power over a field with negative values");
  const int axes = grid_.axes();
  dims_[0] = grid_.time_cells + 1;
  for (int a = 0; a < grid_.spatial_dim; ++a) dims_[a + 1] = grid_.cells[a] + 1;
  for (int a = grid_.spatial_dim + 1; a <= kMaxSpatialDim; ++a) dims_[a] = 1;
  Index total = 1;
  for (int a = axes - 1; a >= 0; --a) {
    strides_[a] = total;
    total *= dims_[a];
  }
  sums_.assign(static_cast<std::size_t>(total), 0.0L);

  // Running cumulative build: sums_[i0+1, ..] holds the sum over the lattice
  // box [0,i0] x ...; averages are of |g|^q throughout, so store |v|^power.
  std::array<int, kMaxSpatialDim + 1> idx{};
  const int n = grid_.spatial_dim;
  for (int it = 0; it < grid_.time_cells; ++it) {
    std::array<int, kMaxSpatialDim> ix{};
    const Index ns = grid_.spatial_count();
    for (Index s = 0; s < ns; ++s) {
      const double v = std::abs(f.values[static_cast<Index>(it) * ns + s]);
      idx[0] = it + 1;
      for (int a = 0; a < n; ++a) idx[a + 1] = ix[a] + 1;
      Index off = 0;
      for (int a = 0; a < axes; ++a) off += idx[a] * strides_[a];
      sums_[static_cast<std::size_t>(off)] = power_value(v, power_);
      for (int a = n - 1; a >= 0; --a) {
        if (++ix[a] < grid_.cells[a]) break;
        ix[a] = 0;
      }
    }
  }
  // Cumulate along each axis in turn.
  for (int a = 0; a < axes; ++a) {
    const Index stride = strides_[a];
    const Index dim = dims_[a];
    const Index total_cells = static_cast<Index>(sums_.size());
    for (Index base = 0; base < total_cells; ++base) {
      // Only iterate bases with coordinate 0 along axis a.
      if ((base / stride) % dim != 0) continue;
      long double acc = 0.0L;
      for (Index i = 0; i < dim; ++i) {
        acc += sums_[static_cast<std::size_t>(base + i * stride)];
        sums_[static_cast<std::size_t>(base + i * stride)] = acc;
      }
    }
  }
}

long double PrefixSumTable::corner(
    const std::array<Index, kMaxSpatialDim + 1>& idx) const {
  Index off = 0;
  for (int a = 0; a < grid_.axes(); ++a) off += idx[a] * strides_[a];
  return sums_[static_cast<std::size_t>(off)];
}

double PrefixSumTable::aligned_sum(
    int it0, int it1, const std::array<int, kMaxSpatialDim>& lo,
    const std::array<int, kMaxSpatialDim>& hi) const {
  const int axes = grid_.axes();
  std::array<Index, kMaxSpatialDim + 1> lo_idx{}, hi_idx{};
  lo_idx[0] = it0;
  hi_idx[0] = it1;
  for (int a = 0; a < grid_.spatial_dim; ++a) {
    lo_idx[a + 1] = lo[a];
    hi_idx[a + 1] = hi[a];
  }
  for (int a = 0; a < axes; ++a)
    if (hi_idx[a] <= lo_idx[a]) return 0.0;
  // inclusion-exclusion over 2^axes corners
  long double total = 0.0L;
  for (int mask = 0; mask < (1 << axes); ++mask) {
    std::array<Index, kMaxSpatialDim + 1> c{};
    int bits = 0;
    for (int a = 0; a < axes; ++a) {
      if (mask & (1 << a)) {
        c[a] = lo_idx[a];
        ++bits;
      } else {
        c[a] = hi_idx[a];
      }
    }
    total += (bits % 2 == 0 ? 1.0L : -1.0L) * corner(c);
  }
  return static_cast<double>(total);
}

double PrefixSumTable::box_integral(
    double t_lo, double t_hi, const std::array<double, kMaxSpatialDim>& lo,
    const std::array<double, kMaxSpatialDim>& hi) const {
  const int axes = grid_.axes();
  std::array<AxisCover, kMaxSpatialDim + 1> cov;
  cov[0] = axis_cover(t_lo, t_hi, grid_.t_min, grid_.ht, grid_.time_cells);
  if (cov[0].hi_idx < cov[0].lo_idx) return 0.0;
  for (int a = 0; a < grid_.spatial_dim; ++a) {
    cov[a + 1] = axis_cover(lo[a], hi[a], grid_.x_min[a], grid_.h,
                            grid_.cells[a]);
    if (cov[a + 1].hi_idx < cov[a + 1].lo_idx) return 0.0;
  }
  // Per axis: up to 3 segments (lower partial cell, full interior, upper
  // partial cell), each a contiguous aligned range with a constant weight.
  struct Segment {
    int lo, hi;  // half-open cell range
    double w;
  };
  std::array<std::vector<Segment>, kMaxSpatialDim + 1> segs;
  for (int a = 0; a < axes; ++a) {
    const AxisCover& c = cov[a];
    auto& s = segs[a];
    if (c.single) {
      s.push_back({c.lo_idx, c.lo_idx + 1, c.lo_frac});
      continue;
    }
    s.push_back({c.lo_idx, c.lo_idx + 1, c.lo_frac});
    if (c.hi_idx - c.lo_idx > 1) s.push_back({c.lo_idx + 1, c.hi_idx, 1.0});
    s.push_back({c.hi_idx, c.hi_idx + 1, c.hi_frac});
  }
  long double total = 0.0L;
  std::array<std::size_t, kMaxSpatialDim + 1> pick{};
  while (true) {
    double w = 1.0;
    std::array<int, kMaxSpatialDim> slo{}, shi{};
    int it0 = 0, it1 = 0;
    for (int a = 0; a < axes; ++a) {
      const Segment& s = segs[a][pick[a]];
      w *= s.w;
      if (a == 0) {
        it0 = s.lo;
        it1 = s.hi;
      } else {
        slo[a - 1] = s.lo;
        shi[a - 1] = s.hi;
      }
    }
    for (int a = grid_.spatial_dim; a < kMaxSpatialDim; ++a) {
      slo[a] = 0;
      shi[a] = 1;
    }
    if (w != 0.0) total += w * static_cast<long double>(
                                   aligned_sum(it0, it1, slo, shi));
    // next combination
    int a = axes - 1;
    while (a >= 0 && ++pick[a] == segs[a].size()) {
      pick[a] = 0;
      --a;
    }
    if (a < 0) break;
  }
  return static_cast<double>(total) * grid_.cell_volume();
}

double PrefixSumTable::cylinder_integral(const Cylinder& Q) const {
  std::array<double, kMaxSpatialDim> lo{}, hi{};
  for (int a = 0; a < grid_.spatial_dim; ++a) {
    lo[a] = Q.x_lo(a);
    hi[a] = Q.x_hi(a);
  }
  return box_integral(Q.t_lo(), Q.t_hi(), lo, hi);
}

double cylinder_average(const PrefixSumTable& table, const Cylinder& Q) {
  if (!Q.inside(table.grid()))
    throw DomainError("cylinder extends outside the grid");
  return table.cylinder_integral(Q) / Q.volume(table.grid().spatial_dim);
}

double cylinder_average(const ScalarField& f, const Cylinder& Q, double q) {
  if (!Q.inside(f.grid)) throw DomainError("cylinder extends outside the grid");
  long double acc = 0.0L;
  for_each_covered_cell(f.grid, Q, [&](Index i, double w) {
    acc += static_cast<long double>(w) *
           power_value(std::abs(f.values[i]), q);
  });
  return static_cast<double>(acc) * f.grid.cell_volume() /
         Q.volume(f.grid.spatial_dim);
}

double centered_power_average(const ScalarField& f, const Cylinder& Q, double c,
                              double p) {
  if (!Q.inside(f.grid)) throw DomainError("cylinder extends outside the grid");
  long double acc = 0.0L;
  for_each_covered_cell(f.grid, Q, [&](Index i, double w) {
    acc += static_cast<long double>(w) *
           power_value(std::abs(f.values[i] - c), p);
  });
  return static_cast<double>(acc) * f.grid.cell_volume() /
         Q.volume(f.grid.spatial_dim);
}

double cylinder_integral_direct(const ScalarField& f, const Cylinder& Q,
                                double q) {
  long double acc = 0.0L;
  for_each_covered_cell(f.grid, Q, [&](Index i, double w) {
    acc += static_cast<long double>(w) *
           power_value(std::abs(f.values[i]), q);
  });
  return static_cast<double>(acc) * f.grid.cell_volume();
}

double RadialCutoff::value(const std::array<double, kMaxSpatialDim>& p,
                           int spatial_dim) const {
  double d = 0.0;
  for (int a = 0; a < spatial_dim; ++a)
    d = std::max(d, std::abs(p[a] - center[a]));
  if (d <= inner) return 1.0;
  if (d >= outer) return 0.0;
  return (outer - d) / (outer - inner);
}

std::vector<SliceStats> slice_stats(const ScalarField& f, const Cylinder& Q,
                                    const RadialCutoff* weight,
                                    double weight_power) {
  if (!Q.inside(f.grid)) throw DomainError("cylinder extends outside the grid");
  const SpaceTimeGrid& g = f.grid;
  TimeCoverage tc = time_coverage(g, Q);
  if (tc.weight.empty()) throw DomainError("cylinder covers no time level");
  std::vector<SliceStats> out;
  out.reserve(tc.weight.size());
  for (std::size_t k = 0; k < tc.weight.size(); ++k) {
    const int it = tc.first + static_cast<int>(k);
    SliceStats s;
    s.time_index = it;
    s.time = g.t_center(it);
    s.time_weight = tc.weight[k];
    long double sum = 0.0L, vol = 0.0L, wsum = 0.0L, wvol = 0.0L;
    double mx = -std::numeric_limits<double>::infinity();
    for_each_covered_slice_cell(g, Q, it, [&](Index i, double w) {
      const double v = f.values[i];
      sum += static_cast<long double>(w) * v;
      vol += w;
      mx = std::max(mx, v);
      if (weight != nullptr) {
        std::array<double, kMaxSpatialDim> x{};
        // recover the spatial position of cell i
        Index rem = i % g.spatial_count();
        for (int a = g.spatial_dim - 1; a >= 0; --a) {
          x[a] = g.x_center(a, static_cast<int>(rem % g.cells[a]));
          rem /= g.cells[a];
        }
        const double eta =
            power_value(weight->value(x, g.spatial_dim), weight_power);
        wsum += static_cast<long double>(w) * eta * v;
        wvol += static_cast<long double>(w) * eta;
      }
    });
    if (vol <= 0.0L) throw DomainError("empty slice");
    s.mean = static_cast<double>(sum / vol);
    if (weight != nullptr) {
      if (wvol <= 0.0L) throw DomainError("cutoff weight vanishes on slice");
      s.weighted_mean = static_cast<double>(wsum / wvol);
    } else {
      s.weighted_mean = s.mean;
    }
    s.max = mx;
    out.push_back(s);
  }
  return out;
}

ScalarField gradient_power_field(const ScalarField& u, double kappa,
                                 int threads) {
  if (u.nonneg) u.validate();
  const SpaceTimeGrid& g = u.grid;
  ScalarField w(g, true);  // u^kappa
  for (Index i = 0; i < g.cell_count(); ++i)
    w.values[i] = power_value(std::max(0.0, u.values[i]), kappa);
  ScalarField out(g, true);
  const int n = g.spatial_dim;
  const Index ns = g.spatial_count();
  std::array<Index, kMaxSpatialDim> stride{};
  {
    Index s = 1;
    for (int a = n - 1; a >= 0; --a) {
      stride[a] = s;
      s *= g.cells[a];
    }
  }
  parallel_for(g.time_cells, threads, [&](Index itl) {
    const int it = static_cast<int>(itl);
    std::array<int, kMaxSpatialDim> ix{};
    for (Index s = 0; s < ns; ++s) {
      const Index i = static_cast<Index>(it) * ns + s;
      const double ui = u.values[i];
      double grad2 = 0.0;
      for (int a = 0; a < n; ++a) {
        const bool has_lo = ix[a] > 0;
        const bool has_hi = ix[a] + 1 < g.cells[a];
        const Index ilo = i - stride[a];
        const Index ihi = i + stride[a];
        const double ulo = has_lo ? u.values[ilo] : -1.0;
        const double uhi = has_hi ? u.values[ihi] : -1.0;
        double d = 0.0;
        if (ui > 0.0) {
          if (has_lo && has_hi && ulo > 0.0 && uhi > 0.0) {
            d = (w.values[ihi] - w.values[ilo]) / (2.0 * g.h);
          } else if (has_hi && uhi > 0.0) {
            d = (w.values[ihi] - w.values[i]) / g.h;
          } else if (has_lo && ulo > 0.0) {
            d = (w.values[i] - w.values[ilo]) / g.h;
          } else {
            d = 0.0;  // isolated positive cell
          }
        } else {
          // zero cell: one-sided toward a positive neighbor if any
          double dlo = (has_lo && ulo > 0.0)
                           ? (w.values[i] - w.values[ilo]) / g.h
                           : 0.0;
          double dhi = (has_hi && uhi > 0.0)
                           ? (w.values[ihi] - w.values[i]) / g.h
                           : 0.0;
          d = std::abs(dhi) >= std::abs(dlo) ? dhi : dlo;
        }
        grad2 += d * d;
      }
      out.values[i] = grad2;
      for (int a = n - 1; a >= 0; --a) {
        if (++ix[a] < g.cells[a]) break;
        ix[a] = 0;
      }
    }
  });
  return out;
}

PowerTables::PowerTables(const ScalarField& f,
                         const std::vector<double>& powers) {
  for (double p : powers) {
    if (has(p)) continue;
    powers_.push_back(p);
    tables_.emplace_back(f, p);
  }
}

bool PowerTables::has(double power) const {
  for (double p : powers_)
    if (std::abs(p - power) <= 1e-13 * std::max(1.0, std::abs(power)))
      return true;
  return false;
}

const PrefixSumTable& PowerTables::at(double power) const {
  for (std::size_t k = 0; k < powers_.size(); ++k)
    if (std::abs(powers_[k] - power) <=
        1e-13 * std::max(1.0, std::abs(power)))
      return tables_[k];
  throw ParameterError("no prefix table precomputed for requested power");
}

}  // namespace pmlab
