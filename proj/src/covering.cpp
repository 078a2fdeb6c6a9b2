#include "pmlab/covering.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "pmlab/parallel.hpp"

namespace pmlab {

namespace {

bool nearly_integer(double v, double tol, long* out) {
  const double r = std::round(v);
  if (std::abs(v - r) > tol) return false;
  *out = static_cast<long>(r);
  return true;
}

}  // namespace

NormalizedProblem normalize(const ScalarField& u, const ScalarField& f,
                            double m, const Cylinder& window, double theta_o,
                            double C, double c_data, double q, int threads) {
  const SpaceTimeGrid& g = u.grid;
  const int n = g.spatial_dim;
  const double R = window.radius / 2.0;
  if (!(theta_o > 0.0)) throw ParameterError("theta_o must be positive");
  if (std::abs(window.half_time - 2.0 * theta_o * R * R) >
      1e-9 * window.half_time)
    throw ParameterError("window half-time inconsistent with theta_o");
  if (window.anchor != TimeAnchor::Centered)
    throw ParameterError("normalization window must be centered");
  if (!window.inside(g))
    throw ParameterError("normalization window outside the grid");

  // cell alignment of the window
  long it0 = 0, ntw = 0;
  if (!nearly_integer((window.t_lo() - g.t_min) / g.ht, 1e-6, &it0) ||
      !nearly_integer(window.duration() / g.ht, 1e-6, &ntw))
    throw ParameterError("window is not cell-aligned in time");
  std::array<long, kMaxSpatialDim> ix0{};
  long nxw = 0;
  for (int a = 0; a < n; ++a) {
    long lo = 0, cnt = 0;
    if (!nearly_integer((window.x_lo(a) - g.x_min[a]) / g.h, 1e-6, &lo) ||
        !nearly_integer(4.0 * R / g.h, 1e-6, &cnt))
      throw ParameterError("window is not cell-aligned in space");
    ix0[a] = lo;
    nxw = cnt;
  }

  NormalizedProblem np;
  np.m = m;
  np.R = R;
  np.theta_o = theta_o;
  np.gamma_scale = std::pow(theta_o, 1.0 / (m - 1.0));
  np.source_window = window;
  np.q = q > 0.0 ? q : (m + 1.0) / (m + 3.0);

  std::array<int, kMaxSpatialDim> nx{};
  std::array<double, kMaxSpatialDim> lo{}, hi{};
  for (int a = 0; a < n; ++a) {
    nx[a] = static_cast<int>(nxw);
    lo[a] = -2.0;
    hi[a] = 2.0;
  }
  SpaceTimeGrid gn(n, lo, hi, nx, -2.0, 2.0, static_cast<int>(ntw));
  np.u = ScalarField(gn, true);
  np.f = ScalarField(gn, true);
  const double gamma = np.gamma_scale;
  const double gamma_m = std::pow(gamma, m);
  const Index ns = gn.spatial_count();
  for (int kt = 0; kt < gn.time_cells; ++kt) {
    std::array<int, kMaxSpatialDim> ix{};
    for (Index s = 0; s < ns; ++s) {
      std::array<int, kMaxSpatialDim> src{};
      for (int a = 0; a < n; ++a) src[a] = static_cast<int>(ix0[a]) + ix[a];
      const Index si = g.index(static_cast<int>(it0) + kt, src);
      const Index di = static_cast<Index>(kt) * ns + s;
      np.u.values[di] = gamma * u.values[si];
      np.f.values[di] = gamma_m * f.values[si];
      for (int a = n - 1; a >= 0; --a) {
        if (++ix[a] < gn.cells[a]) break;
        ix[a] = 0;
      }
    }
  }
  np.C_base = std::pow(
      np.u.values.abs().pow(m + 1.0).mean(), (m - 1.0) / (m + 1.0));
  if (np.C_base > C * (1.0 + 1e-9))
    throw ParameterError(
        "base condition fails: measured (mean u^{m+1})^{(m-1)/(m+1)} = " +
        std::to_string(np.C_base) + " exceeds C = " + std::to_string(C));

  np.F = gradient_power_field(np.u, 0.5 * (m + 1.0), threads);
  np.u_m1 = PrefixSumTable(np.u, m + 1.0);
  np.F_1 = PrefixSumTable(np.F, 1.0);
  np.F_q = PrefixSumTable(np.F, np.q);
  np.f_m1m = PrefixSumTable(np.f, (m + 1.0) / m);
  np.C_f = c_data * (np.f.values.abs().pow((m + 1.0) / m).mean() +
                     np.u.values.abs().pow(m + 1.0).mean());
  const Cylinder q12({0, 0, 0}, 0.0, 2.0, 1.0, TimeAnchor::Centered);
  np.energy_ratio =
      np.C_f > 0.0 ? cylinder_average(np.F_1, q12) / np.C_f : 0.0;
  return np;
}

double lambda_threshold(double C_f, int n, double b_hat, double a, double b) {
  if (!(0.0 <= a) || !(a < b) || !(b <= 1.0))
    throw ParameterError("lambda threshold needs 0 <= a < b <= 1");
  const double b_tilde = std::min(1.0, b_hat);
  const double tau = 1.5 * (n + 2.0) / b_tilde;
  return C_f / std::pow(b - a, tau);
}

BaseWindow fit_base_window(const ScalarField& u, double m,
                           const std::array<double, kMaxSpatialDim>& x0,
                           double t0, double R, double C) {
  const SpaceTimeGrid& g = u.grid;
  const int n = g.spatial_dim;
  BaseWindow bw;
  const int R_cells = std::max(1, static_cast<int>(std::lround(R / g.h)));
  const double Rs = R_cells * g.h;
  std::array<double, kMaxSpatialDim> xs{};
  for (int a = 0; a < n; ++a) {
    const long ci = std::lround((x0[a] - g.x_min[a]) / g.h);
    xs[a] = g.x_min[a] + ci * g.h;
    if (xs[a] - 2.0 * Rs < g.x_min[a] - 1e-12 ||
        xs[a] + 2.0 * Rs > g.x_max[a] + 1e-12)
      throw ParameterError("base window does not fit the grid spatially");
  }
  const long ti = std::lround((t0 - g.t_min) / g.ht);
  const double ts = g.t_min + ti * g.ht;
  const double S_cap = std::min(ts - g.t_min, g.t_max - ts) / 2.0;
  if (!(S_cap > g.ht)) throw ParameterError("no room for the base window in time");
  PrefixSumTable tab(u, m + 1.0);
  // measured mean over the largest admissible window, then shrink S to meet
  // the base condition with margin
  std::array<double, kMaxSpatialDim> lo{}, hi{};
  double vol_sp = 1.0;
  for (int a = 0; a < n; ++a) {
    lo[a] = xs[a] - 2.0 * Rs;
    hi[a] = xs[a] + 2.0 * Rs;
    vol_sp *= 4.0 * Rs;
  }
  double S = S_cap;
  for (int pass = 0; pass < 4; ++pass) {
    const double mean =
        tab.box_integral(ts - 2.0 * S, ts + 2.0 * S, lo, hi) / (4.0 * S * vol_sp);
    if (mean <= 0.0) break;
    const double S_needed =
        0.98 * C * Rs * Rs * std::pow(mean, -(m - 1.0) / (m + 1.0));
    if (S_needed >= S) break;
    S = S_needed;
  }
  // snap the duration 4S to whole cells (at least 4)
  long dur_cells = std::max(4L, static_cast<long>(std::floor(4.0 * S / g.ht)));
  if (ts - dur_cells * g.ht / 2.0 < g.t_min ||
      ts + dur_cells * g.ht / 2.0 > g.t_max)
    throw ParameterError("snapped base window leaves the grid in time");
  S = dur_cells * g.ht / 4.0;
  bw.theta_o = S / (Rs * Rs);
  bw.window = Cylinder(xs, ts, 2.0 * Rs, 2.0 * S, TimeAnchor::Centered);
  return bw;
}

Cylinder FamilyMember::shadow(const SpaceTimeGrid& g) const {
  std::array<double, kMaxSpatialDim> x{};
  for (int a = 0; a < g.spatial_dim; ++a) x[a] = g.x_min[a] + c[a] * g.h;
  const double t = g.t_min + ct * g.ht;
  return Cylinder(x, t, w * g.h, s_cells * g.ht, TimeAnchor::Centered);
}

bool FamilyMember::contains_cell(const SpaceTimeGrid& g, int it,
                                 const std::array<int, kMaxSpatialDim>& ix) const {
  if (it < ct - s_cells || it >= ct + s_cells) return false;
  for (int a = 0; a < g.spatial_dim; ++a)
    if (ix[a] < c[a] - w || ix[a] >= c[a] + w) return false;
  return true;
}

bool FamilyMember::box_subset_of(const FamilyMember& other, int n) const {
  if (ct - s_cells < other.ct - other.s_cells ||
      ct + s_cells > other.ct + other.s_cells)
    return false;
  for (int a = 0; a < n; ++a)
    if (c[a] - w < other.c[a] - other.w || c[a] + w > other.c[a] + other.w)
      return false;
  return true;
}

const PointGeometry& IntrinsicFamily::geometry_at(const FamilyMember& mb) const {
  auto it = geometries.find({mb.c[0] * 1000000 + mb.c[1], mb.ct});
  if (it == geometries.end())
    throw InternalError("missing geometry for a family member");
  return it->second;
}

std::vector<int> IntrinsicFamily::members_containing(
    int it, const std::array<int, kMaxSpatialDim>& ix) const {
  std::vector<int> out;
  for (int i = 0; i < static_cast<int>(members.size()); ++i)
    if (members[i].contains_cell(np->u.grid, it, ix)) out.push_back(i);
  return out;
}

std::vector<int> IntrinsicFamily::supersets_of(int i) const {
  const int n = np->u.grid.spatial_dim;
  std::vector<int> out;
  const FamilyMember& mb = members[i];
  for (int j = 0; j < static_cast<int>(members.size()); ++j) {
    if (j == i) continue;
    if (mb.box_subset_of(members[j], n) &&
        !(members[j].box_subset_of(mb, n)))
      out.push_back(j);
  }
  return out;
}

IntrinsicFamily build_intrinsic_family(const NormalizedProblem& np,
                                       const FamilyParams& params,
                                       int threads) {
  IntrinsicFamily fam;
  fam.np = &np;
  fam.params = params;
  const SpaceTimeGrid& g = np.u.grid;
  const int n = g.spatial_dim;
  const double m = np.m;

  // ladder of half-widths in cells, geometric up to radius 1
  const int w_max = static_cast<int>(std::lround(1.0 / g.h));
  int w = std::max(params.min_half_width, 2);
  while (w <= w_max) {
    fam.widths.push_back(w);
    int next = static_cast<int>(std::lround(w * params.ladder_ratio));
    if (next <= w) next = w + 1;
    w = next;
  }
  if (fam.widths.empty() || fam.widths.back() != w_max)
    fam.widths.push_back(w_max);
  std::vector<double> radii;
  for (int wk : fam.widths) radii.push_back(wk * g.h);
  fam.ladder.radii = radii;
  fam.ladder.ratio = params.ladder_ratio;

  // candidate centers: corner lattice inside Q_{1,1}
  const int nx = g.cells[0];
  const int nt = g.time_cells;
  const int x_lo = nx / 4, x_hi = 3 * nx / 4;
  const int t_lo = nt / 4, t_hi = 3 * nt / 4;

  // shared initial-height cap: every center must satisfy the window mean
  // condition at the common S
  GeometryParams geo = params.geometry;
  const double R = fam.ladder.r_max();
  auto clipped_ratio = [&](int ci, int cj, int ct, double S) {
    std::array<double, kMaxSpatialDim> x{}, lo{}, hi{};
    x[0] = g.x_min[0] + ci * g.h;
    if (n > 1) x[1] = g.x_min[1] + cj * g.h;
    const double tc = g.t_min + ct * g.ht;
    double vol = std::min(tc + 2.0 * S, g.t_max) -
                 std::max(tc - 2.0 * S, g.t_min);
    for (int a = 0; a < n; ++a) {
      lo[a] = x[a] - 2.0 * R;
      hi[a] = x[a] + 2.0 * R;
      vol *= std::min(hi[a], g.x_max[a]) - std::max(lo[a], g.x_min[a]);
    }
    const double mean =
        np.u_m1.box_integral(tc - 2.0 * S, tc + 2.0 * S, lo, hi) / vol;
    return std::pow(mean, (m - 1.0) / (m + 1.0));
  };
  double S_geom = 1.0;
  for (int pass = 0; pass < 4; ++pass) {
    double S_needed = 1.0;
    const int cstride = std::max(1, nx / 16);
    const int tstride = std::max(1, nt / 16);
    for (int ct = t_lo; ct <= t_hi; ct += tstride)
      for (int ci = x_lo; ci <= x_hi; ci += cstride)
        for (int cj = (n > 1 ? x_lo : 0); cj <= (n > 1 ? x_hi : 0);
             cj += cstride) {
          const double ratio = clipped_ratio(ci, cj, ct, S_geom);
          if (ratio > 0.0)
            S_needed = std::min(S_needed, 0.98 / ratio * (R * R));
        }
    if (S_needed >= S_geom * (1.0 - 1e-12)) break;
    S_geom = S_needed;
  }
  fam.S_geom = S_geom;

  // unique centers over all levels
  std::set<std::array<int, 3>> centers;
  std::vector<std::array<int, 4>> level_centers;  // level, ci, cj, ct
  for (std::size_t k = 0; k < fam.widths.size(); ++k) {
    const int stride = std::max(2, fam.widths[k] / 2);
    for (int ct = t_lo; ct <= t_hi; ct += stride)
      for (int ci = x_lo; ci <= x_hi; ci += stride) {
        if (n == 1) {
          centers.insert({ci, 0, ct});
          level_centers.push_back({static_cast<int>(k), ci, 0, ct});
        } else {
          for (int cj = x_lo; cj <= x_hi; cj += stride) {
            centers.insert({ci, cj, ct});
            level_centers.push_back({static_cast<int>(k), ci, cj, ct});
          }
        }
      }
  }
  std::vector<std::array<int, 3>> center_list(centers.begin(), centers.end());
  std::vector<PointGeometry> geos(center_list.size());
  parallel_for(static_cast<Index>(center_list.size()), threads, [&](Index i) {
    const auto& cc = center_list[static_cast<std::size_t>(i)];
    std::array<double, kMaxSpatialDim> x{};
    x[0] = g.x_min[0] + cc[0] * g.h;
    if (n > 1) x[1] = g.x_min[1] + cc[1] * g.h;
    const double tc = g.t_min + cc[2] * g.ht;
    geos[static_cast<std::size_t>(i)] =
        build_point_geometry(np.u_m1, m, x, tc, S_geom, fam.ladder, geo);
  });
  for (std::size_t i = 0; i < center_list.size(); ++i)
    fam.geometries[{center_list[i][0] * 1000000 + center_list[i][1],
                    center_list[i][2]}] = std::move(geos[i]);

  // members
  const Index ns = g.spatial_count();
  for (const auto& lc : level_centers) {
    FamilyMember mb;
    mb.level = lc[0];
    mb.c = {lc[1], lc[2], 0};
    mb.ct = lc[3];
    mb.w = fam.widths[static_cast<std::size_t>(lc[0])];
    const auto& geom =
        fam.geometries.at({lc[1] * 1000000 + lc[2], lc[3]});
    mb.r = fam.ladder.radii[static_cast<std::size_t>(lc[0])];
    mb.s = geom.height_at(static_cast<std::size_t>(lc[0]));
    int sc = std::max(1, static_cast<int>(std::lround(mb.s / g.ht)));
    sc = std::min({sc, mb.ct, nt - mb.ct});
    if (sc < 1) continue;
    mb.s_cells = sc;
    if (mb.c[0] - mb.w < 0 || mb.c[0] + mb.w > nx) continue;
    if (n > 1 && (mb.c[1] - mb.w < 0 || mb.c[1] + mb.w > g.cells[1])) continue;
    // direct ordered mean of F over the box
    long double acc = 0.0L;
    Index count = 0;
    for (int it = mb.ct - mb.s_cells; it < mb.ct + mb.s_cells; ++it) {
      if (n == 1) {
        for (int i = mb.c[0] - mb.w; i < mb.c[0] + mb.w; ++i) {
          acc += np.F.values[static_cast<Index>(it) * ns + i];
          ++count;
        }
      } else {
        for (int i = mb.c[0] - mb.w; i < mb.c[0] + mb.w; ++i)
          for (int j = mb.c[1] - mb.w; j < mb.c[1] + mb.w; ++j) {
            acc += np.F.values[g.index(it, {i, j, 0})];
            ++count;
          }
      }
    }
    mb.cells = count;
    mb.avg = static_cast<double>(acc / count);
    fam.members.push_back(mb);
  }
  return fam;
}

namespace {

void assign_box_max(const SpaceTimeGrid& g, ScalarField& out, int t0, int t1,
                    const std::array<int, kMaxSpatialDim>& lo,
                    const std::array<int, kMaxSpatialDim>& hi, double v) {
  const Index ns = g.spatial_count();
  for (int it = t0; it < t1; ++it) {
    if (g.spatial_dim == 1) {
      for (int i = lo[0]; i < hi[0]; ++i) {
        Index idx = static_cast<Index>(it) * ns + i;
        if (out.values[idx] < v) out.values[idx] = v;
      }
    } else {
      for (int i = lo[0]; i < hi[0]; ++i)
        for (int j = lo[1]; j < hi[1]; ++j) {
          Index idx = g.index(it, {i, j, 0});
          if (out.values[idx] < v) out.values[idx] = v;
        }
    }
  }
}

double box_mean(const SpaceTimeGrid& g, const ScalarField& F, int t0, int t1,
                const std::array<int, kMaxSpatialDim>& lo,
                const std::array<int, kMaxSpatialDim>& hi) {
  long double acc = 0.0L;
  Index count = 0;
  const Index ns = g.spatial_count();
  for (int it = t0; it < t1; ++it) {
    if (g.spatial_dim == 1) {
      for (int i = lo[0]; i < hi[0]; ++i) {
        acc += F.values[static_cast<Index>(it) * ns + i];
        ++count;
      }
    } else {
      for (int i = lo[0]; i < hi[0]; ++i)
        for (int j = lo[1]; j < hi[1]; ++j) {
          acc += F.values[g.index(it, {i, j, 0})];
          ++count;
        }
    }
  }
  return static_cast<double>(acc / count);
}

}  // namespace

MaximalField maximal_intrinsic(const IntrinsicFamily& fam,
                               const ScalarField& F) {
  const SpaceTimeGrid& g = F.grid;
  MaximalField mf;
  mf.values_family = ScalarField(g, true);
  for (const auto& mb : fam.members) {
    // recompute the average when F is not the family's own field
    double avg = mb.avg;
    if (&F != &fam.np->F) {
      std::array<int, kMaxSpatialDim> lo{}, hi{};
      lo[0] = mb.c[0] - mb.w;
      hi[0] = mb.c[0] + mb.w;
      if (g.spatial_dim > 1) {
        lo[1] = mb.c[1] - mb.w;
        hi[1] = mb.c[1] + mb.w;
      }
      avg = box_mean(g, F, mb.ct - mb.s_cells, mb.ct + mb.s_cells, lo, hi);
    }
    std::array<int, kMaxSpatialDim> lo{}, hi{};
    lo[0] = mb.c[0] - mb.w;
    hi[0] = mb.c[0] + mb.w;
    if (g.spatial_dim > 1) {
      lo[1] = mb.c[1] - mb.w;
      hi[1] = mb.c[1] + mb.w;
    }
    assign_box_max(g, mf.values_family, mb.ct - mb.s_cells, mb.ct + mb.s_cells,
                   lo, hi, avg);
  }
  mf.values = ScalarField(g, true);
  mf.values.values = mf.values_family.values.max(F.values);
  return mf;
}

MaximalField maximal_boxes(const IntrinsicFamily& fam, const ScalarField& F) {
  const SpaceTimeGrid& g = F.grid;
  const int n = g.spatial_dim;
  MaximalField mf;
  mf.values_family = ScalarField(g, true);
  // family bounding boxes
  for (const auto& mb : fam.members) {
    std::array<int, kMaxSpatialDim> lo{}, hi{};
    lo[0] = mb.c[0] - mb.w;
    hi[0] = mb.c[0] + mb.w;
    if (n > 1) {
      lo[1] = mb.c[1] - mb.w;
      hi[1] = mb.c[1] + mb.w;
    }
    const double avg =
        box_mean(g, F, mb.ct - mb.s_cells, mb.ct + mb.s_cells, lo, hi);
    assign_box_max(g, mf.values_family, mb.ct - mb.s_cells, mb.ct + mb.s_cells,
                   lo, hi, avg);
  }
  // dyadic boxes, anchors at half-size strides
  std::vector<int> tsizes, xsizes;
  for (int s = 1; s <= g.time_cells; s *= 2) tsizes.push_back(s);
  for (int s = 1; s <= g.cells[0]; s *= 2) xsizes.push_back(s);
  for (int st : tsizes) {
    const int tstride = std::max(1, st / 2);
    for (int sx : xsizes) {
      const int xstride = std::max(1, sx / 2);
      for (int t0 = 0; t0 + st <= g.time_cells; t0 += tstride) {
        for (int i0 = 0; i0 + sx <= g.cells[0]; i0 += xstride) {
          if (n == 1) {
            std::array<int, kMaxSpatialDim> lo{i0, 0, 0}, hi{i0 + sx, 1, 1};
            const double avg = box_mean(g, F, t0, t0 + st, lo, hi);
            assign_box_max(g, mf.values_family, t0, t0 + st, lo, hi, avg);
          } else {
            for (int sy : xsizes) {
              const int ystride = std::max(1, sy / 2);
              for (int j0 = 0; j0 + sy <= g.cells[1]; j0 += ystride) {
                std::array<int, kMaxSpatialDim> lo{i0, j0, 0},
                    hi{i0 + sx, j0 + sy, 0};
                const double avg = box_mean(g, F, t0, t0 + st, lo, hi);
                assign_box_max(g, mf.values_family, t0, t0 + st, lo, hi, avg);
              }
            }
          }
        }
      }
    }
  }
  mf.values = ScalarField(g, true);
  mf.values.values = mf.values_family.values.max(F.values);
  return mf;
}

int stopping_member(const IntrinsicFamily& fam, int it,
                    const std::array<int, kMaxSpatialDim>& ix, double lambda) {
  auto containing = fam.members_containing(it, ix);
  // candidates sorted by box volume descending
  std::sort(containing.begin(), containing.end(), [&](int a, int b) {
    const auto& ma = fam.members[a];
    const auto& mb = fam.members[b];
    if (ma.cells != mb.cells) return ma.cells > mb.cells;
    return a < b;
  });
  for (int idx : containing) {
    const auto& mb = fam.members[idx];
    if (!(mb.avg > lambda)) continue;
    auto sup = fam.supersets_of(idx);
    bool ok = true;
    for (int s : sup)
      if (fam.members[s].avg > 2.0 * lambda) {
        ok = false;
        break;
      }
    if (sup.empty() && !(mb.avg <= 2.0 * lambda)) ok = false;
    if (ok) return idx;
  }
  return -1;
}

std::vector<int> vitali_select(const std::vector<Cylinder>& family,
                               int spatial_dim) {
  std::vector<int> order(family.size());
  for (std::size_t i = 0; i < family.size(); ++i) order[i] = static_cast<int>(i);
  double r_max = 0.0;
  for (const auto& c : family) r_max = std::max(r_max, c.radius);
  if (r_max <= 0.0) return {};
  // dyadic size classes, largest first; deterministic within a class
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    const int ka = static_cast<int>(
        std::floor(std::log2(r_max / family[a].radius)));
    const int kb = static_cast<int>(
        std::floor(std::log2(r_max / family[b].radius)));
    if (ka != kb) return ka < kb;
    if (family[a].radius != family[b].radius)
      return family[a].radius > family[b].radius;
    return a < b;
  });
  std::vector<int> selected;
  for (int idx : order) {
    bool disjoint = true;
    for (int s : selected)
      if (family[idx].intersects(family[s], spatial_dim)) {
        disjoint = false;
        break;
      }
    if (disjoint) selected.push_back(idx);
  }
  return selected;
}

CoveringFamily cz_cover(const IntrinsicFamily& fam, const ProblemFields& npf,
                        const MaximalField& mf, double lambda, double a,
                        double b, double c1) {
  const NormalizedProblem& np = *fam.np;
  const SpaceTimeGrid& g = np.u.grid;
  const int n = g.spatial_dim;
  const double m = np.m;
  const double b_hat = fam.params.geometry.b_hat(m);
  const double lab = lambda_threshold(np.C_f, n, b_hat, a, b);
  if (!(lambda > lab))
    throw ParameterError("lambda must exceed lambda_{a,b} = " +
                         std::to_string(lab));
  if (!(c1 > 1.0)) throw ParameterError("engulfing constant must exceed 1");

  CoveringFamily cover;
  cover.lambda = lambda;
  cover.a = a;
  cover.b = b;
  cover.c1 = c1;

  const Cylinder Qaa = np.qaa(a);
  const Cylinder Qbb = np.qaa(b);

  // level-set cells of Q_{a,a} and their stopping members
  std::vector<std::pair<int, std::array<int, kMaxSpatialDim>>> cells;
  std::map<int, int> entry_of_member;
  const Index ns = g.spatial_count();
  for_each_covered_cell(g, Qaa, [&](Index i, double) {
    const int it = static_cast<int>(i / ns);
    Index rem = i % ns;
    std::array<int, kMaxSpatialDim> ix{};
    for (int axis = n - 1; axis >= 0; --axis) {
      ix[axis] = static_cast<int>(rem % g.cells[axis]);
      rem /= g.cells[axis];
    }
    if (mf.values_family.values[i] > lambda) cells.push_back({it, ix});
  });
  cover.level_set_cells = static_cast<Index>(cells.size());

  for (const auto& cell : cells) {
    const int stop = stopping_member(fam, cell.first, cell.second, lambda);
    if (stop < 0) continue;
    if (entry_of_member.count(stop)) continue;
    const FamilyMember& mb = fam.members[stop];
    const PointGeometry& geom = fam.geometry_at(mb);
    CoveringEntry e;
    e.stop_member = stop;
    // scan [4 r_z, 8 r_z] for an intrinsic radius
    double rho_found = 0.0;
    for (std::size_t k = 0; k < fam.ladder.size(); ++k) {
      const double rho = fam.ladder.radii[k];
      if (rho < 4.0 * mb.r * (1.0 - 1e-12)) continue;
      if (rho > 8.0 * mb.r * (1.0 + 1e-12)) break;
      const Cylinder Qc = geom.family_cylinder(rho);
      if (!Qc.inside(g)) continue;
      auto cls = classify_cylinder(np.u_m1, m, Qc, fam.params.K);
      if (cls.label == IntrinsicLabel::Intrinsic) {
        if (rho_found == 0.0)
          rho_found = rho;
        else
          ++e.alternatives;
      }
    }
    if (rho_found > 0.0) {
      e.rho = rho_found;
      const Cylinder Qc = geom.family_cylinder(rho_found);
      auto reg = classify_regime(npf, Qc, fam.params.epsilon);
      e.regime = reg.label;
      if (reg.label == Regime::Degenerate) {
        e.case_id = 1;
        e.Qz = Qc;
        e.Qstar = Qc.dilated(2.0);
        e.Qss = geom.family_cylinder(4.0 * c1 * rho_found);
      } else {
        e.case_id = 2;
        e.Qz = Qc.dilated(0.25);
        e.Qstar = Qc.dilated(0.5);
        e.Qss = geom.family_cylinder(2.0 * c1 * rho_found);
      }
    } else {
      e.case_id = 3;
      const Cylinder Qc = geom.family_cylinder(4.0 * mb.r);
      e.Qz = Qc;
      e.Qstar = Qc.dilated(2.0);
      e.Qss = geom.family_cylinder(16.0 * c1 * mb.r);
    }
    if (!Qbb.contains(e.Qss, n, 1e-12))
      throw InternalError(
          "covering: a Q** escapes Q_{b,b}; lambda or tolerances inconsistent");
    e.avg_Qz = cylinder_average(np.F_1, e.Qz);
    e.avg_Qss = cylinder_average(np.F_1, e.Qss);
    e.avg_Fq_star =
        std::pow(cylinder_average(np.F_q, e.Qstar), 1.0 / np.q);
    entry_of_member[stop] = static_cast<int>(cover.entries.size());
    cover.entries.push_back(e);
  }

  // Vitali selection on the Q*
  std::vector<Cylinder> stars;
  stars.reserve(cover.entries.size());
  for (const auto& e : cover.entries) stars.push_back(e.Qstar);
  cover.selected = vitali_select(stars, n);

  // verification
  for (std::size_t i = 0; i < cover.selected.size() && cover.disjoint; ++i)
    for (std::size_t j = i + 1; j < cover.selected.size(); ++j)
      if (stars[cover.selected[i]].intersects(stars[cover.selected[j]], n)) {
        cover.disjoint = false;
        break;
      }
  Index covered = 0;
  for (const auto& cell : cells) {
    std::array<double, kMaxSpatialDim> x{};
    for (int axis = 0; axis < n; ++axis)
      x[axis] = g.x_center(axis, cell.second[axis]);
    const double t = g.t_center(cell.first);
    bool inside = false;
    for (int s : cover.selected) {
      const Cylinder& Qss = cover.entries[s].Qss;
      bool in = t > Qss.t_lo() && t < Qss.t_hi();
      for (int axis = 0; axis < n && in; ++axis)
        in = x[axis] > Qss.x_lo(axis) && x[axis] < Qss.x_hi(axis);
      if (in) {
        inside = true;
        break;
      }
    }
    if (inside) ++covered;
  }
  cover.covered_cells = covered;
  cover.coverage = cells.empty()
                       ? 1.0
                       : static_cast<double>(covered) /
                             static_cast<double>(cells.size());
  for (const auto& e : cover.entries) {
    if (e.avg_Qz > 0.0)
      cover.fitted_c_lower = std::max(cover.fitted_c_lower, lambda / e.avg_Qz);
    cover.worst_upper =
        std::max(cover.worst_upper, e.avg_Qss / (2.0 * lambda));
  }
  return cover;
}

RedistributionRow redistribution_check(const IntrinsicFamily& fam,
                                       const MaximalField& mf,
                                       const MaximalField& mf_rhs,
                                       double lambda, double a, double b,
                                       double gamma_cut, double eps_tilde) {
  const NormalizedProblem& np = *fam.np;
  const SpaceTimeGrid& g = np.u.grid;
  const double q = np.q;
  RedistributionRow row;
  row.lambda = lambda;
  long double lhs = 0.0L, grad = 0.0L, bad = 0.0L;
  const Cylinder Qaa = np.qaa(a);
  const Cylinder Qbb = np.qaa(b);
  for_each_covered_cell(g, Qaa, [&](Index i, double w) {
    if (mf.values_family.values[i] > lambda)
      lhs += static_cast<long double>(w) * np.F.values[i];
  });
  for_each_covered_cell(g, Qbb, [&](Index i, double w) {
    if (np.F.values[i] > gamma_cut * lambda)
      grad += static_cast<long double>(w) * power_value(np.F.values[i], q);
    if (mf_rhs.values.values[i] > eps_tilde * lambda)
      bad += static_cast<long double>(w);
  });
  const double cellvol = g.cell_volume();
  row.lhs = static_cast<double>(lhs) * cellvol;
  row.gradient_part =
      std::pow(lambda, 1.0 - q) * static_cast<double>(grad) * cellvol;
  row.bad_part = 2.0 * lambda * static_cast<double>(bad) * cellvol;
  row.fitted_c = row.gradient_part > 0.0
                     ? std::max(0.0, row.lhs - row.bad_part) / row.gradient_part
                     : 0.0;
  return row;
}

}  // namespace pmlab
