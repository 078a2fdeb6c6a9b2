#include "pmlab/intrinsic_geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace pmlab {

RadiusLadder RadiusLadder::geometric(double r_min, double r_max, double ratio) {
  if (!(r_min > 0.0) || !(r_max > r_min))
    throw ParameterError("ladder requires 0 < r_min < r_max");
  if (!(ratio > 1.0)) throw ParameterError("ladder ratio must exceed 1");
  RadiusLadder lad;
  lad.ratio = ratio;
  std::vector<double> down;
  double r = r_max;
  while (r > r_min * (1.0 + 1e-12)) {
    down.push_back(r);
    r /= ratio;
  }
  down.push_back(r_min);
  lad.radii.assign(down.rbegin(), down.rend());
  return lad;
}

std::size_t RadiusLadder::lower_index(double r) const {
  for (std::size_t i = 0; i < radii.size(); ++i)
    if (radii[i] >= r * (1.0 - 1e-12)) return i;
  return radii.size() - 1;
}

bool RadiusLadder::find(double r, std::size_t* index) const {
  for (std::size_t i = 0; i < radii.size(); ++i) {
    if (std::abs(radii[i] - r) <= 1e-12 * r) {
      *index = i;
      return true;
    }
  }
  return false;
}

double height_constraint_target(double m, int n, double r) {
  // r^{2(m+1)} |B_r|^{m-1}, with |B_r| = (2r)^n
  return std::pow(r, 2.0 * (m + 1.0)) * std::pow(std::pow(2.0 * r, n), m - 1.0);
}

double height_constraint_value(const PrefixSumTable& u_m1, double m,
                               const std::array<double, kMaxSpatialDim>& x,
                               double t, double r, double s) {
  const SpaceTimeGrid& g = u_m1.grid();
  std::array<double, kMaxSpatialDim> lo{}, hi{};
  for (int a = 0; a < g.spatial_dim; ++a) {
    lo[a] = x[a] - r;
    hi[a] = x[a] + r;
  }
  const double integral = u_m1.box_integral(t - s, t + s, lo, hi);
  return std::pow(integral, m - 1.0) * s * s;
}

namespace {

/// Largest s in (0, cap] with constraint(s) <= target; the constraint is
/// continuous and increasing in s.
double bisect_height(const PrefixSumTable& u_m1, double m,
                     const std::array<double, kMaxSpatialDim>& x, double t,
                     double r, double cap, const GeometryParams& params) {
  const double target = height_constraint_target(m, u_m1.grid().spatial_dim, r);
  const double at_cap = height_constraint_value(u_m1, m, x, t, r, cap);
  if (at_cap <= target) return cap;
  double lo = 0.0, hi = cap;
  for (int it = 0; it < params.bisect_max_iter; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double v = height_constraint_value(u_m1, m, x, t, r, mid);
    if (std::abs(v - target) <= params.bisect_rel_tol * target) return mid;
    if (v <= target)
      lo = mid;
    else
      hi = mid;
    if (hi - lo <= 1e-16 * cap) break;
  }
  return lo;
}

}  // namespace

double initial_height(const PrefixSumTable& u_m1, double m,
                      const std::array<double, kMaxSpatialDim>& x, double t,
                      double R, double S, const GeometryParams& params) {
  const SpaceTimeGrid& g = u_m1.grid();
  const int n = g.spatial_dim;
  // base window (t-S, t+S) x B_R(x) must be inside the grid
  Cylinder base({x[0], x[1], x[2]}, t, R, S, TimeAnchor::Centered);
  if (!base.inside(g))
    throw ParameterError("initial-height base window outside the grid");
  // window mean condition over Q_{2S,2R}(z), clipped to the grid
  {
    std::array<double, kMaxSpatialDim> lo{}, hi{};
    double vol = std::min(t + 2.0 * S, g.t_max) - std::max(t - 2.0 * S, g.t_min);
    for (int a = 0; a < n; ++a) {
      lo[a] = x[a] - 2.0 * R;
      hi[a] = x[a] + 2.0 * R;
      vol *= std::min(hi[a], g.x_max[a]) - std::max(lo[a], g.x_min[a]);
    }
    const double integral =
        u_m1.box_integral(t - 2.0 * S, t + 2.0 * S, lo, hi);
    const double mean = integral / vol;
    const double lhs = std::pow(mean, (m - 1.0) / (m + 1.0));
    if (lhs > (R * R / S) * (1.0 + 1e-9))
      throw ParameterError(
          "window mean condition fails: (mean u^{m+1})^{(m-1)/(m+1)} = " +
          std::to_string(lhs) + " > R^2/S = " + std::to_string(R * R / S));
  }
  const double S_z = bisect_height(u_m1, m, x, t, R, S, params);
  const double bracket = S / std::pow(2.0, 2.0 * (m + 1.0) + (m - 1.0) * n);
  if (S_z < bracket * (1.0 - 1e-9))
    throw InternalError("initial height fell below its guaranteed bracket");
  return S_z;
}

double raw_height(const PrefixSumTable& u_m1, double m,
                  const std::array<double, kMaxSpatialDim>& x, double t,
                  double r, double S_z, const GeometryParams& params) {
  return bisect_height(u_m1, m, x, t, r, S_z, params);
}

double PointGeometry::height_at(std::size_t i) const {
  return std::pow(ladder.radii[i], b_hat) * envelope[i];
}

double PointGeometry::height_envelope(double r) const {
  if (r >= ladder.r_max())
    return std::pow(r / ladder.r_max(), b_hat) * raw.back();
  const std::size_t j = ladder.lower_index(r);
  return std::pow(r, b_hat) * envelope[j];
}

double PointGeometry::height(double r) const {
  std::size_t idx = 0;
  if (ladder.find(r, &idx)) return height_at(idx);
  if (r >= ladder.r_max()) return height_envelope(r);
  // off-ladder: evaluate the min with a = r inserted into the ladder
  double best = height_envelope(r);
  if (table != nullptr) {
    const double own = raw_height(*table, m, x, t, r, S_z, params);
    best = std::min(best, own);
  }
  return best;
}

Cylinder PointGeometry::cylinder(double r) const {
  return Cylinder(x, t, r, height(r), TimeAnchor::Centered);
}

Cylinder PointGeometry::family_cylinder(double r) const {
  return Cylinder(x, t, r, height_envelope(r), TimeAnchor::Centered);
}

PointGeometry build_point_geometry(const PrefixSumTable& u_m1, double m,
                                   const std::array<double, kMaxSpatialDim>& x,
                                   double t, double S, const RadiusLadder& ladder,
                                   const GeometryParams& params) {
  PointGeometry geo;
  geo.m = m;
  geo.b_hat = params.b_hat(m);
  geo.x = x;
  geo.t = t;
  geo.S_cap = S;
  geo.ladder = ladder;
  geo.table = &u_m1;
  geo.params = params;
  geo.S_z = initial_height(u_m1, m, x, t, ladder.r_max(), S, params);
  const std::size_t k = ladder.size();
  geo.raw.resize(k);
  for (std::size_t i = 0; i < k; ++i)
    geo.raw[i] = raw_height(u_m1, m, x, t, ladder.radii[i], geo.S_z, params);
  geo.envelope.resize(k);
  double suffix = std::numeric_limits<double>::infinity();
  for (std::size_t i = k; i-- > 0;) {
    suffix = std::min(suffix, geo.raw[i] / std::pow(ladder.radii[i], geo.b_hat));
    geo.envelope[i] = suffix;
  }
  return geo;
}

IntrinsicClass classify_cylinder(const PrefixSumTable& u_m1, double m,
                                 const Cylinder& Q, double K) {
  if (!(K > 1.0)) throw ParameterError("intrinsic constant K must exceed 1");
  IntrinsicClass c;
  const double mean = cylinder_average(u_m1, Q);
  c.ratio = Q.theta() * std::pow(mean, (m - 1.0) / (m + 1.0));
  if (c.ratio > K)
    c.label = IntrinsicLabel::Neither;
  else if (c.ratio >= 1.0 / K)
    c.label = IntrinsicLabel::Intrinsic;
  else
    c.label = IntrinsicLabel::SubIntrinsic;
  return c;
}

const PropertyCheck* GeometryReport::find(const std::string& name) const {
  for (const auto& p : properties)
    if (p.name == name) return &p;
  return nullptr;
}

GeometryReport verify_geometry_properties(const PointGeometry& geom,
                                          double theta_o_inverse) {
  GeometryReport rep;
  const RadiusLadder& lad = geom.ladder;
  const std::size_t k = lad.size();
  const double b_hat = geom.b_hat;
  const double m = geom.m;
  const int n = geom.table->grid().spatial_dim;
  const double R = lad.r_max();

  std::vector<double> s(k), theta(k), bind(k), ratio(k);
  for (std::size_t i = 0; i < k; ++i) {
    s[i] = geom.height_at(i);
    theta[i] = s[i] / (lad.radii[i] * lad.radii[i]);
    const double target = height_constraint_target(m, n, lad.radii[i]);
    bind[i] = height_constraint_value(*geom.table, m, geom.x, geom.t,
                                      lad.radii[i], geom.raw[i]) /
              target;
    const double mean =
        cylinder_average(*geom.table, geom.cylinder(lad.radii[i]));
    ratio[i] = theta[i] * std::pow(mean, (m - 1.0) / (m + 1.0));
  }

  auto add = [&](PropertyCheck c) {
    if (!c.pass) rep.all_hard_pass = false;
    rep.properties.push_back(std::move(c));
  };

  {  // bounds and theta consistency
    PropertyCheck c{"bounds", true, 0.0, 0.0, 0};
    for (std::size_t i = 0; i < k; ++i) {
      ++c.checks;
      if (!(s[i] > 0.0) || s[i] > geom.S_z * (1.0 + 1e-12)) c.pass = false;
      c.worst_margin = std::max(c.worst_margin, s[i] - geom.S_z);
    }
    add(std::move(c));
  }

  {  // monotone growth bound (exact) and strict increase
    PropertyCheck c{"growth_bound", true, 0.0, 0.0, 0};
    for (std::size_t i = 0; i < k; ++i)
      for (std::size_t j = i + 1; j < k; ++j) {
        ++c.checks;
        const double bound =
            std::pow(lad.radii[i] / lad.radii[j], b_hat) * s[j];
        const double margin = s[i] / bound - 1.0;
        c.worst_margin = std::max(c.worst_margin, margin);
        if (margin > 1e-10) c.pass = false;
      }
    add(std::move(c));
    PropertyCheck inc{"strictly_increasing", true, 0.0, 0.0, 0};
    for (std::size_t i = 0; i + 1 < k; ++i) {
      ++inc.checks;
      if (!(s[i + 1] > s[i])) inc.pass = false;
      inc.worst_margin = std::min(inc.worst_margin, s[i + 1] - s[i]);
    }
    add(std::move(inc));
  }

  {  // sub-intrinsic admissibility, 1% slack
    PropertyCheck c{"sub_intrinsic", true, 0.0, 0.0, 0};
    for (std::size_t i = 0; i < k; ++i) {
      ++c.checks;
      c.worst_margin = std::max(c.worst_margin, ratio[i] - 1.0);
      if (ratio[i] > 1.01) c.pass = false;
    }
    add(std::move(c));
  }

  {  // stopping dichotomy: strict envelope drop implies a binding radius
    PropertyCheck c{"stopping_dichotomy", true, 0.0, 0.0, 0};
    const double band = std::pow(lad.ratio, 2.0 * (m + 1.0)) - 1.0;
    for (std::size_t i = 0; i + 1 < k; ++i)
      for (std::size_t j = i + 1; j < k; ++j) {
        const double bound = std::pow(lad.radii[i] / lad.radii[j], b_hat) * s[j];
        if (s[i] >= bound * (1.0 - 1e-12)) continue;  // no strict drop
        ++c.checks;
        bool found = false;
        for (std::size_t l = i; l < j && !found; ++l)
          if (std::abs(bind[l] - 1.0) <= band &&
              s[l] >= geom.raw[l] * (1.0 - 1e-9))
            found = true;
        if (!found) {
          c.pass = false;
          c.worst_margin = std::max(c.worst_margin, 1.0);
        }
      }
    add(std::move(c));
  }

  {  // strictly non-binding range: 1/theta_r <= (r/rho)^{2-b} / theta_rho.
    // Strictness is against the admissibility constraint (the raw height is
    // cap-limited, not constraint-limited); on such ranges the envelope is
    // carried down from rho and the bound holds with equality.
    PropertyCheck c{"strict_range_theta", true, 0.0, 0.0, 0};
    for (std::size_t j = 1; j < k; ++j) {
      std::size_t i = j;
      while (i > 0 && bind[i - 1] < 1.0 - 1e-6) --i;
      if (i == j) continue;
      for (std::size_t l = i; l <= j; ++l) {
        ++c.checks;
        const double lhs = 1.0 / theta[l];
        const double rhs =
            std::pow(lad.radii[l] / lad.radii[j], 2.0 - b_hat) / theta[j];
        const double margin = lhs / rhs - 1.0;
        c.worst_margin = std::max(c.worst_margin, margin);
        if (margin > 1e-8) c.pass = false;
      }
    }
    add(std::move(c));
  }

  {  // two-sided sigma-theta comparison: lower exact, upper fitted
    PropertyCheck lo{"theta_scaling_lower", true, 0.0, 0.0, 0};
    PropertyCheck hi{"theta_scaling_upper", true, 0.0, 0.0, 0};
    for (std::size_t i = 0; i < k; ++i)
      for (std::size_t j = i + 1; j < k; ++j) {
        const double sigma = lad.radii[i] / lad.radii[j];
        ++lo.checks;
        ++hi.checks;
        const double lower = std::pow(sigma, 2.0 - b_hat) / theta[j];
        const double margin = lower / (1.0 / theta[i]) - 1.0;
        lo.worst_margin = std::max(lo.worst_margin, margin);
        if (margin > 1e-10) lo.pass = false;
        const double cfit =
            (1.0 / theta[i]) * std::pow(sigma, 0.5 * (n + 2.0)) * theta[j];
        hi.fitted_constant = std::max(hi.fitted_constant, cfit);
      }
    add(std::move(lo));
    add(std::move(hi));
  }

  {  // inclusion: Q(sigma r) inside Q_{sigma^b s(r), sigma^{b/2} r}
    PropertyCheck c{"inclusion_shrink", true, 0.0, 0.0, 0};
    for (std::size_t i = 0; i < k; ++i)
      for (std::size_t j = i + 1; j < k; ++j) {
        const double sigma = lad.radii[i] / lad.radii[j];
        ++c.checks;
        const bool ok =
            s[i] <= std::pow(sigma, b_hat) * s[j] * (1.0 + 1e-10) &&
            lad.radii[i] <= std::pow(sigma, 0.5 * b_hat) * lad.radii[j] *
                                (1.0 + 1e-12);
        if (!ok) c.pass = false;
      }
    add(std::move(c));
    // inclusion: Q_{a s(r), a r} inside Q(a_tilde r) for a > 1
    PropertyCheck c2{"inclusion_grow", true, 0.0, 0.0, 0};
    for (double a : {2.0, 4.0}) {
      const double a_tilde = std::max(std::pow(a, 1.0 / b_hat), a);
      for (std::size_t i = 0; i < k; ++i) {
        ++c2.checks;
        const double lhs = a * s[i];
        const double rhs = geom.height_envelope(a_tilde * lad.radii[i]);
        const double margin = lhs / rhs - 1.0;
        c2.worst_margin = std::max(c2.worst_margin, margin);
        if (margin > 1e-10) c2.pass = false;
      }
    }
    add(std::move(c2));
  }

  {  // base-height bracket in units of theta_o
    PropertyCheck c{"base_height", true, 0.0, 0.0, 0};
    c.checks = 1;
    const double inv_theta_Rz = (R * R) / geom.S_z;
    const double C = std::max(1.0, (R * R / geom.S_cap) / theta_o_inverse);
    const double upper =
        C * std::pow(2.0, (2.0 * (m + 1.0) + (m - 1.0) * n) / (m - 1.0)) *
        theta_o_inverse;
    if (inv_theta_Rz < theta_o_inverse * (1.0 - 1e-9) ||
        inv_theta_Rz > upper * (1.0 + 1e-9))
      c.pass = false;
    c.worst_margin = inv_theta_Rz / upper - 1.0;
    add(std::move(c));
  }

  return rep;
}

double overlap_constant(double m, int n, double b_hat) {
  const double c0 = std::max(std::pow(3.0, 1.0 / b_hat), 3.0);
  return c0 * std::pow(2.0 * c0, 2.0 * (m + 1.0) + n * (m - 1.0));
}

namespace {

bool mutual_containment(const PointGeometry& gz, const PointGeometry& gy,
                        double r, double c) {
  const int n = gz.table->grid().spatial_dim;
  const Cylinder qz = gz.cylinder(r);
  const Cylinder qy = gy.cylinder(r);
  const Cylinder Cz = gz.family_cylinder(c * r);
  const Cylinder Cy = gy.family_cylinder(c * r);
  const double tol = 1e-12 * r;
  return Cy.contains(qz, n, tol) && Cz.contains(qy, n, tol);
}

}  // namespace

OverlapCheck check_overlap(const PointGeometry& gz, const PointGeometry& gy,
                           double r, double c1_theory) {
  OverlapCheck out;
  const int n = gz.table->grid().spatial_dim;
  const Cylinder qz = gz.cylinder(r);
  const Cylinder qy = gy.cylinder(r);
  out.intersect = qz.intersects(qy, n);
  if (!out.intersect) return out;
  out.contained_theoretical = mutual_containment(gz, gy, r, c1_theory);
  double lo = 1.0, hi = 1.0;
  while (!mutual_containment(gz, gy, r, hi) && hi < c1_theory * 4.0) hi *= 2.0;
  for (int it = 0; it < 60; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mutual_containment(gz, gy, r, mid))
      hi = mid;
    else
      lo = mid;
  }
  out.empirical_c1 = hi;
  return out;
}

}  // namespace pmlab
