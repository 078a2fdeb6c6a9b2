#include "pmlab/solutions.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "pmlab/parallel.hpp"

namespace pmlab {

double BarenblattParams::value(const std::array<double, kMaxSpatialDim>& x,
                               double t) const {
  double r2 = 0.0;
  for (int a = 0; a < n; ++a) r2 += x[a] * x[a];
  const double ta = std::pow(t, -alpha());
  const double core = b - kappa() * r2 * std::pow(t, -2.0 * beta());
  if (core <= 0.0) return 0.0;
  return ta * std::pow(core, 1.0 / (m - 1.0));
}

double BarenblattParams::radial_derivative_of_power(double r, double t,
                                                    double p) const {
  const double core = b - kappa() * r * r * std::pow(t, -2.0 * beta());
  if (core <= 0.0) return 0.0;
  // d/dr [ t^{-alpha p} core^{p/(m-1)} ]
  const double dcore = -2.0 * kappa() * r * std::pow(t, -2.0 * beta());
  return std::pow(t, -alpha() * p) * (p / (m - 1.0)) *
         std::pow(core, p / (m - 1.0) - 1.0) * dcore;
}

double BarenblattParams::support_radius(double t) const {
  return std::sqrt(b / kappa()) * std::pow(t, beta());
}

BarenblattParams BarenblattParams::mass_normalized(double m, int n,
                                                   double mass) {
  BarenblattParams p{m, n, 1.0};
  // Mass scales as b^{1/(m-1) + n/2}; compute the unit-b mass by radial
  // quadrature at t = 1 and solve for b.
  const int steps = 200000;
  const double rb = p.support_radius(1.0);
  long double acc = 0.0L;
  for (int i = 0; i < steps; ++i) {
    const double r = (i + 0.5) * rb / steps;
    std::array<double, kMaxSpatialDim> x{};
    x[0] = r;
    const double v = p.value(x, 1.0);
    // l2-radial measure: surface of the Euclidean sphere
    double surf = 1.0;
    if (n == 1) surf = 2.0;
    else if (n == 2) surf = 2.0 * M_PI * r;
    else surf = 4.0 * M_PI * r * r;
    acc += static_cast<long double>(v) * surf * (rb / steps);
  }
  const double unit_mass = static_cast<double>(acc);
  const double expo = 1.0 / (m - 1.0) + n / 2.0;
  p.b = std::pow(mass / unit_mass, 1.0 / expo);
  return p;
}

ScalarField barenblatt_field(const BarenblattParams& params,
                             const SpaceTimeGrid& grid) {
  if (grid.t_min <= 0.0)
    throw DomainError("Barenblatt sampling requires a time extent in (0, inf)");
  if (grid.spatial_dim != params.n)
    throw ParameterError("grid dimension does not match Barenblatt dimension");
  return ScalarField::sample(
      grid,
      [&](const std::array<double, kMaxSpatialDim>& x, double t) {
        return params.value(x, t);
      },
      true);
}

void PMEProblem::validate() const {
  if (!(m > 1.0)) throw ParameterError("m must exceed 1");
  if (!(nu > 0.0) || !(L >= nu))
    throw ParameterError("need 0 < nu <= L for the structure conditions");
  if (rhs) {
    rhs->validate();
    if (!rhs->nonneg) throw ParameterError("rhs must carry the nonneg flag");
  }
}

namespace {

// One explicit sub-step of length dt on the spatial slice `cur`, writing
// `next`. phi = u^m, flux form with edge-harmonic coefficient means and
// zero-flux boundaries.
void explicit_step(const SpaceTimeGrid& g, const PMEProblem& pr,
                   const std::vector<double>& cur, std::vector<double>& next,
                   const std::vector<double>& acoef,
                   const std::vector<double>& fslice, double dt, int threads) {
  const int n = g.spatial_dim;
  const Index ns = g.spatial_count();
  static thread_local std::vector<double> phi;
  phi.resize(static_cast<std::size_t>(ns));
  for (Index i = 0; i < ns; ++i)
    phi[static_cast<std::size_t>(i)] = power_value(cur[static_cast<std::size_t>(i)], pr.m);
  std::array<Index, kMaxSpatialDim> stride{};
  {
    Index s = 1;
    for (int a = n - 1; a >= 0; --a) {
      stride[a] = s;
      s *= g.cells[a];
    }
  }
  const double inv_h2 = 1.0 / (g.h * g.h);
  parallel_for(ns, threads, [&](Index i) {
    std::array<int, kMaxSpatialDim> ix{};
    Index rem = i;
    for (int a = n - 1; a >= 0; --a) {
      ix[a] = static_cast<int>(rem % g.cells[a]);
      rem /= g.cells[a];
    }
    const double ai = acoef[static_cast<std::size_t>(i)];
    double div = 0.0;
    for (int a = 0; a < n; ++a) {
      // zero-flux boundary: missing edges contribute nothing
      if (ix[a] + 1 < g.cells[a]) {
        const Index j = i + stride[a];
        const double aj = acoef[static_cast<std::size_t>(j)];
        const double ae = (ai + aj > 0.0) ? 2.0 * ai * aj / (ai + aj) : 0.0;
        div += ae * (phi[static_cast<std::size_t>(j)] -
                     phi[static_cast<std::size_t>(i)]);
      }
      if (ix[a] > 0) {
        const Index j = i - stride[a];
        const double aj = acoef[static_cast<std::size_t>(j)];
        const double ae = (ai + aj > 0.0) ? 2.0 * ai * aj / (ai + aj) : 0.0;
        div -= ae * (phi[static_cast<std::size_t>(i)] -
                     phi[static_cast<std::size_t>(j)]);
      }
    }
    double v = cur[static_cast<std::size_t>(i)] + dt * div * inv_h2 +
               dt * fslice[static_cast<std::size_t>(i)];
    next[static_cast<std::size_t>(i)] = std::max(v, 0.0);
  });
}

}  // namespace

ScalarField pme_solve(const PMEProblem& problem, const SpaceTimeGrid& grid,
                      SolveStats* stats, int threads) {
  problem.validate();
  if (grid.spatial_dim != problem.n)
    throw ParameterError("grid dimension does not match problem dimension");
  if (problem.rhs && problem.rhs->grid.cell_count() != grid.cell_count())
    throw ParameterError("rhs grid does not match solve grid");
  const int n = grid.spatial_dim;
  const Index ns = grid.spatial_count();
  ScalarField out(grid, true);

  // spatial positions for coefficient evaluation
  std::vector<std::array<double, kMaxSpatialDim>> pos(
      static_cast<std::size_t>(ns));
  {
    std::array<int, kMaxSpatialDim> ix{};
    for (Index s = 0; s < ns; ++s) {
      for (int a = 0; a < n; ++a) pos[static_cast<std::size_t>(s)][a] =
          grid.x_center(a, ix[a]);
      for (int a = n - 1; a >= 0; --a) {
        if (++ix[a] < grid.cells[a]) break;
        ix[a] = 0;
      }
    }
  }

  std::vector<double> cur(static_cast<std::size_t>(ns)),
      next(static_cast<std::size_t>(ns)), acoef(static_cast<std::size_t>(ns)),
      fslice(static_cast<std::size_t>(ns), 0.0);
  for (Index s = 0; s < ns; ++s) {
    double v = problem.initial ? problem.initial(pos[static_cast<std::size_t>(s)])
                               : 0.0;
    if (v < 0.0) throw ParameterError("initial datum must be nonnegative");
    cur[static_cast<std::size_t>(s)] = v;
  }

  SolveStats st;
  st.min_dt = std::numeric_limits<double>::infinity();
  const Index kMaxSubsteps = Index(1) << 20;
  double tnow = grid.t_min;
  for (int it = 0; it < grid.time_cells; ++it) {
    const double t_target = grid.t_min + (it + 1.0) * grid.ht;
    // The stored level is the cell-centered time; write the state closest to
    // the cell center, i.e. after advancing half a step.
    const double t_center = grid.t_center(it);
    bool stored = (tnow >= t_center);
    if (stored)
      for (Index s = 0; s < ns; ++s)
        out.values[static_cast<Index>(it) * ns + s] =
            cur[static_cast<std::size_t>(s)];
    Index guard = 0;
    while (tnow < t_target - 1e-14 * std::max(1.0, std::abs(t_target))) {
      for (Index s = 0; s < ns; ++s)
        acoef[static_cast<std::size_t>(s)] =
            problem.coefficient(pos[static_cast<std::size_t>(s)], tnow);
      if (problem.rhs) {
        const Index base = static_cast<Index>(std::min(
                               it, problem.rhs->grid.time_cells - 1)) *
                           ns;
        for (Index s = 0; s < ns; ++s)
          fslice[static_cast<std::size_t>(s)] = problem.rhs->values[base + s];
      }
      double dmax = 0.0;
      for (Index s = 0; s < ns; ++s) {
        const double d = acoef[static_cast<std::size_t>(s)] * problem.m *
                         power_value(cur[static_cast<std::size_t>(s)],
                                     problem.m - 1.0);
        dmax = std::max(dmax, d);
      }
      double dt_stable = (dmax > 0.0)
                             ? grid.h * grid.h / (2.0 * n * dmax)
                             : (t_target - tnow);
      double dt = std::min({dt_stable, t_target - tnow});
      if (++guard > kMaxSubsteps) {
        const double cfl = dt_stable > 0.0 ? (t_target - tnow) / dt_stable
                                           : std::numeric_limits<double>::infinity();
        throw ParameterError(
            "stability sub-step cap exceeded; remaining CFL number " +
            std::to_string(cfl));
      }
      explicit_step(grid, problem, cur, next, acoef, fslice, dt, threads);
      cur.swap(next);
      tnow += dt;
      st.total_substeps++;
      st.min_dt = std::min(st.min_dt, dt);
      st.worst_cfl = std::max(st.worst_cfl, dt / dt_stable);
      if (!stored && tnow >= t_center) {
        for (Index s = 0; s < ns; ++s)
          out.values[static_cast<Index>(it) * ns + s] =
              cur[static_cast<std::size_t>(s)];
        stored = true;
      }
    }
    if (!stored)
      for (Index s = 0; s < ns; ++s)
        out.values[static_cast<Index>(it) * ns + s] =
            cur[static_cast<std::size_t>(s)];
  }
  if (stats) *stats = st;
  return out;
}

ResidualReport residual_report(const ScalarField& u, const PMEProblem& problem,
                               int exclusion_band) {
  const SpaceTimeGrid& g = u.grid;
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
  // distance-to-zero-cell mask per time level (Chebyshev cell distance,
  // saturated at exclusion_band + 1)
  const int band = std::max(exclusion_band, 0);
  ResidualReport rep;
  std::vector<int> dist(static_cast<std::size_t>(ns));
  std::vector<double> phi(static_cast<std::size_t>(ns));
  for (int it = 0; it + 1 < g.time_cells; ++it) {
    const Index base = static_cast<Index>(it) * ns;
    // multi-pass chamfer distance to the zero set on this slice
    for (Index s = 0; s < ns; ++s)
      dist[static_cast<std::size_t>(s)] =
          u.values[base + s] > 0.0 ? band + 1 : 0;
    if (band > 0) {
      bool changed = true;
      int pass = 0;
      while (changed && pass < band + 1) {
        changed = false;
        ++pass;
        for (Index s = 0; s < ns; ++s) {
          int d = dist[static_cast<std::size_t>(s)];
          if (d == 0) continue;
          std::array<int, kMaxSpatialDim> ix{};
          Index rem = s;
          for (int a = n - 1; a >= 0; --a) {
            ix[a] = static_cast<int>(rem % g.cells[a]);
            rem /= g.cells[a];
          }
          int best = d;
          for (int a = 0; a < n; ++a) {
            if (ix[a] > 0)
              best = std::min(best,
                              dist[static_cast<std::size_t>(s - stride[a])] + 1);
            if (ix[a] + 1 < g.cells[a])
              best = std::min(best,
                              dist[static_cast<std::size_t>(s + stride[a])] + 1);
          }
          if (best < d) {
            dist[static_cast<std::size_t>(s)] = best;
            changed = true;
          }
        }
      }
    }
    for (Index s = 0; s < ns; ++s)
      phi[static_cast<std::size_t>(s)] =
          power_value(u.values[base + s], problem.m);
    const double t = g.t_center(it);
    for (Index s = 0; s < ns; ++s) {
      if (dist[static_cast<std::size_t>(s)] <= band) continue;
      std::array<int, kMaxSpatialDim> ix{};
      Index rem = s;
      for (int a = n - 1; a >= 0; --a) {
        ix[a] = static_cast<int>(rem % g.cells[a]);
        rem /= g.cells[a];
      }
      bool interior = true;
      for (int a = 0; a < n; ++a)
        if (ix[a] == 0 || ix[a] + 1 == g.cells[a]) interior = false;
      if (!interior) continue;
      // full stencil must be positive (forward time level included)
      if (u.values[base + ns + s] <= 0.0) continue;
      bool positive = u.values[base + s] > 0.0;
      for (int a = 0; a < n && positive; ++a)
        positive = u.values[base + s - stride[a]] > 0.0 &&
                   u.values[base + s + stride[a]] > 0.0;
      if (!positive) continue;
      std::array<double, kMaxSpatialDim> x{};
      for (int a = 0; a < n; ++a) x[a] = g.x_center(a, ix[a]);
      const double ai = problem.coefficient(x, t);
      double div = 0.0;
      for (int a = 0; a < n; ++a) {
        std::array<double, kMaxSpatialDim> xl = x, xr = x;
        xl[a] -= g.h;
        xr[a] += g.h;
        const double al = problem.coefficient(xl, t);
        const double ar = problem.coefficient(xr, t);
        const double ael = (ai + al > 0.0) ? 2.0 * ai * al / (ai + al) : 0.0;
        const double aer = (ai + ar > 0.0) ? 2.0 * ai * ar / (ai + ar) : 0.0;
        div += aer * (phi[static_cast<std::size_t>(s + stride[a])] -
                      phi[static_cast<std::size_t>(s)]) -
               ael * (phi[static_cast<std::size_t>(s)] -
                      phi[static_cast<std::size_t>(s - stride[a])]);
      }
      div /= g.h * g.h;
      const double ut = (u.values[base + ns + s] - u.values[base + s]) / g.ht;
      double fval = 0.0;
      if (problem.rhs) fval = problem.rhs->values[base + s];
      const double res = std::abs(ut - div - fval);
      ++rep.admissible_cells;
      if (res > rep.max_residual) {
        rep.max_residual = res;
        rep.argmax_time = it;
        rep.argmax_cell = ix;
      }
    }
  }
  return rep;
}

double residual_norm(const ScalarField& u, const PMEProblem& problem,
                     int exclusion_band) {
  return residual_report(u, problem, exclusion_band).max_residual;
}

}  // namespace pmlab
