#include "pmlab/estimates.hpp"

#include <algorithm>
#include <cmath>

#include "pmlab/intrinsic_geometry.hpp"

namespace pmlab {

InterpolationExponents interpolation_exponents(double m, double d) {
  if (!(m > 1.0) || !(d > 1.0))
    throw ParameterError("interpolation exponents need m > 1 and d > 1");
  InterpolationExponents e;
  e.m = m;
  e.d = d;
  e.alpha = (d - 1.0) / ((m + 1.0) * d - 1.0);
  e.sigma = 2.0 * e.alpha / ((m - 1.0) * (1.0 - e.alpha));
  if (!(e.sigma > 0.0) || !(e.sigma < 1.0))
    throw ParameterError("infeasible d: sigma = " + std::to_string(e.sigma) +
                         " outside (0,1)");
  e.beta = 2.0 / (d * (m + 1.0));
  const double denom = 1.0 - e.sigma * d * (m + 1.0) / 2.0;
  e.b = denom != 0.0 ? (1.0 - e.sigma) * d / denom
                     : std::numeric_limits<double>::infinity();
  e.b_admissible = std::isfinite(e.b) && e.b > d;
  e.gamma_min = (1.0 - e.sigma) * d;
  e.gamma_feasible = e.gamma_min < 1.0;
  e.q_o = e.alpha / ((1.0 - e.sigma) * (1.0 - e.alpha)) * (m + 1.0) / (m - 1.0);
  e.residuals[0] = e.alpha * (m + 1.0) + (1.0 - e.alpha) / d - 1.0;
  const double mix = e.sigma * (1.0 - e.alpha) + e.alpha;
  e.residuals[1] = e.sigma * (1.0 - e.alpha) / mix - 2.0 / (m + 1.0);
  e.residuals[2] = e.alpha / mix - (m - 1.0) / (m + 1.0);
  e.residuals[3] =
      e.sigma / e.beta + (1.0 - e.sigma) * d / e.b - 1.0;
  return e;
}

namespace {

/// Unweighted spatial mean over the cross-section of Q at time level it.
double slice_plain_mean(const ScalarField& u, const Cylinder& Q, int it) {
  long double sum = 0.0L, vol = 0.0L;
  for_each_covered_slice_cell(u.grid, Q, it, [&](Index i, double w) {
    sum += static_cast<long double>(w) * u.values[i];
    vol += w;
  });
  if (vol <= 0.0L) throw DomainError("empty slice");
  return static_cast<double>(sum / vol);
}

/// Spatial mean of |u - c|^p over the cross-section of Q at time level it.
double slice_centered_moment(const ScalarField& u, const Cylinder& Q, int it,
                             double c, double p) {
  long double sum = 0.0L, vol = 0.0L;
  for_each_covered_slice_cell(u.grid, Q, it, [&](Index i, double w) {
    sum += static_cast<long double>(w) *
           power_value(std::abs(u.values[i] - c), p);
    vol += w;
  });
  return static_cast<double>(sum / vol);
}

/// sup over the time levels of Q of mean_{B} |u - (u(t))_B|^2 / (theta rho^2),
/// with the plain slice mean as the centering.
double slice_sup_term(const ScalarField& u, const Cylinder& Q, double theta,
                      double rho) {
  auto tc = time_coverage(u.grid, Q);
  if (tc.weight.empty()) throw DomainError("cylinder covers no time level");
  double sup = 0.0;
  for (std::size_t k = 0; k < tc.weight.size(); ++k) {
    const int it = tc.first + static_cast<int>(k);
    const double mean = slice_plain_mean(u, Q, it);
    const double dev = slice_centered_moment(u, Q, it, mean, 2.0);
    sup = std::max(sup, dev / (theta * rho * rho));
  }
  return sup;
}

/// Per-slice eta^2-weighted means over Q_b's cross-section.
std::vector<double> weighted_slice_means(const ScalarField& u,
                                         const Cylinder& Qb,
                                         const RadialCutoff& eta,
                                         TimeCoverage* cov) {
  auto stats = slice_stats(u, Qb, &eta, 2.0);
  std::vector<double> wm(stats.size());
  for (std::size_t k = 0; k < stats.size(); ++k) wm[k] = stats[k].weighted_mean;
  if (cov) {
    cov->first = stats.front().time_index;
    cov->weight.resize(stats.size());
    for (std::size_t k = 0; k < stats.size(); ++k)
      cov->weight[k] = stats[k].time_weight;
  }
  return wm;
}

}  // namespace

CheckReport check_energy(const ProblemFields& pf, const Cylinder& Q, double a,
                         double b, EnergyVariant variant) {
  if (Q.anchor != TimeAnchor::Backward)
    throw ParameterError("energy estimate expects a backward base cylinder");
  if (variant == EnergyVariant::Plain) {
    a = 1.0;
    b = 2.0;
  }
  if (!(1.0 <= a) || !(a < b) || !(b <= 2.0))
    throw ParameterError("energy estimate needs 1 <= a < b <= 2");
  const double m = pf.m;
  const double rho = Q.radius;
  const double theta = Q.theta();
  const Cylinder Qa = Q.dilated(a);
  const Cylinder Qb = Q.dilated(b);
  if (!Qb.inside(pf.u.grid))
    throw DomainError("energy estimate: b-dilate extends outside the grid");

  CheckReport rep;
  rep.cylinder = Q;
  rep.id = variant == EnergyVariant::Oscillation ? "energy_osc" : "energy_plain";

  // left side
  const double grad_term =
      std::pow(2.0 / (m + 1.0), 2.0) * cylinder_average(pf.grad_tab.at(1.0), Qa);
  double sup_term;
  if (variant == EnergyVariant::Oscillation) {
    sup_term = slice_sup_term(pf.u, Qa, theta, rho);
  } else {
    auto tc = time_coverage(pf.u.grid, Qa);
    sup_term = 0.0;
    for (std::size_t k = 0; k < tc.weight.size(); ++k) {
      const int it = tc.first + static_cast<int>(k);
      sup_term = std::max(sup_term,
                          slice_centered_moment(pf.u, Qa, it, 0.0, 2.0) /
                              (theta * rho * rho));
    }
  }
  rep.lhs = sup_term + grad_term;

  const double pref = 1.0 / ((b - a) * (b - a));
  if (variant == EnergyVariant::Oscillation) {
    RadialCutoff eta{Q.x, a * rho, b * rho};
    TimeCoverage cov;
    auto wm = weighted_slice_means(pf.u, Qb, eta, &cov);
    long double t_quad = 0.0L, t_high = 0.0L, vol = 0.0L;
    for (std::size_t k = 0; k < cov.weight.size(); ++k) {
      const int it = cov.first + static_cast<int>(k);
      const double c = wm[k];
      long double q2 = 0.0L, qm1 = 0.0L, v = 0.0L;
      for_each_covered_slice_cell(pf.u.grid, Qb, it, [&](Index i, double w) {
        const double dev = std::abs(pf.u.values[i] - c);
        const double um1 = power_value(pf.u.values[i], m - 1.0);
        q2 += static_cast<long double>(w) * (um1 + 1.0 / theta) * dev * dev;
        qm1 += static_cast<long double>(w) * power_value(dev, m + 1.0);
        v += w;
      });
      t_quad += q2 * cov.weight[k];
      t_high += qm1 * cov.weight[k];
      vol += v * cov.weight[k];
    }
    rep.rhs_terms.push_back(
        {"quad_osc", pref * static_cast<double>(t_quad / vol) / (rho * rho)});
    rep.rhs_terms.push_back(
        {"high_osc", pref * static_cast<double>(t_high / vol) / (rho * rho)});
  } else {
    const double u2 = cylinder_average(pf.u_tab.at(2.0), Qb);
    const double um1 = cylinder_average(pf.u_tab.at(m + 1.0), Qb);
    rep.rhs_terms.push_back(
        {"quad_plain", pref * (um1 + u2 / theta) / (rho * rho)});
  }
  const double f_term = std::pow(rho, 2.0 / m) *
                        cylinder_average(pf.f_tab.at((m + 1.0) / m), Qb);
  rep.rhs_terms.push_back({"rhs_f", pref * f_term});
  rep.finalize();
  return rep;
}

CheckReport check_sobolev_poincare(const ProblemFields& pf, const Cylinder& Q,
                                   double delta,
                                   const InterpolationExponents& exps) {
  if (!(delta > 0.0) || !(delta < 1.0))
    throw ParameterError("delta must lie in (0,1)");
  if (Q.anchor != TimeAnchor::Backward)
    throw ParameterError("interpolation bound expects a backward cylinder");
  const double m = pf.m;
  const double rho = Q.radius;
  const double theta = Q.theta();
  const double gamma = exps.gamma_effective();

  CheckReport rep;
  rep.cylinder = Q;
  rep.id = "sobolev_poincare";

  auto tc = time_coverage(pf.u.grid, Q);
  long double osc = 0.0L, vol = 0.0L;
  double sup = 0.0;
  for (std::size_t k = 0; k < tc.weight.size(); ++k) {
    const int it = tc.first + static_cast<int>(k);
    const double mean = slice_plain_mean(pf.u, Q, it);
    long double o = 0.0L, v = 0.0L;
    for_each_covered_slice_cell(pf.u.grid, Q, it, [&](Index i, double w) {
      o += static_cast<long double>(w) *
           power_value(std::abs(pf.u.values[i] - mean), m + 1.0);
      v += w;
    });
    osc += o * tc.weight[k];
    vol += v * tc.weight[k];
    sup = std::max(sup,
                   slice_centered_moment(pf.u, Q, it, mean, 2.0) /
                       (theta * rho * rho));
  }
  rep.lhs = static_cast<double>(osc / vol) / (rho * rho);

  const double mean_u = cylinder_average(pf.u_tab.at(1.0), Q);
  const double grad =
      std::pow(theta * power_value(mean_u, m - 1.0), exps.q_o) *
      std::pow(cylinder_average(pf.grad_tab.at(gamma), Q), 1.0 / gamma);
  rep.rhs_terms.push_back({"delta_sup", delta * sup});
  rep.rhs_terms.push_back({"gradient", grad});
  rep.finalize();
  // realized c_delta: what multiplies the gradient term after the sup term
  rep.note = "c_delta=" +
             std::to_string(grad > 0.0
                                ? std::max(0.0, rep.lhs - delta * sup) / grad
                                : (rep.lhs > delta * sup ? std::numeric_limits<
                                                               double>::infinity()
                                                         : 0.0));
  return rep;
}

CheckReport check_reverse_holder(const ProblemFields& pf, const Cylinder& Q,
                                 ReverseHolderVariant variant,
                                 const ReverseHolderParams& params) {
  if (Q.anchor != TimeAnchor::Backward)
    throw ParameterError("reverse Holder expects a backward base cylinder");
  const double m = pf.m;
  const double rho = Q.radius;
  const double theta = Q.theta();
  const double q = params.q > 0.0 ? params.q : pf.sub_mean_power();
  if (!pf.grad_tab.has(q))
    throw ParameterError("no gradient table at the requested sub-mean power");
  const Cylinder Q2 = Q.dilated(2.0);
  const Cylinder Q4 = Q.dilated(4.0);
  const Cylinder Qh = Q.dilated(0.5);

  CheckReport rep;
  rep.cylinder = Q;

  switch (variant) {
    case ReverseHolderVariant::General: {
      rep.id = "rh_general";
      if (!Q2.inside(pf.u.grid))
        throw DomainError("reverse Holder: 2-dilate outside the grid");
      rep.lhs = slice_sup_term(pf.u, Q, theta, rho) +
                cylinder_average(pf.grad_tab.at(1.0), Q);
      const double mean2 = cylinder_average(pf.u_tab.at(1.0), Q2);
      const double grad =
          std::pow(theta * power_value(mean2, m - 1.0), params.q_o) *
          std::pow(cylinder_average(pf.grad_tab.at(params.gamma), Q2),
                   1.0 / params.gamma);
      rep.rhs_terms.push_back({"gradient", grad});
      rep.rhs_terms.push_back(
          {"err_mass", params.delta_tilde *
                           cylinder_average(pf.u_tab.at(m + 1.0), Q2) /
                           (rho * rho)});
      rep.rhs_terms.push_back(
          {"err_theta", params.delta_tilde /
                            (rho * rho *
                             std::pow(theta, (m + 1.0) / (m - 1.0)))});
      rep.rhs_terms.push_back(
          {"rhs_f", std::pow(rho, 2.0 / m) *
                        cylinder_average(pf.f_tab.at((m + 1.0) / m), Q2)});
      break;
    }
    case ReverseHolderVariant::Degenerate: {
      rep.id = "rh_degenerate";
      if (!Q4.inside(pf.u.grid))
        throw DomainError("reverse Holder: 4-dilate outside the grid");
      auto cls = classify_cylinder(pf.u_tab.at(m + 1.0), m, Q2, params.K);
      if (cls.label != IntrinsicLabel::Intrinsic)
        throw GuardError("degenerate variant requires an intrinsic 2-dilate");
      auto reg = classify_regime(pf, Q2, params.epsilon);
      if (reg.label != Regime::Degenerate)
        throw GuardError("degenerate variant requires the degenerate label");
      const double um_mean = cylinder_average(pf.u_tab.at(m), Q4);
      if (theta * std::pow(um_mean, (m - 1.0) / m) >
          params.guard_c * params.K)
        throw GuardError("degenerate variant: theta (u^m)^{(m-1)/m} guard");
      rep.lhs = slice_sup_term(pf.u, Q2, theta, rho) +
                cylinder_average(pf.grad_tab.at(1.0), Q2) +
                cylinder_average(pf.u_tab.at(m + 1.0), Q4) / (rho * rho);
      rep.rhs_terms.push_back(
          {"gradient_sub",
           std::pow(cylinder_average(pf.grad_tab.at(q), Q4), 1.0 / q)});
      rep.rhs_terms.push_back(
          {"rhs_f", std::pow(rho, 2.0 / m) *
                        cylinder_average(pf.f_tab.at((m + 1.0) / m), Q4)});
      break;
    }
    case ReverseHolderVariant::NonDegenerate: {
      rep.id = "rh_nondegenerate";
      if (!Q2.inside(pf.u.grid))
        throw DomainError("reverse Holder: 2-dilate outside the grid");
      auto cls = classify_cylinder(pf.u_tab.at(m + 1.0), m, Q2, params.K);
      if (cls.label != IntrinsicLabel::Intrinsic)
        throw GuardError("non-degenerate variant requires an intrinsic 2-dilate");
      auto reg = classify_regime(pf, Q2, params.epsilon);
      if (reg.label != Regime::NonDegenerate)
        throw GuardError("non-degenerate variant requires the non-degenerate label");
      rep.lhs = cylinder_average(pf.grad_tab.at(1.0), Qh);
      rep.rhs_terms.push_back(
          {"gradient_sub",
           std::pow(cylinder_average(pf.grad_tab.at(q), Q), 1.0 / q)});
      rep.rhs_terms.push_back(
          {"rhs_f", std::pow(rho, 2.0 / m) *
                        cylinder_average(pf.f_tab.at((m + 1.0) / m), Q)});
      break;
    }
  }
  rep.finalize();
  return rep;
}

std::vector<ExponentRow> exponent_scan(const ProblemFields& pf,
                                       const Cylinder& Q,
                                       const std::vector<double>& p_ladder,
                                       ScanVariant variant, double K) {
  const double m = pf.m;
  const double R = Q.radius;
  const Cylinder Qh = Q.dilated(0.5);
  const Cylinder Q2 = Q.dilated(2.0);
  double measured_K = 0.0;
  if (variant == ScanVariant::Intrinsic) {
    if (!Q2.inside(pf.u.grid))
      throw DomainError("exponent scan: 2-dilate outside the grid");
    auto cls = classify_cylinder(pf.u_tab.at(m + 1.0), m, Q2, K);
    if (cls.label == IntrinsicLabel::Neither)
      throw GuardError("exponent scan requires a sub-intrinsic base");
    measured_K = cls.ratio;
  } else {
    measured_K = std::pow(cylinder_average(pf.u_tab.at(m + 1.0), Q), m - 1.0);
  }

  std::vector<ExponentRow> rows;
  rows.reserve(p_ladder.size());
  for (double p : p_ladder) {
    ExponentRow row;
    row.p = p;
    row.measured_K = measured_K;
    const double outer = (m - 1.0) / (p * (m + 1.0));
    PrefixSumTable gp(pf.grad_pow, p);
    row.lhs_raw = cylinder_average(gp, Qh);
    row.lhs = std::pow(row.lhs_raw, outer);
    PrefixSumTable fp(pf.f, p * (m + 1.0) / m);
    if (variant == ScanVariant::Intrinsic) {
      const double theta_o = Q.theta();
      const double f_term = std::pow(
          cylinder_average(fp, Q2) / std::pow(R, 2.0 * p), outer);
      const double tail = 1.0 / (std::pow(R, 2.0 * (m - 1.0) / (m + 1.0)) *
                                 theta_o);
      row.rhs_total = f_term + tail;
    } else {
      const double f_term =
          std::sqrt(measured_K) *
          std::pow(cylinder_average(fp, Q) / std::pow(R, 2.0 * p), outer);
      row.rhs_total = f_term + std::pow(measured_K, 1.5) + 1.0;
    }
    row.ratio = row.lhs / row.rhs_total;
    rows.push_back(row);
  }
  return rows;
}

namespace {

double weighted_mean(const ScalarField& g, const Cylinder& Q,
                     const RadialCutoff& eta) {
  const SpaceTimeGrid& gr = g.grid;
  long double num = 0.0L, den = 0.0L;
  for_each_covered_cell(gr, Q, [&](Index i, double w) {
    Index rem = i % gr.spatial_count();
    std::array<double, kMaxSpatialDim> x{};
    for (int a = gr.spatial_dim - 1; a >= 0; --a) {
      x[a] = gr.x_center(a, static_cast<int>(rem % gr.cells[a]));
      rem /= gr.cells[a];
    }
    const double e = eta.value(x, gr.spatial_dim);
    num += static_cast<long double>(w) * e * g.values[i];
    den += static_cast<long double>(w) * e;
  });
  if (den <= 0.0L) throw DomainError("cutoff weight vanishes on the cylinder");
  return static_cast<double>(num / den);
}

double weighted_centered_q(const ScalarField& g, const Cylinder& Q,
                           const RadialCutoff& eta, double c, double q) {
  const SpaceTimeGrid& gr = g.grid;
  long double num = 0.0L, den = 0.0L;
  for_each_covered_cell(gr, Q, [&](Index i, double w) {
    Index rem = i % gr.spatial_count();
    std::array<double, kMaxSpatialDim> x{};
    for (int a = gr.spatial_dim - 1; a >= 0; --a) {
      x[a] = gr.x_center(a, static_cast<int>(rem % gr.cells[a]));
      rem /= gr.cells[a];
    }
    const double e = eta.value(x, gr.spatial_dim);
    num += static_cast<long double>(w) * e *
           power_value(std::abs(g.values[i] - c), q);
    den += static_cast<long double>(w) * e;
  });
  return static_cast<double>(num / den);
}

}  // namespace

MeanInequalityReport check_mean_inequalities(const ScalarField& g,
                                             const Cylinder& Q, double q,
                                             const RadialCutoff& eta,
                                             std::mt19937_64& rng) {
  if (!(q >= 1.0)) throw ParameterError("mean inequalities need q >= 1");
  MeanInequalityReport rep;
  rep.q = q;
  const double wm = weighted_mean(g, Q, eta);
  const double base = std::pow(weighted_centered_q(g, Q, eta, wm, q), 1.0 / q);

  double lo = g.values.minCoeff(), hi = g.values.maxCoeff();
  if (hi <= lo) hi = lo + 1.0;
  std::uniform_real_distribution<double> uc(lo, hi);
  double worst = 0.0;
  for (int k = 0; k < 100; ++k) {
    const double c = uc(rng);
    const double other = std::pow(weighted_centered_q(g, Q, eta, c, q), 1.0 / q);
    if (other > 0.0) worst = std::max(worst, base / other);
  }
  rep.best_constant_factor = worst;
  rep.pass = rep.pass && worst <= 2.0 + 1e-9;

  const double plain_mean = cylinder_average(g, Q, 1.0);
  const double plain_osc =
      std::pow(centered_power_average(g, Q, plain_mean, q), 1.0 / q);
  rep.mean_change_factor = plain_osc > 0.0 ? base / plain_osc : 0.0;
  rep.pass = rep.pass && rep.mean_change_factor <= 2.0 + 1e-9;
  rep.mean_distance_factor =
      plain_osc > 0.0 ? std::abs(wm - plain_mean) / plain_osc : 0.0;
  rep.pass = rep.pass && rep.mean_distance_factor <= 2.0 + 1e-9;

  if (q >= 2.0) {
    if ((g.values < 0.0).any())
      throw DomainError("oscillation chain needs a nonnegative field");
    rep.chain_checked = true;
    ScalarField gh(g.grid, true);
    for (Index i = 0; i < g.grid.cell_count(); ++i)
      gh.values[i] = power_value(g.values[i], q / 2.0);
    const double lhs = centered_power_average(g, Q, plain_mean, q);
    const double mid =
        centered_power_average(gh, Q, power_value(plain_mean, q / 2.0), 2.0);
    const double gh_mean = cylinder_average(gh, Q, 1.0);
    const double rhs = centered_power_average(gh, Q, gh_mean, 2.0);
    rep.chain_c0 = mid > 0.0 ? lhs / mid : (lhs > 0.0 ? std::numeric_limits<double>::infinity() : 1.0);
    rep.chain_c1 = rhs > 0.0 ? mid / rhs : (mid > 0.0 ? std::numeric_limits<double>::infinity() : 1.0);
    rep.pass = rep.pass && std::isfinite(rep.chain_c0) &&
               std::isfinite(rep.chain_c1);
  }
  return rep;
}

std::optional<Cylinder> intrinsic_backward_cylinder(
    const ProblemFields& pf, const std::array<double, kMaxSpatialDim>& x,
    double t, double rho, double ratio_target) {
  const SpaceTimeGrid& g = pf.u.grid;
  const double m = pf.m;
  const PrefixSumTable& tab = pf.u_tab.at(m + 1.0);
  auto ratio_at = [&](double theta) {
    Cylinder Q2(x, t, 2.0 * rho, 2.0 * theta * rho * rho,
                TimeAnchor::Backward);
    const double mean = cylinder_average(tab, Q2);
    return theta * std::pow(mean, (m - 1.0) / (m + 1.0));
  };
  // the 2-dilate must not leave the grid: depth 2 theta rho^2 <= t - t_min
  const double theta_max = (t - g.t_min) / (2.0 * rho * rho) * (1.0 - 1e-9);
  {
    Cylinder probe(x, t, 2.0 * rho, 1e-12, TimeAnchor::Backward);
    if (!probe.inside(g)) return std::nullopt;
  }
  if (!(theta_max > 0.0)) return std::nullopt;
  double hi = theta_max;
  if (ratio_at(hi) < ratio_target) return std::nullopt;  // cannot reach target
  double lo = hi;
  while (ratio_at(lo) > ratio_target && lo > 1e-14 * theta_max) lo *= 0.5;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double r = ratio_at(mid);
    if (std::abs(r - ratio_target) <= 1e-12 * ratio_target) {
      lo = hi = mid;
      break;
    }
    if (r < ratio_target)
      lo = mid;
    else
      hi = mid;
  }
  const double theta = 0.5 * (lo + hi);
  return Cylinder(x, t, rho, theta * rho * rho, TimeAnchor::Backward);
}

ProblemFields scaled_problem(const ProblemFields& pf, double lam,
                             double sob_gamma,
                             const std::vector<double>& grad_extra) {
  if (!(lam > 0.0)) throw ParameterError("scale factor must be positive");
  const double m = pf.m;
  const double tfac = std::pow(lam, 1.0 - m);
  const SpaceTimeGrid& g = pf.u.grid;
  SpaceTimeGrid gs(g.spatial_dim, g.x_min, g.x_max, g.cells, g.t_min * tfac,
                   g.t_max * tfac, g.time_cells);
  ScalarField us(gs, true), fs(gs, true);
  us.values = pf.u.values * lam;
  fs.values = pf.f.values * std::pow(lam, m);
  return ProblemFields::build(m, std::move(us), std::move(fs), sob_gamma,
                              grad_extra);
}

Cylinder scaled_cylinder(const Cylinder& Q, double lam, double m) {
  const double tfac = std::pow(lam, 1.0 - m);
  return Cylinder(Q.x, Q.t * tfac, Q.radius, Q.half_time * tfac, Q.anchor);
}

}  // namespace pmlab
