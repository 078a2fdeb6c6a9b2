#include "pmlab/regimes.hpp"

#include <algorithm>
#include <cmath>

namespace pmlab {

RegimeResult classify_regime(const ProblemFields& pf, const Cylinder& Q,
                             double epsilon) {
  if (!(epsilon > 0.0) || !(epsilon < 1.0))
    throw ParameterError("regime epsilon must lie in (0,1)");
  if (!Q.inside(pf.u.grid))
    throw DomainError("regime cylinder extends outside the grid");
  RegimeResult res;
  res.epsilon = epsilon;
  const double m = pf.m;
  const double denom = cylinder_average(pf.u_tab.at(m + 1.0), Q);
  if (denom <= 0.0) {
    res.zero_mean = true;
    res.ratio = 0.0;
    res.label = Regime::Degenerate;  // documented convention
    return res;
  }
  const double mean = cylinder_average(pf.u_tab.at(1.0), Q);
  const double osc = centered_power_average(pf.u, Q, mean, m + 1.0);
  res.ratio = std::pow(osc / denom, 1.0 / (m + 1.0));
  res.label = res.ratio >= epsilon ? Regime::Degenerate : Regime::NonDegenerate;
  return res;
}

EnlargementReport check_enlargement(const ProblemFields& pf, const Cylinder& Q,
                                    double epsilon) {
  auto base = classify_regime(pf, Q, epsilon);
  if (base.label != Regime::Degenerate)
    throw GuardError("enlargement check requires the degenerate label");
  EnlargementReport rep;
  rep.epsilon = epsilon;
  rep.K = std::pow(epsilon, -(pf.m + 1.0));
  const int n = pf.u.grid.spatial_dim;
  const double q = pf.m + 1.0;
  const double cq = std::pow(3.0, q - 1.0);
  for (double a : {2.0, 3.0, 4.0}) {
    EnlargementRow row;
    row.a = a;
    const Cylinder Qa = Q.dilated(a / 2.0);
    if (!Qa.inside(pf.u.grid))
      throw DomainError("enlarged cylinder extends outside the grid");
    row.measured_ratio = classify_regime(pf, Qa, epsilon).ratio;
    const double Kp =
        cq * (std::pow(a, n + 1.0) * (2.0 * rep.K + 1.0) + 1.0);
    row.eps_prime_bound = std::pow(Kp, -1.0 / q);
    row.pass = row.measured_ratio >= row.eps_prime_bound * (1.0 - 1e-12);
    rep.all_pass = rep.all_pass && row.pass;
    rep.rows.push_back(row);
  }
  return rep;
}

SubcylinderReport check_subcylinder(const ProblemFields& pf, const Cylinder& Q,
                                    int N, double sigma, double epsilon) {
  if (Q.anchor != TimeAnchor::Backward)
    throw ParameterError("sub-cylinder check needs a backward cylinder");
  if (N < 1 || !(sigma > 0.0) || !(sigma <= 1.0))
    throw ParameterError("need N >= 1 and sigma in (0,1]");
  const double m = pf.m;
  const int n = pf.u.grid.spatial_dim;
  const double beta = std::pow(N / std::pow(sigma, n), 1.0 / (m + 1.0));
  if (!(epsilon < 1.0 / (beta + 1.0)))
    throw ParameterError("epsilon too large for the sub-cylinder lemma");
  auto label = classify_regime(pf, Q, epsilon);
  if (label.label != Regime::NonDegenerate)
    throw GuardError("sub-cylinder check requires the non-degenerate label");

  SubcylinderReport rep;
  rep.beta = beta;
  const PrefixSumTable& tab = pf.u_tab.at(m + 1.0);
  rep.full_mean = std::pow(cylinder_average(tab, Q), 1.0 / (m + 1.0));
  const double s = Q.half_time;
  const double t_bottom = Q.t_lo();
  for (int k = 0; k < N; ++k) {
    for (double r1 : {sigma * Q.radius, Q.radius}) {
      SubcylinderRow row;
      row.k = k;
      row.r1 = r1;
      std::array<double, kMaxSpatialDim> lo{}, hi{};
      for (int a = 0; a < n; ++a) {
        lo[a] = Q.x[a] - r1;
        hi[a] = Q.x[a] + r1;
      }
      const double t0 = t_bottom + s * k / N;
      const double t1 = t_bottom + s * (k + 1) / N;
      double vol = (t1 - t0);
      for (int a = 0; a < n; ++a) vol *= 2.0 * r1;
      const double mean = tab.box_integral(t0, t1, lo, hi) / vol;
      row.slab_mean = std::pow(mean, 1.0 / (m + 1.0));
      row.lower = (1.0 - (beta + 1.0) * epsilon) * rep.full_mean;
      row.upper = beta * rep.full_mean;
      row.pass = row.slab_mean >= row.lower * (1.0 - 1e-12) &&
                 row.slab_mean <= row.upper * (1.0 + 1e-12);
      rep.all_pass = rep.all_pass && row.pass;
      rep.rows.push_back(row);
    }
  }
  return rep;
}

NdegConsequences check_ndeg_consequences(const ProblemFields& pf,
                                         const Cylinder& Q, double alpha,
                                         double gamma, double epsilon) {
  if (!(alpha > 0.0) || !(alpha < 1.0) || !(gamma > 0.0) || !(gamma < 1.0))
    throw ParameterError("alpha, gamma must lie in (0,1)");
  auto label = classify_regime(pf, Q, epsilon);
  if (label.label != Regime::NonDegenerate)
    throw GuardError("consequence check requires the non-degenerate label");
  const double m = pf.m;
  NdegConsequences out;
  out.mean_u = cylinder_average(pf.u_tab.at(1.0), Q);
  out.power_mean =
      std::pow(cylinder_average(pf.u_tab.at(m + 1.0), Q), 1.0 / (m + 1.0));
  out.mean_bound = out.mean_u >= (1.0 - epsilon) * out.power_mean;
  out.mean_margin = out.mean_u - (1.0 - epsilon) * out.power_mean;

  const double cut = alpha * out.mean_u;
  long double mass = 0.0L, measure = 0.0L, total = 0.0L;
  for_each_covered_cell(pf.u.grid, Q, [&](Index i, double w) {
    total += w;
    if (pf.u.values[i] >= cut) {
      mass += static_cast<long double>(w) * pf.u.values[i];
      measure += w;
    }
  });
  const double cellvol = pf.u.grid.cell_volume();
  const double truncated_mean =
      static_cast<double>(mass) * cellvol / Q.volume(pf.u.grid.spatial_dim);
  out.truncated_bound =
      out.mean_u <= (1.0 - epsilon) / gamma * truncated_mean * (1.0 + 1e-12);
  out.truncated_margin =
      (1.0 - epsilon) / gamma * truncated_mean - out.mean_u;
  out.measure_fraction =
      static_cast<double>(measure / std::max(total, 1e-300L));
  out.measure_bound =
      out.measure_fraction >= std::pow(gamma, (m + 1.0) / m) * (1.0 - 1e-12);
  return out;
}

PositivityReport check_positivity(const ProblemFields& pf, const Cylinder& Q,
                                  double epsilon,
                                  const ExpansionProbeParams& probe) {
  if (Q.anchor != TimeAnchor::Backward)
    throw ParameterError("positivity probe needs a backward cylinder");
  auto label = classify_regime(pf, Q, epsilon);
  if (label.label != Regime::NonDegenerate)
    throw GuardError("positivity probe requires the non-degenerate label");
  PositivityReport rep;
  rep.mean_u = cylinder_average(pf.u_tab.at(1.0), Q);
  if (rep.mean_u <= 0.0) throw GuardError("positivity probe on a zero mean");
  // forward half of the cylinder, same spatial ball
  Cylinder fwd = Q;
  fwd.half_time = 0.5 * Q.half_time;
  double min_ratio = std::numeric_limits<double>::infinity();
  for_each_covered_cell(pf.u.grid, fwd, [&](Index i, double w) {
    if (w > 0.0) min_ratio = std::min(min_ratio, pf.u.values[i] / rep.mean_u);
  });
  rep.eta = std::max(0.0, std::min(1.0, min_ratio));

  // expansion probe from the bottom time of Q
  const double a = probe.alpha * rep.mean_u;
  if (a > 0.0) {
    const double rho = 0.5 * Q.radius;
    const double s = Q.t_lo();
    const double lag = probe.b / std::pow(a, pf.m - 1.0) * rho * rho;
    Cylinder slab(Q.x, s + lag, Q.radius, 0.5 * lag, TimeAnchor::Backward);
    rep.displaced_slab = slab;
    if (slab.inside(pf.u.grid)) {
      rep.expansion_checked = true;
      rep.probe_level = a;
      // measure condition at the slice containing s
      const SpaceTimeGrid& g = pf.u.grid;
      int it = static_cast<int>((s - g.t_min) / g.ht);
      it = std::clamp(it, 0, g.time_cells - 1);
      Cylinder ball(Q.x, g.t_center(it), rho, 0.5 * g.ht,
                    TimeAnchor::Centered);
      long double meas = 0.0L, tot = 0.0L;
      for_each_covered_slice_cell(g, ball, it, [&](Index i, double w) {
        tot += w;
        if (pf.u.values[i] > a) meas += w;
      });
      rep.measured_gamma = static_cast<double>(meas / std::max(tot, 1e-300L));
      double min_u = std::numeric_limits<double>::infinity();
      for_each_covered_cell(g, slab, [&](Index i, double w) {
        if (w > 0.0) min_u = std::min(min_u, pf.u.values[i]);
      });
      rep.eta_tilde = min_u / a;
    }
  }
  return rep;
}

SliceVariationReport slice_mean_variation(const ProblemFields& pf,
                                          const Cylinder& Q) {
  if (Q.anchor != TimeAnchor::Backward)
    throw ParameterError("slice variation needs a backward cylinder");
  const double m = pf.m;
  const double rho = Q.radius;
  const double tau = Q.duration();
  // weighted means over B_{2 rho} with the hat cutoff of the lemma
  Cylinder wide = Q;
  wide.radius = 2.0 * rho;
  RadialCutoff eta{Q.x, rho, 2.0 * rho};
  auto stats = slice_stats(pf.u, wide, &eta, 1.0);
  SliceVariationReport rep;
  for (std::size_t i = 0; i < stats.size(); ++i)
    for (std::size_t j = i + 1; j < stats.size(); ++j)
      rep.lhs = std::max(
          rep.lhs, std::abs(stats[i].weighted_mean - stats[j].weighted_mean));

  const double grad_um_mean = cylinder_average(pf.grad_um_tab.at(0.5), Q);
  const double f_mean = cylinder_average(pf.f_tab.at(1.0), Q);
  rep.rhs_gradient = tau / rho * grad_um_mean + tau * f_mean;

  const double hq = pf.sub_mean_power();  // (m+1)/(m+3)
  const double grad_hold =
      std::pow(cylinder_average(pf.grad_tab.at(hq), Q), 1.0 / hq * 0.5);
  const double u_hold = std::pow(cylinder_average(pf.u_tab.at(m + 1.0), Q),
                                 (m - 1.0) / (2.0 * (m + 1.0)));
  rep.rhs_holder = tau / rho * grad_hold * u_hold + tau * f_mean;

  rep.realized_gradient = rep.rhs_gradient > 0.0 ? rep.lhs / rep.rhs_gradient
                                                 : (rep.lhs > 0.0 ? std::numeric_limits<double>::infinity() : 0.0);
  rep.realized_holder = rep.rhs_holder > 0.0 ? rep.lhs / rep.rhs_holder
                                             : (rep.lhs > 0.0 ? std::numeric_limits<double>::infinity() : 0.0);
  return rep;
}

}  // namespace pmlab
