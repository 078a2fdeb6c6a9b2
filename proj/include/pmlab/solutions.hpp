#pragma once

#include <functional>
#include <optional>

#include "pmlab/grid.hpp"

namespace pmlab {

/// Self-similar source-type solution of u_t = Delta(u^m):
///   U(x,t) = t^{-alpha} (b - kappa |x|^2 t^{-2 beta})_+^{1/(m-1)},
/// alpha = n/(n(m-1)+2), beta = 1/(n(m-1)+2), kappa = (m-1) beta / (2m).
/// |x| is the Euclidean norm; the profile constant b > 0 is free.
struct BarenblattParams {
  double m = 2.0;
  int n = 1;
  double b = 1.0;

  double alpha() const { return n * beta(); }
  double beta() const { return 1.0 / (n * (m - 1.0) + 2.0); }
  double kappa() const { return (m - 1.0) * beta() / (2.0 * m); }

  double value(const std::array<double, kMaxSpatialDim>& x, double t) const;
  /// d/d|x| of U^p along the radial direction (0 outside the support).
  double radial_derivative_of_power(double r, double t, double p) const;
  /// Support radius at time t: |x| < support_radius(t).
  double support_radius(double t) const;
  /// Total mass (closed form not needed; mass-normalized variant rescales b
  /// so that the mass at t=1 equals `mass` on a reference quadrature).
  static BarenblattParams mass_normalized(double m, int n, double mass);
};

/// Sample the Barenblatt solution at cell centers. Time extent must lie in
/// (0, inf); throws DomainError otherwise.
ScalarField barenblatt_field(const BarenblattParams& params,
                             const SpaceTimeGrid& grid);

/// Spatially varying coefficient or constant.
using CoefficientFn =
    std::function<double(const std::array<double, kMaxSpatialDim>&, double)>;

/// Diagonal-coefficient testbed for u_t - div(a m u^{m-1} Du) = f with
/// nu <= a <= L. The structure conditions hold pointwise by construction.
struct PMEProblem {
  double m = 2.0;
  int n = 1;
  double nu = 1.0;
  double L = 1.0;
  CoefficientFn a;                       // nullptr means a == 1
  std::optional<ScalarField> rhs;        // f >= 0; nullopt means f == 0
  std::function<double(const std::array<double, kMaxSpatialDim>&)> initial;

  double coefficient(const std::array<double, kMaxSpatialDim>& x,
                     double t) const {
    return a ? a(x, t) : 1.0;
  }
  void validate() const;
};

struct SolveStats {
  Index total_substeps = 0;
  double min_dt = 0.0;
  double worst_cfl = 0.0;  // max observed ht_sub * 2n * max(a m u^{m-1}) / h^2
};

/// Explicit flux-form scheme on u: edge fluxes a_edge * D(u^m) with
/// edge-harmonic coefficient means and zero-flux boundaries; sub-steps each
/// grid time step to honor ht_sub <= h^2 / (2 n max(a m u^{m-1})).
/// Preserves nonnegativity and, for f == 0, conserves mass to roundoff.
/// Throws ParameterError when the sub-step cap (2^20 per grid step) is hit,
/// reporting the offending CFL number.
ScalarField pme_solve(const PMEProblem& problem, const SpaceTimeGrid& grid,
                      SolveStats* stats = nullptr, int threads = 1);

/// Max |u_t - div(a m u^{m-1} Du) - f| over interior cells whose full stencil
/// (spatial neighbors and the forward time level) lies in the positivity set.
/// The time difference is the explicit scheme's forward one, so exact-solution
/// samples score O(ht + h^2). Cells within `exclusion_band` cells of a zero
/// cell are skipped.
double residual_norm(const ScalarField& u, const PMEProblem& problem,
                     int exclusion_band = 3);

/// Detailed variant: also reports where the max is attained.
struct ResidualReport {
  double max_residual = 0.0;
  int argmax_time = -1;
  std::array<int, kMaxSpatialDim> argmax_cell{};
  Index admissible_cells = 0;
};
ResidualReport residual_report(const ScalarField& u, const PMEProblem& problem,
                               int exclusion_band = 3);

}  // namespace pmlab
