#pragma once

#include <optional>
#include <random>
#include <vector>

#include "pmlab/problem_fields.hpp"
#include "pmlab/regimes.hpp"
#include "pmlab/report.hpp"

namespace pmlab {

/// Exponent system of the space-time interpolation estimate. For given
/// m > 1 and d > 1:
///   alpha = (d-1)/((m+1)d - 1)
///   sigma = 2 alpha / ((m-1)(1-alpha))        (infeasible-d unless in (0,1))
///   beta  = 2/(d(m+1)),  b from sigma/beta + (1-sigma)d/b = 1
///   q_o   = alpha/((1-sigma)(1-alpha)) * (m+1)/(m-1)
/// gamma_min = (1-sigma)d is the smallest admissible gradient exponent; the
/// feasibility flag records gamma_min < 1. For m = 2 the system forces
/// (1-sigma)d = 1 for every d, so gamma falls back to 1 (Jensen-trivial).
struct InterpolationExponents {
  double m = 0.0;
  double d = 0.0;
  double alpha = 0.0;
  double sigma = 0.0;
  double beta = 0.0;
  double b = 0.0;
  double q_o = 0.0;
  double gamma_min = 0.0;
  bool gamma_feasible = false;
  bool b_admissible = false;  // b > d
  std::array<double, 4> residuals{};

  double max_residual() const {
    double r = 0.0;
    for (double v : residuals) r = std::max(r, std::abs(v));
    return r;
  }
  /// gamma used by the checks: gamma_min when feasible, else 1.
  double gamma_effective() const { return gamma_feasible ? gamma_min : 1.0; }
};

InterpolationExponents interpolation_exponents(double m, double d);

enum class EnergyVariant { Oscillation, Plain };

/// Caccioppoli-type energy estimate on backward cylinders. Q is the base
/// Q_{theta rho^2, rho}; the left side lives on the a-dilate and the right
/// side on the b-dilate with the hat cutoff between a rho and b rho
/// (1 <= a < b <= 2). The Plain variant discards the mean values and uses
/// a = 1, b = 2.
CheckReport check_energy(const ProblemFields& pf, const Cylinder& Q, double a,
                         double b, EnergyVariant variant);

/// Space-time interpolation bound: the oscillation (m+1)-mean against the
/// slice sup and the low-exponent gradient mean. Reports the realized
/// c_delta in the extras.
CheckReport check_sobolev_poincare(const ProblemFields& pf, const Cylinder& Q,
                                   double delta,
                                   const InterpolationExponents& exps);

enum class ReverseHolderVariant { General, Degenerate, NonDegenerate };

struct ReverseHolderParams {
  double K = 4.0;                // intrinsic constant
  double epsilon = 0.1;          // regime threshold
  double delta_tilde = 0.5;      // error-term weight of the general variant
  double q = 0.0;                // sub-mean exponent; 0 means (m+1)/(m+3)
  double q_o = 3.0;              // interpolation exponent of the general variant
  double gamma = 1.0;            // gradient exponent of the general variant
  double guard_c = 8.0;          // degenerate-variant guard multiplier
};

/// The three reverse Holder estimates. Q is the base Q_{theta rho^2, rho}
/// (backward); guards per variant:
///   General:       2Q inside the grid.
///   Degenerate:    2Q intrinsic (K), degenerate (epsilon), and
///                  theta (mean_{4Q} u^m)^{(m-1)/m} <= guard_c K.
///   NonDegenerate: 2Q intrinsic (K) and non-degenerate (epsilon).
/// GuardError on a label mismatch.
CheckReport check_reverse_holder(const ProblemFields& pf, const Cylinder& Q,
                                 ReverseHolderVariant variant,
                                 const ReverseHolderParams& params);

enum class ScanVariant { Intrinsic, Parabolic };

struct ExponentRow {
  double p = 0.0;
  double lhs_raw = 0.0;  // mean_{Q/2} |D u^{(m+1)/2}|^{2p}
  double lhs = 0.0;      // lhs_raw^{(m-1)/(p(m+1))}
  double rhs_total = 0.0;
  double ratio = 0.0;  // lhs / rhs_total
  double measured_K = 0.0;
};

/// Gradient-power scan. Intrinsic variant: Q is the base Q_{theta R^2, R}
/// whose 2-dilate must be sub-intrinsic (ratio <= K); right side lives on 2Q.
/// Parabolic variant: Q is a plain backward parabolic cylinder Q_{R^2, R};
/// K is measured as (mean_Q u^{m+1})^{m-1}.
std::vector<ExponentRow> exponent_scan(const ProblemFields& pf,
                                       const Cylinder& Q,
                                       const std::vector<double>& p_ladder,
                                       ScanVariant variant, double K = 4.0);

/// Weighted-mean comparison suite on one field over one cylinder:
/// best-constant property (factor 2), mean-change bounds (factor 2), and the
/// power-halving oscillation chain with fitted constants (exact 1 at q = 2).
struct MeanInequalityReport {
  double q = 0.0;
  double best_constant_factor = 0.0;   // worst over random constants; <= 2
  double mean_change_factor = 0.0;     // weighted vs unweighted osc; <= 2
  double mean_distance_factor = 0.0;   // |(g)^eta - (g)| bound; <= 2
  bool chain_checked = false;          // q >= 2 only
  double chain_c0 = 0.0;
  double chain_c1 = 0.0;
  bool pass = true;
};

MeanInequalityReport check_mean_inequalities(const ScalarField& g,
                                             const Cylinder& Q, double q,
                                             const RadialCutoff& eta,
                                             std::mt19937_64& rng);

/// Backward base cylinder Q_{theta rho^2, rho} at (x, t) whose 2-dilate has
/// the intrinsic ratio `ratio_target` (bisection on theta). Returns an empty
/// optional when no admissible theta keeps the 2-dilate inside the grid or
/// the ratio cannot reach the target.
std::optional<Cylinder> intrinsic_backward_cylinder(
    const ProblemFields& pf, const std::array<double, kMaxSpatialDim>& x,
    double t, double rho, double ratio_target = 1.0);

/// Intrinsic rescaling u -> lam u, t -> lam^{1-m} t, f -> lam^m f.
/// Cell values are relabeled exactly; only the time metadata changes.
/// `sob_gamma` and `grad_extra` are forwarded to ProblemFields::build.
ProblemFields scaled_problem(const ProblemFields& pf, double lam,
                             double sob_gamma = 1.0,
                             const std::vector<double>& grad_extra = {});
Cylinder scaled_cylinder(const Cylinder& Q, double lam, double m);

}  // namespace pmlab
