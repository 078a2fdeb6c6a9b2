#pragma once

#include <vector>

#include "pmlab/problem_fields.hpp"

namespace pmlab {

enum class Regime { Degenerate, NonDegenerate };

/// Oscillation-to-size dichotomy on a cylinder:
///   ratio = (mean |u - (u)_Q|^{m+1})^{1/(m+1)} / (mean u^{m+1})^{1/(m+1)}.
/// Degenerate iff ratio >= epsilon; ties and the all-zero cylinder are
/// Degenerate by convention. ratio lies in [0, 2].
struct RegimeResult {
  Regime label = Regime::NonDegenerate;
  double epsilon = 0.0;
  double ratio = 0.0;
  bool zero_mean = false;
};

RegimeResult classify_regime(const ProblemFields& pf, const Cylinder& Q,
                             double epsilon);

/// Persistence of the degenerate condition under dilation: for a positive g
/// with mean g^q <= K mean |g - (g)|^q on Q, the dilate aQ satisfies the same
/// with K' = c(q) [a^{n+1} (2K+1) + 1], c(q) = 3^{q-1}. In regime terms the
/// admissible threshold drops from epsilon to eps' = K'^{-1/(m+1)}.
struct EnlargementRow {
  double a = 0.0;
  double measured_ratio = 0.0;
  double eps_prime_bound = 0.0;  // guaranteed threshold K'^{-1/(m+1)}
  bool pass = false;             // measured_ratio >= eps_prime_bound
};
struct EnlargementReport {
  double epsilon = 0.0;
  double K = 0.0;
  std::vector<EnlargementRow> rows;
  bool all_pass = true;
};

/// Requires the degenerate label on Q (GuardError otherwise); dilates are
/// a/2 * Q for a in {2,3,4} so a is measured against the half-size base.
EnlargementReport check_enlargement(const ProblemFields& pf, const Cylinder& Q,
                                    double epsilon);

/// Slab-mean comparability on a backward cylinder Q = (t0-s, t0] x B_r:
/// with beta = (N/sigma^n)^{1/(m+1)} and eps < 1/(beta+1), the slab means
/// over ((k/N)s-deep slabs) x B_{r1} for r1 in {sigma r, r} satisfy
///   (1 - (beta+1) eps) M <= slab <= beta M,   M = (mean_Q u^{m+1})^{1/(m+1)}.
struct SubcylinderRow {
  int k = 0;
  double r1 = 0.0;
  double slab_mean = 0.0;  // (mean u^{m+1})^{1/(m+1)} over the slab
  double lower = 0.0;
  double upper = 0.0;
  bool pass = false;
};
struct SubcylinderReport {
  double full_mean = 0.0;
  double beta = 0.0;
  std::vector<SubcylinderRow> rows;
  bool all_pass = true;
};

SubcylinderReport check_subcylinder(const ProblemFields& pf, const Cylinder& Q,
                                    int N, double sigma, double epsilon);

/// Consequences of the non-degenerate condition: the three displayed bounds
/// (mean lower bound, truncated-mass lower bound, measure bound). The
/// epsilon-smallness the lemma requires is configuration, reported not
/// derived.
struct NdegConsequences {
  double mean_u = 0.0;
  double power_mean = 0.0;  // (mean u^{m+1})^{1/(m+1)}
  bool mean_bound = false;       // mean_u >= (1-eps) power_mean
  double mean_margin = 0.0;
  bool truncated_bound = false;  // mean_u <= (1-eps)/gamma mean u chi_{u>=alpha mean}
  double truncated_margin = 0.0;
  bool measure_bound = false;    // |{u >= alpha mean}| >= gamma^{(m+1)/m} |Q|
  double measure_fraction = 0.0;
};

/// Requires the non-degenerate label on Q (GuardError otherwise).
NdegConsequences check_ndeg_consequences(const ProblemFields& pf,
                                         const Cylinder& Q, double alpha,
                                         double gamma, double epsilon);

/// Empirical positivity probe on a non-degenerate intrinsic backward
/// cylinder Q = (t0 - 2 theta rho^2, t0] x B_{2 rho}: the largest eta with
/// u >= eta (u)_Q on the forward half (t0 - theta rho^2, t0] x B_{2 rho},
/// plus the forward expansion probe.
struct PositivityReport {
  double mean_u = 0.0;
  double eta = 0.0;  // min u / mean over the forward sub-cylinder
  // expansion probe
  bool expansion_checked = false;
  double probe_level = 0.0;     // a
  double measured_gamma = 0.0;  // |{u(.,s) > a} cap B_rho| / |B_rho|
  double eta_tilde = 0.0;       // min u / a over the displaced slab
  Cylinder displaced_slab;
};

struct ExpansionProbeParams {
  double alpha = 0.5;  // probe level a = alpha * (u)_Q
  double gamma = 0.5;  // required measure fraction at the probe time
  double b = 2.0;      // waiting-time factor
};

/// Requires the non-degenerate label (GuardError otherwise). The expansion
/// probe is skipped when the displaced slab leaves the grid.
PositivityReport check_positivity(const ProblemFields& pf, const Cylinder& Q,
                                  double epsilon,
                                  const ExpansionProbeParams& probe = {});

/// Variation of the weighted slice means on a backward cylinder
/// Q = (t0 - tau, t0] x B_rho (the cutoff lives on B_{2 rho}):
///   LHS = max_{t1,t2} |(u(t1))^eta - (u(t2))^eta|
///   RHS_gradient = (tau/rho) mean_Q |D u^m| + tau mean_Q f
///   RHS_holder   = (tau/rho) (mean_Q |D u^{(m+1)/2}|^{2(m+1)/(m+3)})^{(m+3)/(2(m+1))}
///                    * (mean_Q u^{m+1})^{(m-1)/(2(m+1))} + tau mean_Q f
struct SliceVariationReport {
  double lhs = 0.0;
  double rhs_gradient = 0.0;
  double rhs_holder = 0.0;
  double realized_gradient = 0.0;  // lhs / rhs_gradient
  double realized_holder = 0.0;
};

SliceVariationReport slice_mean_variation(const ProblemFields& pf,
                                          const Cylinder& Q);

}  // namespace pmlab
