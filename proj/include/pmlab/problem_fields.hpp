#pragma once

#include <memory>
#include <vector>

#include "pmlab/grid.hpp"

namespace pmlab {

/// Immutable bundle of one problem's fields and the derived quantities every
/// estimate consumes: the gradient-power fields and prefix tables at the
/// standard powers. Built once, then shared read-only across workers.
struct ProblemFields {
  double m = 2.0;
  ScalarField u;
  ScalarField f;         // may be identically zero
  ScalarField grad_pow;  // |D(u^{(m+1)/2})|^2
  ScalarField grad_um;   // |D(u^m)|^2

  PowerTables u_tab;        // powers {1, 2, m, m+1}
  PowerTables f_tab;        // powers {1, (m+1)/m}
  PowerTables grad_tab;     // on grad_pow: {1, q_sub, holder_q, gamma, p...}
  PowerTables grad_um_tab;  // on grad_um: {1/2}

  double sub_mean_power() const { return (m + 1.0) / (m + 3.0); }

  /// `gamma` is the Sobolev-type interpolation exponent (1 = Jensen-trivial
  /// fallback); `grad_extra_powers` adds exponent-scan powers p (applied to
  /// |D(u^{(m+1)/2})|^2 directly).
  static ProblemFields build(double m, ScalarField u, ScalarField f,
                             double gamma = 1.0,
                             const std::vector<double>& grad_extra_powers = {},
                             int threads = 1);
};

}  // namespace pmlab
