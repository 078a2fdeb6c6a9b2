#include "pmlab/problem_fields.hpp"

#include <algorithm>

namespace pmlab {

ProblemFields ProblemFields::build(double m, ScalarField u, ScalarField f,
                                   double gamma,
                                   const std::vector<double>& grad_extra_powers,
                                   int threads) {
  if (!(m > 1.0)) throw ParameterError("m must exceed 1");
  u.validate();
  f.validate();
  ProblemFields pf;
  pf.m = m;
  pf.u = std::move(u);
  pf.f = std::move(f);
  pf.grad_pow = gradient_power_field(pf.u, 0.5 * (m + 1.0), threads);
  pf.grad_um = gradient_power_field(pf.u, m, threads);
  pf.u_tab = PowerTables(pf.u, {1.0, 2.0, m, m + 1.0});
  pf.f_tab = PowerTables(pf.f, {1.0, (m + 1.0) / m});
  std::vector<double> gp = {1.0, pf.sub_mean_power(), gamma};
  gp.insert(gp.end(), grad_extra_powers.begin(), grad_extra_powers.end());
  pf.grad_tab = PowerTables(pf.grad_pow, gp);
  pf.grad_um_tab = PowerTables(pf.grad_um, {0.5});
  return pf;
}

}  // namespace pmlab
