#include "doctest.h"

#include <cmath>

#include "pmlab/grid.hpp"
#include "pmlab/solutions.hpp"

using namespace pmlab;

namespace {

double mass_at_level(const ScalarField& u, int it) {
  const SpaceTimeGrid& g = u.grid;
  long double acc = 0.0L;
  const Index ns = g.spatial_count();
  for (Index s = 0; s < ns; ++s)
    acc += u.values[static_cast<Index>(it) * ns + s];
  return static_cast<double>(acc) * g.spatial_cell_volume();
}

double l1_distance_at_level(const ScalarField& a, const ScalarField& b,
                            int it) {
  const SpaceTimeGrid& g = a.grid;
  long double acc = 0.0L;
  const Index ns = g.spatial_count();
  for (Index s = 0; s < ns; ++s)
    acc += std::abs(a.values[static_cast<Index>(it) * ns + s] -
                    b.values[static_cast<Index>(it) * ns + s]);
  return static_cast<double>(acc) * g.spatial_cell_volume();
}

}  // namespace

TEST_CASE("Barenblatt parameters and pointwise values") {
  BarenblattParams bb{2.0, 1, 1.0};
  CHECK(bb.alpha() == doctest::Approx(1.0 / 3.0));
  CHECK(bb.beta() == doctest::Approx(1.0 / 3.0));
  CHECK(bb.kappa() == doctest::Approx(1.0 / 12.0));
  CHECK(bb.value({0, 0, 0}, 1.0) == doctest::Approx(1.0));  // U(0,1) = b
  // zero outside the support
  const double rb = bb.support_radius(1.0);
  CHECK(bb.value({rb * 1.0001, 0, 0}, 1.0) == 0.0);
  CHECK(bb.value({rb * 2.0, 0, 0}, 1.0) == 0.0);

  BarenblattParams b4{4.0, 1, 1.0};
  CHECK(b4.beta() == doctest::Approx(1.0 / 5.0));
  CHECK(b4.kappa() == doctest::Approx(3.0 / 40.0));
}

TEST_CASE("Barenblatt sampling requires positive times") {
  BarenblattParams bb{2.0, 1, 1.0};
  auto bad = SpaceTimeGrid::line(-1.0, 1.0, 8, -0.5, 1.0, 4);
  CHECK_THROWS_AS(barenblatt_field(bb, bad), DomainError);
}

TEST_CASE("Barenblatt mass is conserved across time slices") {
  BarenblattParams bb{2.0, 1, 1.0};
  auto g = SpaceTimeGrid::line(-8.0, 8.0, 8192, 1.0, 2.0, 2);  // h = 1/512
  auto u = barenblatt_field(bb, g);
  const double m1 = mass_at_level(u, 0);
  const double m2 = mass_at_level(u, 1);
  CHECK(m1 == doctest::Approx(m2).epsilon(1e-6));
}

TEST_CASE("residual oracle certifies the Barenblatt formula") {
  BarenblattParams bb{2.0, 1, 1.0};
  PMEProblem pr;
  pr.m = 2.0;
  pr.n = 1;
  double prev = 0.0;
  for (int level = 0; level < 2; ++level) {
    const int nx = (level == 0) ? 2048 : 4096;  // h = 1/256, 1/512 on [-4,4]
    auto g = SpaceTimeGrid::line(-4.0, 4.0, nx, 1.0, 1.5, nx / 8);
    auto u = barenblatt_field(bb, g);
    auto rep = residual_report(u, pr, 3);
    CHECK(rep.admissible_cells > 0);
    if (level == 0) {
      prev = rep.max_residual;
      CHECK(rep.max_residual < 0.05);
    } else {
      const double factor = prev / rep.max_residual;
      CHECK(factor > 1.5);
      CHECK(factor < 3.0);
    }
  }
}

TEST_CASE("residual of a constant field with f = 0 vanishes") {
  PMEProblem pr;
  pr.m = 2.0;
  pr.n = 1;
  auto g = SpaceTimeGrid::line(0.0, 1.0, 32, 0.0, 1.0, 8);
  auto u = ScalarField::constant(g, 0.7);
  CHECK(residual_norm(u, pr) == 0.0);
}

TEST_CASE("manufactured stationary residual is O(h^2)") {
  // u(x) = 2 - x^2, m = 2: f = -(u^2)'' = 8 - 12 x^2, positive on |x| <= 0.8
  PMEProblem pr;
  pr.m = 2.0;
  pr.n = 1;
  double prev = 0.0;
  for (int level = 0; level < 2; ++level) {
    const int nx = 128 << level;
    auto g = SpaceTimeGrid::line(-0.8, 0.8, nx, 0.0, 0.01, 8 << (2 * level));
    auto u = ScalarField::sample(
        g,
        [](const std::array<double, kMaxSpatialDim>& x, double) {
          return 2.0 - x[0] * x[0];
        },
        true);
    pr.rhs = ScalarField::sample(
        g,
        [](const std::array<double, kMaxSpatialDim>& x, double) {
          return 8.0 - 12.0 * x[0] * x[0];
        },
        true);
    const double res = residual_norm(u, pr, 0);
    if (level == 0) {
      prev = res;
    } else {
      CHECK(res < prev / 3.0);  // ~ O(h^2): stationary, so no O(ht) term
    }
  }
}

TEST_CASE("pme_solve keeps constants constant") {
  PMEProblem pr;
  pr.m = 2.0;
  pr.n = 1;
  pr.initial = [](const std::array<double, kMaxSpatialDim>&) { return 0.6; };
  auto g = SpaceTimeGrid::line(0.0, 1.0, 32, 0.0, 0.5, 16);
  auto u = pme_solve(pr, g);
  CHECK((u.values - 0.6).abs().maxCoeff() < 1e-14);
}

TEST_CASE("pme_solve conserves mass and nonnegativity on Barenblatt data") {
  BarenblattParams bb{2.0, 1, 1.0};
  PMEProblem pr;
  pr.m = 2.0;
  pr.n = 1;
  pr.initial = [&](const std::array<double, kMaxSpatialDim>& x) {
    return bb.value(x, 1.0);
  };
  auto g = SpaceTimeGrid::line(-6.0, 6.0, 384, 1.0, 2.0, 64);
  SolveStats stats;
  auto u = pme_solve(pr, g, &stats);
  CHECK(stats.total_substeps >= 64);
  CHECK(u.values.minCoeff() >= 0.0);
  const double m0 = mass_at_level(u, 0);
  const double mN = mass_at_level(u, g.time_cells - 1);
  CHECK(std::abs(mN - m0) <= 1e-10 * m0);
}

TEST_CASE("pme_solve converges to the Barenblatt solution") {
  BarenblattParams bb{2.0, 1, 1.0};
  double prev_err = 0.0;
  for (int level = 0; level < 2; ++level) {
    const int nx = 768 << level;
    auto g = SpaceTimeGrid::line(-6.0, 6.0, nx, 1.0, 2.0, 64 << level);
    PMEProblem pr;
    pr.m = 2.0;
    pr.n = 1;
    pr.initial = [&](const std::array<double, kMaxSpatialDim>& x) {
      return bb.value(x, 1.0);
    };
    auto u = pme_solve(pr, g);
    auto exact = barenblatt_field(bb, g);
    const double err = l1_distance_at_level(u, exact, g.time_cells - 1);
    CHECK(err <= 0.01 * g.h);  // err <= C h
    if (level == 0) {
      prev_err = err;
    } else {
      const double factor = prev_err / err;
      CHECK(factor > 1.6);
      CHECK(factor < 2.4);
    }
  }
}

TEST_CASE("manufactured stationary state is reproduced by the solver") {
  // The zero-flux boundary does not match the manufactured flux at the edge,
  // so the comparison is made in the deep interior over a short horizon.
  double prev = 0.0;
  for (int level = 0; level < 2; ++level) {
    PMEProblem pr;
    pr.m = 2.0;
    pr.n = 1;
    const int nx = 256 << level;
    auto g = SpaceTimeGrid::line(-0.8, 0.8, nx, 0.0, 2e-4, 8);
    pr.initial = [](const std::array<double, kMaxSpatialDim>& x) {
      return 2.0 - x[0] * x[0];
    };
    pr.rhs = ScalarField::sample(
        g,
        [](const std::array<double, kMaxSpatialDim>& x, double) {
          return 8.0 - 12.0 * x[0] * x[0];
        },
        true);
    auto u = pme_solve(pr, g);
    const SpaceTimeGrid& gg = u.grid;
    auto exact = ScalarField::sample(
        gg,
        [](const std::array<double, kMaxSpatialDim>& x, double) {
          return 2.0 - x[0] * x[0];
        },
        true);
    double interior_err = 0.0;
    for (int i = 0; i < gg.cells[0]; ++i) {
      if (std::abs(gg.x_center(0, i)) > 0.5) continue;
      interior_err = std::max(
          interior_err,
          std::abs(u.at1(gg.time_cells - 1, i) - exact.at1(0, i)));
    }
    if (level == 0) {
      prev = interior_err;
      CHECK(interior_err < 5e-4);
    } else {
      CHECK(interior_err < prev / 2.0);  // drift shrinks under refinement
    }
  }
}

TEST_CASE("intrinsic scaling maps Barenblatt to Barenblatt") {
  // gamma u(x, gamma^{m-1} t) equals the profile with b' = gamma^{2 beta (m-1)} b
  const double m = 2.0;
  const double gamma = 1.7;
  BarenblattParams bb{m, 1, 1.0};
  BarenblattParams bbp{m, 1,
                       std::pow(gamma, 2.0 * bb.beta() * (m - 1.0)) * bb.b};
  for (double t : {1.0, 1.7, 2.3}) {
    for (double x : {0.0, 0.5, 1.3, 2.9, 3.3}) {
      const double lhs = gamma * bb.value({x, 0, 0}, std::pow(gamma, m - 1.0) * t);
      const double rhs = bbp.value({x, 0, 0}, t);
      CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
    }
  }
}

TEST_CASE("structure conditions hold on the diagonal testbed") {
  PMEProblem pr;
  pr.m = 2.0;
  pr.n = 1;
  pr.nu = 0.5;
  pr.L = 2.0;
  pr.a = [](const std::array<double, kMaxSpatialDim>& x, double) {
    return 1.0 + 0.5 * std::sin(3.0 * x[0]);  // in [0.5, 1.5] subset [nu, L]
  };
  pr.validate();
  for (double x : {-1.0, 0.0, 0.4, 2.0}) {
    const double a = pr.coefficient({x, 0, 0}, 0.0);
    CHECK(a >= pr.nu);
    CHECK(a <= pr.L);
  }
}

TEST_CASE("mass-normalized profile hits the requested mass") {
  auto p = BarenblattParams::mass_normalized(2.0, 1, 1.0);
  auto g = SpaceTimeGrid::line(-4.0, 4.0, 4096, 1.0, 1.1, 2);
  auto u = barenblatt_field(p, g);
  CHECK(mass_at_level(u, 0) == doctest::Approx(1.0).epsilon(1e-4));
}
