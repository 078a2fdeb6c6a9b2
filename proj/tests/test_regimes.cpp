#include "doctest.h"

#include <cmath>
#include <random>

#include "pmlab/regimes.hpp"
#include "pmlab/solutions.hpp"

using namespace pmlab;

namespace {

ProblemFields constant_problem(double c, double m = 2.0) {
  auto g = SpaceTimeGrid::line(-2.0, 2.0, 64, 0.0, 2.0, 64);
  return ProblemFields::build(m, ScalarField::constant(g, c),
                              ScalarField::constant(g, 0.0));
}

ProblemFields barenblatt_problem(double m, int nx = 512, int nt = 128) {
  BarenblattParams bb{m, 1, 1.0};
  auto g = SpaceTimeGrid::line(-4.0, 4.0, nx, 1.0, 2.0, nt);
  return ProblemFields::build(m, barenblatt_field(bb, g),
                              ScalarField::constant(g, 0.0));
}

}  // namespace

TEST_CASE("regime classification") {
  SUBCASE("positive constants are non-degenerate for every epsilon") {
    auto pf = constant_problem(0.7);
    Cylinder Q = Cylinder::centered1(0.0, 1.0, 0.5, 0.3);
    for (double eps : {0.01, 0.1, 0.5, 0.9}) {
      auto r = classify_regime(pf, Q, eps);
      CHECK(r.label == Regime::NonDegenerate);
      CHECK(r.ratio == doctest::Approx(0.0).epsilon(1e-12));
    }
  }
  SUBCASE("two-value field: ratio = 2^{-2/3}, degenerate for eps <= 0.63") {
    auto g = SpaceTimeGrid::line(0.0, 1.0, 64, 0.0, 1.0, 16);
    auto u = ScalarField::sample(
        g,
        [](const std::array<double, kMaxSpatialDim>& x, double) {
          return x[0] < 0.5 ? 0.0 : 2.0;
        },
        true);
    auto pf = ProblemFields::build(2.0, std::move(u),
                                   ScalarField::constant(g, 0.0));
    Cylinder Q = Cylinder::centered1(0.5, 0.5, 0.25, 0.25);
    auto r = classify_regime(pf, Q, 0.63);
    CHECK(r.ratio == doctest::Approx(std::pow(2.0, -2.0 / 3.0)).epsilon(1e-12));
    CHECK(r.label == Regime::Degenerate);
    auto r2 = classify_regime(pf, Q, 0.64);
    CHECK(r2.label == Regime::NonDegenerate);
  }
  SUBCASE("zero field is degenerate by convention") {
    auto pf = constant_problem(0.0);
    Cylinder Q = Cylinder::centered1(0.0, 1.0, 0.5, 0.3);
    auto r = classify_regime(pf, Q, 0.1);
    CHECK(r.zero_mean);
    CHECK(r.label == Regime::Degenerate);
  }
  SUBCASE("Barenblatt cylinder straddling the free boundary is degenerate") {
    auto pf = barenblatt_problem(2.0);
    // support radius ~ sqrt(12) t^{1/3}: straddle at x ~ 3.7, t ~ 1.5
    Cylinder Q = Cylinder::centered1(3.7, 1.5, 0.4, 0.2);
    auto r = classify_regime(pf, Q, 0.1);
    CHECK(r.label == Regime::Degenerate);
  }
  SUBCASE("ratio never exceeds 2 and is scale invariant") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> uni(0.0, 3.0);
    auto g = SpaceTimeGrid::line(0.0, 1.0, 32, 0.0, 1.0, 16);
    ScalarField u(g, true);
    for (Index i = 0; i < g.cell_count(); ++i) u.values[i] = uni(rng);
    Cylinder Q = Cylinder::centered1(0.5, 0.5, 0.4, 0.4);
    auto pf = ProblemFields::build(2.0, u, ScalarField::constant(g, 0.0));
    auto r = classify_regime(pf, Q, 0.1);
    CHECK(r.ratio <= 2.0);
    ScalarField us(g, true);
    us.values = u.values * 7.5;
    auto pfs = ProblemFields::build(2.0, std::move(us),
                                    ScalarField::constant(g, 0.0));
    auto rs = classify_regime(pfs, Q, 0.1);
    CHECK(rs.ratio == doctest::Approx(r.ratio).epsilon(1e-12));
    CHECK(rs.label == r.label);
  }
}

TEST_CASE("degenerate enlargement") {
  SUBCASE("two-value field: self-similar dilate keeps the ratio") {
    auto g = SpaceTimeGrid::line(0.0, 1.0, 128, 0.0, 1.0, 64);
    auto u = ScalarField::sample(
        g,
        [](const std::array<double, kMaxSpatialDim>& x, double) {
          return x[0] < 0.5 ? 0.0 : 2.0;
        },
        true);
    auto pf = ProblemFields::build(2.0, std::move(u),
                                   ScalarField::constant(g, 0.0));
    Cylinder Q = Cylinder::centered1(0.5, 0.5, 0.125, 0.125);
    auto rep = check_enlargement(pf, Q, 0.3);
    REQUIRE(rep.rows.size() == 3);
    // a = 2 is the cylinder itself
    CHECK(rep.rows[0].measured_ratio ==
          doctest::Approx(std::pow(2.0, -2.0 / 3.0)).epsilon(1e-12));
    for (const auto& row : rep.rows) {
      INFO("a=", row.a, " ratio=", row.measured_ratio, " bound=",
           row.eps_prime_bound);
      CHECK(row.pass);
    }
  }
  SUBCASE("random degenerate samples satisfy the adjusted threshold") {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    auto g = SpaceTimeGrid::line(0.0, 1.0, 64, 0.0, 1.0, 32);
    int tested = 0;
    for (int trial = 0; trial < 30 && tested < 10; ++trial) {
      ScalarField u(g, true);
      for (Index i = 0; i < g.cell_count(); ++i)
        u.values[i] = uni(rng) < 0.5 ? 0.0 : uni(rng);
      auto pf = ProblemFields::build(2.0, std::move(u),
                                     ScalarField::constant(g, 0.0));
      Cylinder Q = Cylinder::centered1(0.5, 0.5, 0.2, 0.2);
      auto label = classify_regime(pf, Q, 0.3);
      if (label.label != Regime::Degenerate) continue;
      ++tested;
      auto rep = check_enlargement(pf, Q, 0.3);
      for (const auto& row : rep.rows) CHECK(row.pass);
    }
    CHECK(tested >= 5);
  }
  SUBCASE("constant field refuses (not degenerate)") {
    auto pf = constant_problem(1.0);
    Cylinder Q = Cylinder::centered1(0.0, 1.0, 0.3, 0.2);
    CHECK_THROWS_AS(check_enlargement(pf, Q, 0.1), GuardError);
  }
}

TEST_CASE("sub-cylinder slab comparability") {
  SUBCASE("constant field: slab means equal the full mean") {
    auto pf = constant_problem(1.3);
    Cylinder Q = Cylinder::backward1(0.0, 1.5, 0.5, 0.5);
    auto rep = check_subcylinder(pf, Q, 8, 0.5, 0.1);
    CHECK(rep.all_pass);
    for (const auto& row : rep.rows)
      CHECK(row.slab_mean == doctest::Approx(rep.full_mean).epsilon(1e-12));
  }
  SUBCASE("near-constant perturbation holds with slack") {
    auto g = SpaceTimeGrid::line(-2.0, 2.0, 128, 0.0, 2.0, 128);
    auto u = ScalarField::sample(
        g,
        [](const std::array<double, kMaxSpatialDim>& x, double t) {
          return 1.0 + 0.01 * std::sin(5.0 * x[0] + 3.0 * t);
        },
        true);
    auto pf = ProblemFields::build(2.0, std::move(u),
                                   ScalarField::constant(g, 0.0));
    Cylinder Q = Cylinder::backward1(0.0, 1.5, 0.5, 0.5);
    auto rep = check_subcylinder(pf, Q, 8, 0.5, 0.2);
    CHECK(rep.all_pass);
    for (const auto& row : rep.rows) {
      // measured slack far exceeds the guaranteed margin
      CHECK(row.slab_mean > 0.9 * rep.full_mean);
      CHECK(row.slab_mean < 1.1 * rep.full_mean);
    }
  }
  SUBCASE("Barenblatt deep inside the support") {
    auto pf = barenblatt_problem(2.0);
    Cylinder Q = Cylinder::backward1(0.0, 1.8, 0.4, 0.2);
    auto rep = check_subcylinder(pf, Q, 8, 0.5, 0.05);
    CHECK(rep.all_pass);
  }
  SUBCASE("epsilon precondition is enforced") {
    auto pf = constant_problem(1.0);
    Cylinder Q = Cylinder::backward1(0.0, 1.5, 0.5, 0.5);
    // beta = (8/0.5)^{1/3} = 2.52: need eps < 0.284
    CHECK_THROWS_AS(check_subcylinder(pf, Q, 8, 0.5, 0.3), ParameterError);
  }
}

TEST_CASE("non-degenerate consequences") {
  SUBCASE("constant field: full measure and unit mean ratio") {
    auto pf = constant_problem(0.9);
    Cylinder Q = Cylinder::centered1(0.0, 1.0, 0.5, 0.3);
    auto rep = check_ndeg_consequences(pf, Q, 0.5, 0.5, 0.2);
    CHECK(rep.mean_bound);
    CHECK(rep.mean_u == doctest::Approx(rep.power_mean).epsilon(1e-12));
    CHECK(rep.truncated_bound);
    CHECK(rep.measure_bound);
    CHECK(rep.measure_fraction == doctest::Approx(1.0));
  }
  SUBCASE("smooth bump keeps all three bounds") {
    auto g = SpaceTimeGrid::line(-2.0, 2.0, 128, 0.0, 2.0, 64);
    auto u = ScalarField::sample(
        g,
        [](const std::array<double, kMaxSpatialDim>& x, double t) {
          const double d = x[0] * x[0] + (t - 1.0) * (t - 1.0);
          return 1.0 + 0.05 * std::exp(-4.0 * d);
        },
        true);
    auto pf = ProblemFields::build(2.0, std::move(u),
                                   ScalarField::constant(g, 0.0));
    Cylinder Q = Cylinder::centered1(0.0, 1.0, 0.5, 0.3);
    auto rep = check_ndeg_consequences(pf, Q, 0.5, 0.5, 0.2);
    CHECK(rep.mean_bound);
    CHECK(rep.truncated_bound);
    CHECK(rep.measure_bound);
  }
  SUBCASE("degenerate field refuses") {
    auto g = SpaceTimeGrid::line(0.0, 1.0, 64, 0.0, 1.0, 16);
    auto u = ScalarField::sample(
        g,
        [](const std::array<double, kMaxSpatialDim>& x, double) {
          return x[0] < 0.5 ? 0.0 : 2.0;
        },
        true);
    auto pf = ProblemFields::build(2.0, std::move(u),
                                   ScalarField::constant(g, 0.0));
    Cylinder Q = Cylinder::centered1(0.5, 0.5, 0.25, 0.25);
    CHECK_THROWS_AS(check_ndeg_consequences(pf, Q, 0.5, 0.5, 0.1), GuardError);
  }
}

TEST_CASE("positivity probe") {
  SUBCASE("constant field has eta = 1") {
    auto pf = constant_problem(2.0);
    Cylinder Q = Cylinder::backward1(0.0, 1.5, 0.5, 0.4);
    auto rep = check_positivity(pf, Q, 0.1);
    CHECK(rep.eta == doctest::Approx(1.0));
  }
  SUBCASE("Barenblatt strictly inside the support has positive eta") {
    auto pf = barenblatt_problem(2.0);
    Cylinder Q = Cylinder::backward1(0.0, 1.8, 0.5, 0.25);
    auto label = classify_regime(pf, Q, 0.1);
    REQUIRE(label.label == Regime::NonDegenerate);
    auto rep = check_positivity(pf, Q, 0.1);
    CHECK(rep.eta > 0.0);
    CHECK(rep.eta <= 1.0);
  }
  SUBCASE("boundary-touching cylinder is degenerate upstream") {
    auto pf = barenblatt_problem(2.0);
    Cylinder Q = Cylinder::backward1(3.7, 1.5, 0.4, 0.2);
    CHECK_THROWS_AS(check_positivity(pf, Q, 0.1), GuardError);
  }
}

TEST_CASE("slice mean variation") {
  SUBCASE("time-independent field has zero variation") {
    auto g = SpaceTimeGrid::line(-2.0, 2.0, 64, 0.0, 2.0, 32);
    auto u = ScalarField::sample(
        g,
        [](const std::array<double, kMaxSpatialDim>& x, double) {
          return 1.0 + 0.3 * std::sin(2.0 * x[0]);
        },
        true);
    auto pf = ProblemFields::build(2.0, std::move(u),
                                   ScalarField::constant(g, 0.0));
    Cylinder Q = Cylinder::backward1(0.0, 1.5, 0.5, 0.5);
    auto rep = slice_mean_variation(pf, Q);
    CHECK(rep.lhs == doctest::Approx(0.0).epsilon(1e-13));
  }
  SUBCASE("u = 1 + t with f = 1 realizes the constant 1") {
    auto g = SpaceTimeGrid::line(-2.0, 2.0, 64, 0.0, 2.0, 64);
    auto u = ScalarField::sample(
        g,
        [](const std::array<double, kMaxSpatialDim>&, double t) {
          return 1.0 + t;
        },
        true);
    auto f = ScalarField::constant(g, 1.0);
    auto pf = ProblemFields::build(2.0, std::move(u), std::move(f));
    Cylinder Q = Cylinder::backward1(0.0, 1.5, 0.5, 0.5);
    auto rep = slice_mean_variation(pf, Q);
    // LHS = max |t1 - t2| over covered slice centers < tau; f term = tau
    CHECK(rep.lhs > 0.0);
    CHECK(rep.realized_gradient <= 1.0 + 1e-9);
    CHECK(rep.realized_gradient > 0.8);
  }
  SUBCASE("Barenblatt realized constant is stable under refinement") {
    double prev = 0.0;
    for (int level = 0; level < 2; ++level) {
      auto pf = barenblatt_problem(2.0, 512 << level, 128 << level);
      Cylinder Q = Cylinder::backward1(0.5, 1.6, 0.5, 0.3);
      auto rep = slice_mean_variation(pf, Q);
      CHECK(std::isfinite(rep.realized_gradient));
      if (level == 0) {
        prev = rep.realized_gradient;
      } else {
        CHECK(rep.realized_gradient ==
              doctest::Approx(prev).epsilon(0.2));
      }
    }
  }
}
