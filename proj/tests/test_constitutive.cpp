#include <catch2/catch_amalgamated.hpp>

#include "bps/constitutive.hpp"

using namespace bps;

TEST_CASE("default material passes all hypotheses") {
  MaterialSystem m = default_material();
  ValidationReport rep = validate(m, SampleBox{}, 2);
  INFO(rep.to_string());
  REQUIRE(rep.all_pass());
  REQUIRE(equilibrium_residual(m) == Catch::Approx(0.0).margin(1e-15));
}

TEST_CASE("viscosity bound violation is caught") {
  MaterialSystem m = default_material();
  m.lambda_plus = constant_closure(-0.1);
  ValidationReport rep = validate(m, SampleBox{}, 2);
  REQUIRE_FALSE(rep.all_pass());
  bool found = false;
  for (const auto& c : rep.checks)
    if (c.name.find("lambda_plus >") != std::string::npos) {
      found = true;
      REQUIRE_FALSE(c.pass);
    }
  REQUIRE(found);
}

TEST_CASE("pressure monotonicity via finite differences") {
  MaterialSystem m = default_material();
  m.P_plus = [](double rho, double theta) { return theta * std::log(rho); };
  SampleBox box;
  box.rho_min = 0.5;
  box.rho_max = 2.0;
  ValidationReport rep = validate(m, box, 2);
  for (const auto& c : rep.checks)
    if (c.name.find("dP_plus") != std::string::npos) {
      REQUIRE(c.pass);
      // worst slope over the box is theta_min/rho_max; FD matches analytic closely
      REQUIRE(c.worst == Catch::Approx(box.theta_min / box.rho_max).epsilon(1e-6));
    }

  m.P_plus = [](double rho, double theta) { return -rho * theta; };
  rep = validate(m, box, 2);
  REQUIRE_FALSE(rep.all_pass());
}

TEST_CASE("density separation margin") {
  MaterialSystem m = default_material();
  m.rho_star_minus = m.rho_star_plus + 1e-9;
  REQUIRE_FALSE(validate(m, SampleBox{}, 2).all_pass());
}

TEST_CASE("equilibrium residual arithmetic") {
  MaterialSystem m = default_material();
  m.rho_star_minus = 2.0;
  m.rho_star_plus = 1.0;
  m.P_plus = constant_closure(4.0);
  m.psi_minus = constant_closure(2.0);
  m.psi_plus = constant_closure(0.0);
  REQUIRE(equilibrium_residual(m) == Catch::Approx(2.0 + (0.5 - 1.0) * 4.0).margin(1e-15));

  m.psi_minus = constant_closure(1.0);
  REQUIRE(equilibrium_residual(m) == Catch::Approx(-1.0).margin(1e-15));

  // invariant under shifting both free energies by the same constant
  double r0 = equilibrium_residual(m);
  m.psi_minus = constant_closure(1.0 + 7.5);
  m.psi_plus = constant_closure(0.0 + 7.5);
  REQUIRE(equilibrium_residual(m) == Catch::Approx(r0).margin(1e-12));

  enforce_equilibrium(m);
  REQUIRE(equilibrium_residual(m) == Catch::Approx(0.0).margin(1e-15));
}

TEST_CASE("thermo consistency check") {
  MaterialSystem m = default_material();
  // psi = -theta ln theta, eta = ln theta + 1 => e = theta, de/dtheta = 1
  m.psi_minus = [](double, double theta) { return -theta * std::log(theta); };
  m.eta_minus = [](double, double theta) { return std::log(theta) + 1.0; };
  m.kappa_minus = constant_closure(1.0);
  m.psi_plus = m.psi_minus;
  m.eta_plus = m.eta_minus;
  m.kappa_plus = constant_closure(1.0);
  ConsistencyReport rep = thermo_consistency(m, SampleBox{});
  REQUIRE(rep.max_deviation_plus < 1e-8);
  REQUIRE(rep.max_deviation_minus < 1e-8);
  REQUIRE(rep.specific_heat_positive);

  // degenerate closure: constant psi, eta = 0 => e constant, kappa_FD = 0
  m.psi_plus = constant_closure(1.0);
  m.eta_plus = constant_closure(0.0);
  m.kappa_plus = constant_closure(2.0);
  rep = thermo_consistency(m, SampleBox{});
  REQUIRE_FALSE(rep.specific_heat_positive);
  REQUIRE(rep.max_deviation_plus == Catch::Approx(2.0).margin(1e-8));
}

TEST_CASE("stress evaluation") {
  // pressure only
  Mat D0(2);
  Mat T = stress(Side::upper, D0, 0.0, 3.0, 1.0, 1.0);
  REQUIRE(T(0, 0) == Catch::Approx(-3.0));
  REQUIRE(T(1, 1) == Catch::Approx(-3.0));
  REQUIRE(T(0, 1) == Catch::Approx(0.0));

  // plus side, full Newton law: 2 mu D + (lambda-mu) div I
  Mat I2 = Mat::identity(2);
  T = stress(Side::upper, I2, 2.0, 0.0, 1.0, 2.0);
  REQUIRE(T(0, 0) == Catch::Approx(4.0));
  REQUIRE(T(1, 1) == Catch::Approx(4.0));

  // minus side carries mu D - pi I
  Mat Doff(2);
  Doff(0, 1) = Doff(1, 0) = 1.0;
  T = stress(Side::lower, Doff, 0.0, 0.0, 1.0, 0.0);
  REQUIRE(T(0, 1) == Catch::Approx(1.0));
  REQUIRE(T(0, 0) == Catch::Approx(0.0));

  // linearized convention on the plus side: mu D + (lambda-mu) div I
  T = stress(Side::upper, I2, 2.0, 0.0, 1.0, 2.0, StressConvention::problem);
  REQUIRE(T(0, 0) == Catch::Approx(1.0 + 2.0));

  Mat asym(2);
  asym(0, 1) = 1.0;
  REQUIRE_THROWS_AS(stress(Side::upper, asym, 0, 0, 1, 1), SimError);

  // linearity in (D, div, pi)
  Mat Da(2), Db(2);
  Da(0, 0) = 0.3;
  Da(0, 1) = Da(1, 0) = -0.2;
  Db(1, 1) = 0.7;
  Mat Tsum = stress(Side::upper, Da + Db, 1.1 + 0.4, 0.2 + 0.9, 1.0, 2.0);
  Mat Ta = stress(Side::upper, Da, 1.1, 0.2, 1.0, 2.0);
  Mat Tb = stress(Side::upper, Db, 0.4, 0.9, 1.0, 2.0);
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j)
      REQUIRE(Tsum(i, j) == Catch::Approx(Ta(i, j) + Tb(i, j)).margin(1e-14));
}

TEST_CASE("entropy production sign") {
  MaterialSystem m = default_material();
  Mat D0(2);
  REQUIRE(entropy_production_density(Side::upper, m, D0, 0.0, 1.0, 1.0) == 0.0);

  Mat Dd(2);
  Dd(0, 0) = 1.0;
  Dd(1, 1) = -1.0;
  REQUIRE(entropy_production_density(Side::upper, m, Dd, 0.0, 1.0, 1.0) == Catch::Approx(4.0));

  // boundary case lambda = (N-2)/N mu = 0 at N=2: production exactly zero
  m.lambda_plus = constant_closure(0.0);
  Mat Di = Mat::identity(2);
  REQUIRE(entropy_production_density(Side::upper, m, Di, 2.0, 1.0, 1.0) ==
          Catch::Approx(0.0).margin(1e-14));
}

TEST_CASE("table closure via cubic spline") {
  std::vector<double> xs{0.5, 1.0, 1.5, 2.0, 2.5};
  std::vector<double> ys;
  for (double x : xs) ys.push_back(x * x);
  Table1D tab(xs, ys, true);
  Closure f = tab.closure();
  REQUIRE(f(0.0, 1.0) == Catch::Approx(1.0).margin(1e-12));   // knot
  REQUIRE(f(0.0, 1.25) == Catch::Approx(1.5625).margin(0.02));  // between knots
  REQUIRE_THROWS_AS(Table1D({1.0, 0.5}, {1.0, 0.25}, true), SimError);
}
