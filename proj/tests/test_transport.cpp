#include <catch2/catch_amalgamated.hpp>

#include "bps/transport.hpp"

using namespace bps;

namespace {

Grid tr_grid(int mt = 32, int mn = 32, double L = 2.0) {
  Grid g;
  g.N = 2;
  g.L_tan = 2.0;
  g.M_tan = mt;
  g.L_nrm = L;
  g.M_nrm = mn;
  return g;
}

TwoLevelSampler make_sampler(const Grid& g, double t0, double t1,
                             const std::function<double(const Vec&)>& v1c,
                             const std::function<double(const Vec&)>& v2c,
                             const std::function<double(const Vec&)>& srcc = nullptr) {
  TwoLevelSampler f;
  f.g = g;
  f.t0 = t0;
  f.t1 = t1;
  Field lo1(g, Side::lower), up1(g, Side::upper), lo2(g, Side::lower), up2(g, Side::upper);
  lo1.fill_from(v1c);
  up1.fill_from(v1c);
  lo2.fill_from(v2c);
  up2.fill_from(v2c);
  f.v0[0] = f.v1[0] = DoubleStrip(lo1, up1);
  f.v0[1] = f.v1[1] = DoubleStrip(lo2, up2);
  Field slo(g, Side::lower), sup(g, Side::upper);
  if (srcc) {
    slo.fill_from(srcc);
    sup.fill_from(srcc);
  }
  f.g0 = f.g1 = DoubleStrip(slo, sup);
  return f;
}

}  // namespace

TEST_CASE("Lions extension basics") {
  Grid g = tr_grid();
  Field one(g, Side::upper, 1.0);
  Field e1 = lions_extend(one);
  REQUIRE(e1.side == Side::lower);
  for (double v : e1.a) REQUIRE(v == Catch::Approx(1.0).margin(1e-14));

  Field lin(g, Side::upper);
  lin.fill_from([](const Vec& x) { return x[1]; });
  Field el = lions_extend(lin);
  for (int t = 0; t < g.n_tan(); ++t)
    for (int m = 0; m <= g.M_nrm / 2; ++m)
      REQUIRE(el.at(t, m) == Catch::Approx(-m * g.dx()).margin(1e-14));

  Field sq(g, Side::upper);
  sq.fill_from([](const Vec& x) { return x[1] * x[1]; });
  Field es = lions_extend(sq);
  const int m1 = static_cast<int>(std::lround(1.0 / g.dx()));  // node at x_N = -1
  REQUIRE(es.at(3, m1) == Catch::Approx(3.0 * 1.0 - 2.0 * 4.0).margin(1e-12));
}

TEST_CASE("Lions extension is C1 across the interface") {
  double err_coarse = 0, err_fine = 0;
  for (int level = 0; level < 2; ++level) {
    Grid g = tr_grid(32, 32 << level);
    Field f(g, Side::upper);
    f.fill_from([&](const Vec& x) {
      return std::exp(-x[1]) * std::cos(2 * M_PI * x[0] / g.L_tan);
    });
    Field ext = lions_extend(f);
    Field dup = deriv_nrm(f), dlo = deriv_nrm(ext);
    LineField tu = interface_trace(f), tl = interface_trace(ext);
    LineField du = interface_trace(dup), dl = interface_trace(dlo);
    double e = 0;
    for (int t = 0; t < g.n_tan(); ++t) {
      REQUIRE(tl.at(t) == Catch::Approx(tu.at(t)).margin(1e-13));  // C0 exact
      e = std::max(e, std::abs(dl.at(t) - du.at(t)));
    }
    (level ? err_fine : err_coarse) = e;
  }
  REQUIRE(err_fine < err_coarse / 3.0);  // one-sided slopes converge at 2nd order
}

TEST_CASE("double strip sampling") {
  Grid g = tr_grid();
  Field lo(g, Side::lower), up(g, Side::upper);
  auto quad = [&](const Vec& x) {
    return 1.0 + 0.5 * x[1] + 0.25 * x[1] * x[1] + std::cos(2 * M_PI * x[0] / g.L_tan);
  };
  lo.fill_from(quad);
  up.fill_from(quad);
  DoubleStrip ds(lo, up);

  // node values reproduced exactly
  for (int t = 0; t < g.n_tan(); t += 5)
    for (int s = 0; s < ds.nslots(); s += 7) {
      Vec x = g.tan_coord(t);
      x[1] = (s - g.M_nrm) * g.dx();
      REQUIRE(ds.sample(x) == Catch::Approx(ds.at(t, s)).margin(1e-13));
    }

  // off-node: cubic interpolation of a smooth field, small error
  Vec x(0.73, 0.31);
  REQUIRE(ds.sample(x) == Catch::Approx(quad(x)).margin(1e-4));
  // quadratic in x_N at a half-node along a fixed tangential node line
  Vec xh(g.tan_coord(4)[0], 0.5 * g.dx());
  REQUIRE(ds.sample(xh) == Catch::Approx(quad(xh)).margin(1e-12));

  // periodic wrap: sampling slightly left of 0 uses the right edge smoothly
  Vec xa(-0.01, 0.2), xb(g.L_tan - 0.01, 0.2);
  REQUIRE(ds.sample(xa) == Catch::Approx(ds.sample(xb)).margin(1e-12));

  // clamped beyond the normal ends: constant continuation
  Vec deep(0.5, -g.L_nrm - 3.0);
  Vec edge(0.5, -g.L_nrm);
  REQUIRE(ds.sample(deep) == Catch::Approx(ds.sample(edge)).margin(1e-12));
}

TEST_CASE("constant velocity advects exactly") {
  Grid g = tr_grid();
  auto f = make_sampler(
      g, 0.0, 0.25, [](const Vec&) { return 0.4; }, [](const Vec&) { return -0.3; });
  FlowMap fm = advect_flow(f, 4);
  for (int t = 0; t < g.n_tan(); t += 3)
    for (int s = 0; s < fm.A.nslots(); s += 5) {
      Vec x = fm.node_pos(t, s);
      Vec fw = fm.forward(x);
      REQUIRE(fw[0] - x[0] == Catch::Approx(0.4 * 0.25).margin(1e-12));
      REQUIRE(fw[1] - x[1] == Catch::Approx(-0.3 * 0.25).margin(1e-12));
      Vec bw = fm.backward(x);
      REQUIRE(bw[0] - x[0] == Catch::Approx(-0.4 * 0.25).margin(1e-12));
    }
  REQUIRE(fm.min_forward_jacobian() == Catch::Approx(1.0).margin(1e-10));
}

TEST_CASE("rigid rotation conserves radius") {
  Grid g = tr_grid(64, 64);
  const double c1 = g.L_tan / 2, om = 1.0, T = 0.1;
  auto f = make_sampler(
      g, 0.0, T, [&](const Vec& x) { return om * x[1]; },
      [&](const Vec& x) { return -om * (x[0] - c1); });
  FlowMap fm = advect_flow(f, 100);
  // probe interior nodes within radius 0.5 of the rotation center
  for (int t = 0; t < g.n_tan(); ++t)
    for (int s = 0; s < fm.A.nslots(); s += 3) {
      Vec x = fm.node_pos(t, s);
      double r0 = std::hypot(x[0] - c1, x[1]);
      if (r0 > 0.5) continue;
      Vec y = fm.forward(x);
      double r1 = std::hypot(y[0] - c1, y[1]);
      REQUIRE(r1 == Catch::Approx(r0).margin(1e-10 * T / 1.0 + 1e-11));
    }
}

TEST_CASE("characteristic integrator is 4th order in dt") {
  Grid g = tr_grid(8, 48, 1.0);
  // v = (0, x_N): exact flow x_N(t) = x_N e^t; velocity linear in x_N so the
  // cubic interpolation is exact and the error is pure time discretization
  auto f = make_sampler(
      g, 0.0, 0.5, [](const Vec&) { return 0.0; }, [](const Vec& x) { return x[1]; });
  const Vec start(0.5, 0.25);
  std::array<double, 3> err{};
  for (int lev = 0; lev < 3; ++lev) {
    FlowMap fm = advect_flow(f, 2 << lev);
    Vec y = fm.forward(start);
    err[static_cast<size_t>(lev)] = std::abs(y[1] - 0.25 * std::exp(0.5));
  }
  REQUIRE(err[0] / err[1] > 10.0);
  REQUIRE(err[0] / err[1] < 22.0);
  REQUIRE(err[1] / err[2] > 10.0);
  REQUIRE(err[1] / err[2] < 22.0);
}

TEST_CASE("flow map round trip and composition") {
  Grid g = tr_grid(32, 32);
  auto vel1 = [&](const Vec& x) { return 0.1 * std::sin(2 * M_PI * x[0] / g.L_tan); };
  auto vel2 = [&](const Vec& x) { return 0.1 * std::cos(2 * M_PI * x[0] / g.L_tan) * x[1]; };
  auto f01 = make_sampler(g, 0.0, 0.1, vel1, vel2);
  auto f12 = make_sampler(g, 0.1, 0.2, vel1, vel2);
  auto f02 = make_sampler(g, 0.0, 0.2, vel1, vel2);

  FlowMap a = advect_flow(f01, 4), b = advect_flow(f12, 4);
  FlowMap ab = compose_flow(a, b);
  FlowMap direct = advect_flow(f02, 8);

  for (int t = 0; t < g.n_tan(); t += 5)
    for (int s = 4; s < ab.A.nslots() - 4; s += 6) {
      Vec x = ab.node_pos(t, s);
      Vec e1 = ab.backward(x), e2 = direct.backward(x);
      REQUIRE(e1[0] == Catch::Approx(e2[0]).margin(1e-6));
      REQUIRE(e1[1] == Catch::Approx(e2[1]).margin(1e-6));
      Vec rt = direct.backward(direct.forward(x));
      REQUIRE(rt[0] == Catch::Approx(x[0]).margin(1e-6));
      REQUIRE(rt[1] == Catch::Approx(x[1]).margin(1e-6));
    }
}

TEST_CASE("density update") {
  Grid g = tr_grid();
  const double rho_star = 1.0;

  // zero flow freezes the initial data
  Field rho0(g, Side::upper);
  rho0.fill_from([&](const Vec& x) {
    return 0.1 * std::exp(-x[1]) * std::cos(2 * M_PI * x[0] / g.L_tan);
  });
  DoubleStrip tilde(lions_extend(rho0), rho0);
  FlowMap still = identity_flow(g);
  Field rho = density_update(rho_star, tilde, still);
  for (int t = 0; t < g.n_tan(); ++t)
    for (int m = 0; m < g.nn(); ++m)
      REQUIRE(rho.at(t, m) == Catch::Approx(rho_star + rho0.at(t, m)).margin(1e-12));

  // constant divergence source, zero velocity: uniform exponential decay
  const double c = 0.7, T = 0.3;
  auto f = make_sampler(
      g, 0.0, T, [](const Vec&) { return 0.0; }, [](const Vec&) { return 0.0; },
      [&](const Vec&) { return c; });
  FlowMap fm = advect_flow(f, 8);
  Field rho2 = density_update(rho_star, tilde, fm);
  for (int t = 0; t < g.n_tan(); t += 4)
    for (int m = 0; m < g.nn(); m += 4)
      REQUIRE(rho2.at(t, m) ==
              Catch::Approx((rho_star + rho0.at(t, m)) * std::exp(-c * T)).margin(1e-10));

  // nonpositive density rejected
  Field bad(g, Side::upper, -2.0);
  DoubleStrip tilde_bad(lions_extend(bad), bad);
  REQUIRE_THROWS_AS(density_update(rho_star, tilde_bad, still), SimError);
}

TEST_CASE("smallness gate quantities") {
  Grid g = tr_grid();
  auto f = make_sampler(
      g, 0.0, 0.1, [&](const Vec& x) { return 0.05 * std::sin(2 * M_PI * x[0] / g.L_tan); },
      [](const Vec&) { return 0.0; });
  const double gs = f.grad_sup();
  REQUIRE(gs > 0.01);
  REQUIRE(gs < 0.2);
  REQUIRE(gs * 0.1 <= 0.1);  // integral of grad over the window under eps_1
}
