#pragma once

#include <functional>
#include <string>
#include <vector>

#include "bps/heat.hpp"
#include "bps/rhs.hpp"
#include "bps/stokes.hpp"
#include "bps/transport.hpp"

namespace bps {

struct DriverConfig {
  double tol_fp = 1e-10;    // relative fixed-point tolerance per step
  int max_iter = 50;        // Picard iterations per step
  double tol_compat = 1e-8; // initial-data compatibility gate
  double delta_rho = 0.1;   // positivity margin for the upper density
  double eps1 = 0.1;        // bound on the time integral of sup |grad v|
  double gate_min = 0.5;    // floor for 1 + H_N and the flow Jacobian
  int n_sub = 1;            // characteristic substeps per time step
  RhsOptions rhs;
};

struct SimState {
  Grid g;
  double t = 0.0;
  HatState fields;
  LineField h, dth;
  Field pi_lo;              // lower pressure of the last committed solve
  DoubleStrip rho0_tilde;   // extended initial density perturbation
  FlowMap flow;             // characteristics from t = 0 to the current time
  double grad_integral = 0.0;

  explicit SimState(const Grid& grid)
      : g(grid),
        fields(grid),
        h(grid),
        dth(grid),
        pi_lo(grid, Side::lower),
        rho0_tilde(grid),
        flow(identity_flow(grid)) {}
};

// Per-step record of the fixed-point iteration and the gate values.
struct StepReport {
  std::vector<double> change;  // composite successive-change norms
  std::vector<double> ratio;   // contraction ratios change[k]/change[k-1]
  int iterations = 0;
  bool converged = false;
  std::string failure;  // empty on success
  double gate = 1.0;
  double min_jacobian = 1.0;
  double grad_integral = 0.0;
  double max_condition = 0.0;
  double max_rel_residual = 0.0;
};

struct RunResult {
  int exit_code = 0;  // 0 horizon reached, 2 gate/contraction termination
  std::string reason;
  double t_end = 0.0;
  std::vector<StepReport> steps;
};

namespace detail {

// Characteristic velocity of the transformed mass equation:
// (u', u_N - K_0 - sum_j K_j u_j) with the divergence source, sampled over
// the joined strip by reflection continuation.
inline TwoLevelSampler make_mass_sampler(const Grid& g, double t0, double t1,
                                         const VecField& u0, const ExtendedHeight& eh0,
                                         const VecField& u1, const ExtendedHeight& eh1) {
  TwoLevelSampler s;
  s.g = g;
  s.t0 = t0;
  s.t1 = t1;
  auto build = [&](const VecField& u, const ExtendedHeight& eh, int level) {
    for (int i = 0; i < g.N - 1; ++i) {
      DoubleStrip ds(lions_extend(u[i]), u[i]);
      (level == 0 ? s.v0 : s.v1)[static_cast<size_t>(i)] = ds;
    }
    Field vn = u[g.N - 1];
    vn -= eh.K(Side::upper, 0);
    for (int jd = 0; jd < g.N; ++jd) {
      Field prod = u[jd] * eh.K(Side::upper, jd + 1);
      vn -= prod;
    }
    (level == 0 ? s.v0 : s.v1)[static_cast<size_t>(g.N - 1)] =
        DoubleStrip(lions_extend(vn), vn);
    DivTransforms dv = divergence_transforms(u, eh);
    Field src = divergence(u);
    src += dv.V_div;
    (level == 0 ? s.g0 : s.g1) = DoubleStrip(lions_extend(src), src);
  };
  build(u0, eh0, 0);
  build(u1, eh1, 1);
  return s;
}

inline double l2(const Field& f) { return norm(f, NormKind::Lq, 2.0); }

struct ChangeNorm {
  double diff = 0.0, scale = 0.0;
  void add(const Field& now, const Field& before) {
    Field d = now - before;
    diff = std::max(diff, l2(d));
    scale = std::max(scale, l2(now));
  }
  void add_line(const LineField& now, const LineField& before) {
    LineField d = now;
    d -= before;
    diff = std::max(diff, line_l2_norm(d));
    scale = std::max(scale, line_l2_norm(now));
  }
  double relative() const { return diff / std::max(scale, 1e-12); }
};

}  // namespace detail

// Kinematic right-hand side dt(h) = (rho- u-N| - rho+ u+N|)/(rho- - rho+) + G_h.
inline LineField kinematic_rate(const MaterialSystem& mat, const HatState& st,
                                const LineField& G_h) {
  const Grid& g = G_h.g;
  LineField um = interface_trace(st.u_lo[g.N - 1]), up = interface_trace(st.u_up[g.N - 1]);
  LineField out(g);
  const double drho = mat.rho_star_minus - mat.rho_star_plus;
  for (int t = 0; t < g.n_tan(); ++t)
    out.at(t) = (mat.rho_star_minus * um.at(t) - mat.rho_star_plus * up.at(t)) / drho + G_h.at(t);
  return out;
}

// One implicit time step solved by Picard iteration over the two linear
// interface problems. On failure the state is left untouched.
inline StepReport advance(SimState& state, const MaterialSystem& mat,
                          const StokesSolver& stokes, const HeatSolver& heat, double dt,
                          const DriverConfig& cfg = {}) {
  const Grid& g = state.g;
  StepReport rep;

  const HatState& prev = state.fields;
  ExtendedHeight eh0 = extend_height(g, state.h, &state.dth);

  HatState cur = prev;
  LineField h_cur = state.h, dth_cur = state.dth;
  FlowMap flow_new = state.flow;
  Field pi_new = state.pi_lo;
  double grad_new = state.grad_integral;
  int stall = 0;

  try {
    for (int iter = 1; iter <= cfg.max_iter; ++iter) {
      ExtendedHeight eh = extend_height(g, h_cur, &dth_cur);
      rep.gate = std::min(eh0.gate, eh.gate);
      if (rep.gate < cfg.gate_min) {
        rep.failure = "interface gate: 1 + H_N fell below " + std::to_string(cfg.gate_min);
        return rep;
      }

      // density along characteristics up to t + dt at the current velocity
      TwoLevelSampler sampler = detail::make_mass_sampler(g, state.t, state.t + dt, prev.u_up,
                                                          eh0, cur.u_up, eh);
      FlowMap step = advect_flow(sampler, cfg.n_sub);
      flow_new = compose_flow(state.flow, step);
      cur.rho_up = density_update(mat.rho_star_plus, state.rho0_tilde, flow_new);
      double rho_min = cur.rho_up.a[0];
      for (double v : cur.rho_up.a) rho_min = std::min(rho_min, v);
      if (rho_min < cfg.delta_rho) {
        rep.failure = "density gate: upper density fell below the margin";
        return rep;
      }
      grad_new = state.grad_integral + dt * sampler.grad_sup();
      if (grad_new > cfg.eps1) {
        rep.failure = "velocity-gradient gate: accumulated sup|grad v| budget exceeded";
        return rep;
      }
      rep.min_jacobian = flow_new.min_forward_jacobian();
      if (rep.min_jacobian < cfg.gate_min) {
        rep.failure = "flow gate: forward Jacobian determinant fell below the floor";
        return rep;
      }

      // backward time-difference quotients against the committed level
      HatTimeDerivs dts(g);
      for (int i = 0; i < g.N; ++i) {
        dts.dtu_up[i] = cur.u_up[i] - prev.u_up[i];
        dts.dtu_up[i] *= 1.0 / dt;
        dts.dtu_lo[i] = cur.u_lo[i] - prev.u_lo[i];
        dts.dtu_lo[i] *= 1.0 / dt;
      }
      dts.dtth_up = cur.theta_up - prev.theta_up;
      dts.dtth_up *= 1.0 / dt;
      dts.dtth_lo = cur.theta_lo - prev.theta_lo;
      dts.dtth_lo *= 1.0 / dt;

      RhsBundle bundle = assemble_rhs(mat, eh, cur, dts, cfg.rhs);

      HeatData hd(g);
      hd.f_up = bundle.Ftheta_up;
      hd.f_lo = bundle.Ftheta_lo;
      hd.g_flux = bundle.G_theta;
      hd.theta_up_outer = LineField(g, mat.theta_star);
      hd.theta_lo_outer = LineField(g, mat.theta_star);
      apply_time_level(hd, mat, prev.theta_up, prev.theta_lo, dt);
      HeatSolution hs = heat.solve(hd);

      StokesData sd(g);
      sd.f_up = bundle.F_up;
      sd.f_lo = bundle.F_lo;
      sd.f_div = bundle.f_div;
      sd.g_tan = bundle.G_tan;
      sd.slip = bundle.K_slip;
      TractionSplit split = traction_split(mat, bundle.G_N, bundle.G_N1);
      sd.T_plus = split.T_plus;
      sd.T_minus = split.T_minus;
      sd.d_kin = bundle.G_h;
      apply_time_level(sd, mat, prev.u_up, prev.u_lo, state.h, dt);
      StokesSolution ss = stokes.solve(sd);

      rep.max_condition = std::max({rep.max_condition, hs.max_condition, ss.max_condition});
      rep.max_rel_residual =
          std::max({rep.max_rel_residual, hs.max_rel_residual, ss.max_rel_residual});

      detail::ChangeNorm cn;
      for (int i = 0; i < g.N; ++i) {
        cn.add(ss.u_up[i], cur.u_up[i]);
        cn.add(ss.u_lo[i], cur.u_lo[i]);
      }
      cn.add(hs.theta_up, cur.theta_up);
      cn.add(hs.theta_lo, cur.theta_lo);
      cn.add_line(ss.h, h_cur);
      cn.scale = std::max(cn.scale, detail::l2(cur.rho_up));

      cur.u_up = ss.u_up;
      cur.u_lo = ss.u_lo;
      cur.theta_up = hs.theta_up;
      cur.theta_lo = hs.theta_lo;
      h_cur = ss.h;
      pi_new = ss.pi_lo;
      dth_cur = kinematic_rate(mat, cur, bundle.G_h);

      const double change = cn.relative();
      rep.change.push_back(change);
      rep.iterations = iter;
      if (iter >= 2) {
        const double prev_change = rep.change[static_cast<size_t>(iter - 2)];
        const double r = (prev_change > 0) ? change / prev_change
                                           : (change > 0 ? std::numeric_limits<double>::infinity()
                                                         : 0.0);
        rep.ratio.push_back(r);
        stall = (r >= 1.0) ? stall + 1 : 0;
        if (stall >= 3) {
          rep.failure = "non-contraction: successive-change ratio >= 1 three times";
          return rep;
        }
      }
      if (change < cfg.tol_fp) {
        rep.converged = true;
        break;
      }
    }
  } catch (const SimError& e) {
    rep.failure = e.what();
    return rep;
  }
  if (!rep.converged) {
    rep.failure = "fixed point did not converge within the iteration budget";
    return rep;
  }

  state.fields = cur;
  state.h = h_cur;
  state.dth = dth_cur;
  state.pi_lo = pi_new;
  state.flow = flow_new;
  state.grad_integral = grad_new;
  rep.grad_integral = grad_new;
  state.t += dt;
  return rep;
}

// Interface bump with velocity profiles chosen so every discrete
// compatibility line vanishes: h0 = eps cos(2 pi x1 / L); the lower phase is
// at rest; the upper velocity is (c(x1), b(x1)) x_N exp(-(x_N/l)^2) with the
// amplitude lines solved pointwise against the discrete residual evaluators.
inline void make_compatible_bump(SimState& state, const MaterialSystem& mat, double eps,
                                 const RhsOptions& opts = {}) {
  const Grid& g = state.g;
  if (g.N != 2) throw SimError("compatible bump: two-dimensional grids only");
  LineField h0(g);
  h0.fill_from([&](const Vec& x) { return eps * std::cos(2.0 * M_PI * x[0] / g.L_tan); });
  ExtendedHeight eh = extend_height(g, h0);

  const double ell = g.L_nrm / 5.0;
  auto profile = [&](double y) { return y * std::exp(-(y / ell) * (y / ell)); };

  auto residuals = [&](const LineField& b, const LineField& c, LineField& r_tan,
                       LineField& r_nrm) {
    HatState st(g);
    st.rho_up = Field(g, Side::upper, mat.rho_star_plus);
    st.theta_up = Field(g, Side::upper, mat.theta_star);
    st.theta_lo = Field(g, Side::lower, mat.theta_star);
    for (int t = 0; t < g.n_tan(); ++t)
      for (int m = 0; m < g.nn(); ++m) {
        const double p = profile(g.x_nrm(Side::upper, m));
        st.u_up[0].at(t, m) = c.at(t) * p;
        st.u_up[1].at(t, m) = b.at(t) * p;
      }
    RhsBundle bd(g);
    assemble_interface_rhs(mat, eh, st, bd, opts);
    TensorField D_up = strain(st.u_up);
    LineField d1n = interface_trace(D_up.at(0, 1));
    for (int t = 0; t < g.n_tan(); ++t)
      r_tan.at(t) = -mat.mu_star(Side::upper) * d1n.at(t) - bd.G_tan[0].at(t);
    LineField dnn = interface_trace(D_up.at(1, 1));
    LineField divu = interface_trace(divergence(st.u_up));
    LineField lap_h = line_laplace_tan(h0);
    LineField tp = traction_split(mat, bd.G_N, bd.G_N1).T_plus;
    for (int t = 0; t < g.n_tan(); ++t)
      r_nrm.at(t) = mat.mu_star(Side::upper) * dnn.at(t) +
                    (mat.lambda_star_plus() - mat.mu_star(Side::upper)) * divu.at(t) -
                    mat.sigma_side(Side::upper) * lap_h.at(t) - tp.at(t);
  };

  // the residuals are affine and pointwise in the amplitude lines; probe the
  // coefficients, solve the 2x2 systems, and polish with re-evaluation
  LineField b(g), c(g);
  LineField rt0(g), rn0(g), rtb(g), rnb(g), rtc(g), rnc(g);
  residuals(LineField(g, 0.0), LineField(g, 0.0), rt0, rn0);
  residuals(LineField(g, 1.0), LineField(g, 0.0), rtb, rnb);
  residuals(LineField(g, 0.0), LineField(g, 1.0), rtc, rnc);
  for (int pass = 0; pass < 5; ++pass) {
    LineField rt(g), rn(g);
    residuals(b, c, rt, rn);
    double worst = std::max(rt.max_abs(), rn.max_abs());
    if (worst < 1e-13) break;
    for (int t = 0; t < g.n_tan(); ++t) {
      const double a11 = rtb.at(t) - rt0.at(t), a12 = rtc.at(t) - rt0.at(t);
      const double a21 = rnb.at(t) - rn0.at(t), a22 = rnc.at(t) - rn0.at(t);
      const double det = a11 * a22 - a12 * a21;
      if (std::abs(det) < 1e-14) throw SimError("compatible bump: singular amplitude system");
      b.at(t) -= (a22 * rt.at(t) - a12 * rn.at(t)) / det;
      c.at(t) -= (-a21 * rt.at(t) + a11 * rn.at(t)) / det;
    }
  }

  state.t = 0.0;
  state.fields = HatState(g);
  state.fields.rho_up = Field(g, Side::upper, mat.rho_star_plus);
  state.fields.theta_up = Field(g, Side::upper, mat.theta_star);
  state.fields.theta_lo = Field(g, Side::lower, mat.theta_star);
  for (int t = 0; t < g.n_tan(); ++t)
    for (int m = 0; m < g.nn(); ++m) {
      const double p = profile(g.x_nrm(Side::upper, m));
      state.fields.u_up[0].at(t, m) = c.at(t) * p;
      state.fields.u_up[1].at(t, m) = b.at(t) * p;
    }
  state.h = h0;
  state.pi_lo = Field(g, Side::lower);
  state.rho0_tilde = DoubleStrip(g);  // zero initial density perturbation
  state.flow = identity_flow(g);
  state.grad_integral = 0.0;

  RhsBundle bd(g);
  assemble_interface_rhs(mat, extend_height(g, h0), state.fields, bd, opts);
  state.dth = kinematic_rate(mat, state.fields, bd.G_h);
}

// Build the initial state and enforce the compatibility gate.
inline SimState initialize(const Grid& g, const MaterialSystem& mat, double eps,
                           const DriverConfig& cfg = {}) {
  SimState state(g);
  make_compatible_bump(state, mat, eps, cfg.rhs);
  ExtendedHeight eh = extend_height(g, state.h, &state.dth);
  if (eh.gate < cfg.gate_min) throw SimError("initialize: interface gate violated");
  auto res = compatibility_residual(mat, eh, state.fields, cfg.rhs);
  for (const auto& r : res)
    if (r.sup > cfg.tol_compat)
      throw SimError("initialize: compatibility condition '" + r.name + "' violated (" +
                     std::to_string(r.sup) + ")");
  return state;
}

// March to the horizon, stopping cleanly at the first gate or contraction
// failure. The observer (if any) sees each committed state.
inline RunResult simulate(SimState& state, const MaterialSystem& mat, double dt, double T_final,
                          const DriverConfig& cfg = {},
                          const std::function<void(const SimState&, const StepReport&)>& observer =
                              nullptr) {
  RunResult out;
  StokesSolver stokes(state.g, mat, cdouble(1.0 / dt, 0.0));
  HeatSolver heat(state.g, mat, cdouble(1.0 / dt, 0.0));
  const int n_steps = static_cast<int>(std::llround(T_final / dt));
  for (int k = 0; k < n_steps; ++k) {
    StepReport rep = advance(state, mat, stokes, heat, dt, cfg);
    out.steps.push_back(rep);
    if (!rep.failure.empty()) {
      out.exit_code = 2;
      out.reason = rep.failure;
      break;
    }
    if (observer) observer(state, rep);
  }
  out.t_end = state.t;
  return out;
}

}  // namespace bps
