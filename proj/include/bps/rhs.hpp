#pragma once

#include <string>
#include <vector>

#include "bps/constitutive.hpp"
#include "bps/height.hpp"
#include "bps/stokes.hpp"

namespace bps {

// Iterate fields in flattened coordinates (hat variables): total density on
// the compressible upper strip, velocities and temperatures on both strips.
struct HatState {
  VecField u_up, u_lo;
  Field rho_up;
  Field theta_up, theta_lo;

  explicit HatState(const Grid& g)
      : u_up(g, Side::upper),
        u_lo(g, Side::lower),
        rho_up(g, Side::upper),
        theta_up(g, Side::upper),
        theta_lo(g, Side::lower) {}
};

// Time-difference quotients of the iterate fields (backward differences
// against the previous committed time level).
struct HatTimeDerivs {
  VecField dtu_up, dtu_lo;
  Field dtth_up, dtth_lo;

  explicit HatTimeDerivs(const Grid& g)
      : dtu_up(g, Side::upper),
        dtu_lo(g, Side::lower),
        dtth_up(g, Side::upper),
        dtth_lo(g, Side::lower) {}
};

struct RhsOptions {
  // reading of the density in the phase-flux denominator
  enum class JDenominator { total_density, shifted_perturbation };
  // compressible heating term: P(1 - 1/rho)(div u) or -(P/rho)(div u)
  enum class HeatSource { transformed, model_form };
  // interface curvature block: literal display or the graph-curvature form
  enum class CurvatureBlock { printed, derived };
  // normal free-energy interface row G_{N+1}: the literal display truncates
  // the geometric corrections at second order, so the enforced row drifts
  // from the free-energy jump balance by O(|data|^2); the derived form moves
  // the exact balance onto the star-coefficient flat row
  enum class GibbsRow { printed, derived };

  JDenominator j_denom = JDenominator::total_density;
  HeatSource heat_source = HeatSource::transformed;
  CurvatureBlock curvature = CurvatureBlock::printed;
  GibbsRow gibbs_row = GibbsRow::derived;
  double delta_j = 1e-6;  // division margin for 1/rho_- - 1/rho_+ at the interface
};

// Every transformed right-hand side of the coupled interface problem.
struct RhsBundle {
  VecField F_up, F_lo;
  Field Ftheta_up, Ftheta_lo;
  Field f_div;      // scalar form of the lower divergence data
  VecField ff_div;  // vector form; f_div = div ff_div to discretization order
  double div_form_disagreement = 0.0;

  std::array<LineField, kMaxDim - 1> G_tan, K_slip;
  LineField G_N, G_N1, G_theta, G_h, j;

  explicit RhsBundle(const Grid& g)
      : F_up(g, Side::upper),
        F_lo(g, Side::lower),
        Ftheta_up(g, Side::upper),
        Ftheta_lo(g, Side::lower),
        f_div(g, Side::lower),
        ff_div(g, Side::lower),
        G_N(g),
        G_N1(g),
        G_theta(g),
        G_h(g),
        j(g) {
    for (int i = 0; i < g.N - 1; ++i) {
      G_tan[static_cast<size_t>(i)] = LineField(g);
      K_slip[static_cast<size_t>(i)] = LineField(g);
    }
  }
};

namespace detail {

inline Field closure_field(const Closure& c, const Field& rho, const Field& th) {
  Field out(rho.g, rho.side);
  for (size_t i = 0; i < out.a.size(); ++i) out.a[i] = c(rho.a[i], th.a[i]);
  return out;
}

// u . grad f with hat derivatives
inline Field advect(const VecField& u, const Field& f) {
  const Grid& g = f.g;
  Field out(g, f.side);
  for (int jd = 0; jd < g.N; ++jd) {
    Field df = deriv(f, jd);
    for (size_t i = 0; i < out.a.size(); ++i) out.a[i] += u[jd].a[i] * df.a[i];
  }
  return out;
}

// convective correction rho_hat { K_0 d_N f - u.grad f + (u.K) d_N f }
inline Field convective_block(const Field& coef, const VecField& u, const Field& f,
                              const ExtendedHeight& eh) {
  const Grid& g = f.g;
  const Side s = f.side;
  Field dn = deriv_nrm(f);
  Field adv = advect(u, f);
  Field out(g, s);
  const Field& K0 = eh.K(s, 0);
  for (size_t i = 0; i < out.a.size(); ++i) {
    double uK = 0;
    for (int jd = 0; jd < g.N; ++jd) uK += u[jd].a[i] * eh.K(s, jd + 1).a[i];
    out.a[i] = coef.a[i] * (K0.a[i] * dn.a[i] - adv.a[i] + uK * dn.a[i]);
  }
  return out;
}

// heat-conduction corrections shared by both strips:
// -d_star sum_j d_j(K_j d_N th) + sum_j d_j(d_tilde P_j th)
//  - sum_j K_j d_N(d_hat P_j th),   P_j th = d_j th - K_j d_N th
inline Field heat_conduction_correction(double d_star, const Field& d_tilde, const Field& d_hat,
                                        const Field& th, const ExtendedHeight& eh) {
  const Grid& g = th.g;
  const Side s = th.side;
  Field out(g, s);
  Field dn = deriv_nrm(th);
  for (int jd = 0; jd < g.N; ++jd) {
    const Field& Kj = eh.K(s, jd + 1);
    Field w(g, s), pj(g, s);
    Field dj = deriv(th, jd);
    for (size_t i = 0; i < w.a.size(); ++i) {
      w.a[i] = Kj.a[i] * dn.a[i];
      pj.a[i] = dj.a[i] - Kj.a[i] * dn.a[i];
    }
    Field t1 = deriv(w, jd);
    Field arg2 = d_tilde * pj;
    Field t2 = deriv(arg2, jd);
    Field arg3 = d_hat * pj;
    Field t3 = deriv_nrm(arg3);
    for (size_t i = 0; i < out.a.size(); ++i)
      out.a[i] += -d_star * t1.a[i] + t2.a[i] - Kj.a[i] * t3.a[i];
  }
  return out;
}

inline Field frobenius2_field(const TensorField& A) {
  Field out(A.g, A.side);
  for (int i = 0; i < A.g.N; ++i)
    for (int jd = 0; jd < A.g.N; ++jd) {
      const Field& c = A.at(i, jd);
      for (size_t n = 0; n < out.a.size(); ++n) out.a[n] += c.a[n] * c.a[n];
    }
  return out;
}

}  // namespace detail

// Body right-hand sides of the transformed momentum/heat equations and the
// two forms of the lower divergence data.
inline void assemble_body_rhs(const MaterialSystem& mat, const ExtendedHeight& eh,
                              const HatState& st, const HatTimeDerivs& dts, RhsBundle& out,
                              const RhsOptions& opts = {}) {
  const Grid& g = eh.g;
  const int N = g.N;

  // ---------------- upper (compressible) strip ----------------
  {
    const Side s = Side::upper;
    const Field& rho = st.rho_up;
    const Field& th = st.theta_up;
    Field mu_hat = detail::closure_field(mat.mu_plus, rho, th);
    Field lam_hat = detail::closure_field(mat.lambda_plus, rho, th);
    Field kap_hat = detail::closure_field(mat.kappa_plus, rho, th);
    Field d_hat = detail::closure_field(mat.d_plus, rho, th);
    Field P = detail::closure_field(mat.P_plus, rho, th);
    const double mu_s = mat.mu_star(s), lam_s = mat.lambda_star_plus();
    const double kap_s = mat.kappa_star(s), d_s = mat.d_star(s);
    Field mu_tilde = mu_hat, lam_tilde = lam_hat, d_tilde = d_hat;
    for (auto& v : mu_tilde.a) v -= mu_s;
    for (auto& v : lam_tilde.a) v -= lam_s;
    for (auto& v : d_tilde.a) v -= d_s;

    TensorField D = strain(st.u_up);
    TensorField VD = strain_correction(st.u_up, eh);
    DivTransforms dv = divergence_transforms(st.u_up, eh);
    Field divu = divergence(st.u_up);

    // momentum: -rho_tilde dt u + rho_hat {K0 dN u - u.grad u + (u.K) dN u}
    for (int i = 0; i < N; ++i) {
      Field rho_tilde = rho;
      for (auto& v : rho_tilde.a) v -= mat.rho_star_plus;
      Field conv = detail::convective_block(rho, st.u_up, st.u_up[i], eh);
      for (size_t n = 0; n < out.F_up[i].a.size(); ++n)
        out.F_up[i].a[n] = -rho_tilde.a[n] * dts.dtu_up[i].a[n] + conv.a[n];
    }
    // + Div(mu_tilde D + mu_hat V_D) + V_Div(mu_hat (D + V_D))
    TensorField G1(g, s), G2(g, s);
    for (int i = 0; i < N; ++i)
      for (int jd = 0; jd < N; ++jd)
        for (size_t n = 0; n < G1.at(i, jd).a.size(); ++n) {
          G1.at(i, jd).a[n] =
              mu_tilde.a[n] * D.at(i, jd).a[n] + mu_hat.a[n] * VD.at(i, jd).a[n];
          G2.at(i, jd).a[n] = mu_hat.a[n] * (D.at(i, jd).a[n] + VD.at(i, jd).a[n]);
        }
    VecField t_div = div_tensor(G1);
    VecField t_vdiv = vdiv_tensor(G2, eh);
    // + grad{(lam_tilde - mu_tilde) div u + (lam_hat - mu_hat) V_div}
    Field scal1(g, s), scal2(g, s);
    for (size_t n = 0; n < scal1.a.size(); ++n) {
      scal1.a[n] = (lam_tilde.a[n] - mu_tilde.a[n]) * divu.a[n] +
                   (lam_hat.a[n] - mu_hat.a[n]) * dv.V_div.a[n];
      scal2.a[n] = (lam_hat.a[n] - mu_hat.a[n]) * (divu.a[n] + dv.V_div.a[n]);
    }
    for (int i = 0; i < N; ++i) {
      Field gi = deriv(scal1, i);
      // + V_Div(scal2 I): row i picks -K_i d_N scal2
      Field dn2 = deriv_nrm(scal2);
      const Field& Ki = eh.K(s, i + 1);
      // - (Q grad P)_i: the pulled-back gradient of the pressure
      Field qp = pullback_deriv(P, eh, i);
      for (size_t n = 0; n < out.F_up[i].a.size(); ++n)
        out.F_up[i].a[n] += t_div[i].a[n] + t_vdiv[i].a[n] + gi.a[n] -
                            Ki.a[n] * dn2.a[n] - qp.a[n];
    }

    // heat equation
    Field cond = detail::heat_conduction_correction(d_s, d_tilde, d_hat, th, eh);
    Field rk(g, s);
    for (size_t n = 0; n < rk.a.size(); ++n) rk.a[n] = rho.a[n] * kap_hat.a[n];
    Field conv_th = detail::convective_block(rk, st.u_up, th, eh);
    TensorField DpV(g, s);
    for (int i = 0; i < N; ++i)
      for (int jd = 0; jd < N; ++jd)
        for (size_t n = 0; n < DpV.at(i, jd).a.size(); ++n)
          DpV.at(i, jd).a[n] = D.at(i, jd).a[n] + VD.at(i, jd).a[n];
    Field dsq = detail::frobenius2_field(DpV);
    for (size_t n = 0; n < out.Ftheta_up.a.size(); ++n) {
      const double divv = divu.a[n] + dv.V_div.a[n];
      double heat_src = (opts.heat_source == RhsOptions::HeatSource::transformed)
                            ? P.a[n] * (1.0 - 1.0 / rho.a[n]) * divv
                            : -(P.a[n] / rho.a[n]) * divv;
      out.Ftheta_up.a[n] = cond.a[n] -
                           (rk.a[n] - mat.rho_star_plus * kap_s) * dts.dtth_up.a[n] +
                           conv_th.a[n] + 2.0 * mu_hat.a[n] * dsq.a[n] +
                           (lam_hat.a[n] - mu_hat.a[n]) * divv * divv + heat_src;
    }
  }

  // ---------------- lower (incompressible) strip ----------------
  {
    const Side s = Side::lower;
    Field rho_dummy(g, s, mat.rho_star_minus);
    const Field& th = st.theta_lo;
    Field mu_hat = detail::closure_field(mat.mu_minus, rho_dummy, th);
    Field kap_hat = detail::closure_field(mat.kappa_minus, rho_dummy, th);
    Field d_hat = detail::closure_field(mat.d_minus, rho_dummy, th);
    const double mu_s = mat.mu_star(s), kap_s = mat.kappa_star(s), d_s = mat.d_star(s);
    Field mu_tilde = mu_hat, kap_tilde = kap_hat, d_tilde = d_hat;
    for (auto& v : mu_tilde.a) v -= mu_s;
    for (auto& v : kap_tilde.a) v -= kap_s;
    for (auto& v : d_tilde.a) v -= d_s;

    TensorField D = strain(st.u_lo);
    TensorField VD = strain_correction(st.u_lo, eh);
    DivTransforms dv = divergence_transforms(st.u_lo, eh);
    out.f_div = dv.f_minus;
    out.ff_div = dv.ff_minus;
    out.div_form_disagreement = dv.max_disagreement;

    VecField divD = div_tensor(D);
    Field rho_const(g, s, mat.rho_star_minus);
    TensorField G1(g, s), G2(g, s);
    for (int i = 0; i < N; ++i)
      for (int jd = 0; jd < N; ++jd)
        for (size_t n = 0; n < G1.at(i, jd).a.size(); ++n) {
          G1.at(i, jd).a[n] =
              mu_tilde.a[n] * D.at(i, jd).a[n] + mu_hat.a[n] * VD.at(i, jd).a[n];
          G2.at(i, jd).a[n] = mu_hat.a[n] * (D.at(i, jd).a[n] + VD.at(i, jd).a[n]);
        }
    VecField t_div = div_tensor(G1);
    VecField t_vdiv = vdiv_tensor(G2, eh);
    std::vector<Field> conv, B;
    for (int i = 0; i < N; ++i) {
      conv.push_back(detail::convective_block(rho_const, st.u_lo, st.u_lo[i], eh));
      Field b(g, s);
      for (size_t n = 0; n < b.a.size(); ++n)
        b.a[n] = conv.back().a[n] + t_div[i].a[n] + t_vdiv[i].a[n];
      B.push_back(std::move(b));
    }
    // F_- = -Q1 (rho dt u - mu Div D(u)) + (I + Q1) B, applied pointwise.
    // Q1 acts only through its last column.
    const ExtendedHeight::Half& hh = eh.lo;
    for (int t = 0; t < g.n_tan(); ++t)
      for (int m = 0; m < g.nn(); ++m) {
        const double aN =
            mat.rho_star_minus * dts.dtu_lo[N - 1].at(t, m) - mu_s * divD[N - 1].at(t, m);
        const double bN = B[static_cast<size_t>(N - 1)].at(t, m);
        for (int i = 0; i < N - 1; ++i) {
          const double Hi = hh.Ht[static_cast<size_t>(i)].at(t, m);
          out.F_lo[i].at(t, m) = -Hi * aN + B[static_cast<size_t>(i)].at(t, m) + Hi * bN;
        }
        const double HN = hh.HN.at(t, m);
        out.F_lo[N - 1].at(t, m) = -HN * aN + (1.0 + HN) * bN;
      }

    // heat equation
    Field cond = detail::heat_conduction_correction(d_s, d_tilde, d_hat, th, eh);
    Field rk(g, s);
    for (size_t n = 0; n < rk.a.size(); ++n) rk.a[n] = mat.rho_star_minus * kap_hat.a[n];
    Field conv_th = detail::convective_block(rk, st.u_lo, th, eh);
    TensorField DpV(g, s);
    for (int i = 0; i < N; ++i)
      for (int jd = 0; jd < N; ++jd)
        for (size_t n = 0; n < DpV.at(i, jd).a.size(); ++n)
          DpV.at(i, jd).a[n] = D.at(i, jd).a[n] + VD.at(i, jd).a[n];
    Field dsq = detail::frobenius2_field(DpV);
    for (size_t n = 0; n < out.Ftheta_lo.a.size(); ++n)
      out.Ftheta_lo.a[n] = -mat.rho_star_minus * kap_tilde.a[n] * dts.dtth_lo.a[n] +
                           cond.a[n] + conv_th.a[n] + 2.0 * mu_hat.a[n] * dsq.a[n];
  }
}

namespace detail {

// Interface traces of everything the jump right-hand sides need, per side.
struct SideTraces {
  std::array<std::array<LineField, kMaxDim>, kMaxDim> D, DpV;  // strain, strain + correction
  LineField mu_hat, mu_tilde;
  LineField div_u, V_div;
  std::array<LineField, kMaxDim> u;
  LineField theta, psi, theta_eta;
  std::array<LineField, kMaxDim> Ptheta;  // d_j th - K_j d_N th
  std::array<LineField, kMaxDim> grad_th; // plain hat gradient of theta
  LineField d_tilde;
  std::array<LineField, kMaxDim + 1> K;   // K_0..K_N traces (side-respective)
};

inline SideTraces side_traces(const MaterialSystem& mat, const ExtendedHeight& eh,
                              const HatState& st, Side s) {
  const Grid& g = eh.g;
  const int N = g.N;
  const VecField& u = (s == Side::upper) ? st.u_up : st.u_lo;
  const Field& th = (s == Side::upper) ? st.theta_up : st.theta_lo;
  Field rho = (s == Side::upper) ? st.rho_up : Field(g, s, mat.rho_star_minus);

  SideTraces out;
  TensorField D = strain(u), VD = strain_correction(u, eh);
  for (int i = 0; i < N; ++i)
    for (int jd = 0; jd < N; ++jd) {
      out.D[static_cast<size_t>(i)][static_cast<size_t>(jd)] = interface_trace(D.at(i, jd));
      Field sum = D.at(i, jd);
      sum += VD.at(i, jd);
      out.DpV[static_cast<size_t>(i)][static_cast<size_t>(jd)] = interface_trace(sum);
    }
  const Closure& muc = (s == Side::upper) ? mat.mu_plus : mat.mu_minus;
  Field mu_hat = closure_field(muc, rho, th);
  out.mu_hat = interface_trace(mu_hat);
  out.mu_tilde = out.mu_hat;
  for (auto& v : out.mu_tilde.a) v -= mat.mu_star(s);
  DivTransforms dv = divergence_transforms(u, eh);
  out.div_u = interface_trace(divergence(u));
  out.V_div = interface_trace(dv.V_div);
  for (int i = 0; i < N; ++i) out.u[static_cast<size_t>(i)] = interface_trace(u[i]);
  out.theta = interface_trace(th);
  const Closure& psic = (s == Side::upper) ? mat.psi_plus : mat.psi_minus;
  out.psi = interface_trace(closure_field(psic, rho, th));
  const Closure& etac = (s == Side::upper) ? mat.eta_plus : mat.eta_minus;
  Field eta = closure_field(etac, rho, th);
  Field te = th * eta;
  out.theta_eta = interface_trace(te);
  Field dn_th = deriv_nrm(th);
  for (int jd = 0; jd < N; ++jd) {
    Field dj = deriv(th, jd);
    out.grad_th[static_cast<size_t>(jd)] = interface_trace(dj);
    Field pj(g, s);
    const Field& Kj = eh.K(s, jd + 1);
    for (size_t n = 0; n < pj.a.size(); ++n) pj.a[n] = dj.a[n] - Kj.a[n] * dn_th.a[n];
    out.Ptheta[static_cast<size_t>(jd)] = interface_trace(pj);
  }
  const Closure& dc = (s == Side::upper) ? mat.d_plus : mat.d_minus;
  Field dh = closure_field(dc, rho, th);
  for (auto& v : dh.a) v -= mat.d_star(s);
  out.d_tilde = interface_trace(dh);
  for (int jd = 0; jd <= N; ++jd)
    out.K[static_cast<size_t>(jd)] = interface_trace(eh.K(s, jd));
  return out;
}

}  // namespace detail

// The phase-flux denominator 1/rho_- - 1/rho_+ at the interface, with the
// configured density reading; throws when the margin is violated.
inline LineField phase_flux_denominator(const MaterialSystem& mat, const HatState& st,
                                        const RhsOptions& opts) {
  const Grid& g = st.rho_up.g;
  LineField rho_trace = interface_trace(st.rho_up);
  LineField out(g);
  for (int t = 0; t < g.n_tan(); ++t) {
    double rp = rho_trace.at(t);
    if (opts.j_denom == RhsOptions::JDenominator::shifted_perturbation) rp += mat.rho_star_plus;
    const double d = 1.0 / mat.rho_star_minus - 1.0 / rp;
    if (std::abs(d) < opts.delta_j)
      throw SimError("phase flux: density contrast below margin at the interface");
    out.at(t) = d;
  }
  return out;
}

// Eliminated phase flux j = (u_-N| - u_+N|) (1/rho_- - 1/rho_+)^{-1} sqrt(1+|grad' H|^2).
inline LineField phase_flux(const MaterialSystem& mat, const ExtendedHeight& eh,
                            const HatState& st, const RhsOptions& opts = {}) {
  const Grid& g = eh.g;
  LineField denom = phase_flux_denominator(mat, st, opts);
  LineField um = interface_trace(st.u_lo[g.N - 1]), up = interface_trace(st.u_up[g.N - 1]);
  LineField g2(g);
  for (int jd = 0; jd < g.N - 1; ++jd) {
    LineField hj = line_deriv_tan(eh.h, jd);
    for (int t = 0; t < g.n_tan(); ++t) g2.at(t) += hj.at(t) * hj.at(t);
  }
  LineField out(g);
  for (int t = 0; t < g.n_tan(); ++t)
    out.at(t) = (um.at(t) - up.at(t)) / denom.at(t) * std::sqrt(1.0 + g2.at(t));
  return out;
}

// Physical-frame phase flux from the jump forms, for diagnostics.
inline double phase_flux_physical(double jump_u_dot_n, double jump_inv_rho) {
  return jump_u_dot_n / jump_inv_rho;
}

// Interface right-hand sides G_1..G_{N+1}, K_i, G_theta, G_h and the phase flux.
inline void assemble_interface_rhs(const MaterialSystem& mat, const ExtendedHeight& eh,
                                   const HatState& st, RhsBundle& out,
                                   const RhsOptions& opts = {}) {
  const Grid& g = eh.g;
  const int N = g.N;
  detail::SideTraces lo = detail::side_traces(mat, eh, st, Side::lower);
  detail::SideTraces up = detail::side_traces(mat, eh, st, Side::upper);

  std::array<LineField, kMaxDim - 1> hgrad;
  LineField g2(g);
  for (int jd = 0; jd < N - 1; ++jd) {
    hgrad[static_cast<size_t>(jd)] = line_deriv_tan(eh.h, jd);
    for (int t = 0; t < g.n_tan(); ++t)
      g2.at(t) += hgrad[static_cast<size_t>(jd)].at(t) * hgrad[static_cast<size_t>(jd)].at(t);
  }
  LineField lap_h = line_laplace_tan(eh.h);
  std::array<std::array<LineField, kMaxDim - 1>, kMaxDim - 1> hess;
  for (int i = 0; i < N - 1; ++i)
    for (int jd = 0; jd < N - 1; ++jd)
      hess[static_cast<size_t>(i)][static_cast<size_t>(jd)] =
          line_deriv_tan(hgrad[static_cast<size_t>(i)], jd);

  // mu-weighted jumps of D + V_D components
  auto jumpDpV = [&](int i, int jd, int t) {
    return lo.mu_hat.at(t) * lo.DpV[static_cast<size_t>(i)][static_cast<size_t>(jd)].at(t) -
           up.mu_hat.at(t) * up.DpV[static_cast<size_t>(i)][static_cast<size_t>(jd)].at(t);
  };

  LineField denom = phase_flux_denominator(mat, st, opts);
  LineField rho_tr = interface_trace(st.rho_up);
  LineField P_tr = interface_trace(
      detail::closure_field(mat.P_plus, st.rho_up, st.theta_up));
  const double P_star = mat.P_star();
  LineField lam_hat_tr = interface_trace(
      detail::closure_field(mat.lambda_plus, st.rho_up, st.theta_up));

  for (int t = 0; t < g.n_tan(); ++t) {
    const double du_n = lo.u[static_cast<size_t>(N - 1)].at(t) - up.u[static_cast<size_t>(N - 1)].at(t);
    const double opg2 = 1.0 + g2.at(t);
    const double mu_tp = up.mu_tilde.at(t), mu_hp = up.mu_hat.at(t);
    const double lam_hp = lam_hat_tr.at(t);
    const double lam_tp = lam_hp - mat.lambda_star_plus();

    // --- G_i, K_i ---
    for (int i = 0; i < N - 1; ++i) {
      const double VDiN_lo = lo.DpV[static_cast<size_t>(i)][static_cast<size_t>(N - 1)].at(t) -
                             lo.D[static_cast<size_t>(i)][static_cast<size_t>(N - 1)].at(t);
      const double VDiN_up = up.DpV[static_cast<size_t>(i)][static_cast<size_t>(N - 1)].at(t) -
                             up.D[static_cast<size_t>(i)][static_cast<size_t>(N - 1)].at(t);
      double gi = -((lo.mu_tilde.at(t) * lo.D[static_cast<size_t>(i)][static_cast<size_t>(N - 1)].at(t) +
                     lo.mu_hat.at(t) * VDiN_lo) -
                    (mu_tp * up.D[static_cast<size_t>(i)][static_cast<size_t>(N - 1)].at(t) +
                     mu_hp * VDiN_up));
      double tangential_sum = 0;
      for (int jd = 0; jd < N - 1; ++jd)
        tangential_sum += hgrad[static_cast<size_t>(jd)].at(t) * jumpDpV(i, jd, t);
      gi += tangential_sum;
      gi -= hgrad[static_cast<size_t>(i)].at(t) * (tangential_sum - jumpDpV(N - 1, N - 1, t));
      out.G_tan[static_cast<size_t>(i)].at(t) = gi;
      out.K_slip[static_cast<size_t>(i)].at(t) = -hgrad[static_cast<size_t>(i)].at(t) * du_n;
    }

    // --- G_N ---
    {
      const double VDNN_lo = lo.DpV[static_cast<size_t>(N - 1)][static_cast<size_t>(N - 1)].at(t) -
                             lo.D[static_cast<size_t>(N - 1)][static_cast<size_t>(N - 1)].at(t);
      const double VDNN_up = up.DpV[static_cast<size_t>(N - 1)][static_cast<size_t>(N - 1)].at(t) -
                             up.D[static_cast<size_t>(N - 1)][static_cast<size_t>(N - 1)].at(t);
      double gn = -(lo.mu_tilde.at(t) * lo.D[static_cast<size_t>(N - 1)][static_cast<size_t>(N - 1)].at(t) +
                    lo.mu_hat.at(t) * VDNN_lo) -
                  (mu_tp * up.D[static_cast<size_t>(N - 1)][static_cast<size_t>(N - 1)].at(t) +
                   mu_hp * VDNN_up);
      gn += (lam_tp - mu_tp) * up.div_u.at(t) + (lam_hp - mu_hp) * up.V_div.at(t) -
            (P_tr.at(t) - P_star);
      for (int jd = 0; jd < N - 1; ++jd)
        gn += hgrad[static_cast<size_t>(jd)].at(t) * jumpDpV(N - 1, jd, t);
      // curvature block
      double curv;
      double hess_sum = 0;
      for (int i = 0; i < N - 1; ++i)
        for (int jd = 0; jd < N - 1; ++jd)
          hess_sum += hgrad[static_cast<size_t>(i)].at(t) * hgrad[static_cast<size_t>(jd)].at(t) *
                      hess[static_cast<size_t>(i)][static_cast<size_t>(jd)].at(t);
      if (opts.curvature == RhsOptions::CurvatureBlock::printed) {
        curv = (1.0 - 1.0 / std::sqrt(opg2)) * lap_h.at(t) - hess_sum / std::pow(opg2, 1.5);
      } else {
        // div'(grad' h / sqrt(1+|grad' h|^2)) - lap' h
        curv = (1.0 / std::sqrt(opg2) - 1.0) * lap_h.at(t) - hess_sum / std::pow(opg2, 1.5);
      }
      gn += mat.sigma * curv;
      gn += du_n * du_n * opg2 / denom.at(t);
      out.G_N.at(t) = gn;
    }

    // --- G_{N+1} ---
    {
      const double inv_rm = 1.0 / mat.rho_star_minus;
      const double inv_rp_hat = 1.0 / rho_tr.at(t);
      const double inv_rp_star = 1.0 / mat.rho_star_plus;
      const double psi_m_star = mat.psi_minus(mat.rho_star_minus, mat.theta_star);
      const double psi_p_star = mat.psi_plus(mat.rho_star_plus, mat.theta_star);
      if (opts.gibbs_row == RhsOptions::GibbsRow::derived) {
        // exact row: start from the free-energy jump balance
        //   [[psi]] + j^2 [[1/(2 rho^2)]] - [[n.Tn / rho]] = 0
        // with the physical strain D + V_D and the unit graph normal, solve
        // for the lower pressure trace, and subtract the star-coefficient
        // flat row. The isotropic stress parts contract with the unit normal
        // to exactly -pi, so no geometric truncation enters; the rest-state
        // identity annihilates the constant part.
        auto normal_stress = [&](const detail::SideTraces& tr) {
          double s = tr.DpV[static_cast<size_t>(N - 1)][static_cast<size_t>(N - 1)].at(t);
          for (int i = 0; i < N - 1; ++i) {
            s -= 2.0 * hgrad[static_cast<size_t>(i)].at(t) *
                 tr.DpV[static_cast<size_t>(i)][static_cast<size_t>(N - 1)].at(t);
            for (int jd = 0; jd < N - 1; ++jd)
              s += hgrad[static_cast<size_t>(i)].at(t) * hgrad[static_cast<size_t>(jd)].at(t) *
                   tr.DpV[static_cast<size_t>(i)][static_cast<size_t>(jd)].at(t);
          }
          return tr.mu_hat.at(t) * s / opg2;
        };
        const double j2 = du_n * du_n * opg2 / (denom.at(t) * denom.at(t));
        double gn1 = (lo.psi.at(t) - up.psi.at(t)) + inv_rm * P_star - inv_rp_hat * P_tr.at(t);
        gn1 += 0.5 * j2 * (inv_rm * inv_rm - inv_rp_hat * inv_rp_hat);
        gn1 += inv_rm * (mat.mu_star(Side::lower) *
                             lo.D[static_cast<size_t>(N - 1)][static_cast<size_t>(N - 1)].at(t) -
                         normal_stress(lo));
        gn1 += inv_rp_hat * (normal_stress(up) +
                             (lam_hp - mu_hp) * (up.div_u.at(t) + up.V_div.at(t)));
        gn1 -= inv_rp_star *
               (mat.mu_star(Side::upper) *
                    up.D[static_cast<size_t>(N - 1)][static_cast<size_t>(N - 1)].at(t) +
                (mat.lambda_star_plus() - mat.mu_star(Side::upper)) * up.div_u.at(t));
        out.G_N1.at(t) = gn1;
      } else {
        double gn1 = -inv_rm * (P_tr.at(t) - P_star) - (inv_rp_hat - inv_rp_star) * P_tr.at(t);
        gn1 += (lo.psi.at(t) - psi_m_star) - (up.psi.at(t) - psi_p_star);
        gn1 += (lo.psi.at(t) - up.psi.at(t)) * g2.at(t);
        gn1 += 0.5 * (inv_rm + inv_rp_hat) / denom.at(t) * du_n * du_n * opg2 * opg2;
        gn1 -= inv_rm * lo.mu_tilde.at(t) *
                   lo.D[static_cast<size_t>(N - 1)][static_cast<size_t>(N - 1)].at(t) -
               inv_rp_star * (mu_tp * up.D[static_cast<size_t>(N - 1)][static_cast<size_t>(N - 1)].at(t) +
                              (lam_tp - mu_tp) * up.div_u.at(t));
        gn1 += (inv_rp_hat - inv_rp_star) *
               (mu_hp * up.DpV[static_cast<size_t>(N - 1)][static_cast<size_t>(N - 1)].at(t) +
                (lam_hp - mu_hp) * (up.div_u.at(t) + up.V_div.at(t)));
        for (int i = 0; i < N - 1; ++i)
          for (int jd = 0; jd < N - 1; ++jd)
            gn1 -= (inv_rm * lo.mu_hat.at(t) *
                        lo.DpV[static_cast<size_t>(i)][static_cast<size_t>(jd)].at(t) -
                    inv_rp_hat * up.mu_hat.at(t) *
                        up.DpV[static_cast<size_t>(i)][static_cast<size_t>(jd)].at(t)) *
                   hgrad[static_cast<size_t>(i)].at(t) * hgrad[static_cast<size_t>(jd)].at(t);
        for (int i = 0; i < N - 1; ++i)
          gn1 += 2.0 *
                 (inv_rm * lo.mu_hat.at(t) *
                      lo.DpV[static_cast<size_t>(i)][static_cast<size_t>(N - 1)].at(t) -
                  inv_rp_hat * up.mu_hat.at(t) *
                      up.DpV[static_cast<size_t>(i)][static_cast<size_t>(N - 1)].at(t)) *
                 hgrad[static_cast<size_t>(i)].at(t);
        // -|grad' h|^2 [ sigma(...) + j-squared + tangential stress + normal stress ]
        double hess_sum = 0;
        for (int i = 0; i < N - 1; ++i)
          for (int jd = 0; jd < N - 1; ++jd)
            hess_sum += hgrad[static_cast<size_t>(i)].at(t) * hgrad[static_cast<size_t>(jd)].at(t) *
                        hess[static_cast<size_t>(i)][static_cast<size_t>(jd)].at(t);
        double bracket = mat.sigma * (lap_h.at(t) / std::sqrt(opg2) - hess_sum / std::pow(opg2, 1.5));
        bracket += du_n * du_n * opg2 / denom.at(t);
        for (int i = 0; i < N - 1; ++i)
          bracket += jumpDpV(i, N - 1, t) * hgrad[static_cast<size_t>(i)].at(t);
        bracket -= jumpDpV(N - 1, N - 1, t);
        gn1 -= g2.at(t) * bracket;
        out.G_N1.at(t) = gn1;
      }
    }

    // --- G_theta ---
    {
      double gt = opg2 * du_n / denom.at(t) * (lo.theta_eta.at(t) - up.theta_eta.at(t));
      // -(d_tilde (grad th - K dN th))|jump . (-grad' h, 1)
      for (int jd = 0; jd < N - 1; ++jd)
        gt -= (lo.d_tilde.at(t) * lo.Ptheta[static_cast<size_t>(jd)].at(t) -
               up.d_tilde.at(t) * up.Ptheta[static_cast<size_t>(jd)].at(t)) *
              (-hgrad[static_cast<size_t>(jd)].at(t));
      gt -= lo.d_tilde.at(t) * lo.Ptheta[static_cast<size_t>(N - 1)].at(t) -
            up.d_tilde.at(t) * up.Ptheta[static_cast<size_t>(N - 1)].at(t);
      for (int jd = 0; jd < N - 1; ++jd)
        gt += (mat.d_star(Side::lower) * lo.grad_th[static_cast<size_t>(jd)].at(t) -
               mat.d_star(Side::upper) * up.grad_th[static_cast<size_t>(jd)].at(t)) *
              hgrad[static_cast<size_t>(jd)].at(t);
      // (d* dN th)| K.(-grad' h, 1), with each side's own K trace
      auto Kdot = [&](const detail::SideTraces& sd) {
        double v = sd.K[static_cast<size_t>(N)].at(t);
        for (int jd = 0; jd < N - 1; ++jd)
          v += sd.K[static_cast<size_t>(jd + 1)].at(t) * (-hgrad[static_cast<size_t>(jd)].at(t));
        return v;
      };
      gt += mat.d_star(Side::lower) * lo.grad_th[static_cast<size_t>(N - 1)].at(t) * Kdot(lo) -
            mat.d_star(Side::upper) * up.grad_th[static_cast<size_t>(N - 1)].at(t) * Kdot(up);
      out.G_theta.at(t) = gt;
    }

    // --- G_h ---
    {
      const double rm = mat.rho_star_minus, rp = mat.rho_star_plus;
      double rph = rho_tr.at(t);
      if (opts.j_denom == RhsOptions::JDenominator::shifted_perturbation) rph += rp;
      if (std::abs(rm - rph) < opts.delta_j)
        throw SimError("G_h: density contrast below margin at the interface");
      const double um = lo.u[static_cast<size_t>(N - 1)].at(t),
                   upv = up.u[static_cast<size_t>(N - 1)].at(t);
      double gh = (1.0 / (rm - rph) - 1.0 / (rm - rp)) * (rm * um - rp * upv);
      gh += (rp - rph) / (rm - rph) * upv;
      for (int jd = 0; jd < N - 1; ++jd) {
        gh -= rm / (rm - rph) * hgrad[static_cast<size_t>(jd)].at(t) *
              lo.u[static_cast<size_t>(jd)].at(t);
        gh += rph / (rm - rph) * hgrad[static_cast<size_t>(jd)].at(t) *
              up.u[static_cast<size_t>(jd)].at(t);
      }
      out.G_h.at(t) = gh;
    }

    out.j.at(t) = du_n / denom.at(t) * std::sqrt(opg2);
  }
}

inline RhsBundle assemble_rhs(const MaterialSystem& mat, const ExtendedHeight& eh,
                              const HatState& st, const HatTimeDerivs& dts,
                              const RhsOptions& opts = {}) {
  RhsBundle out(eh.g);
  assemble_body_rhs(mat, eh, st, dts, out, opts);
  assemble_interface_rhs(mat, eh, st, out, opts);
  return out;
}

// One compatibility condition's residual in sup norm and a fractional trace
// norm proxy (H^s on the interface line, L_q on the strip for the divergence
// condition).
struct CompatResidual {
  std::string name;
  double sup = 0.0;
  double trace_norm = 0.0;
};

inline std::vector<CompatResidual> compatibility_residual(const MaterialSystem& mat,
                                                          const ExtendedHeight& eh,
                                                          const HatState& st,
                                                          const RhsOptions& opts = {}) {
  const Grid& g = eh.g;
  const int N = g.N;
  RhsBundle b(g);
  assemble_interface_rhs(mat, eh, st, b, opts);
  DivTransforms dv = divergence_transforms(st.u_lo, eh);

  std::vector<CompatResidual> out;
  {
    Field r = divergence(st.u_lo) - dv.f_minus;
    Field r2 = divergence(st.u_lo) - divergence(dv.ff_minus);
    CompatResidual c{"divergence", std::max(r.max_abs(), r2.max_abs()),
                     std::max(norm(r, NormKind::Lq), norm(r2, NormKind::Lq))};
    out.push_back(c);
  }
  TensorField D_lo = strain(st.u_lo), D_up = strain(st.u_up);
  for (int i = 0; i < N - 1; ++i) {
    LineField r = interface_trace(D_lo.at(i, N - 1));
    r *= mat.mu_star(Side::lower);
    LineField rp = interface_trace(D_up.at(i, N - 1));
    rp *= mat.mu_star(Side::upper);
    r -= rp;
    r -= b.G_tan[static_cast<size_t>(i)];
    out.push_back({"tangential stress " + std::to_string(i + 1), r.max_abs(), line_frac_norm(r, 0.5)});
  }
  for (int i = 0; i < N - 1; ++i) {
    LineField r = interface_trace(st.u_lo[i]);
    r -= interface_trace(st.u_up[i]);
    r -= b.K_slip[static_cast<size_t>(i)];
    out.push_back({"velocity slip " + std::to_string(i + 1), r.max_abs(), line_frac_norm(r, 0.5)});
  }
  {
    LineField r = interface_trace(st.theta_lo);
    r -= interface_trace(st.theta_up);
    out.push_back({"temperature continuity", r.max_abs(), line_frac_norm(r, 0.5)});
  }
  {
    LineField r = interface_trace(deriv_nrm(st.theta_lo));
    r *= mat.d_star(Side::lower);
    LineField rp = interface_trace(deriv_nrm(st.theta_up));
    rp *= mat.d_star(Side::upper);
    r -= rp;
    r -= b.G_theta;
    out.push_back({"heat flux", r.max_abs(), line_frac_norm(r, 0.5)});
  }
  {
    // one-sided normal stress: T_+(u_0+) = sig_+ lap' h_0 + split data
    LineField lhs = interface_trace(D_up.at(N - 1, N - 1));
    lhs *= mat.mu_star(Side::upper);
    LineField dv_up = interface_trace(divergence(st.u_up));
    dv_up *= (mat.lambda_star_plus() - mat.mu_star(Side::upper));
    lhs += dv_up;
    LineField lap_h = line_laplace_tan(eh.h);
    lap_h *= mat.sigma_side(Side::upper);
    LineField rhs = traction_split(mat, b.G_N, b.G_N1).T_plus;
    LineField r = lhs;
    r -= lap_h;
    r -= rhs;
    out.push_back({"normal stress", r.max_abs(), line_frac_norm(r, 0.5)});
  }
  return out;
}

}  // namespace bps
