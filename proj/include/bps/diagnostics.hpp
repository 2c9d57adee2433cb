#pragma once

#include <string>
#include <vector>

#include "bps/driver.hpp"

namespace bps {

namespace detail {

// trapezoid in the normal direction, periodic rectangle tangentially
inline double strip_integral(const Field& f) {
  const Grid& g = f.g;
  const double wt = std::pow(g.d_tan(), g.N - 1);
  double total = 0;
  for (int t = 0; t < g.n_tan(); ++t)
    for (int m = 0; m < g.nn(); ++m) {
      const double w = (m == 0 || m == g.M_nrm) ? 0.5 : 1.0;
      total += wt * w * g.dx() * f.at(t, m);
    }
  return total;
}

inline double line_integral(const LineField& f) {
  const Grid& g = f.g;
  const double wt = std::pow(g.d_tan(), g.N - 1);
  double total = 0;
  for (int t = 0; t < g.n_tan(); ++t) total += wt * f.at(t);
  return total;
}

// physical-frame strain, divergence, and gradient fields for one strip
struct PhysicalFields {
  TensorField D;   // strain + correction (physical symmetric gradient)
  Field divu;      // physical divergence
  VecField grad_th;
};

inline PhysicalFields physical_fields(const HatState& st, const ExtendedHeight& eh, Side s) {
  const VecField& u = (s == Side::upper) ? st.u_up : st.u_lo;
  const Field& th = (s == Side::upper) ? st.theta_up : st.theta_lo;
  PhysicalFields out;
  out.D = strain(u);
  TensorField VD = strain_correction(u, eh);
  for (int i = 0; i < u[0].g.N; ++i)
    for (int jd = 0; jd < u[0].g.N; ++jd) out.D.at(i, jd) += VD.at(i, jd);
  DivTransforms dv = divergence_transforms(u, eh);
  out.divu = divergence(u);
  out.divu += dv.V_div;
  out.grad_th = VecField(th.g, s);
  for (int jd = 0; jd < th.g.N; ++jd) out.grad_th[jd] = pullback_deriv(th, eh, jd);
  return out;
}

}  // namespace detail

// physical surface measure of the interface graph
inline double surface_area(const LineField& h) {
  const Grid& g = h.g;
  LineField meas(g);
  std::array<LineField, kMaxDim - 1> grad;
  for (int j = 0; j < g.N - 1; ++j) grad[static_cast<size_t>(j)] = line_deriv_tan(h, j);
  for (int t = 0; t < g.n_tan(); ++t) {
    double g2 = 0;
    for (int j = 0; j < g.N - 1; ++j) {
      const double v = grad[static_cast<size_t>(j)].at(t);
      g2 += v * v;
    }
    meas.at(t) = std::sqrt(1.0 + g2);
  }
  return detail::line_integral(meas);
}

// -integral of H_Gamma (v . n) over the interface: the exact rate of the
// surface measure for a graph moving with dt(h)
inline double surface_rate_from_curvature(const LineField& h, const LineField& dth) {
  NormalCurvature nc = normal_and_curvature(h.g, h, CurvatureVariant::classical);
  LineField integrand = nc.curvature * dth;  // H_Gamma * dt(h); dnu cancels v.n's root
  return -detail::line_integral(integrand);
}

struct BudgetReport {
  double dt_span = 0.0;
  double mass_start = 0.0, mass_end = 0.0;
  double mass_flux = 0.0;            // outermost-cell mass flux estimate (itemized)
  double mass_rate_rel = 0.0;        // relative drift per unit time, flux-corrected
  std::array<double, kMaxDim> momentum_start{}, momentum_end{}, momentum_rate{};
  double energy_start = 0.0, energy_end = 0.0;
  double energy_rate_rel = 0.0;
  double surface_start = 0.0, surface_end = 0.0;
};

namespace detail {

struct Totals {
  double mass = 0, energy = 0, entropy = 0;
  std::array<double, kMaxDim> momentum{};
  double surface = 0;
};

inline Totals totals(const MaterialSystem& mat, const SimState& st) {
  const Grid& g = st.g;
  ExtendedHeight eh = extend_height(g, st.h, &st.dth);
  Totals out;
  for (Side s : {Side::upper, Side::lower}) {
    const Field& jac = eh.half(s).one_plus_HN;
    const VecField& u = (s == Side::upper) ? st.fields.u_up : st.fields.u_lo;
    const Field& th = (s == Side::upper) ? st.fields.theta_up : st.fields.theta_lo;
    Field rho = (s == Side::upper) ? st.fields.rho_up : Field(g, s, mat.rho_star_minus);
    const Closure& psic = (s == Side::upper) ? mat.psi_plus : mat.psi_minus;
    const Closure& etac = (s == Side::upper) ? mat.eta_plus : mat.eta_minus;

    Field mass_d(g, s), energy_d(g, s), entropy_d(g, s);
    std::array<Field, kMaxDim> mom_d;
    for (int i = 0; i < g.N; ++i) mom_d[static_cast<size_t>(i)] = Field(g, s);
    for (int t = 0; t < g.n_tan(); ++t)
      for (int m = 0; m < g.nn(); ++m) {
        const double r = rho.at(t, m), h = th.at(t, m), J = jac.at(t, m);
        double u2 = 0;
        for (int i = 0; i < g.N; ++i) u2 += u[i].at(t, m) * u[i].at(t, m);
        const double eta = etac(r, h);
        const double e = psic(r, h) + h * eta;  // internal energy per unit mass
        mass_d.at(t, m) = r * J;
        energy_d.at(t, m) = r * (0.5 * u2 + e) * J;
        entropy_d.at(t, m) = r * eta * J;
        for (int i = 0; i < g.N; ++i) mom_d[static_cast<size_t>(i)].at(t, m) = r * u[i].at(t, m) * J;
      }
    out.mass += strip_integral(mass_d);
    out.energy += strip_integral(energy_d);
    out.entropy += strip_integral(entropy_d);
    for (int i = 0; i < g.N; ++i)
      out.momentum[static_cast<size_t>(i)] += strip_integral(mom_d[static_cast<size_t>(i)]);
  }
  out.surface = surface_area(st.h);
  out.energy += mat.sigma * out.surface;
  return out;
}

// mass flux through the outermost interior cells of both walls
inline double outer_mass_flux(const MaterialSystem& mat, const SimState& st) {
  const Grid& g = st.g;
  const double wt = std::pow(g.d_tan(), g.N - 1);
  double flux = 0;
  for (int t = 0; t < g.n_tan(); ++t) {
    flux += wt * st.fields.rho_up.at(t, g.M_nrm - 1) * st.fields.u_up[g.N - 1].at(t, g.M_nrm - 1);
    flux -= wt * mat.rho_star_minus * st.fields.u_lo[g.N - 1].at(t, g.M_nrm - 1);
  }
  return flux;
}

}  // namespace detail

inline BudgetReport conservation_budgets(const MaterialSystem& mat, const SimState& a,
                                         const SimState& b) {
  if (b.t <= a.t) throw SimError("conservation budgets: need increasing snapshot times");
  detail::Totals ta = detail::totals(mat, a), tb = detail::totals(mat, b);
  BudgetReport out;
  out.dt_span = b.t - a.t;
  out.mass_start = ta.mass;
  out.mass_end = tb.mass;
  out.mass_flux = 0.5 * (detail::outer_mass_flux(mat, a) + detail::outer_mass_flux(mat, b));
  out.mass_rate_rel =
      ((tb.mass - ta.mass) / out.dt_span + out.mass_flux) / std::abs(ta.mass);
  out.energy_start = ta.energy;
  out.energy_end = tb.energy;
  out.energy_rate_rel = (tb.energy - ta.energy) / out.dt_span / std::max(std::abs(ta.energy), 1.0);
  for (int i = 0; i < a.g.N; ++i) {
    out.momentum_start[static_cast<size_t>(i)] = ta.momentum[static_cast<size_t>(i)];
    out.momentum_end[static_cast<size_t>(i)] = tb.momentum[static_cast<size_t>(i)];
    out.momentum_rate[static_cast<size_t>(i)] =
        (tb.momentum[static_cast<size_t>(i)] - ta.momentum[static_cast<size_t>(i)]) / out.dt_span;
  }
  out.surface_start = ta.surface;
  out.surface_end = tb.surface;
  return out;
}

struct EntropyReport {
  double entropy_start = 0.0, entropy_end = 0.0, increment = 0.0;
  double production_integral = 0.0;   // at the end snapshot
  double min_viscous_production = 0.0;
};

inline EntropyReport entropy_monitor(const MaterialSystem& mat, const SimState& a,
                                     const SimState& b) {
  EntropyReport out;
  out.entropy_start = detail::totals(mat, a).entropy;
  out.entropy_end = detail::totals(mat, b).entropy;
  out.increment = out.entropy_end - out.entropy_start;

  const Grid& g = b.g;
  ExtendedHeight eh = extend_height(g, b.h, &b.dth);
  out.min_viscous_production = std::numeric_limits<double>::infinity();
  for (Side s : {Side::upper, Side::lower}) {
    const Field& th = (s == Side::upper) ? b.fields.theta_up : b.fields.theta_lo;
    Field rho = (s == Side::upper) ? b.fields.rho_up : Field(g, s, mat.rho_star_minus);
    detail::PhysicalFields pf = detail::physical_fields(b.fields, eh, s);
    Field prod(g, s);
    for (int t = 0; t < g.n_tan(); ++t)
      for (int m = 0; m < g.nn(); ++m) {
        const double theta = th.at(t, m);
        if (!(theta > 0)) throw SimError("entropy monitor: nonpositive temperature");
        Mat D(g.N);
        for (int i = 0; i < g.N; ++i)
          for (int jd = 0; jd < g.N; ++jd) D(i, jd) = pf.D.at(i, jd).at(t, m);
        const double visc = entropy_production_density(s, mat, D, pf.divu.at(t, m),
                                                       rho.at(t, m), theta);
        out.min_viscous_production = std::min(out.min_viscous_production, visc);
        double gt2 = 0;
        for (int i = 0; i < g.N; ++i) gt2 += pf.grad_th[i].at(t, m) * pf.grad_th[i].at(t, m);
        const double d = mat.d(s, rho.at(t, m), theta);
        prod.at(t, m) =
            (d * gt2 / (theta * theta) + visc) * eh.half(s).one_plus_HN.at(t, m);
      }
    out.production_integral += detail::strip_integral(prod);
  }
  return out;
}

// Residuals of one physical interface-condition set, evaluated from traces in
// the physical frame. Case 32 is the simulated regime (nonzero phase flux,
// distinct densities); 31 covers zero flux; 33 equal densities (evaluator
// only, needs an explicit flux line).
inline std::vector<CompatResidual> jump_residuals(const MaterialSystem& mat, const SimState& st,
                                                  int case_id, const LineField* j_given = nullptr,
                                                  const RhsOptions& opts = {}) {
  const Grid& g = st.g;
  const int N = g.N;
  ExtendedHeight eh = extend_height(g, st.h, &st.dth);
  NormalCurvature nc = normal_and_curvature(g, st.h, CurvatureVariant::classical);

  // traces per side
  struct Tr {
    std::array<LineField, kMaxDim> u;
    std::array<std::array<LineField, kMaxDim>, kMaxDim> D;
    LineField divu, theta, rho, mu, lam, pi, eta, psi;
    std::array<LineField, kMaxDim> grad_th;
    LineField d;
  };
  auto traces = [&](Side s) {
    Tr out;
    const VecField& u = (s == Side::upper) ? st.fields.u_up : st.fields.u_lo;
    const Field& th = (s == Side::upper) ? st.fields.theta_up : st.fields.theta_lo;
    Field rho = (s == Side::upper) ? st.fields.rho_up : Field(g, s, mat.rho_star_minus);
    detail::PhysicalFields pf = detail::physical_fields(st.fields, eh, s);
    for (int i = 0; i < N; ++i) {
      out.u[static_cast<size_t>(i)] = interface_trace(u[i]);
      out.grad_th[static_cast<size_t>(i)] = interface_trace(pf.grad_th[i]);
      for (int jd = 0; jd < N; ++jd)
        out.D[static_cast<size_t>(i)][static_cast<size_t>(jd)] = interface_trace(pf.D.at(i, jd));
    }
    out.divu = interface_trace(pf.divu);
    out.theta = interface_trace(th);
    out.rho = interface_trace(rho);
    out.mu = LineField(g);
    out.lam = LineField(g);
    out.eta = LineField(g);
    out.psi = LineField(g);
    out.d = LineField(g);
    for (int t = 0; t < g.n_tan(); ++t) {
      const double r = out.rho.at(t), h = out.theta.at(t);
      out.mu.at(t) = mat.mu(s, r, h);
      out.eta.at(t) = (s == Side::upper) ? mat.eta_plus(r, h) : mat.eta_minus(r, h);
      out.psi.at(t) = (s == Side::upper) ? mat.psi_plus(r, h) : mat.psi_minus(r, h);
      out.d.at(t) = mat.d(s, r, h);
      if (s == Side::upper) out.lam.at(t) = mat.lambda_plus(r, h);
    }
    if (s == Side::upper) {
      out.pi = LineField(g);
      for (int t = 0; t < g.n_tan(); ++t)
        out.pi.at(t) = mat.P_plus(out.rho.at(t), out.theta.at(t));
    } else {
      out.pi = interface_trace(st.pi_lo);
      for (auto& v : out.pi.a) v += mat.P_star();  // shift back to the physical pressure
    }
    return out;
  };
  Tr lo = traces(Side::lower), up = traces(Side::upper);

  LineField j(g);
  if (j_given) {
    j = *j_given;
  } else if (case_id == 32) {
    j = phase_flux(mat, eh, st.fields, opts);
  }
  if (case_id == 33 && std::abs(mat.rho_star_minus - mat.rho_star_plus) > 1e-14)
    throw SimError("jump residuals: case 33 needs equal reference densities");

  // T n per side (half-weight strain convention of the solved problem)
  auto stress_n = [&](const Tr& tr, Side s, int t, int i) {
    double v = 0;
    for (int jd = 0; jd < N; ++jd) {
      double Tij = tr.mu.at(t) * tr.D[static_cast<size_t>(i)][static_cast<size_t>(jd)].at(t);
      if (i == jd) {
        if (s == Side::upper) Tij += (tr.lam.at(t) - tr.mu.at(t)) * tr.divu.at(t);
        Tij -= tr.pi.at(t);
      }
      v += Tij * nc.n[static_cast<size_t>(jd)].at(t);
    }
    return v;
  };

  std::vector<LineField> lines;
  std::vector<std::string> names;
  auto push = [&](const std::string& nm) {
    names.push_back(nm);
    lines.emplace_back(g);
    return static_cast<int>(lines.size()) - 1;
  };

  const int i_slip = (case_id == 32) ? push("tangential slip") : push("velocity jump");
  const int i_mom = push("momentum jump");
  const int i_th = push("temperature continuity");
  const int i_stefan = push("heat flux / Stefan");
  const int i_gt = (case_id == 32) ? push("Gibbs-Thomson") : (case_id == 33 ? push("free-energy balance") : -1);
  const int i_kin = push("kinematic");
  const int i_j = (case_id == 32) ? push("phase-flux consistency") : -1;

  for (int t = 0; t < g.n_tan(); ++t) {
    std::array<double, kMaxDim> ju{};
    double jun = 0;
    for (int i = 0; i < N; ++i) {
      ju[static_cast<size_t>(i)] = lo.u[static_cast<size_t>(i)].at(t) - up.u[static_cast<size_t>(i)].at(t);
      jun += ju[static_cast<size_t>(i)] * nc.n[static_cast<size_t>(i)].at(t);
    }
    double jTn_max = 0, slip_max = 0;
    for (int i = 0; i < N; ++i) {
      const double jTn = stress_n(lo, Side::lower, t, i) - stress_n(up, Side::upper, t, i);
      double mom;
      if (case_id == 32)
        mom = j.at(t) * ju[static_cast<size_t>(i)] - jTn +
              mat.sigma * nc.curvature.at(t) * nc.n[static_cast<size_t>(i)].at(t);
      else
        mom = jTn - mat.sigma * nc.curvature.at(t) * nc.n[static_cast<size_t>(i)].at(t);
      jTn_max = std::max(jTn_max, std::abs(mom));
      const double tang = (case_id == 32)
                              ? ju[static_cast<size_t>(i)] - jun * nc.n[static_cast<size_t>(i)].at(t)
                              : ju[static_cast<size_t>(i)];
      slip_max = std::max(slip_max, std::abs(tang));
    }
    lines[static_cast<size_t>(i_slip)].at(t) = slip_max;
    lines[static_cast<size_t>(i_mom)].at(t) = jTn_max;
    lines[static_cast<size_t>(i_th)].at(t) = lo.theta.at(t) - up.theta.at(t);

    double jq = 0;
    for (int i = 0; i < N; ++i)
      jq += (lo.d.at(t) * lo.grad_th[static_cast<size_t>(i)].at(t) -
             up.d.at(t) * up.grad_th[static_cast<size_t>(i)].at(t)) *
            nc.n[static_cast<size_t>(i)].at(t);
    const double jte = lo.theta.at(t) * lo.eta.at(t) - up.theta.at(t) * up.eta.at(t);
    lines[static_cast<size_t>(i_stefan)].at(t) =
        (case_id == 31) ? jq : j.at(t) * jte - jq;

    if (case_id == 32) {
      const double inv2 = 0.5 / (lo.rho.at(t) * lo.rho.at(t)) - 0.5 / (up.rho.at(t) * up.rho.at(t));
      double nTn_lo = 0, nTn_up = 0;
      for (int i = 0; i < N; ++i) {
        nTn_lo += nc.n[static_cast<size_t>(i)].at(t) * stress_n(lo, Side::lower, t, i);
        nTn_up += nc.n[static_cast<size_t>(i)].at(t) * stress_n(up, Side::upper, t, i);
      }
      lines[static_cast<size_t>(i_gt)].at(t) =
          (lo.psi.at(t) - up.psi.at(t)) + j.at(t) * j.at(t) * inv2 -
          (nTn_lo / lo.rho.at(t) - nTn_up / up.rho.at(t));
    } else if (case_id == 33) {
      lines[static_cast<size_t>(i_gt)].at(t) =
          lo.rho.at(t) * (lo.psi.at(t) - up.psi.at(t)) - mat.sigma * nc.curvature.at(t);
    }

    // v . n from the committed kinematic rate
    double g2 = 0;
    {
      // reconstruct |grad' h|^2 from the stored normal: n_N = 1/sqrt(1+g2)
      const double nN = nc.n[static_cast<size_t>(N - 1)].at(t);
      g2 = 1.0 / (nN * nN) - 1.0;
    }
    const double vn = st.dth.at(t) / std::sqrt(1.0 + g2);
    double kin;
    if (case_id == 32) {
      double jru = 0;
      for (int i = 0; i < N; ++i)
        jru += (lo.rho.at(t) * lo.u[static_cast<size_t>(i)].at(t) -
                up.rho.at(t) * up.u[static_cast<size_t>(i)].at(t)) *
               nc.n[static_cast<size_t>(i)].at(t);
      kin = vn - jru / (lo.rho.at(t) - up.rho.at(t));
    } else if (case_id == 31) {
      double un = 0;
      for (int i = 0; i < N; ++i)
        un += lo.u[static_cast<size_t>(i)].at(t) * nc.n[static_cast<size_t>(i)].at(t);
      kin = vn - un;
    } else {
      double un = 0;
      for (int i = 0; i < N; ++i)
        un += lo.u[static_cast<size_t>(i)].at(t) * nc.n[static_cast<size_t>(i)].at(t);
      kin = vn - (un - j.at(t) / lo.rho.at(t));
    }
    lines[static_cast<size_t>(i_kin)].at(t) = kin;

    if (case_id == 32) {
      const double jinv = 1.0 / lo.rho.at(t) - 1.0 / up.rho.at(t);
      lines[static_cast<size_t>(i_j)].at(t) = j.at(t) - jun / jinv;
    }
  }

  std::vector<CompatResidual> out;
  for (size_t i = 0; i < lines.size(); ++i)
    out.push_back({names[i], lines[i].max_abs(), line_frac_norm(lines[i], 0.0)});
  return out;
}

}  // namespace bps
