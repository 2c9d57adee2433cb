#pragma once

#include <array>
#include <memory>

#include "bps/banded.hpp"
#include "bps/constitutive.hpp"
#include "bps/grid.hpp"

namespace bps {

// Data for one generalized resolvent solve of the two-phase Stokes interface
// problem. All entries default to zero; outer boundary values are optional
// (used by manufactured-solution tests).
struct StokesData {
  VecField f_up, f_lo;                          // body forces
  Field f_div;                                  // divergence data on the lower strip
  std::array<LineField, kMaxDim - 1> g_tan;     // tangential stress jumps
  LineField T_plus, T_minus;                    // single-sided normal-stress data
  std::array<LineField, kMaxDim - 1> slip;      // tangential velocity jumps
  LineField d_kin;                              // kinematic right-hand side
  std::array<LineField, kMaxDim> u_up_outer, u_lo_outer;  // outer Dirichlet values

  explicit StokesData(const Grid& g)
      : f_up(g, Side::upper),
        f_lo(g, Side::lower),
        f_div(g, Side::lower),
        T_plus(g),
        T_minus(g),
        d_kin(g) {
    for (int i = 0; i < g.N - 1; ++i) {
      g_tan[static_cast<size_t>(i)] = LineField(g);
      slip[static_cast<size_t>(i)] = LineField(g);
    }
    for (int i = 0; i < g.N; ++i) {
      u_up_outer[static_cast<size_t>(i)] = LineField(g);
      u_lo_outer[static_cast<size_t>(i)] = LineField(g);
    }
  }
};

struct StokesSolution {
  VecField u_up, u_lo;
  Field pi_lo;
  LineField h;
  double max_condition = 0.0;
  double max_rel_residual = 0.0;

  StokesSolution(const Grid& g)
      : u_up(g, Side::upper), u_lo(g, Side::lower), pi_lo(g, Side::lower), h(g) {}
};

// Per-tangential-mode banded discretization of the linear two-phase Stokes
// interface problem with the height unknown: implicit resolvent parameter
// lambda (1/dt for time stepping). Blocks are factorized on construction and
// reused across solves.
class StokesSolver {
 public:
  StokesSolver(const Grid& grid, const MaterialSystem& mat, cdouble lambda)
      : g_(grid), mat_(mat), lambda_(lambda) {
    g_.validate();
    const int nt = g_.n_tan();
    blocks_.reserve(static_cast<size_t>(nt));
    for (int t = 0; t < nt; ++t)
      blocks_.push_back(std::make_unique<BandedSystem>(n_unknowns(), assemble_mode(t)));
  }

  const Grid& grid() const { return g_; }
  cdouble lambda() const { return lambda_; }

  double mode_condition(int t) const { return blocks_[static_cast<size_t>(t)]->condition(); }
  double max_condition() const {
    double c = 0;
    for (const auto& b : blocks_) c = std::max(c, b->condition());
    return c;
  }

  StokesSolution solve(const StokesData& data) const {
    const int N = g_.N, M = g_.M_nrm;
    // tangential transforms of all data
    std::vector<SpectralField> f_up_m, f_lo_m;
    for (int i = 0; i < N; ++i) {
      f_up_m.push_back(to_modes(data.f_up[i]));
      f_lo_m.push_back(to_modes(data.f_lo[i]));
    }
    SpectralField f_div_m = to_modes(data.f_div);
    auto lm = [&](const LineField& f) { return line_to_modes(f); };
    auto Tp = lm(data.T_plus), Tm = lm(data.T_minus), dk = lm(data.d_kin);
    std::array<std::vector<cdouble>, kMaxDim - 1> gt, sl;
    for (int i = 0; i < N - 1; ++i) {
      gt[static_cast<size_t>(i)] = lm(data.g_tan[static_cast<size_t>(i)]);
      sl[static_cast<size_t>(i)] = lm(data.slip[static_cast<size_t>(i)]);
    }
    std::array<std::vector<cdouble>, kMaxDim> ou, ol;
    for (int i = 0; i < N; ++i) {
      ou[static_cast<size_t>(i)] = lm(data.u_up_outer[static_cast<size_t>(i)]);
      ol[static_cast<size_t>(i)] = lm(data.u_lo_outer[static_cast<size_t>(i)]);
    }

    StokesSolution out(g_);
    std::vector<SpectralField> su, slo;
    for (int i = 0; i < N; ++i) {
      su.emplace_back(g_, Side::upper);
      slo.emplace_back(g_, Side::lower);
    }
    SpectralField spi(g_, Side::lower);
    std::vector<cdouble> h_modes(static_cast<size_t>(g_.n_tan()));

    for (int t = 0; t < g_.n_tan(); ++t) {
      std::vector<cdouble> rhs(static_cast<size_t>(n_unknowns()), cdouble{});
      // upper rows
      for (int i = 0; i < N; ++i) {
        rhs[static_cast<size_t>(row_up(i, M))] = ou[static_cast<size_t>(i)][static_cast<size_t>(t)];
        for (int m = 1; m < M; ++m) rhs[static_cast<size_t>(row_up(i, m))] = f_up_m[static_cast<size_t>(i)].at(t, m);
      }
      for (int i = 0; i < N - 1; ++i)
        rhs[static_cast<size_t>(row_stress_tan(i))] = gt[static_cast<size_t>(i)][static_cast<size_t>(t)];
      rhs[static_cast<size_t>(row_T_plus())] = Tp[static_cast<size_t>(t)];
      rhs[static_cast<size_t>(row_kin())] = dk[static_cast<size_t>(t)];
      // lower rows
      for (int i = 0; i < N - 1; ++i)
        rhs[static_cast<size_t>(row_slip(i))] = sl[static_cast<size_t>(i)][static_cast<size_t>(t)];
      rhs[static_cast<size_t>(row_T_minus())] = Tm[static_cast<size_t>(t)];
      // divergence data collocated at the normal midpoints
      for (int m = 0; m < M; ++m)
        rhs[static_cast<size_t>(row_div(m))] = 0.5 * (f_div_m.at(t, m) + f_div_m.at(t, m + 1));
      for (int m = 1; m < M; ++m)
        for (int i = 0; i < N; ++i) rhs[static_cast<size_t>(row_lo(i, m))] = f_lo_m[static_cast<size_t>(i)].at(t, m);
      for (int i = 0; i < N; ++i)
        rhs[static_cast<size_t>(row_lo(i, M))] = ol[static_cast<size_t>(i)][static_cast<size_t>(t)];

      std::vector<cdouble> x = blocks_[static_cast<size_t>(t)]->solve(rhs);
      out.max_rel_residual =
          std::max(out.max_rel_residual, blocks_[static_cast<size_t>(t)]->relative_residual(x, rhs));

      for (int i = 0; i < N; ++i)
        for (int m = 0; m <= M; ++m) {
          su[static_cast<size_t>(i)].at(t, m) = x[static_cast<size_t>(col_up(i, m))];
          slo[static_cast<size_t>(i)].at(t, m) = x[static_cast<size_t>(col_lo(i, m))];
        }
      // nodal pressure reconstructed from the midpoint unknowns (2nd order)
      spi.at(t, 0) = 1.5 * x[static_cast<size_t>(col_pi(0))] - 0.5 * x[static_cast<size_t>(col_pi(1))];
      for (int m = 1; m < M; ++m)
        spi.at(t, m) =
            0.5 * (x[static_cast<size_t>(col_pi(m - 1))] + x[static_cast<size_t>(col_pi(m))]);
      spi.at(t, M) =
          1.5 * x[static_cast<size_t>(col_pi(M - 1))] - 0.5 * x[static_cast<size_t>(col_pi(M - 2))];
      h_modes[static_cast<size_t>(t)] = x[static_cast<size_t>(col_H())];
    }
    out.max_condition = max_condition();
    for (int i = 0; i < N; ++i) {
      out.u_up[i] = from_modes(su[static_cast<size_t>(i)]);
      out.u_lo[i] = from_modes(slo[static_cast<size_t>(i)]);
    }
    out.pi_lo = from_modes(spi);
    out.h = line_from_modes(g_, h_modes);
    return out;
  }

  // --- unknown ordering (kept band-friendly: upper strip from the outer wall
  // down to the interface, then the height, then the lower strip outward).
  // The pressure is staggered: pi unknown m lives at the normal midpoint
  // between lower nodes m and m+1, stored in the slot of node m. ---
  int n_unknowns() const {
    const int N = g_.N, M = g_.M_nrm;
    return N * (M + 1) + 1 + (N + 1) * M + N;
  }
  int col_up(int comp, int m) const { return (g_.M_nrm - m) * g_.N + comp; }
  int col_H() const { return g_.N * (g_.M_nrm + 1); }
  int col_lo(int comp, int m) const { return col_H() + 1 + m * (g_.N + 1) + comp; }
  int col_pi(int m) const { return col_lo(g_.N, m); }  // m < M

  // row layout mirrors the columns
  int row_up(int comp, int m) const { return col_up(comp, m); }          // m >= 1
  int row_stress_tan(int i) const { return col_up(i, 0); }               // i < N-1
  int row_T_plus() const { return col_up(g_.N - 1, 0); }
  int row_kin() const { return col_H(); }
  int row_slip(int i) const { return col_lo(i, 0); }                     // i < N-1
  int row_T_minus() const { return col_lo(g_.N - 1, 0); }
  int row_div(int m) const { return col_pi(m); }                         // m < M, at midpoint m+1/2
  int row_lo(int comp, int m) const { return col_lo(comp, m); }          // 1 <= m <= M

 private:
  Grid g_;
  MaterialSystem mat_;
  cdouble lambda_;
  std::vector<std::unique_ptr<BandedSystem>> blocks_;

  std::vector<Triplet> assemble_mode(int t) const {
    const int N = g_.N, M = g_.M_nrm;
    const double dx = g_.dx();
    const Vec kap = g_.kappa(t);
    const double k2 = g_.kappa2(t);
    const cdouble im(0.0, 1.0);
    const double mu_p = mat_.mu_star(Side::upper), mu_m = mat_.mu_star(Side::lower);
    const double lam_p = mat_.lambda_star_plus();
    const double rho_p = mat_.rho_star_plus, rho_m = mat_.rho_star_minus;
    const double sig_p = mat_.sigma_side(Side::upper), sig_m = mat_.sigma_side(Side::lower);

    std::vector<Triplet> a;
    a.reserve(static_cast<size_t>(n_unknowns()) * 12);
    auto add = [&](int r, int c, cdouble v) {
      if (v != cdouble{}) a.push_back({r, c, v});
    };

    // d/dx_N stencils in terms of node index, scaled by the signed step
    auto add_dN = [&](int r, Side s, auto col_of, int m, cdouble scale) {
      const double hs = side_sign(s) * dx;
      if (m == 0) {
        add(r, col_of(0), scale * (-3.0 / (2 * hs)));
        add(r, col_of(1), scale * (4.0 / (2 * hs)));
        add(r, col_of(2), scale * (-1.0 / (2 * hs)));
      } else if (m == M) {
        add(r, col_of(M), scale * (3.0 / (2 * hs)));
        add(r, col_of(M - 1), scale * (-4.0 / (2 * hs)));
        add(r, col_of(M - 2), scale * (1.0 / (2 * hs)));
      } else {
        add(r, col_of(m + 1), scale / (2 * hs));
        add(r, col_of(m - 1), -scale / (2 * hs));
      }
    };
    auto add_dNN = [&](int r, auto col_of, int m, cdouble scale) {
      // interior only
      add(r, col_of(m - 1), scale / (dx * dx));
      add(r, col_of(m), -2.0 * scale / (dx * dx));
      add(r, col_of(m + 1), scale / (dx * dx));
    };
    auto up_col = [&](int comp) { return [this, comp](int m) { return col_up(comp, m); }; };
    auto lo_col = [&](int comp) { return [this, comp](int m) { return col_lo(comp, m); }; };
    auto pi_col = [this](int m) { return col_pi(m); };

    // ---- upper strip: rho+ lambda u - (mu/2) Lap u - (lam - mu/2) grad div u
    for (int i = 0; i < N; ++i) {
      for (int m = 1; m < M; ++m) {
        const int r = row_up(i, m);
        add(r, col_up(i, m), rho_p * lambda_ + (mu_p / 2) * k2);
        add_dNN(r, up_col(i), m, -(mu_p / 2));
        const double lc = lam_p - mu_p / 2;
        for (int j = 0; j < N; ++j) {
          // -(lc) d_i d_j u_j
          if (i < N - 1 && j < N - 1)
            add(r, col_up(j, m), -lc * (im * kap[i]) * (im * kap[j]));
          else if (i < N - 1 && j == N - 1)
            add_dN(r, Side::upper, up_col(j), m, -lc * im * kap[i]);
          else if (i == N - 1 && j < N - 1)
            add_dN(r, Side::upper, up_col(j), m, -lc * im * kap[j]);
          else
            add_dNN(r, up_col(j), m, -lc);
        }
      }
      add(row_up(i, M), col_up(i, M), 1.0);  // outer Dirichlet
    }

    // ---- lower strip: rho- lambda u - (mu-/2)(Lap u + grad div u) + grad pi
    for (int i = 0; i < N; ++i) {
      for (int m = 1; m < M; ++m) {
        const int r = row_lo(i, m);
        add(r, col_lo(i, m), rho_m * lambda_ + (mu_m / 2) * k2);
        add_dNN(r, lo_col(i), m, -(mu_m / 2));
        for (int j = 0; j < N; ++j) {
          if (i < N - 1 && j < N - 1)
            add(r, col_lo(j, m), -(mu_m / 2) * (im * kap[i]) * (im * kap[j]));
          else if (i < N - 1 && j == N - 1)
            add_dN(r, Side::lower, lo_col(j), m, -(mu_m / 2) * im * kap[i]);
          else if (i == N - 1 && j < N - 1)
            add_dN(r, Side::lower, lo_col(j), m, -(mu_m / 2) * im * kap[j]);
          else
            add_dNN(r, lo_col(j), m, -(mu_m / 2));
        }
        // + d_i pi with the staggered pressure: averaging (tangential) or a
        // compact two-point difference (normal) over midpoints m-1/2, m+1/2
        if (i < N - 1) {
          add(r, pi_col(m - 1), 0.5 * im * kap[i]);
          add(r, pi_col(m), 0.5 * im * kap[i]);
        } else {
          const double hs = side_sign(Side::lower) * dx;
          add(r, pi_col(m), 1.0 / hs);
          add(r, pi_col(m - 1), -1.0 / hs);
        }
      }
      add(row_lo(i, M), col_lo(i, M), 1.0);  // outer Dirichlet
    }

    // ---- divergence rows on the lower strip, collocated at midpoints m+1/2
    for (int m = 0; m < M; ++m) {
      const int r = row_div(m);
      const double hs = side_sign(Side::lower) * dx;
      for (int j = 0; j < N - 1; ++j) {
        add(r, col_lo(j, m), 0.5 * im * kap[j]);
        add(r, col_lo(j, m + 1), 0.5 * im * kap[j]);
      }
      add(r, col_lo(N - 1, m + 1), 1.0 / hs);
      add(r, col_lo(N - 1, m), -1.0 / hs);
    }

    // ---- interface rows at x_N = 0
    // tangential stress: mu- D_iN(u-)| - mu+ D_iN(u+)| = g_i
    for (int i = 0; i < N - 1; ++i) {
      const int r = row_stress_tan(i);
      add(r, col_lo(N - 1, 0), (mu_m / 2) * im * kap[i]);
      add_dN(r, Side::lower, lo_col(i), 0, mu_m / 2);
      add(r, col_up(N - 1, 0), -(mu_p / 2) * im * kap[i]);
      add_dN(r, Side::upper, up_col(i), 0, -(mu_p / 2));
    }
    // T+ : mu+ dN u+N + (lam+ - mu+) div u+ + sig+ |k|^2 H = T+ data
    {
      const int r = row_T_plus();
      add_dN(r, Side::upper, up_col(N - 1), 0, mu_p);
      for (int j = 0; j < N - 1; ++j) add(r, col_up(j, 0), (lam_p - mu_p) * im * kap[j]);
      add_dN(r, Side::upper, up_col(N - 1), 0, lam_p - mu_p);
      add(r, col_H(), sig_p * k2);
    }
    // T- : mu- dN u-N - pi| + sig- |k|^2 H = T- data
    {
      const int r = row_T_minus();
      add_dN(r, Side::lower, lo_col(N - 1), 0, mu_m);
      // interface pressure extrapolated from the first two midpoints
      add(r, col_pi(0), -1.5);
      add(r, col_pi(1), 0.5);
      add(r, col_H(), sig_m * k2);
    }
    // slip: u-i| - u+i| = K_i
    for (int i = 0; i < N - 1; ++i) {
      add(row_slip(i), col_lo(i, 0), 1.0);
      add(row_slip(i), col_up(i, 0), -1.0);
    }
    // kinematic: lambda H - rho-/(rho- - rho+) u-N| + rho+/(rho- - rho+) u+N| = d
    {
      const int r = row_kin();
      add(r, col_H(), lambda_);
      add(r, col_lo(N - 1, 0), -rho_m / (rho_m - rho_p));
      add(r, col_up(N - 1, 0), rho_p / (rho_m - rho_p));
    }
    return a;
  }
};

// Single-sided normal-stress data from the paired jump data:
// T_pm = sig_pm Lap' H + rho*- rho*+ / (rho*- - rho*+) (rho*mp^{-1} G_N - G_{N+1}).
// (The Lap' H part is carried implicitly by the solver rows; this helper
// returns only the data part.)
struct TractionSplit {
  LineField T_minus, T_plus;
};
inline TractionSplit traction_split(const MaterialSystem& mat, const LineField& G_N,
                                    const LineField& G_N1) {
  const double rm = mat.rho_star_minus, rp = mat.rho_star_plus;
  const double fac = rm * rp / (rm - rp);
  TractionSplit out{LineField(G_N.g), LineField(G_N.g)};
  for (int t = 0; t < G_N.g.n_tan(); ++t) {
    out.T_minus.at(t) = fac * (G_N.at(t) / rp - G_N1.at(t));
    out.T_plus.at(t) = fac * (G_N.at(t) / rm - G_N1.at(t));
  }
  return out;
}

// Fold the previous time level into resolvent data so that a solve at
// lambda = 1/dt is exactly one implicit Euler step.
inline void apply_time_level(StokesData& data, const MaterialSystem& mat, const VecField& u_up_n,
                             const VecField& u_lo_n, const LineField& h_n, double dt) {
  const int N = data.f_up[0].g.N;
  for (int i = 0; i < N; ++i) {
    for (size_t n = 0; n < data.f_up[i].a.size(); ++n)
      data.f_up[i].a[n] += (mat.rho_star_plus / dt) * u_up_n[i].a[n];
    for (size_t n = 0; n < data.f_lo[i].a.size(); ++n)
      data.f_lo[i].a[n] += (mat.rho_star_minus / dt) * u_lo_n[i].a[n];
  }
  for (size_t n = 0; n < data.d_kin.a.size(); ++n) data.d_kin.a[n] += h_n.a[n] / dt;
}

}  // namespace bps
