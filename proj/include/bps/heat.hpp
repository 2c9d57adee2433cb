#pragma once

#include <memory>

#include "bps/banded.hpp"
#include "bps/constitutive.hpp"
#include "bps/grid.hpp"

namespace bps {

// Data for one resolvent solve of the two-phase heat interface problem:
// rho* kappa* lambda theta - d* Lap theta = f on each strip,
// [theta] = g_jump and d*- dN theta- - d*+ dN theta+ = g_flux at x_N = 0,
// Dirichlet values on the outer walls.
struct HeatData {
  Field f_up, f_lo;
  LineField g_jump, g_flux;
  LineField theta_up_outer, theta_lo_outer;

  explicit HeatData(const Grid& g)
      : f_up(g, Side::upper),
        f_lo(g, Side::lower),
        g_jump(g),
        g_flux(g),
        theta_up_outer(g),
        theta_lo_outer(g) {}
};

struct HeatSolution {
  Field theta_up, theta_lo;
  double max_condition = 0.0;
  double max_rel_residual = 0.0;

  explicit HeatSolution(const Grid& g) : theta_up(g, Side::upper), theta_lo(g, Side::lower) {}
};

class HeatSolver {
 public:
  HeatSolver(const Grid& grid, const MaterialSystem& mat, cdouble lambda)
      : g_(grid), mat_(mat), lambda_(lambda) {
    g_.validate();
    for (int t = 0; t < g_.n_tan(); ++t)
      blocks_.push_back(std::make_unique<BandedSystem>(n_unknowns(), assemble_mode(t)));
  }

  cdouble lambda() const { return lambda_; }
  double mode_condition(int t) const { return blocks_[static_cast<size_t>(t)]->condition(); }
  double max_condition() const {
    double c = 0;
    for (const auto& b : blocks_) c = std::max(c, b->condition());
    return c;
  }

  HeatSolution solve(const HeatData& data) const {
    const int M = g_.M_nrm;
    SpectralField fu = to_modes(data.f_up), fl = to_modes(data.f_lo);
    auto gj = line_to_modes(data.g_jump), gf = line_to_modes(data.g_flux);
    auto ou = line_to_modes(data.theta_up_outer), ol = line_to_modes(data.theta_lo_outer);

    HeatSolution out(g_);
    SpectralField su(g_, Side::upper), sl(g_, Side::lower);
    for (int t = 0; t < g_.n_tan(); ++t) {
      std::vector<cdouble> rhs(static_cast<size_t>(n_unknowns()), cdouble{});
      rhs[static_cast<size_t>(col_up(M))] = ou[static_cast<size_t>(t)];
      for (int m = 1; m < M; ++m) rhs[static_cast<size_t>(col_up(m))] = fu.at(t, m);
      rhs[static_cast<size_t>(col_up(0))] = gj[static_cast<size_t>(t)];   // continuity row
      rhs[static_cast<size_t>(col_lo(0))] = gf[static_cast<size_t>(t)];   // flux row
      for (int m = 1; m < M; ++m) rhs[static_cast<size_t>(col_lo(m))] = fl.at(t, m);
      rhs[static_cast<size_t>(col_lo(M))] = ol[static_cast<size_t>(t)];

      std::vector<cdouble> x = blocks_[static_cast<size_t>(t)]->solve(rhs);
      out.max_rel_residual =
          std::max(out.max_rel_residual, blocks_[static_cast<size_t>(t)]->relative_residual(x, rhs));
      for (int m = 0; m <= M; ++m) {
        su.at(t, m) = x[static_cast<size_t>(col_up(m))];
        sl.at(t, m) = x[static_cast<size_t>(col_lo(m))];
      }
    }
    out.theta_up = from_modes(su);
    out.theta_lo = from_modes(sl);
    out.max_condition = max_condition();
    return out;
  }

  int n_unknowns() const { return 2 * (g_.M_nrm + 1); }
  int col_up(int m) const { return g_.M_nrm - m; }
  int col_lo(int m) const { return g_.M_nrm + 1 + m; }

 private:
  Grid g_;
  MaterialSystem mat_;
  cdouble lambda_;
  std::vector<std::unique_ptr<BandedSystem>> blocks_;

  std::vector<Triplet> assemble_mode(int t) const {
    const int M = g_.M_nrm;
    const double dx = g_.dx(), k2 = g_.kappa2(t);
    std::vector<Triplet> a;
    auto add = [&](int r, int c, cdouble v) {
      if (v != cdouble{}) a.push_back({r, c, v});
    };
    auto add_dN0 = [&](int r, Side s, auto col_of, cdouble scale) {
      const double hs = side_sign(s) * dx;
      add(r, col_of(0), scale * (-3.0 / (2 * hs)));
      add(r, col_of(1), scale * (4.0 / (2 * hs)));
      add(r, col_of(2), scale * (-1.0 / (2 * hs)));
    };
    auto up = [this](int m) { return col_up(m); };
    auto lo = [this](int m) { return col_lo(m); };

    for (Side s : {Side::upper, Side::lower}) {
      const double rk = mat_.rho_star(s) * mat_.kappa_star(s);
      const double d = mat_.d_star(s);
      auto col = (s == Side::upper) ? std::function<int(int)>(up) : std::function<int(int)>(lo);
      for (int m = 1; m < M; ++m) {
        const int r = col(m);
        add(r, col(m), rk * lambda_ + d * k2 + 2.0 * d / (dx * dx));
        add(r, col(m - 1), -d / (dx * dx));
        add(r, col(m + 1), -d / (dx * dx));
      }
      add(col(M), col(M), 1.0);  // outer Dirichlet
    }
    // continuity: theta-| - theta+| = g_jump
    add(col_up(0), col_lo(0), 1.0);
    add(col_up(0), col_up(0), -1.0);
    // flux: d- dN theta-| - d+ dN theta+| = g_flux
    add_dN0(col_lo(0), Side::lower, lo, mat_.d_star(Side::lower));
    add_dN0(col_lo(0), Side::upper, up, -mat_.d_star(Side::upper));
    return a;
  }
};

// Fold the previous time level into resolvent data: a solve at lambda = 1/dt
// is then one implicit Euler step.
inline void apply_time_level(HeatData& data, const MaterialSystem& mat, const Field& theta_up_n,
                             const Field& theta_lo_n, double dt) {
  const double cu = mat.rho_star(Side::upper) * mat.kappa_star(Side::upper) / dt;
  const double cl = mat.rho_star(Side::lower) * mat.kappa_star(Side::lower) / dt;
  for (size_t n = 0; n < data.f_up.a.size(); ++n) data.f_up.a[n] += cu * theta_up_n.a[n];
  for (size_t n = 0; n < data.f_lo.a.size(); ++n) data.f_lo.a[n] += cl * theta_lo_n.a[n];
}

}  // namespace bps
