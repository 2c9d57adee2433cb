#pragma once

#include <array>

#include "bps/grid.hpp"

namespace bps {

// N x N matrix of fields on one strip, row-major comp[i*N+j].
struct TensorField {
  Grid g;
  Side side = Side::upper;
  std::vector<Field> comp;

  TensorField() = default;
  TensorField(const Grid& grid, Side s) : g(grid), side(s) {
    comp.reserve(static_cast<size_t>(grid.N) * grid.N);
    for (int i = 0; i < grid.N * grid.N; ++i) comp.emplace_back(grid, s);
  }
  Field& at(int i, int j) { return comp[static_cast<size_t>(i) * g.N + j]; }
  const Field& at(int i, int j) const { return comp[static_cast<size_t>(i) * g.N + j]; }
};

// Symmetric strain D(u) = (grad u + grad u^T)/2 with spectral tangential and
// finite-difference normal derivatives.
inline TensorField strain(const VecField& u) {
  const Grid& g = u[0].g;
  TensorField D(g, u[0].side);
  std::vector<Field> grads;  // grads[i*N+j] = d_j u_i
  grads.reserve(static_cast<size_t>(g.N) * g.N);
  for (int i = 0; i < g.N; ++i)
    for (int j = 0; j < g.N; ++j) grads.push_back(deriv(u[i], j));
  for (int i = 0; i < g.N; ++i)
    for (int j = 0; j < g.N; ++j) {
      Field& d = D.at(i, j);
      const Field& a = grads[static_cast<size_t>(i) * g.N + j];
      const Field& b = grads[static_cast<size_t>(j) * g.N + i];
      for (size_t n = 0; n < d.a.size(); ++n) d.a[n] = 0.5 * (a.a[n] + b.a[n]);
    }
  return D;
}

inline Field divergence(const VecField& u) {
  const Grid& g = u[0].g;
  Field d(g, u[0].side);
  for (int j = 0; j < g.N; ++j) d += deriv(u[j], j);
  return d;
}

// (Div G)_i = sum_j d_j G_ij
inline VecField div_tensor(const TensorField& G) {
  VecField out(G.g, G.side);
  for (int i = 0; i < G.g.N; ++i)
    for (int j = 0; j < G.g.N; ++j) out[i] += deriv(G.at(i, j), j);
  return out;
}

// The flattening extension of the interface height and every coefficient the
// transformed problem needs. Per tangential mode the extension is
// Hhat(k, x_N) = hhat(k) exp(-omega_k |x_N|), omega_k = sqrt(1 + |kappa|^2),
// which solves (1 - Laplace)H = 0 on each open half-space and matches h at
// x_N = 0. Normal derivatives are analytic per mode, never differenced.
struct ExtendedHeight {
  Grid g;
  LineField h;
  LineField dth;  // d/dt h driving the time coefficient; zero if not supplied

  struct Half {
    Field H;                               // extension
    std::array<Field, kMaxDim - 1> Ht;     // tangential derivatives H_j
    Field HN;                              // normal derivative H_N
    Field HNN;                             // analytic second normal derivative
    Field H0;                              // extension of dth (time derivative)
    Field one_plus_HN;                     // 1 + H_N
    std::array<Field, kMaxDim + 1> K;      // K[0]=K_0, K[1..N-1] tangential, K[N]=K_N
  };
  Half up, lo;
  double gate = 1.0;  // min over both strips of 1 + H_N

  const Half& half(Side s) const { return s == Side::upper ? up : lo; }

  // K_j as used in the chain rule, j = 1..N mapped to index j; K_0 at index 0.
  const Field& K(Side s, int j) const { return half(s).K[static_cast<size_t>(j)]; }

  Mat Q_at(Side s, int t, int m) const {
    const Half& hh = half(s);
    Mat Q(g.N);
    for (int i = 0; i < g.N - 1; ++i) {
      Q(i, i) = 1.0;
      Q(i, g.N - 1) = -hh.K[static_cast<size_t>(i + 1)].at(t, m);
    }
    Q(g.N - 1, g.N - 1) = 1.0 / hh.one_plus_HN.at(t, m);
    return Q;
  }
  Mat Q1_at(Side s, int t, int m) const {
    const Half& hh = half(s);
    Mat Q1(g.N);
    for (int i = 0; i < g.N - 1; ++i) Q1(i, g.N - 1) = hh.Ht[static_cast<size_t>(i)].at(t, m);
    Q1(g.N - 1, g.N - 1) = hh.HN.at(t, m);
    return Q1;
  }
  Mat Qinv_at(Side s, int t, int m) const { return Mat::identity(g.N) + Q1_at(s, t, m); }
};

namespace detail {

inline void build_half(const Grid& g, const std::vector<cdouble>& h_modes,
                       const std::vector<cdouble>& dth_modes, Side side,
                       ExtendedHeight::Half& out) {
  out.H = Field(g, side);
  for (auto& f : out.Ht) f = Field(g, side);
  out.HN = Field(g, side);
  out.HNN = Field(g, side);
  out.H0 = Field(g, side);
  out.one_plus_HN = Field(g, side);

  SpectralField sH(g, side), sHN(g, side), sHNN(g, side), sH0(g, side);
  std::array<SpectralField, kMaxDim - 1> sHt;
  for (int j = 0; j < g.N - 1; ++j) sHt[static_cast<size_t>(j)] = SpectralField(g, side);

  // d/dx_N of exp(-omega |x_N|): -omega on the upper strip, +omega below.
  const double sgn = (side == Side::upper) ? -1.0 : 1.0;
  for (int t = 0; t < g.n_tan(); ++t) {
    const double omega = std::sqrt(1.0 + g.kappa2(t));
    const Vec kap = g.kappa(t);
    for (int m = 0; m < g.nn(); ++m) {
      const double decay = std::exp(-omega * m * g.dx());
      const cdouble Hk = h_modes[static_cast<size_t>(t)] * decay;
      sH.at(t, m) = Hk;
      sHN.at(t, m) = sgn * omega * Hk;
      sHNN.at(t, m) = omega * omega * Hk;
      for (int j = 0; j < g.N - 1; ++j)
        sHt[static_cast<size_t>(j)].at(t, m) = cdouble(0.0, kap[j]) * Hk;
      sH0.at(t, m) = dth_modes[static_cast<size_t>(t)] * decay;
    }
  }
  out.H = from_modes(sH);
  out.HN = from_modes(sHN);
  out.HNN = from_modes(sHNN);
  out.H0 = from_modes(sH0);
  for (int j = 0; j < g.N - 1; ++j) out.Ht[static_cast<size_t>(j)] = from_modes(sHt[static_cast<size_t>(j)]);

  for (size_t i = 0; i < out.H.a.size(); ++i) out.one_plus_HN.a[i] = 1.0 + out.HN.a[i];

  for (auto& f : out.K) f = Field(g, side);
  for (size_t i = 0; i < out.H.a.size(); ++i) {
    const double denom = out.one_plus_HN.a[i];
    out.K[0].a[i] = out.H0.a[i] / denom;
    for (int j = 0; j < g.N - 1; ++j)
      out.K[static_cast<size_t>(j + 1)].a[i] = out.Ht[static_cast<size_t>(j)].a[i] / denom;
    out.K[static_cast<size_t>(g.N)].a[i] = out.HN.a[i] / denom;
  }
}

}  // namespace detail

inline ExtendedHeight extend_height(const Grid& g, const LineField& h,
                                    const LineField* dth = nullptr) {
  ExtendedHeight eh;
  eh.g = g;
  eh.h = h;
  eh.dth = dth ? *dth : LineField(g);
  auto h_modes = line_to_modes(h);
  auto dth_modes = line_to_modes(eh.dth);
  detail::build_half(g, h_modes, dth_modes, Side::upper, eh.up);
  detail::build_half(g, h_modes, dth_modes, Side::lower, eh.lo);
  eh.gate = std::min(
      [&] {
        double v = std::numeric_limits<double>::infinity();
        for (double x : eh.up.one_plus_HN.a) v = std::min(v, x);
        return v;
      }(),
      [&] {
        double v = std::numeric_limits<double>::infinity();
        for (double x : eh.lo.one_plus_HN.a) v = std::min(v, x);
        return v;
      }());
  return eh;
}

inline bool transform_gate(const ExtendedHeight& eh) { return eh.gate >= 0.5; }

// Pulled-back spatial derivative: d_j f -> d_j fhat - K_j d_N fhat
// (j indexed 0..N-1, the last being the normal direction, where the same
// formula collapses to d_N fhat / (1 + H_N)).
inline Field pullback_deriv(const Field& f, const ExtendedHeight& eh, int j) {
  Field out = deriv(f, j);
  Field dn = deriv_nrm(f);
  const Field& Kj = eh.K(f.side, j + 1);
  for (size_t i = 0; i < out.a.size(); ++i) out.a[i] -= Kj.a[i] * dn.a[i];
  return out;
}

// Pulled-back time derivative: d_t f -> dtf_hat - K_0 d_N fhat.
inline Field pullback_time(const Field& dtf_hat, const Field& f, const ExtendedHeight& eh) {
  Field out = dtf_hat;
  Field dn = deriv_nrm(f);
  const Field& K0 = eh.K(f.side, 0);
  for (size_t i = 0; i < out.a.size(); ++i) out.a[i] -= K0.a[i] * dn.a[i];
  return out;
}

struct DivTransforms {
  Field V_div;       // -sum_j K_j d_N u_j
  // sum_{j<N} (H_j d_N u_j - H_N d_j u_j); the sign is fixed by requiring
  // f_minus = div ff_minus, which pins all three forms of the transformed
  // divergence identity to each other.
  Field f_minus;
  VecField ff_minus; // -(H_N u_1, ..., H_N u_{N-1}, -sum_{j<N} H_j u_j)
  double max_disagreement = 0.0;  // across the three equivalent forms
};

inline DivTransforms divergence_transforms(const VecField& u, const ExtendedHeight& eh) {
  const Grid& g = u[0].g;
  const Side side = u[0].side;
  const ExtendedHeight::Half& hh = eh.half(side);
  DivTransforms out;
  out.V_div = Field(g, side);
  out.f_minus = Field(g, side);
  out.ff_minus = VecField(g, side);

  std::vector<Field> dn(static_cast<size_t>(g.N));
  for (int j = 0; j < g.N; ++j) dn[static_cast<size_t>(j)] = deriv_nrm(u[j]);

  for (int j = 0; j < g.N; ++j) {
    const Field& Kj = eh.K(side, j + 1);
    for (size_t i = 0; i < out.V_div.a.size(); ++i)
      out.V_div.a[i] -= Kj.a[i] * dn[static_cast<size_t>(j)].a[i];
  }
  for (int j = 0; j < g.N - 1; ++j) {
    Field dj = deriv_tan(u[j], j);
    const Field& Hj = hh.Ht[static_cast<size_t>(j)];
    for (size_t i = 0; i < out.f_minus.a.size(); ++i)
      out.f_minus.a[i] += Hj.a[i] * dn[static_cast<size_t>(j)].a[i] - hh.HN.a[i] * dj.a[i];
  }
  for (int j = 0; j < g.N - 1; ++j)
    for (size_t i = 0; i < out.ff_minus[j].a.size(); ++i)
      out.ff_minus[j].a[i] = -hh.HN.a[i] * u[j].a[i];
  for (int j = 0; j < g.N - 1; ++j) {
    const Field& Hj = hh.Ht[static_cast<size_t>(j)];
    for (size_t i = 0; i < out.ff_minus[g.N - 1].a.size(); ++i)
      out.ff_minus[g.N - 1].a[i] += Hj.a[i] * u[j].a[i];
  }

  // the three expressions of the transformed divergence must agree
  Field divu = divergence(u);
  Field div_ff = divergence(out.ff_minus);
  for (size_t i = 0; i < divu.a.size(); ++i) {
    const double a = divu.a[i] + out.V_div.a[i];
    const double b = (divu.a[i] - out.f_minus.a[i]) / hh.one_plus_HN.a[i];
    const double c = (divu.a[i] - div_ff.a[i]) / hh.one_plus_HN.a[i];
    out.max_disagreement = std::max({out.max_disagreement, std::abs(a - b), std::abs(a - c)});
  }
  return out;
}

// Strain correction V_D so that D(u) + V_D equals the pulled-back strain:
// V_D_ij = -(K_i d_N u_j + K_j d_N u_i)/2 with K indexed 1..N.
inline TensorField strain_correction(const VecField& u, const ExtendedHeight& eh) {
  const Grid& g = u[0].g;
  const Side side = u[0].side;
  TensorField V(g, side);
  std::vector<Field> dn(static_cast<size_t>(g.N));
  for (int j = 0; j < g.N; ++j) dn[static_cast<size_t>(j)] = deriv_nrm(u[j]);
  for (int i = 0; i < g.N; ++i)
    for (int j = 0; j < g.N; ++j) {
      const Field& Ki = eh.K(side, i + 1);
      const Field& Kj = eh.K(side, j + 1);
      Field& v = V.at(i, j);
      for (size_t n = 0; n < v.a.size(); ++n)
        v.a[n] = -0.5 * (Ki.a[n] * dn[static_cast<size_t>(j)].a[n] +
                         Kj.a[n] * dn[static_cast<size_t>(i)].a[n]);
    }
  return V;
}

// Divergence correction applied row-wise to a tensor:
// V_Div(G)_i = -sum_j K_j d_N G_ij.
inline VecField vdiv_tensor(const TensorField& G, const ExtendedHeight& eh) {
  VecField out(G.g, G.side);
  for (int i = 0; i < G.g.N; ++i)
    for (int j = 0; j < G.g.N; ++j) {
      Field dn = deriv_nrm(G.at(i, j));
      const Field& Kj = eh.K(G.side, j + 1);
      for (size_t n = 0; n < out[i].a.size(); ++n) out[i].a[n] -= Kj.a[n] * dn.a[n];
    }
  return out;
}

enum class CurvatureVariant { as_written, classical };

struct NormalCurvature {
  std::array<LineField, kMaxDim> n;  // unit normal components on the line
  LineField curvature;               // H_Gamma
};

// n = (-grad' h, 1)/sqrt(1+|grad' h|^2); curvature from the graph formula,
// either with (1+|grad' h|^2)^{-1} inside the tangential divergence
// (as_written) or the classical power -1/2 (classical).
inline NormalCurvature normal_and_curvature(const Grid& g, const LineField& h,
                                            CurvatureVariant variant = CurvatureVariant::as_written) {
  NormalCurvature out;
  std::array<LineField, kMaxDim - 1> grad;
  LineField grad2(g);
  for (int j = 0; j < g.N - 1; ++j) {
    grad[static_cast<size_t>(j)] = line_deriv_tan(h, j);
    for (int t = 0; t < g.n_tan(); ++t) {
      double v = grad[static_cast<size_t>(j)].at(t);
      grad2.at(t) += v * v;
    }
  }
  for (int j = 0; j < g.N; ++j) out.n[static_cast<size_t>(j)] = LineField(g);
  for (int t = 0; t < g.n_tan(); ++t) {
    const double den = std::sqrt(1.0 + grad2.at(t));
    for (int j = 0; j < g.N - 1; ++j)
      out.n[static_cast<size_t>(j)].at(t) = -grad[static_cast<size_t>(j)].at(t) / den;
    out.n[static_cast<size_t>(g.N - 1)].at(t) = 1.0 / den;
  }
  const double p = (variant == CurvatureVariant::as_written) ? 1.0 : 0.5;
  out.curvature = LineField(g);
  for (int j = 0; j < g.N - 1; ++j) {
    LineField scaled(g);
    for (int t = 0; t < g.n_tan(); ++t)
      scaled.at(t) = grad[static_cast<size_t>(j)].at(t) / std::pow(1.0 + grad2.at(t), p);
    out.curvature += line_deriv_tan(scaled, j);
  }
  return out;
}

}  // namespace bps
