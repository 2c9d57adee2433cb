#pragma once

#include <array>
#include <functional>

#include "bps/grid.hpp"
#include "bps/height.hpp"

namespace bps {

// C^1 reflection extension of an upper-strip field to the lower strip:
// Ext[f](x', x_N) = 3 f(x', -x_N) - 2 f(x', -2 x_N) for x_N < 0.
// On the uniform grid -2 x_N lands on node 2m when 2m <= M_nrm; deeper
// arguments use constant continuation of the outermost value.
inline Field lions_extend(const Field& f) {
  if (f.side != Side::upper) throw SimError("lions_extend: expects an upper-strip field");
  const Grid& g = f.g;
  Field out(g, Side::lower);
  for (int t = 0; t < g.n_tan(); ++t)
    for (int m = 0; m < g.nn(); ++m) {
      const int m2 = std::min(2 * m, g.M_nrm);
      out.at(t, m) = 3.0 * f.at(t, m) - 2.0 * f.at(t, m2);
    }
  return out;
}

// Scalar samples over the joined strip x_N in [-L_nrm, L_nrm], node-centered,
// slot s = M_nrm + m for the upper strip and M_nrm - m below. Provides cubic
// (Catmull-Rom) interpolation, periodic tangentially and clamped in x_N.
struct DoubleStrip {
  Grid g;
  std::vector<double> a;  // a[t*(2*M_nrm+1) + s]

  DoubleStrip() = default;
  explicit DoubleStrip(const Grid& grid)
      : g(grid), a(static_cast<size_t>(grid.n_tan()) * (2 * grid.M_nrm + 1), 0.0) {}
  DoubleStrip(const Field& lower, const Field& upper) : DoubleStrip(lower.g) {
    if (upper.side != Side::upper || lower.side != Side::lower)
      throw SimError("double strip: wrong sides");
    for (int t = 0; t < g.n_tan(); ++t)
      for (int m = 0; m <= g.M_nrm; ++m) {
        at(t, g.M_nrm + m) = upper.at(t, m);
        at(t, g.M_nrm - m) = lower.at(t, m);
      }
    // the duplicated interface rows must agree; keep the upper value
    for (int t = 0; t < g.n_tan(); ++t) at(t, g.M_nrm) = upper.at(t, 0);
  }

  int nslots() const { return 2 * g.M_nrm + 1; }
  double& at(int t, int s) { return a[static_cast<size_t>(t) * nslots() + s]; }
  double at(int t, int s) const { return a[static_cast<size_t>(t) * nslots() + s]; }

  static double catmull(double pm1, double p0, double p1, double p2, double u) {
    return 0.5 * ((2.0 * p0) + (-pm1 + p1) * u + (2.0 * pm1 - 5.0 * p0 + 4.0 * p1 - p2) * u * u +
                  (-pm1 + 3.0 * p0 - 3.0 * p1 + p2) * u * u * u);
  }

  // value at node (tangential multi-index clamped periodically, slot clamped)
  double node(const std::array<int, kMaxDim - 1>& ti, int s) const {
    const int M = g.M_tan;
    int t;
    if (g.N == 2) {
      t = ((ti[0] % M) + M) % M;
    } else {
      int a0 = ((ti[0] % M) + M) % M, a1 = ((ti[1] % M) + M) % M;
      t = a0 * M + a1;
    }
    return at(t, std::clamp(s, 0, nslots() - 1));
  }

  double sample(const Vec& x) const {
    // normal coordinate -> fractional slot
    const double sf = x[g.N - 1] / g.dx() + g.M_nrm;
    const double sc = std::clamp(sf, 0.0, static_cast<double>(nslots() - 1));
    const int s0 = std::clamp(static_cast<int>(std::floor(sc)), 0, nslots() - 2);
    const double us = sc - s0;

    std::array<double, kMaxDim - 1> uf{};
    std::array<int, kMaxDim - 1> tf{};
    for (int j = 0; j < g.N - 1; ++j) {
      const double r = x[j] / g.d_tan();
      const double fl = std::floor(r);
      tf[static_cast<size_t>(j)] = static_cast<int>(fl);
      uf[static_cast<size_t>(j)] = r - fl;
    }

    auto tan_interp = [&](int s) {
      if (g.N == 2) {
        std::array<int, kMaxDim - 1> ti{};
        double p[4];
        for (int i = -1; i <= 2; ++i) {
          ti[0] = tf[0] + i;
          p[i + 1] = node(ti, s);
        }
        return catmull(p[0], p[1], p[2], p[3], uf[0]);
      }
      double q[4];
      for (int i = -1; i <= 2; ++i) {
        double p[4];
        for (int k = -1; k <= 2; ++k) {
          std::array<int, kMaxDim - 1> ti{tf[0] + i, tf[1] + k};
          p[k + 1] = node(ti, s);
        }
        q[i + 1] = catmull(p[0], p[1], p[2], p[3], uf[1]);
      }
      return catmull(q[0], q[1], q[2], q[3], uf[0]);
    };

    double p[4];
    for (int i = -1; i <= 2; ++i) p[i + 1] = tan_interp(s0 + i);
    return catmull(p[0], p[1], p[2], p[3], us);
  }

  // sup of all first finite-difference quotients (gradient magnitude proxy)
  double grad_sup() const {
    double m = 0;
    const int S = nslots();
    for (int t = 0; t < g.n_tan(); ++t) {
      for (int s = 0; s + 1 < S; ++s)
        m = std::max(m, std::abs(at(t, s + 1) - at(t, s)) / g.dx());
      // tangential neighbors (first axis; second axis analogous for N=3)
      int tn = (g.N == 2) ? (t + 1) % g.M_tan
                          : ((t / g.M_tan + 1) % g.M_tan) * g.M_tan + t % g.M_tan;
      for (int s = 0; s < S; ++s)
        m = std::max(m, std::abs(at(tn, s) - at(t, s)) / g.d_tan());
      if (g.N == 3) {
        int tm = (t / g.M_tan) * g.M_tan + (t % g.M_tan + 1) % g.M_tan;
        for (int s = 0; s < S; ++s)
          m = std::max(m, std::abs(at(tm, s) - at(t, s)) / g.d_tan());
      }
    }
    return m;
  }
};

// Velocity (and divergence-source) samples at two stored time levels with
// linear interpolation in between.
struct TwoLevelSampler {
  Grid g;
  double t0 = 0.0, t1 = 1.0;
  std::array<DoubleStrip, kMaxDim> v0, v1;  // velocity components
  DoubleStrip g0, g1;                       // divergence source

  Vec velocity(const Vec& x, double t) const {
    const double w = (t1 > t0) ? std::clamp((t - t0) / (t1 - t0), 0.0, 1.0) : 0.0;
    Vec out(g.N);
    for (int i = 0; i < g.N; ++i)
      out[i] = (1.0 - w) * v0[static_cast<size_t>(i)].sample(x) +
               w * v1[static_cast<size_t>(i)].sample(x);
    return out;
  }
  double source(const Vec& x, double t) const {
    const double w = (t1 > t0) ? std::clamp((t - t0) / (t1 - t0), 0.0, 1.0) : 0.0;
    return (1.0 - w) * g0.sample(x) + w * g1.sample(x);
  }
  double grad_sup() const {
    double m = 0;
    for (int i = 0; i < g.N; ++i)
      m = std::max({m, v0[static_cast<size_t>(i)].grad_sup(), v1[static_cast<size_t>(i)].grad_sup()});
    return m;
  }
};

// One classical 4th-order step of the augmented system
// dx/ds = v(x, s), dA/ds = src(x, s), from s to s + hs (hs may be negative).
inline void rk4_step(const TwoLevelSampler& f, Vec& x, double& A, double s, double hs) {
  Vec k1 = f.velocity(x, s);
  double a1 = f.source(x, s);
  Vec x2 = x + (hs / 2) * k1;
  Vec k2 = f.velocity(x2, s + hs / 2);
  double a2 = f.source(x2, s + hs / 2);
  Vec x3 = x + (hs / 2) * k2;
  Vec k3 = f.velocity(x3, s + hs / 2);
  double a3 = f.source(x3, s + hs / 2);
  Vec x4 = x + hs * k3;
  Vec k4 = f.velocity(x4, s + hs);
  double a4 = f.source(x4, s + hs);
  x += (hs / 6) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  A += (hs / 6) * (a1 + 2 * a2 + 2 * a3 + a4);
}

// Flow map sampled on double-strip nodes, stored as displacements so
// tangential periodicity survives interpolation and differencing.
// backward: node xi at time t1 -> its foot at t0 (and the source integral
// accumulated forward along that characteristic). forward: node eta at t0 ->
// its position at t1.
struct FlowMap {
  Grid g;
  double t0 = 0.0, t1 = 0.0;
  std::array<DoubleStrip, kMaxDim> back_disp;  // eta - xi
  DoubleStrip A;                               // source integral along the curve
  std::array<DoubleStrip, kMaxDim> fwd_disp;   // xi - eta

  Vec node_pos(int t, int s) const {
    Vec x = g.tan_coord(t);
    x[g.N - 1] = (s - g.M_nrm) * g.dx();
    return x;
  }
  Vec backward(const Vec& xi) const {
    Vec out = xi;
    for (int i = 0; i < g.N; ++i) out[i] += back_disp[static_cast<size_t>(i)].sample(xi);
    return out;
  }
  Vec forward(const Vec& eta) const {
    Vec out = eta;
    for (int i = 0; i < g.N; ++i) out[i] += fwd_disp[static_cast<size_t>(i)].sample(eta);
    return out;
  }
  double A_at(const Vec& xi) const { return A.sample(xi); }

  // Minimum finite-difference Jacobian determinant of the forward map
  // (bijectivity monitor).
  double min_forward_jacobian() const {
    const int S = 2 * g.M_nrm + 1;
    double mind = std::numeric_limits<double>::infinity();
    auto comp = [&](int i, int t, int s) {
      return fwd_disp[static_cast<size_t>(i)].at(t, s);
    };
    for (int t = 0; t < g.n_tan(); ++t)
      for (int s = 0; s < S; ++s) {
        Mat J = Mat::identity(g.N);
        // tangential derivative (first axis; periodic central)
        for (int j = 0; j < g.N - 1; ++j) {
          int tp, tm;
          if (g.N == 2) {
            tp = (t + 1) % g.M_tan;
            tm = (t + g.M_tan - 1) % g.M_tan;
          } else if (j == 0) {
            tp = ((t / g.M_tan + 1) % g.M_tan) * g.M_tan + t % g.M_tan;
            tm = ((t / g.M_tan + g.M_tan - 1) % g.M_tan) * g.M_tan + t % g.M_tan;
          } else {
            tp = (t / g.M_tan) * g.M_tan + (t % g.M_tan + 1) % g.M_tan;
            tm = (t / g.M_tan) * g.M_tan + (t % g.M_tan + g.M_tan - 1) % g.M_tan;
          }
          for (int i = 0; i < g.N; ++i)
            J(i, j) += (comp(i, tp, s) - comp(i, tm, s)) / (2.0 * g.d_tan());
        }
        // normal derivative (one-sided at the ends)
        for (int i = 0; i < g.N; ++i) {
          double d;
          if (s == 0)
            d = (comp(i, t, 1) - comp(i, t, 0)) / g.dx();
          else if (s == S - 1)
            d = (comp(i, t, S - 1) - comp(i, t, S - 2)) / g.dx();
          else
            d = (comp(i, t, s + 1) - comp(i, t, s - 1)) / (2.0 * g.dx());
          J(i, g.N - 1) += d;
        }
        double det;
        if (g.N == 2)
          det = J(0, 0) * J(1, 1) - J(0, 1) * J(1, 0);
        else
          det = J(0, 0) * (J(1, 1) * J(2, 2) - J(1, 2) * J(2, 1)) -
                J(0, 1) * (J(1, 0) * J(2, 2) - J(1, 2) * J(2, 0)) +
                J(0, 2) * (J(1, 0) * J(2, 1) - J(1, 1) * J(2, 0));
        mind = std::min(mind, det);
      }
    return mind;
  }
};

inline FlowMap identity_flow(const Grid& g, double t = 0.0) {
  FlowMap fm;
  fm.g = g;
  fm.t0 = fm.t1 = t;
  for (int i = 0; i < g.N; ++i) {
    fm.back_disp[static_cast<size_t>(i)] = DoubleStrip(g);
    fm.fwd_disp[static_cast<size_t>(i)] = DoubleStrip(g);
  }
  fm.A = DoubleStrip(g);
  return fm;
}

// Integrate the characteristics of the sampled velocity over [t0, t1] with
// n_sub classical 4th-order substeps per node.
inline FlowMap advect_flow(const TwoLevelSampler& field, int n_sub = 1) {
  const Grid& g = field.g;
  if (n_sub < 1) throw SimError("advect_flow: n_sub >= 1");
  FlowMap fm = identity_flow(g, field.t0);
  fm.t1 = field.t1;
  const double hs = (field.t1 - field.t0) / n_sub;
  for (int t = 0; t < g.n_tan(); ++t)
    for (int s = 0; s < fm.A.nslots(); ++s) {
      const Vec x0 = fm.node_pos(t, s);
      // backward: from xi at t1 down to t0, accumulating the source with the
      // forward orientation (A = integral_{t0}^{t1} src ds along the curve)
      Vec x = x0;
      double A = 0.0;
      for (int k = 0; k < n_sub; ++k) rk4_step(field, x, A, field.t1 - k * hs, -hs);
      for (int i = 0; i < g.N; ++i) fm.back_disp[static_cast<size_t>(i)].at(t, s) = x[i] - x0[i];
      fm.A.at(t, s) = -A;  // the reversed sweep accumulated -integral

      // forward: from eta at t0 up to t1
      Vec y = x0;
      double dummy = 0.0;
      for (int k = 0; k < n_sub; ++k) rk4_step(field, y, dummy, field.t0 + k * hs, hs);
      for (int i = 0; i < g.N; ++i) fm.fwd_disp[static_cast<size_t>(i)].at(t, s) = y[i] - x0[i];
    }
  return fm;
}

// Compose an incremental step map (over [prev.t1, step.t1]) with the
// committed map so the result tracks characteristics back to t = prev.t0.
inline FlowMap compose_flow(const FlowMap& prev, const FlowMap& step) {
  if (std::abs(step.t0 - prev.t1) > 1e-12) throw SimError("compose_flow: time levels mismatch");
  FlowMap out = identity_flow(prev.g, prev.t0);
  out.t1 = step.t1;
  const Grid& g = prev.g;
  for (int t = 0; t < g.n_tan(); ++t)
    for (int s = 0; s < out.A.nslots(); ++s) {
      const Vec xi = out.node_pos(t, s);
      Vec mid = step.backward(xi);          // position at prev.t1
      Vec eta = prev.backward(mid);         // position at prev.t0
      for (int i = 0; i < g.N; ++i) out.back_disp[static_cast<size_t>(i)].at(t, s) = eta[i] - xi[i];
      out.A.at(t, s) = prev.A_at(mid) + step.A.at(t, s);

      Vec mid_f = prev.forward(xi);         // node as eta at prev.t0 -> prev.t1
      Vec end_f = step.forward(mid_f);
      for (int i = 0; i < g.N; ++i) out.fwd_disp[static_cast<size_t>(i)].at(t, s) = end_f[i] - xi[i];
    }
  return out;
}

// Closed-form density along characteristics:
// rho(xi, t) = (rho*+ + rho0_tilde(eta(xi, t))) exp(-A(eta, t)), restricted to
// the upper strip. rho0_tilde is the extended initial perturbation.
inline Field density_update(double rho_star_plus, const DoubleStrip& rho0_tilde,
                            const FlowMap& fm) {
  const Grid& g = fm.g;
  Field rho(g, Side::upper);
  for (int t = 0; t < g.n_tan(); ++t)
    for (int m = 0; m < g.nn(); ++m) {
      const int s = g.M_nrm + m;
      Vec xi = fm.node_pos(t, s);
      Vec eta = fm.backward(xi);
      const double val = (rho_star_plus + rho0_tilde.sample(eta)) * std::exp(-fm.A.at(t, s));
      if (!(val > 0.0)) throw SimError("density_update: nonpositive density");
      rho.at(t, m) = val;
    }
  return rho;
}

}  // namespace bps
