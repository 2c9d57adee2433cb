#pragma once

#include <algorithm>
#include <cassert>
#include <cmath>
#include <functional>
#include <vector>

#include "bps/common.hpp"
#include "bps/fft.hpp"

namespace bps {

enum class Side { upper, lower };

inline double side_sign(Side s) { return s == Side::upper ? 1.0 : -1.0; }

// Two reference half-strips with a periodic tangential box of period L_tan
// (N-1 directions, M_tan points each) and a truncated normal direction
// x_N in [0, L_nrm] (upper) / [-L_nrm, 0] (lower), M_nrm+1 nodes per
// half-line including the interface node at x_N = 0.
struct Grid {
  int N = 2;
  double L_tan = 1.0;
  int M_tan = 32;
  double L_nrm = 1.0;
  int M_nrm = 32;
  double dt = 1e-3;
  double T_final = 0.1;

  void validate() const {
    if (N != 2 && N != 3) throw SimError("grid: N must be 2 or 3");
    if (M_tan < 8 || !is_power_of_two(M_tan)) throw SimError("grid: M_tan must be a power of two >= 8");
    if (M_nrm < 8) throw SimError("grid: M_nrm >= 8 required");
    if (L_tan <= 0 || L_nrm <= 0 || dt <= 0) throw SimError("grid: L_tan, L_nrm, dt must be positive");
  }

  int n_tan() const { return N == 2 ? M_tan : M_tan * M_tan; }
  int nn() const { return M_nrm + 1; }
  double dx() const { return L_nrm / M_nrm; }
  double d_tan() const { return L_tan / M_tan; }
  size_t strip_size() const { return static_cast<size_t>(n_tan()) * nn(); }

  // Tangential lattice coordinates of flat tangential index t.
  Vec tan_coord(int t) const {
    Vec x(N);
    if (N == 2) {
      x[0] = t * d_tan();
    } else {
      x[0] = (t / M_tan) * d_tan();
      x[1] = (t % M_tan) * d_tan();
    }
    return x;
  }
  double x_nrm(Side s, int m) const { return side_sign(s) * m * dx(); }

  // Tangential wavenumber vector of spectral bin t (last component unused).
  Vec kappa(int t) const {
    Vec k(N);
    const double base = 2.0 * M_PI / L_tan;
    if (N == 2) {
      k[0] = base * signed_mode(t, M_tan);
    } else {
      k[0] = base * signed_mode(t / M_tan, M_tan);
      k[1] = base * signed_mode(t % M_tan, M_tan);
    }
    return k;
  }
  double kappa2(int t) const {
    Vec k = kappa(t);
    double s = 0;
    for (int j = 0; j < N - 1; ++j) s += k[j] * k[j];
    return s;
  }

  bool compatible(const Grid& o) const {
    return N == o.N && M_tan == o.M_tan && M_nrm == o.M_nrm && L_tan == o.L_tan && L_nrm == o.L_nrm;
  }
};

struct SpectralField;

// Scalar field on one half-strip, layout a[t*nn + m].
struct Field {
  Grid g;
  Side side = Side::upper;
  std::vector<double> a;

  Field() = default;
  Field(const Grid& grid, Side s, double fill = 0.0)
      : g(grid), side(s), a(grid.strip_size(), fill) {}

  double& at(int t, int m) { return a[static_cast<size_t>(t) * g.nn() + m]; }
  double at(int t, int m) const { return a[static_cast<size_t>(t) * g.nn() + m]; }

  void fill_from(const std::function<double(const Vec&)>& f) {
    for (int t = 0; t < g.n_tan(); ++t) {
      Vec x = g.tan_coord(t);
      for (int m = 0; m < g.nn(); ++m) {
        x[g.N - 1] = g.x_nrm(side, m);
        at(t, m) = f(x);
      }
    }
  }

  Field& operator+=(const Field& o) {
    for (size_t i = 0; i < a.size(); ++i) a[i] += o.a[i];
    return *this;
  }
  Field& operator-=(const Field& o) {
    for (size_t i = 0; i < a.size(); ++i) a[i] -= o.a[i];
    return *this;
  }
  Field& operator*=(double s) {
    for (auto& v : a) v *= s;
    return *this;
  }
  friend Field operator+(Field x, const Field& y) { return x += y; }
  friend Field operator-(Field x, const Field& y) { return x -= y; }
  friend Field operator*(double s, Field x) { return x *= s; }
  friend Field operator*(Field x, const Field& y) {
    for (size_t i = 0; i < x.a.size(); ++i) x.a[i] *= y.a[i];
    return x;
  }

  double max_abs() const {
    double m = 0;
    for (double v : a) m = std::max(m, std::abs(v));
    return m;
  }
  bool finite() const {
    for (double v : a)
      if (!std::isfinite(v)) return false;
    return true;
  }
};

// Per-tangential-mode complex coefficients along each normal grid line.
struct SpectralField {
  Grid g;
  Side side = Side::upper;
  std::vector<cdouble> c;

  SpectralField() = default;
  SpectralField(const Grid& grid, Side s) : g(grid), side(s), c(grid.strip_size(), cdouble{}) {}

  cdouble& at(int t, int m) { return c[static_cast<size_t>(t) * g.nn() + m]; }
  cdouble at(int t, int m) const { return c[static_cast<size_t>(t) * g.nn() + m]; }
};

namespace detail {

// Apply an M_tan-point transform along each tangential axis for every fixed
// remaining index. `dir` = -1 forward (with 1/M), +1 inverse.
inline void tangential_fft(const Grid& g, std::vector<cdouble>& data, int dir) {
  const int nn = g.nn();
  const int M = g.M_tan;
  std::vector<cdouble> line(static_cast<size_t>(M));
  if (g.N == 2) {
    for (int m = 0; m < nn; ++m) {
      for (int t = 0; t < M; ++t) line[t] = data[static_cast<size_t>(t) * nn + m];
      if (dir < 0) dft_forward(line); else dft_inverse(line);
      for (int t = 0; t < M; ++t) data[static_cast<size_t>(t) * nn + m] = line[t];
    }
  } else {
    // axis 0 (stride M*nn) then axis 1 (stride nn), per normal level m
    for (int m = 0; m < nn; ++m) {
      for (int t2 = 0; t2 < M; ++t2) {
        for (int t1 = 0; t1 < M; ++t1) line[t1] = data[(static_cast<size_t>(t1) * M + t2) * nn + m];
        if (dir < 0) dft_forward(line); else dft_inverse(line);
        for (int t1 = 0; t1 < M; ++t1) data[(static_cast<size_t>(t1) * M + t2) * nn + m] = line[t1];
      }
      for (int t1 = 0; t1 < M; ++t1) {
        for (int t2 = 0; t2 < M; ++t2) line[t2] = data[(static_cast<size_t>(t1) * M + t2) * nn + m];
        if (dir < 0) dft_forward(line); else dft_inverse(line);
        for (int t2 = 0; t2 < M; ++t2) data[(static_cast<size_t>(t1) * M + t2) * nn + m] = line[t2];
      }
    }
  }
}

}  // namespace detail

inline SpectralField to_modes(const Field& f) {
  SpectralField s(f.g, f.side);
  for (size_t i = 0; i < f.a.size(); ++i) s.c[i] = f.a[i];
  detail::tangential_fft(f.g, s.c, -1);
  return s;
}

inline Field from_modes(const SpectralField& s) {
  std::vector<cdouble> tmp = s.c;
  detail::tangential_fft(s.g, tmp, +1);
  Field f(s.g, s.side);
  for (size_t i = 0; i < tmp.size(); ++i) f.a[i] = tmp[i].real();
  return f;
}

// Spectral tangential derivative d/dx_j, j in [0, N-2].
inline Field deriv_tan(const Field& f, int j) {
  assert(j >= 0 && j < f.g.N - 1);
  SpectralField s = to_modes(f);
  for (int t = 0; t < f.g.n_tan(); ++t) {
    const cdouble ik(0.0, f.g.kappa(t)[j]);
    for (int m = 0; m < f.g.nn(); ++m) s.at(t, m) *= ik;
  }
  return from_modes(s);
}

// Second-order finite-difference d/dx_N (one-sided at the interface and the
// outer node, respecting the sign of x_N on the lower strip).
inline Field deriv_nrm(const Field& f) {
  const int nn = f.g.nn();
  const double h = f.g.dx() * side_sign(f.side);  // x_N(m) = m*h
  Field d(f.g, f.side);
  for (int t = 0; t < f.g.n_tan(); ++t) {
    const double* v = &f.a[static_cast<size_t>(t) * nn];
    double* o = &d.a[static_cast<size_t>(t) * nn];
    o[0] = (-3.0 * v[0] + 4.0 * v[1] - v[2]) / (2.0 * h);
    for (int m = 1; m < nn - 1; ++m) o[m] = (v[m + 1] - v[m - 1]) / (2.0 * h);
    o[nn - 1] = (3.0 * v[nn - 1] - 4.0 * v[nn - 2] + v[nn - 3]) / (2.0 * h);
  }
  return d;
}

inline Field deriv_nrm2(const Field& f) {
  const int nn = f.g.nn();
  const double h = f.g.dx();
  Field d(f.g, f.side);
  for (int t = 0; t < f.g.n_tan(); ++t) {
    const double* v = &f.a[static_cast<size_t>(t) * nn];
    double* o = &d.a[static_cast<size_t>(t) * nn];
    o[0] = (2.0 * v[0] - 5.0 * v[1] + 4.0 * v[2] - v[3]) / (h * h);
    for (int m = 1; m < nn - 1; ++m) o[m] = (v[m + 1] - 2.0 * v[m] + v[m - 1]) / (h * h);
    o[nn - 1] = (2.0 * v[nn - 1] - 5.0 * v[nn - 2] + 4.0 * v[nn - 3] - v[nn - 4]) / (h * h);
  }
  return d;
}

// d/dx_j for j in [0, N-1]; the last index is the normal derivative.
inline Field deriv(const Field& f, int j) {
  return (j == f.g.N - 1) ? deriv_nrm(f) : deriv_tan(f, j);
}

// Values on the tangential interface line x' -> f(x', 0^side).
struct LineField {
  Grid g;
  std::vector<double> a;

  LineField() = default;
  explicit LineField(const Grid& grid, double fill = 0.0)
      : g(grid), a(static_cast<size_t>(grid.n_tan()), fill) {}

  double& at(int t) { return a[static_cast<size_t>(t)]; }
  double at(int t) const { return a[static_cast<size_t>(t)]; }

  LineField& operator+=(const LineField& o) {
    for (size_t i = 0; i < a.size(); ++i) a[i] += o.a[i];
    return *this;
  }
  LineField& operator-=(const LineField& o) {
    for (size_t i = 0; i < a.size(); ++i) a[i] -= o.a[i];
    return *this;
  }
  LineField& operator*=(double s) {
    for (auto& v : a) v *= s;
    return *this;
  }
  friend LineField operator+(LineField x, const LineField& y) { return x += y; }
  friend LineField operator-(LineField x, const LineField& y) { return x -= y; }
  friend LineField operator*(double s, LineField x) { return x *= s; }
  friend LineField operator*(LineField x, const LineField& y) {
    for (size_t i = 0; i < x.a.size(); ++i) x.a[i] *= y.a[i];
    return x;
  }
  double max_abs() const {
    double m = 0;
    for (double v : a) m = std::max(m, std::abs(v));
    return m;
  }
  void fill_from(const std::function<double(const Vec&)>& f) {
    for (int t = 0; t < g.n_tan(); ++t) a[static_cast<size_t>(t)] = f(g.tan_coord(t));
  }
};

inline std::vector<cdouble> line_to_modes(const LineField& f) {
  std::vector<cdouble> c(f.a.begin(), f.a.end());
  if (f.g.N == 2) {
    dft_forward(c);
  } else {
    const int M = f.g.M_tan;
    std::vector<cdouble> line(static_cast<size_t>(M));
    for (int t2 = 0; t2 < M; ++t2) {
      for (int t1 = 0; t1 < M; ++t1) line[t1] = c[static_cast<size_t>(t1) * M + t2];
      dft_forward(line);
      for (int t1 = 0; t1 < M; ++t1) c[static_cast<size_t>(t1) * M + t2] = line[t1];
    }
    for (int t1 = 0; t1 < M; ++t1) {
      for (int t2 = 0; t2 < M; ++t2) line[t2] = c[static_cast<size_t>(t1) * M + t2];
      dft_forward(line);
      for (int t2 = 0; t2 < M; ++t2) c[static_cast<size_t>(t1) * M + t2] = line[t2];
    }
  }
  return c;
}

inline LineField line_from_modes(const Grid& g, std::vector<cdouble> c) {
  if (g.N == 2) {
    dft_inverse(c);
  } else {
    const int M = g.M_tan;
    std::vector<cdouble> line(static_cast<size_t>(M));
    for (int t2 = 0; t2 < M; ++t2) {
      for (int t1 = 0; t1 < M; ++t1) line[t1] = c[static_cast<size_t>(t1) * M + t2];
      dft_inverse(line);
      for (int t1 = 0; t1 < M; ++t1) c[static_cast<size_t>(t1) * M + t2] = line[t1];
    }
    for (int t1 = 0; t1 < M; ++t1) {
      for (int t2 = 0; t2 < M; ++t2) line[t2] = c[static_cast<size_t>(t1) * M + t2];
      dft_inverse(line);
      for (int t2 = 0; t2 < M; ++t2) c[static_cast<size_t>(t1) * M + t2] = line[t2];
    }
  }
  LineField f(g);
  for (size_t i = 0; i < f.a.size(); ++i) f.a[i] = c[i].real();
  return f;
}

inline LineField line_deriv_tan(const LineField& f, int j) {
  auto c = line_to_modes(f);
  for (int t = 0; t < f.g.n_tan(); ++t) c[static_cast<size_t>(t)] *= cdouble(0.0, f.g.kappa(t)[j]);
  return line_from_modes(f.g, std::move(c));
}

inline LineField line_laplace_tan(const LineField& f) {
  auto c = line_to_modes(f);
  for (int t = 0; t < f.g.n_tan(); ++t) c[static_cast<size_t>(t)] *= -f.g.kappa2(t);
  return line_from_modes(f.g, std::move(c));
}

// Interface trace: grid is node-centered with a node row at x_N = 0.
inline LineField interface_trace(const Field& f) {
  LineField l(f.g);
  for (int t = 0; t < f.g.n_tan(); ++t) l.at(t) = f.at(t, 0);
  return l;
}

// N-component vector field on one strip.
struct VecField {
  std::vector<Field> comp;

  VecField() = default;
  VecField(const Grid& g, Side s) {
    comp.reserve(static_cast<size_t>(g.N));
    for (int i = 0; i < g.N; ++i) comp.emplace_back(g, s);
  }
  Field& operator[](int i) { return comp[static_cast<size_t>(i)]; }
  const Field& operator[](int i) const { return comp[static_cast<size_t>(i)]; }
  int n() const { return static_cast<int>(comp.size()); }
  bool finite() const {
    for (const auto& f : comp)
      if (!f.finite()) return false;
    return true;
  }
};

// --- discrete norms ------------------------------------------------------

enum class NormKind { Lq, W1q, W2q, FracSq };

namespace detail {

inline double quad_weight(const Grid& g, int m) {
  double w = std::pow(g.d_tan(), g.N - 1) * g.dx();
  if (m == 0 || m == g.nn() - 1) w *= 0.5;  // trapezoid in x_N
  return w;
}

inline double lq_norm(const Field& f, double q) {
  double s = 0;
  for (int t = 0; t < f.g.n_tan(); ++t)
    for (int m = 0; m < f.g.nn(); ++m) s += quad_weight(f.g, m) * std::pow(std::abs(f.at(t, m)), q);
  return std::pow(s, 1.0 / q);
}

// Discrete fractional Sobolev proxy, s in (0,1): tangentially spectral,
// Gagliardo difference quotients in x_N. A stand-in for the Besov norms of
// the continuous theory; reported as a proxy everywhere it is used.
inline double frac_seminorm(const Field& f, double s) {
  const Grid& g = f.g;
  double tan_part = 0;
  SpectralField sf = to_modes(f);
  for (int t = 0; t < g.n_tan(); ++t) {
    double k2 = g.kappa2(t);
    double line = 0;
    for (int m = 0; m < g.nn(); ++m) {
      double w = (m == 0 || m == g.nn() - 1) ? 0.5 : 1.0;
      line += w * std::norm(sf.at(t, m)) * g.dx();
    }
    tan_part += std::pow(1.0 + k2, s) * line;
  }
  tan_part *= std::pow(g.L_tan, g.N - 1);

  double gag = 0;
  const double h = g.dx();
  for (int t = 0; t < g.n_tan(); ++t) {
    for (int m = 0; m < g.nn(); ++m)
      for (int mm = m + 1; mm < g.nn(); ++mm) {
        double diff = f.at(t, m) - f.at(t, mm);
        double dist = (mm - m) * h;
        gag += 2.0 * diff * diff / std::pow(dist, 1.0 + 2.0 * s) * h * h;
      }
  }
  gag *= std::pow(g.d_tan(), g.N - 1);
  return std::sqrt(tan_part + gag);
}

}  // namespace detail

inline double norm(const Field& f, NormKind kind, double q = 2.0, double s = 0.5) {
  switch (kind) {
    case NormKind::Lq:
      return detail::lq_norm(f, q);
    case NormKind::W1q: {
      double total = std::pow(detail::lq_norm(f, q), q);
      for (int j = 0; j < f.g.N; ++j) total += std::pow(detail::lq_norm(deriv(f, j), q), q);
      return std::pow(total, 1.0 / q);
    }
    case NormKind::W2q: {
      double total = std::pow(norm(f, NormKind::W1q, q), q);
      for (int j = 0; j < f.g.N; ++j) {
        Field dj = deriv(f, j);
        for (int k = j; k < f.g.N; ++k) total += std::pow(detail::lq_norm(deriv(dj, k), q), q);
      }
      return std::pow(total, 1.0 / q);
    }
    case NormKind::FracSq:
      return detail::frac_seminorm(f, s);
  }
  throw SimError("norm: unsupported kind");
}

// Trace-norm proxy on the interface line: H^s via tangential modes.
inline double line_frac_norm(const LineField& f, double s) {
  auto c = line_to_modes(f);
  double total = 0;
  for (int t = 0; t < f.g.n_tan(); ++t)
    total += std::pow(1.0 + f.g.kappa2(t), s) * std::norm(c[static_cast<size_t>(t)]);
  return std::sqrt(total * std::pow(f.g.L_tan, f.g.N - 1));
}

inline double line_l2_norm(const LineField& f) { return line_frac_norm(f, 0.0); }

}  // namespace bps
