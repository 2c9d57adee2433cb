#pragma once

#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "bps/common.hpp"
#include "bps/grid.hpp"

namespace bps {

// Scalar material closure evaluated at (rho, theta). Closures on the
// incompressible side ignore the density argument.
using Closure = std::function<double(double, double)>;

inline Closure constant_closure(double c) {
  return [c](double, double) { return c; };
}
// a + b_rho*rho + b_theta*theta
inline Closure affine_closure(double a, double b_rho, double b_theta) {
  return [=](double rho, double theta) { return a + b_rho * rho + b_theta * theta; };
}
inline Closure ideal_gas_pressure(double R) {
  return [R](double rho, double theta) { return R * rho * theta; };
}

// Natural cubic spline through (x_i, y_i); closure of rho or theta only.
struct Table1D {
  std::vector<double> x, y, m;  // m: second derivatives
  bool in_theta = true;

  Table1D(std::vector<double> xs, std::vector<double> ys, bool theta_arg)
      : x(std::move(xs)), y(std::move(ys)), in_theta(theta_arg) {
    const size_t n = x.size();
    if (n < 3 || y.size() != n) throw SimError("table1d: need >= 3 samples");
    for (size_t i = 1; i < n; ++i)
      if (x[i] <= x[i - 1]) throw SimError("table1d: abscissae must increase");
    m.assign(n, 0.0);
    std::vector<double> c(n, 0.0), d(n, 0.0);
    for (size_t i = 1; i + 1 < n; ++i) {
      double hl = x[i] - x[i - 1], hr = x[i + 1] - x[i];
      double w = 2.0 * (hl + hr) - hl * c[i - 1];
      c[i] = hr / w;
      double rhs = 6.0 * ((y[i + 1] - y[i]) / hr - (y[i] - y[i - 1]) / hl);
      d[i] = (rhs - hl * d[i - 1]) / w;
    }
    for (size_t i = n - 2; i >= 1; --i) m[i] = d[i] - c[i] * m[i + 1];
  }

  double eval(double t) const {
    const size_t n = x.size();
    size_t i = 1;
    while (i + 1 < n && t > x[i]) ++i;
    double h = x[i] - x[i - 1], a = (x[i] - t) / h, b = (t - x[i - 1]) / h;
    return a * y[i - 1] + b * y[i] +
           ((a * a * a - a) * m[i - 1] + (b * b * b - b) * m[i]) * h * h / 6.0;
  }

  Closure closure() const {
    Table1D self = *this;
    return [self](double rho, double theta) { return self.eval(self.in_theta ? theta : rho); };
  }
};

struct MaterialSystem {
  double rho_star_plus = 1.0;
  double rho_star_minus = 2.0;
  double theta_star = 1.0;
  double sigma = 1.0;
  double delta_rho = 1e-6;  // required margin |rho*- - rho*+|

  Closure mu_plus = constant_closure(1.0);
  Closure lambda_plus = constant_closure(1.0);
  Closure kappa_plus = constant_closure(1.0);
  Closure d_plus = constant_closure(1.0);
  Closure mu_minus = constant_closure(1.0);
  Closure kappa_minus = constant_closure(1.0);
  Closure d_minus = constant_closure(1.0);
  Closure P_plus = ideal_gas_pressure(1.0);
  Closure psi_plus = constant_closure(0.0);
  Closure psi_minus = constant_closure(0.5);
  Closure eta_plus = constant_closure(0.1);
  Closure eta_minus = constant_closure(0.2);

  double mu(Side s, double rho, double theta) const {
    return s == Side::upper ? mu_plus(rho, theta) : mu_minus(rho, theta);
  }
  double kappa(Side s, double rho, double theta) const {
    return s == Side::upper ? kappa_plus(rho, theta) : kappa_minus(rho, theta);
  }
  double d(Side s, double rho, double theta) const {
    return s == Side::upper ? d_plus(rho, theta) : d_minus(rho, theta);
  }
  double rho_star(Side s) const { return s == Side::upper ? rho_star_plus : rho_star_minus; }

  // coefficients frozen at the equilibrium point
  double mu_star(Side s) const { return mu(s, rho_star(s), theta_star); }
  double lambda_star_plus() const { return lambda_plus(rho_star_plus, theta_star); }
  double kappa_star(Side s) const { return kappa(s, rho_star(s), theta_star); }
  double d_star(Side s) const { return d(s, rho_star(s), theta_star); }
  double P_star() const { return P_plus(rho_star_plus, theta_star); }

  // weighted surface tension entering the normal-stress interface rows
  double sigma_side(Side s) const { return rho_star(s) * sigma / (rho_star_minus - rho_star_plus); }
};

// Equilibrium identity that admits the flat resting state:
// psi_-(theta*) - psi_+(rho*+, theta*) + (1/rho*- - 1/rho*+) P_+(rho*+, theta*).
inline double equilibrium_residual(const MaterialSystem& m) {
  return m.psi_minus(0.0, m.theta_star) - m.psi_plus(m.rho_star_plus, m.theta_star) +
         (1.0 / m.rho_star_minus - 1.0 / m.rho_star_plus) * m.P_plus(m.rho_star_plus, m.theta_star);
}

// Shift psi_- by a constant so the equilibrium identity holds exactly.
inline void enforce_equilibrium(MaterialSystem& m) {
  const double r = equilibrium_residual(m);
  Closure old = m.psi_minus;
  m.psi_minus = [old, r](double rho, double theta) { return old(rho, theta) - r; };
}

struct SampleBox {
  double rho_min = 0.5, rho_max = 2.0;
  double theta_min = 0.5, theta_max = 2.0;
  int n_samples = 10;
};

struct HypothesisCheck {
  std::string name;
  bool pass = true;
  double worst = 0.0;  // most adverse sampled value
  std::string detail;
};

struct ValidationReport {
  std::vector<HypothesisCheck> checks;
  bool all_pass() const {
    for (const auto& c : checks)
      if (!c.pass) return false;
    return true;
  }
  std::string to_string() const {
    std::ostringstream os;
    for (const auto& c : checks)
      os << (c.pass ? "[ok]   " : "[FAIL] ") << c.name << "  worst=" << c.worst
         << (c.detail.empty() ? "" : "  " + c.detail) << "\n";
    return os.str();
  }
};

namespace detail {

inline double fd_step(double v) { return 1e-5 * std::max(1.0, std::abs(v)); }

inline void check_positive(ValidationReport& rep, const std::string& name, const Closure& f,
                           const SampleBox& box) {
  HypothesisCheck c{name, true, std::numeric_limits<double>::infinity(), ""};
  for (int i = 0; i < box.n_samples; ++i)
    for (int j = 0; j < box.n_samples; ++j) {
      double rho = box.rho_min + (box.rho_max - box.rho_min) * i / (box.n_samples - 1);
      double theta = box.theta_min + (box.theta_max - box.theta_min) * j / (box.n_samples - 1);
      double v = f(rho, theta);
      if (!std::isfinite(v)) {
        std::ostringstream os;
        os << "non-finite at (rho=" << rho << ", theta=" << theta << ")";
        throw SimError(name + ": " + os.str());
      }
      if (v < c.worst) c.worst = v;
      if (v <= 0) c.pass = false;
    }
  rep.checks.push_back(c);
}

}  // namespace detail

inline ValidationReport validate(const MaterialSystem& m, const SampleBox& box, int N = 2) {
  if (box.rho_min <= 0 || box.theta_min <= 0 || box.rho_max < box.rho_min ||
      box.theta_max < box.theta_min || box.n_samples < 2)
    throw SimError("validate: sample box must be nonempty within (0,inf)^2");
  ValidationReport rep;

  detail::check_positive(rep, "mu_plus > 0", m.mu_plus, box);
  detail::check_positive(rep, "lambda_plus > 0", m.lambda_plus, box);
  detail::check_positive(rep, "kappa_plus > 0", m.kappa_plus, box);
  detail::check_positive(rep, "d_plus > 0", m.d_plus, box);
  detail::check_positive(rep, "mu_minus > 0", m.mu_minus, box);
  detail::check_positive(rep, "kappa_minus > 0", m.kappa_minus, box);
  detail::check_positive(rep, "d_minus > 0", m.d_minus, box);

  {
    HypothesisCheck c{"dP_plus/drho > 0", true, std::numeric_limits<double>::infinity(), ""};
    for (int i = 0; i < box.n_samples; ++i)
      for (int j = 0; j < box.n_samples; ++j) {
        double rho = box.rho_min + (box.rho_max - box.rho_min) * i / (box.n_samples - 1);
        double theta = box.theta_min + (box.theta_max - box.theta_min) * j / (box.n_samples - 1);
        double h = detail::fd_step(rho);
        double dp = (m.P_plus(rho + h, theta) - m.P_plus(rho - h, theta)) / (2 * h);
        if (!std::isfinite(dp)) throw SimError("validate: non-finite pressure derivative");
        if (dp < c.worst) c.worst = dp;
        if (dp <= 0) c.pass = false;
      }
    rep.checks.push_back(c);
  }
  {
    HypothesisCheck c{"lambda_plus >= (N-2)/N mu_plus", true,
                      std::numeric_limits<double>::infinity(), ""};
    const double factor = static_cast<double>(N - 2) / N;
    for (int i = 0; i < box.n_samples; ++i)
      for (int j = 0; j < box.n_samples; ++j) {
        double rho = box.rho_min + (box.rho_max - box.rho_min) * i / (box.n_samples - 1);
        double theta = box.theta_min + (box.theta_max - box.theta_min) * j / (box.n_samples - 1);
        double slack = m.lambda_plus(rho, theta) - factor * m.mu_plus(rho, theta);
        if (slack < c.worst) c.worst = slack;
        if (slack < 0) c.pass = false;
      }
    rep.checks.push_back(c);
  }
  {
    HypothesisCheck c{"rho*- != rho*+", true, std::abs(m.rho_star_minus - m.rho_star_plus), ""};
    c.pass = c.worst >= m.delta_rho;
    rep.checks.push_back(c);
  }
  return rep;
}

struct ConsistencyReport {
  // max |d(psi + theta*eta)/dtheta - kappa| over the box, per side
  double max_deviation_plus = 0.0;
  double max_deviation_minus = 0.0;
  double min_de_dtheta = std::numeric_limits<double>::infinity();
  bool specific_heat_positive = true;
};

// Optional check of e = psi + theta*eta against the supplied specific heats.
inline ConsistencyReport thermo_consistency(const MaterialSystem& m, const SampleBox& box) {
  ConsistencyReport rep;
  auto e_of = [](const Closure& psi, const Closure& eta) {
    return [&psi, &eta](double rho, double theta) {
      return psi(rho, theta) + theta * eta(rho, theta);
    };
  };
  for (int i = 0; i < box.n_samples; ++i)
    for (int j = 0; j < box.n_samples; ++j) {
      double rho = box.rho_min + (box.rho_max - box.rho_min) * i / (box.n_samples - 1);
      double theta = box.theta_min + (box.theta_max - box.theta_min) * j / (box.n_samples - 1);
      double h = detail::fd_step(theta);
      auto ep = e_of(m.psi_plus, m.eta_plus);
      auto em = e_of(m.psi_minus, m.eta_minus);
      double dep = (ep(rho, theta + h) - ep(rho, theta - h)) / (2 * h);
      double dem = (em(rho, theta + h) - em(rho, theta - h)) / (2 * h);
      rep.max_deviation_plus =
          std::max(rep.max_deviation_plus, std::abs(dep - m.kappa_plus(rho, theta)));
      rep.max_deviation_minus =
          std::max(rep.max_deviation_minus, std::abs(dem - m.kappa_minus(rho, theta)));
      rep.min_de_dtheta = std::min({rep.min_de_dtheta, dep, dem});
    }
  rep.specific_heat_positive = rep.min_de_dtheta > 0;
  return rep;
}

// Which viscous-stress convention to evaluate: the full Newton law with
// strain weight 2, or the half-weight form used by the linearized operator.
enum class StressConvention { model, problem };

// Cauchy stress from strain tensor D (symmetric), div u, and pressure.
inline Mat stress(Side side, const Mat& D, double divu, double pi, double mu, double lambda,
                  StressConvention conv = StressConvention::model) {
  if (!D.symmetric(1e-12)) throw SimError("stress: strain tensor must be symmetric");
  const double w = (conv == StressConvention::model) ? 2.0 : 1.0;
  Mat T = w * mu * D;
  for (int i = 0; i < D.n; ++i) {
    if (side == Side::upper) T(i, i) += (lambda - mu) * divu;
    T(i, i) -= pi;
  }
  if (side == Side::lower && conv == StressConvention::model) {
    // Newton law with the half-weight reading kept for the minus phase
    T = mu * D;
    for (int i = 0; i < D.n; ++i) T(i, i) -= pi;
  }
  return T;
}

// 2 mu |D|^2 + (lambda - mu)(div u)^2; nonnegative under the viscosity bound.
inline double entropy_production_density(Side side, const MaterialSystem& m, const Mat& D,
                                         double divu, double rho, double theta) {
  const double mu = m.mu(side, rho, theta);
  double out = 2.0 * mu * D.frobenius2();
  if (side == Side::upper) out += (m.lambda_plus(rho, theta) - mu) * divu * divu;
  return out;
}

inline MaterialSystem default_material() { return MaterialSystem{}; }

}  // namespace bps
