#pragma once

#include <cctype>
#include <map>
#include <memory>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "bps/constitutive.hpp"
#include "bps/driver.hpp"

namespace bps {

struct ConfigError : SimError {
  int line, col;
  ConfigError(int l, int c, const std::string& msg)
      : SimError("config:" + std::to_string(l) + ":" + std::to_string(c) + ": " + msg),
        line(l),
        col(c) {}
};

// Small arithmetic expression over named variables: numbers, + - * / ^,
// parentheses, and the usual single-argument functions.
class Expr {
 public:
  Expr() : Expr("0") {}
  explicit Expr(const std::string& src) : src_(src), pos_(0) {
    root_ = parse_sum();
    skip_ws();
    if (pos_ != src_.size()) fail("trailing characters in expression");
  }

  const std::string& text() const { return src_; }

  double eval(const std::vector<std::pair<std::string, double>>& vars) const {
    return eval_node(*root_, vars);
  }

 private:
  struct Node {
    enum class Kind { number, variable, unary_minus, binary, call } kind;
    double value = 0;
    std::string name;  // variable or function name
    char op = 0;
    std::unique_ptr<Node> a, b;
  };

  std::string src_;
  size_t pos_;
  std::unique_ptr<Node> root_;

  [[noreturn]] void fail(const std::string& msg) const {
    throw SimError("expression '" + src_ + "': " + msg);
  }
  void skip_ws() {
    while (pos_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[pos_]))) ++pos_;
  }
  bool eat(char c) {
    skip_ws();
    if (pos_ < src_.size() && src_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  std::unique_ptr<Node> parse_sum() {
    auto n = parse_product();
    for (;;) {
      if (eat('+')) {
        auto r = std::make_unique<Node>();
        r->kind = Node::Kind::binary;
        r->op = '+';
        r->a = std::move(n);
        r->b = parse_product();
        n = std::move(r);
      } else if (eat('-')) {
        auto r = std::make_unique<Node>();
        r->kind = Node::Kind::binary;
        r->op = '-';
        r->a = std::move(n);
        r->b = parse_product();
        n = std::move(r);
      } else {
        return n;
      }
    }
  }
  std::unique_ptr<Node> parse_product() {
    auto n = parse_power();
    for (;;) {
      if (eat('*')) {
        auto r = std::make_unique<Node>();
        r->kind = Node::Kind::binary;
        r->op = '*';
        r->a = std::move(n);
        r->b = parse_power();
        n = std::move(r);
      } else if (eat('/')) {
        auto r = std::make_unique<Node>();
        r->kind = Node::Kind::binary;
        r->op = '/';
        r->a = std::move(n);
        r->b = parse_power();
        n = std::move(r);
      } else {
        return n;
      }
    }
  }
  std::unique_ptr<Node> parse_power() {
    auto n = parse_atom();
    if (eat('^')) {
      auto r = std::make_unique<Node>();
      r->kind = Node::Kind::binary;
      r->op = '^';
      r->a = std::move(n);
      r->b = parse_power();  // right associative
      return r;
    }
    return n;
  }
  std::unique_ptr<Node> parse_atom() {
    skip_ws();
    if (eat('-')) {
      auto r = std::make_unique<Node>();
      r->kind = Node::Kind::unary_minus;
      r->a = parse_power();  // so -x^2 reads as -(x^2)
      return r;
    }
    if (eat('(')) {
      auto n = parse_sum();
      if (!eat(')')) fail("missing ')'");
      return n;
    }
    if (pos_ >= src_.size()) fail("unexpected end");
    const char c = src_[pos_];
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
      size_t end = 0;
      auto n = std::make_unique<Node>();
      n->kind = Node::Kind::number;
      try {
        n->value = std::stod(src_.substr(pos_), &end);
      } catch (...) {
        fail("bad number");
      }
      pos_ += end;
      return n;
    }
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      size_t start = pos_;
      while (pos_ < src_.size() &&
             (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_'))
        ++pos_;
      std::string name = src_.substr(start, pos_ - start);
      if (name == "pi") {
        auto n = std::make_unique<Node>();
        n->kind = Node::Kind::number;
        n->value = M_PI;
        return n;
      }
      if (eat('(')) {
        auto n = std::make_unique<Node>();
        n->kind = Node::Kind::call;
        n->name = name;
        n->a = parse_sum();
        if (!eat(')')) fail("missing ')' after " + name);
        return n;
      }
      auto n = std::make_unique<Node>();
      n->kind = Node::Kind::variable;
      n->name = name;
      return n;
    }
    fail(std::string("unexpected character '") + c + "'");
  }

  double eval_node(const Node& n, const std::vector<std::pair<std::string, double>>& vars) const {
    switch (n.kind) {
      case Node::Kind::number:
        return n.value;
      case Node::Kind::variable:
        for (const auto& [k, v] : vars)
          if (k == n.name) return v;
        fail("unknown variable '" + n.name + "'");
      case Node::Kind::unary_minus:
        return -eval_node(*n.a, vars);
      case Node::Kind::binary: {
        const double a = eval_node(*n.a, vars), b = eval_node(*n.b, vars);
        switch (n.op) {
          case '+': return a + b;
          case '-': return a - b;
          case '*': return a * b;
          case '/': return a / b;
          case '^': return std::pow(a, b);
        }
        fail("bad operator");
      }
      case Node::Kind::call: {
        const double a = eval_node(*n.a, vars);
        if (n.name == "sin") return std::sin(a);
        if (n.name == "cos") return std::cos(a);
        if (n.name == "tan") return std::tan(a);
        if (n.name == "exp") return std::exp(a);
        if (n.name == "log") return std::log(a);
        if (n.name == "sqrt") return std::sqrt(a);
        if (n.name == "tanh") return std::tanh(a);
        if (n.name == "abs") return std::abs(a);
        fail("unknown function '" + n.name + "'");
      }
    }
    fail("corrupt expression tree");
  }
};

// Closure over (rho, theta) from an expression string.
inline Closure expr_closure(const std::string& src) {
  auto e = std::make_shared<Expr>(src);
  return [e](double rho, double theta) {
    return e->eval({{"rho", rho}, {"theta", theta}});
  };
}

struct RunConfig {
  // grid
  int N = 2, M_tan = 64, M_nrm = 64;
  double L_tan = 2.0, L_nrm = 1.0;
  // time
  double dt = 1e-3, T_final = 0.1;
  // material (transport laws as expressions in rho, theta)
  double rho_star_plus = 1.0, rho_star_minus = 2.0, theta_star = 1.0, sigma = 1.0;
  std::string mu_plus = "1", lambda_plus = "1", kappa_plus = "1", d_plus = "1";
  std::string mu_minus = "1", kappa_minus = "1", d_minus = "1";
  std::string P_plus = "rho*theta", eta_plus = "0.1", eta_minus = "0.2";
  std::string psi_plus = "0", psi_minus = "0.5";
  bool enforce_gibbs = true;
  // initial data
  double epsilon = 0.0;
  // solver
  double tol_fp = 1e-10;
  int max_iter = 50;
  double tol_compat = 1e-8, delta_rho = 0.1, delta_j = 1e-6, eps1 = 0.1;
  int n_sub = 1;
  // switches
  std::string curvature = "printed", j_denominator = "total", heat_source = "transformed";
  std::string gibbs_row = "derived";
  // output
  int output_every = 10;

  std::set<std::string> user_keys;  // provenance: keys explicitly set by the user
};

namespace detail {

struct KeySlot {
  enum class Kind { integer, real, text, boolean } kind;
  void* ptr;
};

inline std::map<std::string, KeySlot> key_table(RunConfig& c) {
  using K = KeySlot::Kind;
  return {
      {"grid.N", {K::integer, &c.N}},
      {"grid.M_tan", {K::integer, &c.M_tan}},
      {"grid.M_nrm", {K::integer, &c.M_nrm}},
      {"grid.L_tan", {K::real, &c.L_tan}},
      {"grid.L_nrm", {K::real, &c.L_nrm}},
      {"time.dt", {K::real, &c.dt}},
      {"time.T_final", {K::real, &c.T_final}},
      {"material.rho_star_plus", {K::real, &c.rho_star_plus}},
      {"material.rho_star_minus", {K::real, &c.rho_star_minus}},
      {"material.theta_star", {K::real, &c.theta_star}},
      {"material.sigma", {K::real, &c.sigma}},
      {"material.mu_plus", {K::text, &c.mu_plus}},
      {"material.lambda_plus", {K::text, &c.lambda_plus}},
      {"material.kappa_plus", {K::text, &c.kappa_plus}},
      {"material.d_plus", {K::text, &c.d_plus}},
      {"material.mu_minus", {K::text, &c.mu_minus}},
      {"material.kappa_minus", {K::text, &c.kappa_minus}},
      {"material.d_minus", {K::text, &c.d_minus}},
      {"material.P_plus", {K::text, &c.P_plus}},
      {"material.eta_plus", {K::text, &c.eta_plus}},
      {"material.eta_minus", {K::text, &c.eta_minus}},
      {"material.psi_plus", {K::text, &c.psi_plus}},
      {"material.psi_minus", {K::text, &c.psi_minus}},
      {"material.enforce_gibbs", {K::boolean, &c.enforce_gibbs}},
      {"initial.epsilon", {K::real, &c.epsilon}},
      {"solver.tol_fp", {K::real, &c.tol_fp}},
      {"solver.max_iter", {K::integer, &c.max_iter}},
      {"solver.tol_compat", {K::real, &c.tol_compat}},
      {"solver.delta_rho", {K::real, &c.delta_rho}},
      {"solver.delta_j", {K::real, &c.delta_j}},
      {"solver.eps1", {K::real, &c.eps1}},
      {"solver.n_sub", {K::integer, &c.n_sub}},
      {"switches.curvature", {K::text, &c.curvature}},
      {"switches.j_denominator", {K::text, &c.j_denominator}},
      {"switches.heat_source", {K::text, &c.heat_source}},
      {"switches.gibbs_row", {K::text, &c.gibbs_row}},
      {"output.every", {K::integer, &c.output_every}},
  };
}

inline void assign(const KeySlot& slot, const std::string& raw, int line, int col) {
  try {
    switch (slot.kind) {
      case KeySlot::Kind::integer:
        *static_cast<int*>(slot.ptr) = std::stoi(raw);
        break;
      case KeySlot::Kind::real:
        *static_cast<double*>(slot.ptr) = std::stod(raw);
        break;
      case KeySlot::Kind::text:
        *static_cast<std::string*>(slot.ptr) = raw;
        break;
      case KeySlot::Kind::boolean:
        if (raw == "true" || raw == "1")
          *static_cast<bool*>(slot.ptr) = true;
        else if (raw == "false" || raw == "0")
          *static_cast<bool*>(slot.ptr) = false;
        else
          throw ConfigError(line, col, "expected true/false");
        break;
    }
  } catch (const ConfigError&) {
    throw;
  } catch (...) {
    throw ConfigError(line, col, "cannot parse value '" + raw + "'");
  }
}

inline std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

}  // namespace detail

inline void validate(const RunConfig& c) {
  auto bad = [](const std::string& m) { throw ConfigError(0, 0, m); };
  if (c.N != 2 && c.N != 3) bad("grid.N must be 2 or 3");
  if (c.M_tan < 8 || !is_power_of_two(c.M_tan)) bad("grid.M_tan must be a power of two >= 8");
  if (c.M_nrm < 8) bad("grid.M_nrm must be >= 8");
  if (c.L_tan <= 0 || c.L_nrm <= 0) bad("domain lengths must be positive");
  if (c.dt <= 0 || c.T_final <= 0) bad("time.dt and time.T_final must be positive");
  if (c.sigma < 0) bad("material.sigma must be non-negative");
  if (c.rho_star_plus <= 0 || c.rho_star_minus <= 0) bad("reference densities must be positive");
  if (c.rho_star_minus == c.rho_star_plus) bad("reference densities must differ");
  if (c.theta_star <= 0) bad("material.theta_star must be positive");
  if (c.epsilon < 0) bad("initial.epsilon must be non-negative");
  if (c.tol_fp <= 0 || c.tol_compat <= 0 || c.delta_rho <= 0 || c.delta_j <= 0 || c.eps1 <= 0)
    bad("solver tolerances must be positive");
  if (c.max_iter < 1 || c.n_sub < 1) bad("solver.max_iter and solver.n_sub must be >= 1");
  if (c.curvature != "printed" && c.curvature != "derived")
    bad("switches.curvature must be printed|derived");
  if (c.j_denominator != "total" && c.j_denominator != "shifted")
    bad("switches.j_denominator must be total|shifted");
  if (c.heat_source != "transformed" && c.heat_source != "model")
    bad("switches.heat_source must be transformed|model");
  if (c.gibbs_row != "printed" && c.gibbs_row != "derived")
    bad("switches.gibbs_row must be printed|derived");
  if (c.output_every < 1) bad("output.every must be >= 1");
  // expressions must compile
  for (const std::string* e : {&c.mu_plus, &c.lambda_plus, &c.kappa_plus, &c.d_plus, &c.mu_minus,
                               &c.kappa_minus, &c.d_minus, &c.P_plus, &c.eta_plus, &c.eta_minus,
                               &c.psi_plus, &c.psi_minus}) {
    try {
      Expr probe(*e);
      probe.eval({{"rho", c.rho_star_plus}, {"theta", c.theta_star}});
    } catch (const SimError& err) {
      bad(err.what());
    }
  }
}

inline RunConfig parse_run_config(const std::string& text) {
  RunConfig c;
  auto table = detail::key_table(c);
  std::istringstream in(text);
  std::string line, section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string s = detail::trim(line);
    if (s.empty() || s[0] == '#' || s[0] == ';') continue;
    if (s.front() == '[') {
      if (s.back() != ']') throw ConfigError(lineno, 1, "unterminated section header");
      section = detail::trim(s.substr(1, s.size() - 2));
      if (section.empty()) throw ConfigError(lineno, 1, "empty section name");
      continue;
    }
    size_t eq = s.find('=');
    if (eq == std::string::npos) throw ConfigError(lineno, 1, "expected key = value");
    std::string key = detail::trim(s.substr(0, eq));
    std::string value = detail::trim(s.substr(eq + 1));
    if (key.empty()) throw ConfigError(lineno, 1, "empty key");
    if (section.empty()) throw ConfigError(lineno, 1, "key outside any section");
    std::string full = section + "." + key;
    auto it = table.find(full);
    if (it == table.end())
      throw ConfigError(lineno, static_cast<int>(line.find(key)) + 1, "unknown key '" + full + "'");
    detail::assign(it->second, value, lineno, static_cast<int>(eq) + 2);
    c.user_keys.insert(full);
  }
  validate(c);
  return c;
}

// Override a single key as "section.key=value".
inline void apply_override(RunConfig& c, const std::string& kv) {
  size_t eq = kv.find('=');
  if (eq == std::string::npos) throw ConfigError(0, 0, "override must be section.key=value");
  std::string key = detail::trim(kv.substr(0, eq));
  std::string value = detail::trim(kv.substr(eq + 1));
  auto table = detail::key_table(c);
  auto it = table.find(key);
  if (it == table.end()) throw ConfigError(0, 0, "unknown key '" + key + "'");
  detail::assign(it->second, value, 0, 0);
  c.user_keys.insert(key);
  validate(c);
}

inline std::string print_config(const RunConfig& c) {
  std::ostringstream o;
  o.precision(17);
  o << "[grid]\n"
    << "N = " << c.N << "\nM_tan = " << c.M_tan << "\nM_nrm = " << c.M_nrm
    << "\nL_tan = " << c.L_tan << "\nL_nrm = " << c.L_nrm << "\n\n[time]\ndt = " << c.dt
    << "\nT_final = " << c.T_final << "\n\n[material]\nrho_star_plus = " << c.rho_star_plus
    << "\nrho_star_minus = " << c.rho_star_minus << "\ntheta_star = " << c.theta_star
    << "\nsigma = " << c.sigma << "\nmu_plus = " << c.mu_plus
    << "\nlambda_plus = " << c.lambda_plus << "\nkappa_plus = " << c.kappa_plus
    << "\nd_plus = " << c.d_plus << "\nmu_minus = " << c.mu_minus
    << "\nkappa_minus = " << c.kappa_minus << "\nd_minus = " << c.d_minus
    << "\nP_plus = " << c.P_plus << "\neta_plus = " << c.eta_plus
    << "\neta_minus = " << c.eta_minus << "\npsi_plus = " << c.psi_plus
    << "\npsi_minus = " << c.psi_minus
    << "\nenforce_gibbs = " << (c.enforce_gibbs ? "true" : "false")
    << "\n\n[initial]\nepsilon = " << c.epsilon << "\n\n[solver]\ntol_fp = " << c.tol_fp
    << "\nmax_iter = " << c.max_iter << "\ntol_compat = " << c.tol_compat
    << "\ndelta_rho = " << c.delta_rho << "\ndelta_j = " << c.delta_j << "\neps1 = " << c.eps1
    << "\nn_sub = " << c.n_sub << "\n\n[switches]\ncurvature = " << c.curvature
    << "\nj_denominator = " << c.j_denominator << "\nheat_source = " << c.heat_source
    << "\ngibbs_row = " << c.gibbs_row
    << "\n\n[output]\nevery = " << c.output_every << "\n";
  return o.str();
}

inline Grid make_grid(const RunConfig& c) {
  Grid g;
  g.N = c.N;
  g.M_tan = c.M_tan;
  g.M_nrm = c.M_nrm;
  g.L_tan = c.L_tan;
  g.L_nrm = c.L_nrm;
  g.dt = c.dt;
  g.T_final = c.T_final;
  g.validate();
  return g;
}

inline MaterialSystem make_material(const RunConfig& c) {
  MaterialSystem m;
  m.rho_star_plus = c.rho_star_plus;
  m.rho_star_minus = c.rho_star_minus;
  m.theta_star = c.theta_star;
  m.sigma = c.sigma;
  m.mu_plus = expr_closure(c.mu_plus);
  m.lambda_plus = expr_closure(c.lambda_plus);
  m.kappa_plus = expr_closure(c.kappa_plus);
  m.d_plus = expr_closure(c.d_plus);
  m.mu_minus = expr_closure(c.mu_minus);
  m.kappa_minus = expr_closure(c.kappa_minus);
  m.d_minus = expr_closure(c.d_minus);
  m.P_plus = expr_closure(c.P_plus);
  m.eta_plus = expr_closure(c.eta_plus);
  m.eta_minus = expr_closure(c.eta_minus);
  m.psi_plus = expr_closure(c.psi_plus);
  m.psi_minus = expr_closure(c.psi_minus);
  if (c.enforce_gibbs) enforce_equilibrium(m);
  return m;
}

inline DriverConfig make_driver_config(const RunConfig& c) {
  DriverConfig d;
  d.tol_fp = c.tol_fp;
  d.max_iter = c.max_iter;
  d.tol_compat = c.tol_compat;
  d.delta_rho = c.delta_rho;
  d.eps1 = c.eps1;
  d.n_sub = c.n_sub;
  d.rhs.delta_j = c.delta_j;
  d.rhs.curvature = (c.curvature == "printed") ? RhsOptions::CurvatureBlock::printed
                                               : RhsOptions::CurvatureBlock::derived;
  d.rhs.j_denom = (c.j_denominator == "total")
                      ? RhsOptions::JDenominator::total_density
                      : RhsOptions::JDenominator::shifted_perturbation;
  d.rhs.gibbs_row = (c.gibbs_row == "printed") ? RhsOptions::GibbsRow::printed
                                               : RhsOptions::GibbsRow::derived;
  d.rhs.heat_source = (c.heat_source == "transformed") ? RhsOptions::HeatSource::transformed
                                                       : RhsOptions::HeatSource::model_form;
  return d;
}

}  // namespace bps
