#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "bps/driver.hpp"

namespace bps {

// ---------------------------------------------------------------- CSV

struct CsvTable {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;

  void add_row(std::vector<double> r) {
    if (r.size() != columns.size()) throw SimError("csv: row width mismatch");
    rows.push_back(std::move(r));
  }
};

inline void write_csv(const std::filesystem::path& path, const CsvTable& t) {
  std::ofstream out(path);
  if (!out) throw SimError("cannot open " + path.string());
  out.precision(17);
  for (size_t j = 0; j < t.columns.size(); ++j) out << (j ? "," : "") << t.columns[j];
  out << "\n";
  for (const auto& r : t.rows) {
    for (size_t j = 0; j < r.size(); ++j) out << (j ? "," : "") << r[j];
    out << "\n";
  }
}

inline CsvTable read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw SimError("cannot open " + path.string());
  CsvTable t;
  std::string line;
  if (!std::getline(in, line)) throw SimError("empty csv " + path.string());
  std::istringstream hs(line);
  std::string cell;
  while (std::getline(hs, cell, ',')) t.columns.push_back(cell);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream rs(line);
    std::vector<double> row;
    while (std::getline(rs, cell, ',')) row.push_back(std::stod(cell));
    t.add_row(std::move(row));
  }
  return t;
}

// ---------------------------------------------------------------- binary snapshots

namespace detail {

inline void put_bytes(std::ostream& o, const void* p, size_t n) {
  o.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
}
inline void get_bytes(std::istream& i, void* p, size_t n) {
  i.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
  if (!i) throw SimError("snapshot: truncated file");
}
inline void put_vec(std::ostream& o, const std::vector<double>& v) {
  const uint64_t n = v.size();
  put_bytes(o, &n, sizeof n);
  put_bytes(o, v.data(), n * sizeof(double));
}
inline std::vector<double> get_vec(std::istream& i, size_t expect) {
  uint64_t n = 0;
  get_bytes(i, &n, sizeof n);
  if (n != expect) throw SimError("snapshot: array size mismatch");
  std::vector<double> v(n);
  get_bytes(i, v.data(), n * sizeof(double));
  return v;
}

}  // namespace detail

// Binary state snapshot: grid header, time, then the primary unknowns.
inline void write_snapshot(const std::filesystem::path& path, const SimState& st) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw SimError("cannot open " + path.string());
  out.write("BPS1", 4);
  const int32_t dims[3] = {st.g.N, st.g.M_tan, st.g.M_nrm};
  detail::put_bytes(out, dims, sizeof dims);
  const double reals[3] = {st.g.L_tan, st.g.L_nrm, st.t};
  detail::put_bytes(out, reals, sizeof reals);
  for (int i = 0; i < st.g.N; ++i) detail::put_vec(out, st.fields.u_up[i].a);
  for (int i = 0; i < st.g.N; ++i) detail::put_vec(out, st.fields.u_lo[i].a);
  detail::put_vec(out, st.fields.rho_up.a);
  detail::put_vec(out, st.fields.theta_up.a);
  detail::put_vec(out, st.fields.theta_lo.a);
  detail::put_vec(out, st.h.a);
  detail::put_vec(out, st.dth.a);
  detail::put_vec(out, st.pi_lo.a);
}

inline SimState read_snapshot(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw SimError("cannot open " + path.string());
  char magic[4];
  detail::get_bytes(in, magic, 4);
  if (std::string(magic, 4) != "BPS1") throw SimError("snapshot: bad magic in " + path.string());
  int32_t dims[3];
  detail::get_bytes(in, dims, sizeof dims);
  double reals[3];
  detail::get_bytes(in, reals, sizeof reals);
  Grid g;
  g.N = dims[0];
  g.M_tan = dims[1];
  g.M_nrm = dims[2];
  g.L_tan = reals[0];
  g.L_nrm = reals[1];
  g.validate();
  SimState st(g);
  st.t = reals[2];
  const size_t fs = g.strip_size(), ls = static_cast<size_t>(g.n_tan());
  for (int i = 0; i < g.N; ++i) st.fields.u_up[i].a = detail::get_vec(in, fs);
  for (int i = 0; i < g.N; ++i) st.fields.u_lo[i].a = detail::get_vec(in, fs);
  st.fields.rho_up.a = detail::get_vec(in, fs);
  st.fields.theta_up.a = detail::get_vec(in, fs);
  st.fields.theta_lo.a = detail::get_vec(in, fs);
  st.h.a = detail::get_vec(in, ls);
  st.dth.a = detail::get_vec(in, ls);
  st.pi_lo.a = detail::get_vec(in, fs);
  return st;
}

// ---------------------------------------------------------------- JSON run records

inline nlohmann::json step_record(int index, double t, const StepReport& rep) {
  nlohmann::json j;
  j["step"] = index;
  j["t"] = t;
  j["iterations"] = rep.iterations;
  j["converged"] = rep.converged;
  j["change"] = rep.change;
  j["ratio"] = rep.ratio;
  j["min_jacobian"] = rep.min_jacobian;
  j["grad_integral"] = rep.grad_integral;
  j["max_condition"] = rep.max_condition;
  j["max_rel_residual"] = rep.max_rel_residual;
  j["gate"] = rep.gate;
  if (!rep.failure.empty()) j["failure"] = rep.failure;
  return j;
}

// ---------------------------------------------------------------- SVG line plots

struct PlotSeries {
  std::string label;
  std::vector<double> x, y;
};

// Deterministic text SVG: axes box plus one polyline per series.
inline void write_svg_plot(const std::filesystem::path& path, const std::string& title,
                           const std::vector<PlotSeries>& series) {
  const int W = 640, H = 400, ml = 60, mr = 20, mt = 36, mb = 40;
  double xmin = 0, xmax = 1, ymin = 0, ymax = 1;
  bool first = true;
  for (const auto& s : series)
    for (size_t i = 0; i < s.x.size(); ++i) {
      if (first) {
        xmin = xmax = s.x[i];
        ymin = ymax = s.y[i];
        first = false;
      }
      xmin = std::min(xmin, s.x[i]);
      xmax = std::max(xmax, s.x[i]);
      ymin = std::min(ymin, s.y[i]);
      ymax = std::max(ymax, s.y[i]);
    }
  if (xmax == xmin) xmax = xmin + 1;
  if (ymax == ymin) ymax = ymin + 1;
  auto px = [&](double x) { return ml + (x - xmin) / (xmax - xmin) * (W - ml - mr); };
  auto py = [&](double y) { return H - mb - (y - ymin) / (ymax - ymin) * (H - mt - mb); };

  static const char* colors[] = {"#1f6fb2", "#c23b22", "#2e8540", "#7d3fa8", "#b8860b"};
  std::ostringstream o;
  o.precision(8);
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
    << "\" viewBox=\"0 0 " << W << " " << H << "\">\n";
  o << "<rect width=\"" << W << "\" height=\"" << H << "\" fill=\"white\"/>\n";
  o << "<text x=\"" << W / 2 << "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">" << title
    << "</text>\n";
  o << "<rect x=\"" << ml << "\" y=\"" << mt << "\" width=\"" << W - ml - mr << "\" height=\""
    << H - mt - mb << "\" fill=\"none\" stroke=\"black\"/>\n";
  o << "<text x=\"" << ml << "\" y=\"" << H - 8 << "\" font-size=\"11\">" << xmin << "</text>\n";
  o << "<text x=\"" << W - mr << "\" y=\"" << H - 8 << "\" text-anchor=\"end\" font-size=\"11\">"
    << xmax << "</text>\n";
  o << "<text x=\"4\" y=\"" << H - mb << "\" font-size=\"11\">" << ymin << "</text>\n";
  o << "<text x=\"4\" y=\"" << mt + 10 << "\" font-size=\"11\">" << ymax << "</text>\n";
  int ci = 0;
  for (const auto& s : series) {
    const char* col = colors[ci % 5];
    o << "<polyline fill=\"none\" stroke=\"" << col << "\" stroke-width=\"1.5\" points=\"";
    for (size_t i = 0; i < s.x.size(); ++i)
      o << (i ? " " : "") << px(s.x[i]) << "," << py(s.y[i]);
    o << "\"/>\n";
    o << "<text x=\"" << W - mr - 6 << "\" y=\"" << mt + 16 + 14 * ci
      << "\" text-anchor=\"end\" font-size=\"11\" fill=\"" << col << "\">" << s.label
      << "</text>\n";
    ++ci;
  }
  o << "</svg>\n";
  std::ofstream out(path);
  if (!out) throw SimError("cannot open " + path.string());
  out << o.str();
}

}  // namespace bps
