#pragma once

// CSV ingest and export for every data product. Files are UTF-8 with LF line
// endings; a leading block of `#` lines carries the resolved configuration.
// Numbers are written with 12 significant digits.

#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "ncdipole/core.hpp"
#include "ncdipole/dipole.hpp"
#include "ncdipole/photostats.hpp"
#include "ncdipole/polarimetry.hpp"

namespace ncdipole::csv {

using Comments = std::vector<std::pair<std::string, std::string>>;

inline std::string num(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> comments;  // without the leading '#'
};

inline std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) {
    const auto b = field.find_first_not_of(" \t\r");
    const auto e = field.find_last_not_of(" \t\r");
    out.push_back(b == std::string::npos ? "" : field.substr(b, e - b + 1));
  }
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

inline Table parse_table(std::istream& in, const std::string& name) {
  Table t;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line[0] == '#') {
      t.comments.push_back(line.substr(1));
      continue;
    }
    auto f = split_fields(line);
    if (t.header.empty()) {
      t.header = std::move(f);
      continue;
    }
    if (f.size() != t.header.size())
      throw validation_error(name + ":" + std::to_string(lineno) + ": expected " +
                             std::to_string(t.header.size()) + " fields");
    t.rows.push_back(std::move(f));
  }
  if (t.header.empty()) throw validation_error(name + ": missing CSV header");
  return t;
}

inline Table read_table(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot open " + path);
  return parse_table(in, path);
}

inline double to_double(const std::string& s, const std::string& where) {
  if (s.empty()) throw validation_error(where + ": empty numeric field");
  errno = 0;
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end != s.c_str() + s.size() || errno == ERANGE)
    throw validation_error(where + ": not a number: '" + s + "'");
  return v;
}

inline void expect_header(const Table& t, const std::vector<std::string>& want, const std::string& name) {
  if (t.header != want) {
    std::string w;
    for (const auto& h : want) w += (w.empty() ? "" : ",") + h;
    throw validation_error(name + ": expected header '" + w + "'");
  }
}

// ---------------------------------------------------------------------------
// Writers

class Writer {
 public:
  explicit Writer(std::ostream& out) : out_(out) {}

  void comments(const Comments& c) {
    for (const auto& [k, v] : c) out_ << "# " << k << " = " << v << '\n';
  }
  void line(const std::string& s) { out_ << s << '\n'; }
  template <class... T>
  void row(const T&... v) {
    std::string s;
    ((s += (s.empty() ? "" : ",") + field(v)), ...);
    out_ << s << '\n';
  }

 private:
  static std::string field(double v) { return num(v); }
  static std::string field(int v) { return std::to_string(v); }
  static std::string field(long v) { return std::to_string(v); }
  static std::string field(long long v) { return std::to_string(v); }
  static std::string field(unsigned v) { return std::to_string(v); }
  static std::string field(unsigned long v) { return std::to_string(v); }
  static std::string field(bool v) { return v ? "1" : "0"; }
  static std::string field(const std::string& v) { return v; }
  std::ostream& out_;
};

inline void write_spectrum(std::ostream& out, const Spectrum& s, const Comments& c = {},
                           const std::string& abscissa = "energy_ev") {
  Writer w(out);
  w.comments(c);
  w.line(abscissa + ",intensity");
  for (std::size_t i = 0; i < s.grid.n_points; ++i) w.row(s.grid.point(i), s.intensity[i]);
}

inline void write_map(std::ostream& out, const PolarizationMap& m, const Comments& c = {}) {
  Writer w(out);
  w.comments(c);
  w.line("energy_ev,angle_deg,intensity");
  for (std::size_t i = 0; i < m.grid.n_points; ++i)
    for (std::size_t a = 0; a < m.n_angles(); ++a) w.row(m.grid.point(i), rad2deg(m.angles[a]), m.at(i, a));
}

inline void write_modes(std::ostream& out, const std::vector<PhononMode>& modes, const Comments& c = {}) {
  Writer w(out);
  w.comments(c);
  w.line("energy_mev,partial_hr,partial_dq,grad_magnitude,grad_direction_deg");
  for (const auto& m : modes)
    w.row(m.energy, m.partial_hr, m.partial_dq, m.grad_magnitude, rad2deg(m.grad_direction));
}

inline void write_orientation(std::ostream& out, const OrientationCurve& cv, const Comments& c = {}) {
  Writer w(out);
  w.comments(c);
  w.line("energy_ev,psi_deg,dolp,weight,valid");
  for (std::size_t i = 0; i < cv.size(); ++i)
    w.row(cv.energies[i], rad2deg(cv.psi[i]), cv.dolp[i], cv.weight[i], static_cast<bool>(cv.valid[i]));
}

inline void write_rqwp(std::ostream& out, const RqwpTrace& t, const Comments& c = {}) {
  Writer w(out);
  w.comments(c);
  w.line("qwp_angle_deg,intensity");
  for (std::size_t i = 0; i < t.qwp_angles.size(); ++i) w.row(rad2deg(t.qwp_angles[i]), t.intensity[i]);
}

inline void write_report(std::ostream& out, const MapAnalysis& a, const Comments& c = {}) {
  Writer w(out);
  w.comments(c);
  w.line("energy_ev,theta0_deg,dolp,psi_deg,chi_deg,dop,valid,rms_residual");
  for (const auto& b : a.bins)
    w.row(b.energy, rad2deg(b.theta0), b.dolp, rad2deg(b.psi), rad2deg(b.chi), b.dop, b.valid, b.rms_residual);
}

inline void write_stream(std::ostream& out, const PhotonStream& s, const Comments& c = {}) {
  Writer w(out);
  w.comments(c);
  w.line("time_ps,channel");
  for (std::size_t i = 0; i < s.size(); ++i)
    w.row(static_cast<long long>(s.time_tags[i]), static_cast<int>(s.channel[i]));
}

inline void write_histogram(std::ostream& out, const G2Histogram& h, const Comments& c = {}) {
  Writer w(out);
  w.comments(c);
  w.line("tau_ns,coincidences");
  for (std::size_t i = 0; i < h.bin_centers.size(); ++i)
    w.row(h.bin_centers[i], static_cast<long long>(h.coincidences[i]));
  w.line("# g2_zero=" + num(h.g2_zero) + " err=" + num(h.g2_zero_err));
}

// ---------------------------------------------------------------------------
// Readers

namespace detail {

inline EnergyGrid grid_from_points(const std::vector<double>& e, const std::string& name) {
  if (e.size() < 2) throw validation_error(name + ": need at least 2 energies");
  const auto g = make_grid(e.front(), e.back(), static_cast<long long>(e.size()));
  const double h = g.spacing();
  for (std::size_t i = 0; i < e.size(); ++i)
    if (std::abs(e[i] - g.point(i)) > 1e-6 * h)
      throw validation_error(name + ": energies are not uniformly spaced");
  return g;
}

}  // namespace detail

inline std::vector<PhononMode> read_modes(std::istream& in, const std::string& name) {
  const auto t = parse_table(in, name);
  expect_header(t, {"energy_mev", "partial_hr", "partial_dq", "grad_magnitude", "grad_direction_deg"}, name);
  std::vector<PhononMode> modes;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto where = name + " row " + std::to_string(r + 1);
    PhononMode m;
    m.energy = to_double(t.rows[r][0], where);
    m.partial_hr = to_double(t.rows[r][1], where);
    m.partial_dq = to_double(t.rows[r][2], where);
    m.grad_magnitude = to_double(t.rows[r][3], where);
    m.grad_direction = deg2rad(to_double(t.rows[r][4], where));
    try {
      validate(m);
    } catch (const validation_error& e) {
      throw validation_error(where + ": " + e.what());
    }
    modes.push_back(m);
  }
  return modes;
}

inline std::vector<PhononMode> read_modes(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot open " + path);
  return read_modes(in, path);
}

inline Spectrum read_spectrum(const std::string& path) {
  const auto t = read_table(path);
  expect_header(t, {"energy_ev", "intensity"}, path);
  std::vector<double> e, v;
  for (const auto& r : t.rows) {
    e.push_back(to_double(r[0], path));
    v.push_back(to_double(r[1], path));
  }
  Spectrum s{detail::grid_from_points(e, path), v};
  validate(s);
  return s;
}

inline PolarizationMap read_map(const std::string& path) {
  const auto t = read_table(path);
  expect_header(t, {"energy_ev", "angle_deg", "intensity"}, path);
  if (t.rows.empty()) throw validation_error(path + ": map has no rows");
  std::vector<double> energies, angles, values;
  const double e0 = to_double(t.rows[0][0], path);
  for (const auto& r : t.rows) {
    const double e = to_double(r[0], path);
    if (e != e0) break;
    angles.push_back(deg2rad(to_double(r[1], path)));
  }
  const std::size_t na = angles.size();
  if (t.rows.size() % na != 0) throw validation_error(path + ": ragged map (rows not a multiple of angle count)");
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    const auto& r = t.rows[i];
    const double e = to_double(r[0], path);
    if (i % na == 0) energies.push_back(e);
    else if (e != energies.back()) throw validation_error(path + ": map rows must be grouped by energy");
    if (std::abs(deg2rad(to_double(r[1], path)) - angles[i % na]) > 1e-12)
      throw validation_error(path + ": angle list differs between energies");
    values.push_back(to_double(r[2], path));
  }
  PolarizationMap m{detail::grid_from_points(energies, path), angles, values};
  validate(m);
  return m;
}

inline RqwpTrace read_rqwp(const std::string& path) {
  const auto t = read_table(path);
  expect_header(t, {"qwp_angle_deg", "intensity"}, path);
  RqwpTrace tr;
  for (const auto& r : t.rows) {
    tr.qwp_angles.push_back(deg2rad(to_double(r[0], path)));
    tr.intensity.push_back(to_double(r[1], path));
  }
  return tr;
}

/// Angle/intensity pairs for a Malus fit (`angle_deg,intensity`).
inline std::pair<std::vector<double>, std::vector<double>> read_angle_scan(const std::string& path) {
  const auto t = read_table(path);
  expect_header(t, {"angle_deg", "intensity"}, path);
  std::vector<double> a, v;
  for (const auto& r : t.rows) {
    a.push_back(deg2rad(to_double(r[0], path)));
    v.push_back(to_double(r[1], path));
  }
  return {a, v};
}

inline PhotonStream read_stream(const std::string& path) {
  const auto t = read_table(path);
  expect_header(t, {"time_ps", "channel"}, path);
  PhotonStream s;
  for (const auto& r : t.rows) {
    const double tp = to_double(r[0], path);
    const double ch = to_double(r[1], path);
    if (ch != 0.0 && ch != 1.0) throw validation_error(path + ": channel must be 0 or 1");
    s.time_tags.push_back(static_cast<std::int64_t>(std::llround(tp)));
    s.channel.push_back(static_cast<std::uint8_t>(ch));
  }
  return s;
}

}  // namespace ncdipole::csv
