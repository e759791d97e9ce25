#pragma once

// Flat `key = value` configuration files and shipped presets.
//
// A preset is an ordinary config file `<name>.cfg`; its mode table lives in
// the CSV named by `modes_file`, resolved relative to the config file.
// Search order for presets: $NCDIPOLE_PRESET_DIR, ./presets, the source tree.

#include <cctype>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "ncdipole/core.hpp"
#include "ncdipole/csv.hpp"

#ifndef NCDIPOLE_PRESET_DIR
#define NCDIPOLE_PRESET_DIR "presets"
#endif

namespace ncdipole {

class Config {
 public:
  void set(const std::string& key, const std::string& value) {
    if (!values_.count(key)) order_.push_back(key);
    values_[key] = value;
  }
  bool has(const std::string& key) const { return values_.count(key) > 0; }
  const std::string& get(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) throw validation_error("missing config key '" + key + "'");
    return it->second;
  }
  std::string get_or(const std::string& key, const std::string& fallback) const {
    return has(key) ? get(key) : fallback;
  }
  double number(const std::string& key) const { return csv::to_double(get(key), "config key " + key); }
  double number_or(const std::string& key, double fallback) const {
    return has(key) ? number(key) : fallback;
  }
  /// Later entries win.
  void merge(const Config& other) {
    for (const auto& k : other.order_) set(k, other.get(k));
  }
  /// Resolved entries in first-seen order, for output headers.
  csv::Comments entries() const {
    csv::Comments out;
    for (const auto& k : order_) out.emplace_back(k, values_.at(k));
    return out;
  }
  std::filesystem::path base_dir;  // directory of the file it was loaded from

 private:
  std::map<std::string, std::string> values_;
  std::vector<std::string> order_;
};

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline Config parse_config(std::istream& in, const std::string& name) {
  Config c;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw validation_error(name + ":" + std::to_string(lineno) + ": expected 'key = value'");
    const auto key = trim(line.substr(0, eq));
    if (key.empty()) throw validation_error(name + ":" + std::to_string(lineno) + ": empty key");
    c.set(key, trim(line.substr(eq + 1)));
  }
  return c;
}

inline Config load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot open config " + path.string());
  auto c = parse_config(in, path.string());
  c.base_dir = path.parent_path();
  if (c.has("modes_file")) {
    std::filesystem::path p = c.get("modes_file");
    if (p.is_relative()) c.set("modes_file", (c.base_dir / p).lexically_normal().string());
  }
  return c;
}

inline std::vector<std::filesystem::path> preset_dirs() {
  std::vector<std::filesystem::path> dirs;
  if (const char* env = std::getenv("NCDIPOLE_PRESET_DIR"); env && *env) dirs.emplace_back(env);
  dirs.emplace_back("presets");
  dirs.emplace_back(NCDIPOLE_PRESET_DIR);
  return dirs;
}

inline std::filesystem::path find_preset(const std::string& name) {
  for (char ch : name)
    if (!(std::isalnum(static_cast<unsigned char>(ch)) || ch == '_' || ch == '-'))
      throw validation_error("invalid preset name '" + name + "'");
  for (const auto& d : preset_dirs()) {
    const auto p = d / (name + ".cfg");
    if (std::filesystem::is_regular_file(p)) return p;
  }
  throw validation_error("unknown preset '" + name + "'");
}

inline Config load_preset(const std::string& name) {
  auto c = load_config(find_preset(name));
  c.set("preset", name);
  return c;
}

/// "min:max:n" with energies in the file's units.
inline EnergyGrid parse_grid(const std::string& spec) {
  const auto a = spec.find(':');
  const auto b = a == std::string::npos ? a : spec.find(':', a + 1);
  if (b == std::string::npos) throw validation_error("grid must be 'min:max:n', got '" + spec + "'");
  const double lo = csv::to_double(trim(spec.substr(0, a)), "grid min");
  const double hi = csv::to_double(trim(spec.substr(a + 1, b - a - 1)), "grid max");
  const double n = csv::to_double(trim(spec.substr(b + 1)), "grid n");
  if (n != std::floor(n)) throw validation_error("grid point count must be an integer");
  return make_grid(lo, hi, static_cast<long long>(n));
}

inline std::string format_grid(const EnergyGrid& g) {
  return csv::num(g.min_energy) + ":" + csv::num(g.max_energy) + ":" + std::to_string(g.n_points);
}

inline const std::set<std::string>& model_keys() {
  static const std::set<std::string> keys = {
      "zpl_energy_ev", "equilibrium_angle_deg", "equilibrium_dipole", "modes_file",
      "zpl_linewidth_mev", "profile", "acoustic_coupling", "acoustic_cutoff_mev",
      "acoustic_grad", "acoustic_grad_direction_deg", "acoustic_fluctuation",
      "anti_stokes_gain", "temperature_k", "strain_bias", "opsb_energy_mev"};
  return keys;
}

/// Build and validate an emitter model from config keys; absent keys keep
/// the EmitterModel defaults.
inline EmitterModel model_from_config(const Config& c) {
  EmitterModel m;
  m.zpl_energy = c.number_or("zpl_energy_ev", m.zpl_energy);
  m.equilibrium_angle = deg2rad(c.number_or("equilibrium_angle_deg", rad2deg(m.equilibrium_angle)));
  m.equilibrium_dipole = c.number_or("equilibrium_dipole", m.equilibrium_dipole);
  m.zpl_linewidth = c.number_or("zpl_linewidth_mev", m.zpl_linewidth);
  const auto profile = c.get_or("profile", "lorentzian");
  if (profile == "lorentzian") m.profile = LineProfile::lorentzian;
  else if (profile == "gaussian") m.profile = LineProfile::gaussian;
  else throw validation_error("profile must be lorentzian or gaussian, got '" + profile + "'");
  m.acoustic_coupling = c.number_or("acoustic_coupling", m.acoustic_coupling);
  m.acoustic_cutoff = c.number_or("acoustic_cutoff_mev", m.acoustic_cutoff);
  m.acoustic_grad = c.number_or("acoustic_grad", m.acoustic_grad);
  m.acoustic_grad_direction =
      deg2rad(c.number_or("acoustic_grad_direction_deg", rad2deg(m.acoustic_grad_direction)));
  m.acoustic_fluctuation = c.number_or("acoustic_fluctuation", m.acoustic_fluctuation);
  m.anti_stokes_gain = c.number_or("anti_stokes_gain", m.anti_stokes_gain);
  m.temperature = c.number_or("temperature_k", m.temperature);
  m.strain_bias = c.number_or("strain_bias", m.strain_bias);
  m.opsb_energy = c.number_or("opsb_energy_mev", m.opsb_energy);
  if (c.has("modes_file")) {
    m.modes = csv::read_modes(c.get("modes_file"));
  }
  validate(m);
  return m;
}

inline EmitterModel load_preset_model(const std::string& name) {
  return model_from_config(load_preset(name));
}

}  // namespace ncdipole
