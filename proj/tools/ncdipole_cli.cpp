// ncdipole: command-line front end.
//
// Exit codes: 0 success, 2 validation error, 3 numerical failure, 4 I/O error.
// Errors are reported as one line on stderr: "error[<code>]: <message>".

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ncdipole/ncdipole.hpp"

namespace nd = ncdipole;

namespace {

struct Global {
  std::string config;
  std::uint64_t seed = 42;
  bool seed_set = false;
  std::string out;
  bool quiet = false;
};

struct ModelFlags {
  std::string preset;
  std::optional<double> temp;
  std::optional<double> bias;
  std::optional<std::string> modes;
  std::optional<std::string> profile;
  std::optional<double> linewidth;
  std::optional<double> acoustic_grad;
  std::optional<std::string> grid;
};

void add_model_flags(CLI::App* c, ModelFlags& f) {
  c->add_option("--preset", f.preset, "Preset name (presets/<name>.cfg)");
  c->add_option("--temp", f.temp, "Temperature, K");
  c->add_option("--bias", f.bias, "Strain bias in [-1, 1]");
  c->add_option("--modes", f.modes, "Mode table CSV");
  c->add_option("--profile", f.profile, "ZPL profile: lorentzian|gaussian");
  c->add_option("--linewidth", f.linewidth, "ZPL FWHM, meV");
  c->add_option("--acoustic-grad", f.acoustic_grad, "Acoustic dipole gradient magnitude");
  c->add_option("--grid", f.grid, "Energy grid min:max:n (eV)");
}

std::string fmt(double v) { return nd::csv::num(v); }

/// preset < --config file < flags.
nd::Config resolve(const Global& g, const ModelFlags& f, const std::string& command) {
  nd::Config file;
  if (!g.config.empty()) file = nd::load_config(g.config);
  std::string preset = f.preset;
  if (preset.empty() && file.has("preset")) preset = file.get("preset");
  nd::Config c;
  c.set("command", command);
  if (!preset.empty()) c.merge(nd::load_preset(preset));
  c.merge(file);
  if (!preset.empty()) c.set("preset", preset);
  if (f.temp) c.set("temperature_k", fmt(*f.temp));
  if (f.bias) c.set("strain_bias", fmt(*f.bias));
  if (f.modes) c.set("modes_file", *f.modes);
  if (f.profile) c.set("profile", *f.profile);
  if (f.linewidth) c.set("zpl_linewidth_mev", fmt(*f.linewidth));
  if (f.acoustic_grad) c.set("acoustic_grad", fmt(*f.acoustic_grad));
  if (f.grid) c.set("grid", *f.grid);
  if (g.seed_set || !c.has("seed")) c.set("seed", std::to_string(g.seed));
  return c;
}

nd::EnergyGrid grid_from(const nd::Config& c, const std::string& fallback_key) {
  if (c.has("grid")) return nd::parse_grid(c.get("grid"));
  if (c.has(fallback_key)) return nd::parse_grid(c.get(fallback_key));
  throw nd::validation_error("no energy grid: pass --grid or set " + fallback_key);
}

void emit(const Global& g, const std::string& text) {
  if (g.out.empty() || g.out == "-") {
    std::cout << text;
    std::cout.flush();
    return;
  }
  std::ofstream f(g.out, std::ios::binary);
  if (!f) throw nd::io_error("cannot write " + g.out);
  f << text;
  if (!f) throw nd::io_error("write failed for " + g.out);
}

void note(const Global& g, const std::string& s) {
  if (!g.quiet) std::cerr << s << '\n';
}

nd::MapMode parse_mode(const std::string& s) {
  if (s == "analyzer") return nd::MapMode::analyzer;
  if (s == "rqwp") return nd::MapMode::rqwp;
  throw nd::validation_error("mode must be analyzer or rqwp, got '" + s + "'");
}

std::vector<double> parse_list(const std::string& s, const std::string& what) {
  std::vector<double> v;
  for (const auto& f : nd::csv::split_fields(s)) v.push_back(nd::csv::to_double(f, what));
  return v;
}

// ---------------------------------------------------------------------------

int cmd_spectrum(const Global& g, const ModelFlags& f, bool bruteforce, int max_quanta) {
  auto c = resolve(g, f, "spectrum");
  const auto model = nd::model_from_config(c);
  const auto grid = grid_from(c, "spectrum_grid");
  c.set("grid", nd::format_grid(grid));
  nd::Spectrum s;
  if (bruteforce) {
    c.set("method", "franck-condon");
    s = nd::lineshape_bruteforce(model, grid, max_quanta);
  } else {
    const auto r = nd::lineshape_detailed(model, grid);
    s = r.spectrum;
    c.set("zpl_weight", fmt(r.zpl_weight));
    c.set("debye_waller", fmt(nd::debye_waller(model.modes, model.temperature)));
    c.set("grid_mass", fmt(r.grid_mass));
  }
  std::ostringstream os;
  nd::csv::write_spectrum(os, s, c.entries());
  emit(g, os.str());
  note(g, "spectrum: " + std::to_string(grid.n_points) + " points, integral " + fmt(s.integral()));
  return 0;
}

int cmd_spectral_function(const Global& g, const ModelFlags& f, double broadening,
                          const std::string& phonon_grid) {
  auto c = resolve(g, f, "spectral-function");
  const auto model = nd::model_from_config(c);
  nd::EnergyGrid grid;
  if (!phonon_grid.empty()) {
    grid = nd::parse_grid(phonon_grid);
  } else {
    double wmax = 0.0;
    for (const auto& m : model.modes) wmax = std::max(wmax, m.energy);
    grid = nd::make_grid(0.0, wmax + 10.0 * broadening + 20.0,
                         static_cast<long long>(std::ceil((wmax + 10.0 * broadening + 20.0) / 0.1)) + 1);
  }
  c.set("broadening_mev", fmt(broadening));
  c.set("phonon_grid_mev", nd::format_grid(grid));
  const auto sf = nd::spectral_function(model.modes, broadening, grid);
  c.set("total_hr", fmt(model.total_hr()));
  std::ostringstream os;
  nd::csv::write_spectrum(os, nd::Spectrum{sf.grid, sf.density}, c.entries(), "energy_mev");
  emit(g, os.str());
  return 0;
}

nd::EnergyGrid band_grid(const nd::Config& c, const std::string& band) {
  if (c.has("grid")) return nd::parse_grid(c.get("grid"));
  if (band == "zpl") return grid_from(c, "zpl_band_grid");
  if (band == "opsb") return grid_from(c, "opsb_band_grid");
  if (band == "spectrum") return grid_from(c, "spectrum_grid");
  throw nd::validation_error("band must be zpl, opsb or spectrum, got '" + band + "'");
}

int cmd_simulate_map(const Global& g, const ModelFlags& f, const std::string& mode_s,
                     const std::string& noise_s, double counts, const std::string& band,
                     const std::string& angles_s) {
  auto c = resolve(g, f, "simulate-map");
  nd::MapOptions opt;
  opt.mode = parse_mode(mode_s);
  if (noise_s == "none") opt.noise = nd::NoiseModel::none;
  else if (noise_s == "poisson") opt.noise = nd::NoiseModel::poisson;
  else throw nd::validation_error("noise must be none or poisson, got '" + noise_s + "'");
  opt.counts_per_point = counts;
  opt.seed = std::stoull(c.get("seed"));
  const auto model = nd::model_from_config(c);
  const auto grid = band_grid(c, band);
  std::vector<double> angles = nd::default_angles(opt.mode);
  if (!angles_s.empty()) {
    angles.clear();
    for (double a : parse_list(angles_s, "angles")) angles.push_back(nd::deg2rad(a));
  }
  c.set("grid", nd::format_grid(grid));
  c.set("mode", mode_s);
  c.set("noise", noise_s);
  c.set("counts_per_point", fmt(counts));
  const auto map = nd::simulate_polarization_map(model, grid, angles, opt);
  std::ostringstream os;
  nd::csv::write_map(os, map, c.entries());
  emit(g, os.str());
  note(g, "simulate-map: " + std::to_string(grid.n_points) + " energies x " +
              std::to_string(angles.size()) + " angles");
  return 0;
}

int cmd_analyze_map(const Global& g, const std::string& in, const std::string& mode_s,
                    double bin_width, bool report, double floor) {
  const auto map = nd::csv::read_map(in);
  const auto mode = parse_mode(mode_s);
  const auto a = nd::analyze_map(map, mode, bin_width);
  nd::csv::Comments c = {{"command", "analyze-map"}, {"input", in}, {"mode", mode_s},
                         {"bin_width_mev", fmt(bin_width)}, {"intensity_floor", fmt(floor)}};
  std::size_t n_valid = 0;
  for (bool v : a.curve.valid) n_valid += v ? 1 : 0;
  c.emplace_back("valid_bins", std::to_string(n_valid));
  if (n_valid > 0) c.emplace_back("sweep_deg", fmt(nd::rad2deg(nd::orientation_sweep(a.curve, floor))));
  std::ostringstream os;
  if (report) nd::csv::write_report(os, a, c);
  else nd::csv::write_orientation(os, a.curve, c);
  emit(g, os.str());
  if (n_valid > 0)
    note(g, "analyze-map: " + std::to_string(n_valid) + " valid bins, sweep " +
                fmt(nd::rad2deg(nd::orientation_sweep(a.curve, floor))) + " deg");
  else
    note(g, "analyze-map: no valid bins");
  return 0;
}

int cmd_fit_malus(const Global& g, const std::string& in) {
  const auto [angles, values] = nd::csv::read_angle_scan(in);
  const auto f = nd::fit_malus(angles, values);
  std::ostringstream os;
  nd::csv::Writer w(os);
  w.comments({{"command", "fit-malus"}, {"input", in}});
  w.line("theta0_deg,i_max,i_min,dolp,rms_residual,orientation_defined,unphysical_floor");
  w.row(nd::rad2deg(f.theta0), f.i_max, f.i_min, f.dolp, f.rms_residual, f.orientation_defined,
        f.unphysical_floor);
  emit(g, os.str());
  return 0;
}

int cmd_stokes(const Global& g, const std::string& in, const std::string& vec, int n_angles) {
  std::ostringstream os;
  nd::csv::Writer w(os);
  if (!in.empty() == !vec.empty())
    throw nd::validation_error("stokes needs exactly one of --in (RQWP trace) or --vector s0,s1,s2,s3");
  if (!in.empty()) {
    const auto t = nd::csv::read_rqwp(in);
    const auto s = nd::extract_stokes_rqwp(t);
    w.comments({{"command", "stokes"}, {"input", in}});
    w.line("s0,s1,s2,s3,dop,psi_deg,chi_deg,dop_excess");
    if (s.s0 > 0.0) {
      const auto e = nd::stokes_to_ellipse(s);
      w.row(s.s0, s.s1, s.s2, s.s3, e.dop, nd::rad2deg(e.psi), nd::rad2deg(e.chi), e.dop_excess);
    } else {
      throw nd::numerical_error("extracted s0 is not positive");
    }
  } else {
    const auto v = parse_list(vec, "Stokes vector");
    if (v.size() != 4) throw nd::validation_error("Stokes vector needs 4 components");
    const nd::StokesVector s{v[0], v[1], v[2], v[3]};
    nd::require(s.s0 > 0.0 && s.polarized() <= s.s0 * (1.0 + 1e-9), "Stokes vector is not physical");
    nd::RqwpTrace t;
    t.qwp_angles = nd::uniform_angles(static_cast<std::size_t>(n_angles));
    nd::require(n_angles >= 8, "need at least 8 waveplate angles");
    for (double a : t.qwp_angles) t.intensity.push_back(nd::rqwp_intensity(s, a));
    nd::csv::write_rqwp(os, t, {{"command", "stokes"}, {"vector", vec}});
  }
  emit(g, os.str());
  return 0;
}

struct G2Flags {
  double fraction = 0.943;
  double rate = 5e4;
  double rep_rate = 40.0;
  double lifetime = 1.5;
  double duration = 60.0;
  double bin_width = 0.1;
  std::optional<double> window;
  std::string stream_in;
  std::string stream_out;
};

int cmd_g2(const Global& g, const G2Flags& f) {
  nd::PhotonStream s;
  nd::csv::Comments c = {{"command", "g2"}};
  const double period = 1e3 / f.rep_rate;
  if (!f.stream_in.empty()) {
    s = nd::csv::read_stream(f.stream_in);
    c.emplace_back("stream_in", f.stream_in);
  } else {
    const auto p = nd::stream_for_fraction(f.fraction, f.rate, f.rep_rate, f.lifetime, f.duration, g.seed);
    c.insert(c.end(), {{"signal_fraction", fmt(f.fraction)}, {"total_rate_cps", fmt(f.rate)},
                       {"signal_prob", fmt(p.signal_prob)}, {"background_rate_cps", fmt(p.background_rate)},
                       {"lifetime_ns", fmt(f.lifetime)}, {"duration_s", fmt(f.duration)},
                       {"seed", std::to_string(g.seed)}, {"g2_expected", fmt(nd::g2_zero_expected(f.fraction))}});
    s = nd::simulate_stream(p);
  }
  c.insert(c.end(), {{"rep_rate_mhz", fmt(f.rep_rate)}, {"bin_width_ns", fmt(f.bin_width)}});
  const double window = f.window.value_or(10.5 * period);
  c.emplace_back("window_ns", fmt(window));
  if (!f.stream_out.empty()) {
    std::ofstream so(f.stream_out, std::ios::binary);
    if (!so) throw nd::io_error("cannot write " + f.stream_out);
    nd::csv::write_stream(so, s, c);
  }
  const auto h = nd::g2_histogram(s, f.bin_width, window, period);
  std::ostringstream os;
  nd::csv::write_histogram(os, h, c);
  emit(g, os.str());
  note(g, "g2(0) = " + fmt(h.g2_zero) + " +- " + fmt(h.g2_zero_err));
  return 0;
}

int cmd_modes(const Global& g, const std::string& in, const ModelFlags& f) {
  std::vector<nd::PhononMode> modes;
  nd::EmitterModel model;
  if (!in.empty()) {
    modes = nd::csv::read_modes(in);
    model.modes = modes;
  } else {
    auto c = resolve(g, f, "modes");
    model = nd::model_from_config(c);
    modes = model.modes;
  }
  double max_rot = 0.0;
  for (const auto& r : nd::mode_rotations(model)) max_rot = std::max(max_rot, std::abs(r.delta_theta));
  nd::csv::Comments c = {{"command", "modes"},
                         {"n_modes", std::to_string(modes.size())},
                         {"total_hr", fmt(model.total_hr())},
                         {"total_dq", fmt(nd::total_dq(modes))},
                         {"max_rotation_deg", fmt(nd::rad2deg(max_rot))}};
  std::ostringstream os;
  nd::csv::write_modes(os, modes, c);
  emit(g, os.str());
  return 0;
}

int cmd_calibrate(const Global& g, const ModelFlags& f, double target_deg) {
  auto c = resolve(g, f, "calibrate");
  const auto model = nd::model_from_config(c);
  const auto grid = band_grid(c, "zpl");
  const double gac = nd::calibrate_acoustic_grad(model, grid, nd::deg2rad(target_deg));
  std::ostringstream os;
  os << "# target_sweep_deg = " << fmt(target_deg) << "\n# grid = " << nd::format_grid(grid)
     << "\nacoustic_grad = " << fmt(gac) << "\n";
  emit(g, os.str());
  return 0;
}

int cmd_roundtrip(const Global& g, const std::vector<std::string>& presets) {
  std::ostringstream os;
  nd::csv::Writer w(os);
  w.comments({{"command", "roundtrip"}, {"seed", std::to_string(g.seed)}});
  w.line("preset,temperature_k,mode,check,value,target,pass");
  bool all = true;
  auto check = [&](const std::string& p, double t, const std::string& m, const std::string& name,
                   double v, const std::string& target, bool ok) {
    w.row(p, t, m, name, v, target, ok);
    all = all && ok;
  };
  for (const auto& p : presets) {
    const auto cfg = nd::load_preset(p);
    for (double t : {6.0, 300.0}) {
      auto model = nd::model_from_config(cfg);
      model.temperature = t;
      const auto grid = nd::parse_grid(cfg.get("zpl_band_grid"));
      for (auto mode : {nd::MapMode::analyzer, nd::MapMode::rqwp}) {
        const std::string ms = mode == nd::MapMode::analyzer ? "analyzer" : "rqwp";
        nd::MapOptions opt;
        opt.mode = mode;
        opt.seed = g.seed;
        const auto r = nd::run_roundtrip(model, grid, opt);
        const double err = nd::rad2deg(nd::max_psi_error(r));
        check(p, t, ms, "max_psi_error_deg", err, "<=0.5", err <= 0.5);
        if (p == "strong_coupling") {
          if (t == 300.0) {
            const double sw = nd::rad2deg(nd::orientation_sweep(r.analysis.curve));
            check(p, t, ms, "sweep_deg", sw, "40+-2", std::abs(sw - 40.0) <= 2.0);
            double lo = 1.0, hi = 0.0;
            for (std::size_t i = 0; i < r.analysis.curve.size(); ++i)
              if (r.analysis.curve.valid[i]) {
                lo = std::min(lo, r.analysis.curve.dolp[i]);
                hi = std::max(hi, r.analysis.curve.dolp[i]);
              }
            check(p, t, ms, "min_dolp", lo, ">=0.55", lo >= 0.55);
            check(p, t, ms, "max_dolp", hi, "<=0.85", hi <= 0.85);
          } else {
            const double sw = nd::rad2deg(nd::orientation_sweep(r.analysis.curve, 0.01));
            check(p, t, ms, "sweep_deg_above_1pct", sw, "<2", sw < 2.0);
          }
        }
      }
    }
  }
  emit(g, os.str());
  if (!all) {
    std::cerr << "error[3]: roundtrip: at least one check failed\n";
    return 3;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Non-Condon emitter simulator and polarization analysis"};
  app.require_subcommand(1);
  app.fallthrough();
  Global g;
  app.add_option("--config", g.config, "Config file (key = value)");
  app.add_option_function<std::uint64_t>(
      "--seed", [&](const std::uint64_t& s) { g.seed = s; g.seed_set = true; }, "Random seed");
  app.add_option("--out", g.out, "Output path (default stdout)");
  app.add_flag("--quiet", g.quiet, "Suppress progress notes");

  ModelFlags mf;
  auto* spectrum = app.add_subcommand("spectrum", "Vibronic emission spectrum");
  add_model_flags(spectrum, mf);
  bool brute = false;
  int max_quanta = 0;
  spectrum->add_flag("--bruteforce", brute, "Use the Franck-Condon oracle (<= 3 modes)");
  spectrum->add_option("--max-quanta", max_quanta, "Oracle level cap (0 = automatic)");

  auto* sfun = app.add_subcommand("spectral-function", "Phonon sideband spectral function");
  add_model_flags(sfun, mf);
  double broadening = 2.0;
  std::string phonon_grid;
  sfun->add_option("--broadening", broadening, "Gaussian sigma, meV");
  sfun->add_option("--phonon-grid", phonon_grid, "Phonon energy grid min:max:n (meV)");

  auto* sim = app.add_subcommand("simulate-map", "Energy-resolved polarization map");
  add_model_flags(sim, mf);
  std::string mode = "analyzer", noise = "none", band = "zpl", angles;
  double counts = 1e4;
  sim->add_option("--mode", mode, "analyzer|rqwp");
  sim->add_option("--noise", noise, "none|poisson");
  sim->add_option("--counts", counts, "Expected counts of the brightest pixel");
  sim->add_option("--band", band, "Preset grid when --grid is absent: zpl|opsb|spectrum");
  sim->add_option("--angles", angles, "Comma-separated angles, deg");

  auto* ana = app.add_subcommand("analyze-map", "Per-bin orientation analysis of a map");
  std::string in;
  double bin_width = 4.0, floor = 0.0;
  bool report = false;
  ana->add_option("--in", in, "Map CSV")->required();
  ana->add_option("--mode", mode, "analyzer|rqwp");
  ana->add_option("--bin-width", bin_width, "Bin width, meV");
  ana->add_option("--floor", floor, "Relative intensity floor for the reported sweep");
  ana->add_flag("--report", report, "Write the full per-bin report");

  auto* malus = app.add_subcommand("fit-malus", "Malus-law fit of an analyzer scan");
  malus->add_option("--in", in, "CSV with angle_deg,intensity")->required();

  auto* stokes = app.add_subcommand("stokes", "Extract Stokes vector from an RQWP trace, or render one");
  std::string vec;
  int n_angles = 16;
  stokes->add_option("--in", in, "RQWP trace CSV");
  stokes->add_option("--vector", vec, "s0,s1,s2,s3 to render as a trace");
  stokes->add_option("--angles", n_angles, "Waveplate angles for rendering");

  auto* g2 = app.add_subcommand("g2", "Pulsed g2 from a simulated or recorded stream");
  G2Flags gf;
  g2->add_option("--signal-fraction", gf.fraction, "Emitter share of detected counts");
  g2->add_option("--rate", gf.rate, "Total detected rate, counts/s");
  g2->add_option("--rep-rate", gf.rep_rate, "Repetition rate, MHz");
  g2->add_option("--lifetime", gf.lifetime, "Emitter lifetime, ns");
  g2->add_option("--duration", gf.duration, "Acquisition time, s");
  g2->add_option("--bin-width", gf.bin_width, "Histogram bin, ns");
  g2->add_option("--window", gf.window, "Histogram half-window, ns");
  g2->add_option("--stream-in", gf.stream_in, "Analyze this stream CSV instead of simulating");
  g2->add_option("--stream-out", gf.stream_out, "Also write the simulated stream");

  auto* rt = app.add_subcommand("roundtrip", "Simulate, analyze and check both presets");
  std::vector<std::string> presets = {"weak_coupling", "strong_coupling"};
  rt->add_option("--presets", presets, "Presets to run");

  auto* modes = app.add_subcommand("modes", "Validate and summarize a mode table");
  add_model_flags(modes, mf);
  modes->add_option("--in", in, "Mode table CSV");

  auto* cal = app.add_subcommand("calibrate", "Fit the acoustic gradient to a target sweep");
  add_model_flags(cal, mf);
  double target = 40.0;
  cal->add_option("--target", target, "Target sweep, deg");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error[2]: " << e.what() << '\n';
    return 2;
  }

  try {
    if (*spectrum) return cmd_spectrum(g, mf, brute, max_quanta);
    if (*sfun) return cmd_spectral_function(g, mf, broadening, phonon_grid);
    if (*sim) return cmd_simulate_map(g, mf, mode, noise, counts, band, angles);
    if (*ana) return cmd_analyze_map(g, in, mode, bin_width, report, floor);
    if (*malus) return cmd_fit_malus(g, in);
    if (*stokes) return cmd_stokes(g, in, vec, n_angles);
    if (*g2) return cmd_g2(g, gf);
    if (*rt) return cmd_roundtrip(g, presets);
    if (*modes) return cmd_modes(g, in, mf);
    if (*cal) return cmd_calibrate(g, mf, target);
  } catch (const nd::validation_error& e) {
    std::cerr << "error[2]: " << e.what() << '\n';
    return 2;
  } catch (const nd::numerical_error& e) {
    std::cerr << "error[3]: " << e.what() << '\n';
    return 3;
  } catch (const nd::io_error& e) {
    std::cerr << "error[4]: " << e.what() << '\n';
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error[2]: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
