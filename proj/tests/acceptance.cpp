// One PASS/FAIL line per acceptance criterion; exit status 1 if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <string>
#include <tuple>
#include <vector>

#include "ncdipole/ncdipole.hpp"

using namespace ncdipole;

namespace {

int failures = 0;

void report(int id, const std::string& name, bool ok, const std::string& detail) {
  std::printf("%s %2d %-28s %s\n", ok ? "PASS" : "FAIL", id, name.c_str(), detail.c_str());
  std::fflush(stdout);
  if (!ok) ++failures;
}

// Run `body` (which fills `detail` and returns pass/fail) under a wall-clock limit.
void criterion(int id, const std::string& name, double limit_s, const std::function<bool(std::string&)>& body) {
  const auto t0 = std::chrono::steady_clock::now();
  std::string detail;
  bool ok = false;
  try {
    ok = body(detail);
  } catch (const std::exception& e) {
    detail += std::string(" exception: ") + e.what();
  }
  const double dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  char buf[64];
  std::snprintf(buf, sizeof buf, " [%.2f s", dt);
  detail += buf;
  if (limit_s > 0.0) {
    std::snprintf(buf, sizeof buf, " / limit %.0f s", limit_s);
    detail += buf;
    ok = ok && dt < limit_s;
  }
  detail += "]";
  report(id, name, ok, detail);
}

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0, double d = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c, d);
  return buf;
}

EnergyGrid preset_grid(const std::string& preset, const std::string& key) {
  return parse_grid(load_preset(preset).get(key));
}

}  // namespace

int main() {
  const auto weak = load_preset_model("weak_coupling");
  const auto strong = load_preset_model("strong_coupling");
  const auto zpl_band = preset_grid("strong_coupling", "zpl_band_grid");

  criterion(1, "debye-waller weights", 2.0, [&](std::string& d) {
    bool ok = true;
    for (const auto& [name, total, model] : {std::tuple{"weak_coupling", 2.71, weak},
                                             std::tuple{"strong_coupling", 5.96, strong}}) {
      auto m = model;
      m.temperature = 0.0;
      const auto t0 = std::chrono::steady_clock::now();
      const auto r = lineshape_detailed(m, preset_grid(name, "spectrum_grid"));
      const double dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      d += std::string(name) + fmt(" zpl_weight=%.6f target=%.6f (%.2f s); ", r.zpl_weight, std::exp(-total), dt);
      ok = ok && std::abs(r.zpl_weight - std::exp(-total)) <= 1e-4 && dt < 1.0;
    }
    return ok;
  });

  criterion(2, "delta-q aggregation", 0.0, [&](std::string& d) {
    const double w = total_dq(weak.modes), s = total_dq(strong.modes);
    d = fmt("weak=%.9f strong=%.9f", w, s);
    return std::abs(w - 0.42) <= 1e-6 && std::abs(s - 0.87) <= 1e-6;
  });

  criterion(3, "mode rotation maxima", 0.0, [&](std::string& d) {
    auto max_rot = [](const EmitterModel& m) {
      double r = 0.0;
      for (const auto& x : mode_rotations(m)) r = std::max(r, std::abs(rad2deg(x.delta_theta)));
      return r;
    };
    const double w = max_rot(weak), s = max_rot(strong);
    d = fmt("weak=%.6f deg strong=%.4f deg", w, s);
    return std::abs(w - 2.7) <= 0.01 && std::abs(s - 10.0) <= 0.5;
  });

  criterion(4, "room-temperature sweep", 30.0, [&](std::string& d) {
    auto m = strong;
    m.temperature = 300.0;
    const auto map = simulate_polarization_map(m, zpl_band, default_analyzer_angles(), {});
    const double s = rad2deg(orientation_sweep(analyze_map(map, MapMode::analyzer, 4.0).curve));
    d = fmt("sweep=%.4f deg", s);
    return std::abs(s - 40.0) <= 2.0;
  });

  criterion(5, "cryogenic suppression", 30.0, [&](std::string& d) {
    auto m = strong;
    m.temperature = 6.0;
    const auto map = simulate_polarization_map(m, zpl_band, default_analyzer_angles(), {});
    const double s = rad2deg(orientation_sweep(analyze_map(map, MapMode::analyzer, 4.0).curve, 0.01));
    d = fmt("sweep above 1%% of peak=%.4f deg", s);
    return s < 2.0;
  });

  criterion(6, "opsb offset and rotation", 30.0, [&](std::string& d) {
    const double off = rad2deg(opsb_offset(strong));
    const auto g = preset_grid("strong_coupling", "opsb_band_grid");
    const auto map = simulate_polarization_map(strong, g, default_analyzer_angles(), {});
    const auto a = analyze_map(map, MapMode::analyzer, 4.0);
    OrientationCurve window;
    for (std::size_t i = 0; i < a.curve.size(); ++i) {
      const double below = (strong.zpl_energy - a.curve.energies[i]) * 1e3;
      if (below < 155.0 || below > 175.0) continue;
      window.energies.push_back(a.curve.energies[i]);
      window.psi.push_back(a.curve.psi[i]);
      window.weight.push_back(a.curve.weight[i]);
      window.valid.push_back(a.curve.valid[i]);
    }
    const double intra = rad2deg(orientation_sweep(window));
    d = fmt("offset=%.4f deg intra-band=%.3f deg over %.0f bins", off, intra, static_cast<double>(window.size()));
    return std::abs(off - 5.0) <= 1.0 && intra >= 20.0;
  });

  criterion(7, "dolp band", 30.0, [&](std::string& d) {
    const auto map = simulate_polarization_map(strong, zpl_band, default_analyzer_angles(), {});
    double lo = 1.0, hi = 0.0;
    std::size_t n = 0;
    for (const auto& b : analyze_map(map, MapMode::analyzer, 4.0).bins) {
      if (!b.valid) continue;
      lo = std::min(lo, b.dolp);
      hi = std::max(hi, b.dolp);
      ++n;
    }
    d = fmt("dolp in [%.4f, %.4f] over %.0f bins", lo, hi, static_cast<double>(n));
    return n > 0 && lo >= 0.55 && hi <= 0.85;
  });

  criterion(8, "oracle equivalence", 60.0, [&](std::string& d) {
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> w(40.0, 200.0), s(0.05, 1.2);
    std::uniform_int_distribution<int> nm(1, 3);
    const auto g = make_grid(0.4, 2.4, 2001);
    double worst = 0.0;
    int cases = 0;
    for (int trial = 0; trial < 50; ++trial) {
      EmitterModel m;
      m.zpl_energy = 2.0;
      m.zpl_linewidth = 1.0;
      const int k = nm(rng);
      for (int i = 0; i < k; ++i) m.modes.push_back({w(rng), s(rng), 0.1, 0.0, 0.0});
      for (double t : {0.0, 6.0, 300.0}) {
        m.temperature = t;
        const auto a = lineshape(m, g);
        const auto b = lineshape_bruteforce(m, g);
        for (std::size_t i = 0; i < g.n_points; ++i)
          worst = std::max(worst, std::abs(a.intensity[i] - b.intensity[i]) / b.intensity[i]);
        ++cases;
      }
    }
    d = fmt("max pointwise relative deviation=%.3e over %.0f cases", worst, cases);
    return worst <= 1e-5;
  });

  criterion(9, "polarimetry exactness", 5.0, [&](std::string& d) {
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    double malus_err = 0.0, rqwp_err = 0.0;
    for (int i = 0; i < 1000; ++i) {
      MalusFit t;
      t.theta0 = (u(rng) - 0.5) * kPi;
      t.i_max = 0.1 + 100.0 * u(rng);
      t.i_min = 50.0 * u(rng);
      const std::size_t n = 4 + i % 33;
      std::vector<double> ang, y;
      const double offset = kPi * u(rng);
      for (std::size_t j = 0; j < n; ++j) {
        ang.push_back(offset + kPi * static_cast<double>(j) / static_cast<double>(n));
        y.push_back(malus_intensity(ang.back(), t));
      }
      const auto f = fit_malus(ang, y);
      const double scale = t.i_max + t.i_min;
      malus_err = std::max({malus_err, std::abs(orientation_difference(f.theta0, t.theta0)),
                            std::abs(f.i_max - t.i_max) / scale, std::abs(f.i_min - t.i_min) / scale});

      const PolarizationEllipse e{u(rng), (u(rng) - 0.5) * kPi, (u(rng) - 0.5) * 0.5 * kPi};
      const auto sv = ellipse_to_stokes(e, 0.1 + 10.0 * u(rng));
      const int turns = 1 + i % 3;
      RqwpTrace tr{uniform_angles(8 * turns + i % 25, turns), {}};
      for (double th : tr.qwp_angles) tr.intensity.push_back(rqwp_intensity(sv, th));
      const auto r = extract_stokes_rqwp(tr);
      rqwp_err = std::max({rqwp_err, std::abs(r.s0 - sv.s0) / sv.s0, std::abs(r.s1 - sv.s1) / sv.s0,
                           std::abs(r.s2 - sv.s2) / sv.s0, std::abs(r.s3 - sv.s3) / sv.s0});
    }
    d = fmt("malus max err=%.2e rqwp max err=%.2e", malus_err, rqwp_err);
    return malus_err <= 1e-9 && rqwp_err <= 1e-12;
  });

  criterion(10, "detailed balance", 0.0, [&](std::string& d) {
    bool ok = true;
    for (double w : {10.0, 50.0, 165.0}) {
      const auto dist = mode_sideband_weights(0.8, w, 300.0);
      const double ratio = dist.at(-1) / dist.at(1);
      const double want = std::exp(-w / (kBoltzmannMevPerK * 300.0));
      const double rel = std::abs(ratio / want - 1.0);
      d += fmt("%.0f meV: rel=%.1e ", w, rel);
      ok = ok && rel <= 1e-4;
    }
    return ok;
  });

  criterion(11, "g2(0) reproduction", 120.0, [&](std::string& d) {
    bool ok = true;
    for (const auto& [rho, target] : {std::pair{0.943, 0.11}, std::pair{0.883, 0.22}}) {
      const int runs = 200;
      std::vector<double> v;
      for (int r = 0; r < runs; ++r) {
        const auto s = simulate_stream(stream_for_fraction(rho, 5e4, 40.0, 1.5, 2.0, 5000 + r));
        v.push_back(g2_histogram(s, 0.1, 262.5, 25.0).g2_zero);
      }
      double mean = 0.0, var = 0.0;
      for (double x : v) mean += x / runs;
      for (double x : v) var += (x - mean) * (x - mean) / (runs - 1);
      const double se = std::sqrt(var / runs);
      d += fmt("rho=%.3f mean=%.4f se=%.4f target=%.2f; ", rho, mean, se, target);
      ok = ok && std::abs(mean - target) <= 2.0 * se;
    }
    return ok;
  });

  criterion(12, "condon limit", 60.0, [&](std::string& d) {
    double psi_dev = 0.0, dolp_dev = 0.0;
    std::size_t bins = 0;
    for (const char* name : {"weak_coupling", "strong_coupling"}) {
      auto m = load_preset_model(name);
      for (auto& k : m.modes) k.grad_magnitude = 0.0;
      m.acoustic_grad = 0.0;
      for (const char* key : {"zpl_band_grid", "opsb_band_grid"}) {
        const auto g = preset_grid(name, key);
        for (double t : {0.0, 6.0, 77.0, 300.0}) {
          m.temperature = t;
          for (MapMode mode : {MapMode::analyzer, MapMode::rqwp}) {
            const auto map = simulate_polarization_map(m, g, default_angles(mode), {});
            for (const auto& b : analyze_map(map, mode, 4.0).bins) {
              if (!b.valid) continue;
              psi_dev = std::max(psi_dev, std::abs(orientation_difference(b.psi, m.equilibrium_angle)));
              dolp_dev = std::max(dolp_dev, std::abs(b.dolp - 1.0));
              ++bins;
            }
          }
        }
      }
    }
    d = fmt("max |psi-psi0|=%.2e rad max |dolp-1|=%.2e over %.0f bins", psi_dev, dolp_dev, static_cast<double>(bins));
    return bins > 0 && psi_dev <= 1e-12 && dolp_dev <= 1e-12;
  });

  std::printf("acceptance: %d of 12 criteria failed\n", failures);
  return failures ? 1 : 0;
}
