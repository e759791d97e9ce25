#pragma once

// Simulate -> analyze chains used by the CLI, the acceptance runner and the
// acoustic-gradient calibration.

#include <cmath>
#include <functional>
#include <vector>

#include "ncdipole/config.hpp"
#include "ncdipole/dipole.hpp"
#include "ncdipole/polarimetry.hpp"

namespace ncdipole {

/// 36 analyzer angles, 0..175 deg in 5 deg steps.
inline std::vector<double> default_analyzer_angles() {
  std::vector<double> a;
  for (int i = 0; i < 36; ++i) a.push_back(deg2rad(5.0 * i));
  return a;
}

/// 32 waveplate angles over one half-turn.
inline std::vector<double> default_rqwp_angles() { return uniform_angles(32, 1); }

inline std::vector<double> default_angles(MapMode mode) {
  return mode == MapMode::analyzer ? default_analyzer_angles() : default_rqwp_angles();
}

struct RoundTrip {
  PolarizationMap map;
  MapAnalysis analysis;
  OrientationCurve forward;  // forward curve binned exactly like the analysis
};

inline RoundTrip run_roundtrip(const EmitterModel& model, const EnergyGrid& grid,
                               const MapOptions& opt, double bin_width_mev = 4.0) {
  RoundTrip r;
  const auto angles = default_angles(opt.mode);
  r.map = simulate_polarization_map(model, grid, angles, opt);
  r.analysis = analyze_map(r.map, opt.mode, bin_width_mev);
  r.forward = bin_curve(orientation_vs_energy(model, grid), grid, bin_width_mev);
  return r;
}

/// Largest |psi_recovered - psi_forward| over bins valid in both curves
/// (and above `relative_floor` of the peak forward weight), radians.
inline double max_psi_error(const RoundTrip& r, double relative_floor = 0.0) {
  const auto& a = r.analysis.curve;
  const auto& f = r.forward;
  double peak = 0.0;
  for (double w : f.weight) peak = std::max(peak, w);
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size() && i < f.size(); ++i) {
    if (!a.valid[i] || !f.valid[i] || !(f.weight[i] > relative_floor * peak)) continue;
    worst = std::max(worst, std::abs(orientation_difference(a.psi[i], f.psi[i])));
  }
  return worst;
}

/// Orientation sweep recovered from a noiseless analyzer map of `grid`.
inline double recovered_sweep(const EmitterModel& model, const EnergyGrid& grid,
                              double relative_floor = 0.0, double bin_width_mev = 4.0) {
  MapOptions opt;
  const auto map = simulate_polarization_map(model, grid, default_analyzer_angles(), opt);
  const auto a = analyze_map(map, MapMode::analyzer, bin_width_mev);
  return orientation_sweep(a.curve, relative_floor);
}

/// Acoustic gradient magnitude giving a `target` sweep (radians) on `grid`:
/// the first upward crossing found by scanning [lo, hi] in `step`, refined by
/// bisection.
inline double calibrate_acoustic_grad(EmitterModel model, const EnergyGrid& grid, double target,
                                      double lo = 0.0, double hi = 2.0, double step = 0.02,
                                      double tol = 1e-7) {
  auto f = [&](double g) {
    model.acoustic_grad = g;
    return recovered_sweep(model, grid) - target;
  };
  if (f(lo) > 0.0) throw numerical_error("target sweep already exceeded at the lower gradient bound");
  double a = lo, b = lo;
  bool bracketed = false;
  while (b < hi) {
    a = b;
    b = std::min(hi, b + step);
    if (f(b) >= 0.0) {
      bracketed = true;
      break;
    }
  }
  if (!bracketed) throw numerical_error("target sweep is not reached within the gradient range");
  while (b - a > tol) {
    const double mid = 0.5 * (a + b);
    (f(mid) < 0.0 ? a : b) = mid;
  }
  return 0.5 * (a + b);
}

}  // namespace ncdipole
