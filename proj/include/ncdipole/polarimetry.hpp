#pragma once

// Polarization optics: Malus-law analyzer scans, Stokes / ellipse conversion,
// rotating quarter-wave-plate (RQWP) traces, and the forward and inverse
// energy-resolved maps built on them.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ncdipole/core.hpp"
#include "ncdipole/dipole.hpp"

namespace ncdipole {

struct StokesVector {
  double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;

  double polarized() const { return std::sqrt(s1 * s1 + s2 * s2 + s3 * s3); }
};

struct PolarizationEllipse {
  double dop = 0.0;
  double psi = 0.0;  // radians, [-pi/2, pi/2)
  double chi = 0.0;  // radians, [-pi/4, pi/4]
  double dop_excess = 0.0;  // amount by which the raw DOP exceeded 1
};

inline StokesVector ellipse_to_stokes(const PolarizationEllipse& e, double s0) {
  require(e.dop >= 0.0 && e.dop <= 1.0, "degree of polarization must lie in [0, 1]");
  const double p = s0 * e.dop;
  return {s0, p * std::cos(2.0 * e.chi) * std::cos(2.0 * e.psi),
          p * std::cos(2.0 * e.chi) * std::sin(2.0 * e.psi), p * std::sin(2.0 * e.chi)};
}

inline PolarizationEllipse stokes_to_ellipse(const StokesVector& s) {
  require(std::isfinite(s.s0) && s.s0 > 0.0, "Stokes s0 must be positive");
  const double pol = s.polarized();
  PolarizationEllipse e;
  e.dop = pol / s.s0;
  if (e.dop > 1.0) {
    e.dop_excess = e.dop - 1.0;
    e.dop = 1.0;
  }
  e.psi = canonical_orientation(0.5 * std::atan2(s.s2, s.s1));
  e.chi = pol > 0.0 ? 0.5 * std::asin(std::clamp(s.s3 / pol, -1.0, 1.0)) : 0.0;
  return e;
}

// ---------------------------------------------------------------------------
// Malus law

/// I(theta) = i_max cos^2(theta - theta0) + i_min; i_max is the modulation
/// amplitude above the floor i_min.
struct MalusFit {
  double theta0 = 0.0;  // radians; NaN when the orientation is undefined
  double i_max = 0.0;
  double i_min = 0.0;
  double dolp = 0.0;    // (peak - floor) / (peak + floor), peak = i_max + i_min
  double rms_residual = 0.0;
  bool orientation_defined = true;
  bool unphysical_floor = false;
};

inline double malus_intensity(double theta, const MalusFit& f) {
  const double c = std::cos(theta - f.theta0);
  return f.i_max * c * c + f.i_min;
}

inline MalusFit fit_malus(std::span<const double> angles, std::span<const double> intensity) {
  require(angles.size() == intensity.size(), "angles and intensities differ in length");
  require(angles.size() >= 4, "Malus fit needs at least 4 samples");
  const auto [lo, hi] = std::minmax_element(angles.begin(), angles.end());
  require(*hi - *lo >= deg2rad(135.0) - 1e-12, "analyzer angles must span at least 135 degrees");
  for (double v : intensity)
    require(std::isfinite(v) && v >= 0.0, "intensities must be finite and non-negative");

  const auto n = static_cast<Eigen::Index>(angles.size());
  Eigen::MatrixXd a(n, 3);
  Eigen::VectorXd y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    a(i, 0) = 1.0;
    a(i, 1) = std::cos(2.0 * angles[i]);
    a(i, 2) = std::sin(2.0 * angles[i]);
    y(i) = intensity[i];
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(a);
  qr.setThreshold(1e-10);
  if (qr.rank() < 3) throw validation_error("analyzer angles are degenerate (rank-deficient design)");
  const Eigen::Vector3d x = qr.solve(y);
  const double r = std::hypot(x(1), x(2));

  MalusFit f;
  f.i_max = 2.0 * r;
  f.i_min = x(0) - r;
  f.dolp = x(0) > 0.0 ? std::min(1.0, r / x(0)) : 0.0;
  f.orientation_defined = r > 1e-12 * std::abs(x(0));
  f.theta0 = f.orientation_defined ? canonical_orientation(0.5 * std::atan2(x(2), x(1)))
                                   : std::numeric_limits<double>::quiet_NaN();
  f.unphysical_floor = f.i_min < -1e-9 * std::abs(x(0));
  f.rms_residual = std::sqrt((a * x - y).squaredNorm() / static_cast<double>(n));
  return f;
}

// ---------------------------------------------------------------------------
// Rotating quarter-wave plate

struct RqwpTrace {
  std::vector<double> qwp_angles;  // radians
  std::vector<double> intensity;
};

/// Ideal QWP at fast-axis angle theta, then a horizontal polarizer.
inline double rqwp_intensity(const StokesVector& s, double theta) {
  const double a = s.s0 + 0.5 * s.s1;
  const double b = -s.s3;
  const double c = 0.5 * s.s1;
  const double d = 0.5 * s.s2;
  return 0.5 * (a + b * std::sin(2.0 * theta) + c * std::cos(4.0 * theta) + d * std::sin(4.0 * theta));
}

/// Uniform angles covering `rotations` half-turns (the trace period is 180 deg).
inline std::vector<double> uniform_angles(std::size_t n, int rotations = 1) {
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i)
    out[i] = kPi * rotations * static_cast<double>(i) / static_cast<double>(n);
  return out;
}

namespace detail {

inline void check_rqwp_sampling(std::span<const double> angles) {
  const std::size_t n = angles.size();
  require(n >= 8, "RQWP extraction needs at least 8 angles");
  const double step = angles[1] - angles[0];
  require(step > 0.0, "RQWP angles must increase");
  for (std::size_t i = 1; i < n; ++i)
    require(std::abs(angles[i] - angles[i - 1] - step) <= 1e-9 * std::max(1.0, step),
            "RQWP angles must be uniformly spaced");
  const double turns = step * static_cast<double>(n) / kPi;
  require(turns >= 1.0 - 1e-9 && std::abs(turns - std::round(turns)) <= 1e-9,
          "RQWP angles must cover whole rotations");
  // Fewer than 8 samples per half-turn alias the 4-theta harmonics.
  require(static_cast<double>(n) >= 8.0 * std::round(turns), "RQWP needs at least 8 angles per half-turn");
}

}  // namespace detail

inline StokesVector extract_stokes_rqwp(const RqwpTrace& t) {
  require(t.qwp_angles.size() == t.intensity.size(), "RQWP trace lengths differ");
  detail::check_rqwp_sampling(t.qwp_angles);
  const double n = static_cast<double>(t.intensity.size());
  double a = 0.0, b = 0.0, c = 0.0, d = 0.0;
  for (std::size_t i = 0; i < t.intensity.size(); ++i) {
    const double th = t.qwp_angles[i];
    const double v = t.intensity[i];
    a += v;
    b += v * std::sin(2.0 * th);
    c += v * std::cos(4.0 * th);
    d += v * std::sin(4.0 * th);
  }
  a *= 2.0 / n;
  b *= 4.0 / n;
  c *= 4.0 / n;
  d *= 4.0 / n;
  return {a - c, 2.0 * c, 2.0 * d, -b};
}

// ---------------------------------------------------------------------------
// Energy-resolved maps

enum class MapMode { analyzer, rqwp };
enum class NoiseModel { none, poisson };

struct MapOptions {
  MapMode mode = MapMode::analyzer;
  double counts_per_point = 1e4;  // expected counts of the brightest pixel
  NoiseModel noise = NoiseModel::none;
  std::uint64_t seed = 42;
};

/// Forward map: channel-mixed Stokes vector per energy rendered through an
/// ideal analyzer or RQWP + polarizer, scaled to `counts_per_point`.
inline PolarizationMap simulate_polarization_map(const EmitterModel& model, const EnergyGrid& grid,
                                                 std::span<const double> angles,
                                                 const MapOptions& opt = {}) {
  validate(model);
  require(!angles.empty(), "no angles given");
  require(std::isfinite(opt.counts_per_point) && opt.counts_per_point > 0.0,
          "counts_per_point must be positive");
  if (opt.mode == MapMode::rqwp) detail::check_rqwp_sampling(angles);
  const auto curve = orientation_vs_energy(model, grid);

  PolarizationMap map{grid, std::vector<double>(angles.begin(), angles.end()), {}};
  map.intensity.resize(grid.n_points * angles.size());
  double peak = 0.0;
  for (std::size_t i = 0; i < grid.n_points; ++i) {
    const StokesVector s{curve.weight[i], curve.s1[i], curve.s2[i], 0.0};
    for (std::size_t a = 0; a < angles.size(); ++a) {
      const double th = angles[a];
      double v = opt.mode == MapMode::analyzer
          ? 0.5 * (s.s0 + s.s1 * std::cos(2.0 * th) + s.s2 * std::sin(2.0 * th))
          : rqwp_intensity(s, th);
      v = std::max(0.0, v);
      map.at(i, a) = v;
      peak = std::max(peak, v);
    }
  }
  require(peak > 0.0, "simulated map is empty");
  const double scale = opt.counts_per_point / peak;
  std::mt19937_64 rng(opt.seed);
  for (double& v : map.intensity) {
    v *= scale;
    if (opt.noise == NoiseModel::poisson) {
      std::poisson_distribution<long long> pd(v);
      v = v > 0.0 ? static_cast<double>(pd(rng)) : 0.0;
    }
  }
  return map;
}

struct BinReport {
  double energy = 0.0;  // eV
  double theta0 = std::numeric_limits<double>::quiet_NaN();
  double dolp = 0.0;
  double psi = std::numeric_limits<double>::quiet_NaN();
  double chi = std::numeric_limits<double>::quiet_NaN();
  double dop = std::numeric_limits<double>::quiet_NaN();
  bool valid = false;
  double rms_residual = 0.0;
  double counts = 0.0;
};

struct MapAnalysis {
  std::vector<BinReport> bins;
  OrientationCurve curve;
};

inline constexpr double kMinBinCounts = 25.0;

/// Slice a map into energy bins and fit each one. Bins whose fit fails or
/// whose summed counts do not exceed 25 are invalid; analysis never aborts.
inline MapAnalysis analyze_map(const PolarizationMap& map, MapMode mode, double bin_width_mev = 4.0) {
  validate(map);
  if (mode == MapMode::rqwp) detail::check_rqwp_sampling(map.angles);
  const auto slices = slice_map(map, bin_width_mev);
  MapAnalysis out;
  for (const auto& sl : slices) {
    BinReport b;
    b.energy = sl.center_energy;
    for (double v : sl.angular_profile) b.counts += v;
    try {
      if (mode == MapMode::analyzer) {
        const auto f = fit_malus(map.angles, sl.angular_profile);
        b.theta0 = f.theta0;
        b.dolp = f.dolp;
        b.psi = f.theta0;
        b.dop = f.dolp;
        b.rms_residual = f.rms_residual;
        b.valid = f.orientation_defined;
      } else {
        const RqwpTrace t{map.angles, sl.angular_profile};
        const auto s = extract_stokes_rqwp(t);
        double ss = 0.0;
        for (std::size_t a = 0; a < t.qwp_angles.size(); ++a) {
          const double r = rqwp_intensity(s, t.qwp_angles[a]) - t.intensity[a];
          ss += r * r;
        }
        b.rms_residual = std::sqrt(ss / static_cast<double>(t.qwp_angles.size()));
        if (s.s0 > 0.0) {
          const auto e = stokes_to_ellipse(s);
          b.dop = e.dop;
          b.chi = e.chi;
          b.dolp = std::min(1.0, std::hypot(s.s1, s.s2) / s.s0);
          const bool defined = std::hypot(s.s1, s.s2) > 1e-12 * s.s0;
          b.psi = defined ? e.psi : std::numeric_limits<double>::quiet_NaN();
          b.theta0 = b.psi;
          b.valid = defined;
        }
      }
    } catch (const std::runtime_error&) {
      b.valid = false;
    }
    b.valid = b.valid && b.counts > kMinBinCounts;
    out.bins.push_back(b);
  }
  auto& c = out.curve;
  for (const auto& b : out.bins) {
    c.energies.push_back(b.energy);
    c.psi.push_back(b.psi);
    c.dolp.push_back(b.dolp);
    c.weight.push_back(b.counts);
    c.valid.push_back(b.valid);
    const double p = std::isfinite(b.psi) ? b.dolp * b.counts : 0.0;
    c.s1.push_back(std::isfinite(b.psi) ? p * std::cos(2.0 * b.psi) : 0.0);
    c.s2.push_back(std::isfinite(b.psi) ? p * std::sin(2.0 * b.psi) : 0.0);
  }
  return out;
}

}  // namespace ncdipole
