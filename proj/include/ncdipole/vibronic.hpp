#pragma once

// Finite-temperature vibronic lineshapes from mode-resolved Huang-Rhys data.
//
// The emission spectrum is a set of phonon "sticks" (net phonon numbers per
// mode, at E_zpl - sum p_k w_k) each dressed by the same line profile: a
// Lorentzian or Gaussian core plus a phenomenological acoustic wing. Stick
// weights come from the generating function
//   G(t) = exp( sum_k S_k [ (n_k+1)(e^{-i w_k t} - 1) + n_k (e^{i w_k t} - 1) ] ),
// whose per-mode factors are periodic, so their Fourier coefficients are
// taken exactly over one period and the modes are convolved. An independent
// Franck-Condon route (thermal sums of displaced-oscillator overlaps) serves
// as the oracle.

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "ncdipole/core.hpp"

namespace ncdipole {

/// Bose-Einstein occupation for a phonon of `energy_mev` at `temperature_k`.
inline double bose_occupation(double energy_mev, double temperature_k) {
  require(std::isfinite(energy_mev) && std::isfinite(temperature_k),
          "bose_occupation needs finite inputs");
  require(energy_mev > 0.0, "phonon energy must be positive");
  require(temperature_k >= 0.0, "temperature must be non-negative");
  if (temperature_k == 0.0) return 0.0;
  const double x = energy_mev / (kBoltzmannMevPerK * temperature_k);
  if (x > 700.0) return 0.0;
  return 1.0 / std::expm1(x);
}

/// Zero-phonon fraction exp(-sum S_k (2 n_k + 1)).
inline double debye_waller(std::span<const PhononMode> modes,
                           double temperature_k) {
  require(std::isfinite(temperature_k) && temperature_k >= 0.0,
          "temperature must be non-negative");
  double exponent = 0.0;
  for (const auto& m : modes) {
    validate(m);
    exponent += m.partial_hr * (2.0 * bose_occupation(m.energy, temperature_k) + 1.0);
  }
  return std::exp(-exponent);
}

/// Total configuration-coordinate displacement sqrt(sum dQ_k^2).
inline double total_dq(std::span<const PhononMode> modes) {
  double s = 0.0;
  for (const auto& m : modes) s += m.partial_dq * m.partial_dq;
  return std::sqrt(s);
}

// ---------------------------------------------------------------------------
// PSB spectral function

struct SpectralFunction {
  EnergyGrid grid;  // phonon energy axis, meV
  std::vector<double> density;  // 1/meV, cell averages

  double integral() const {
    double s = 0.0;
    for (double v : density) s += v;
    return s * grid.spacing();
  }
};

namespace detail {

inline double normal_cdf_diff(double lo, double hi) {
  // P(lo < Z < hi) for a standard normal, accurate in both tails.
  constexpr double r2 = 1.4142135623730951;
  if (lo >= 0.0) return 0.5 * (std::erfc(lo / r2) - std::erfc(hi / r2));
  if (hi <= 0.0) return 0.5 * (std::erfc(-hi / r2) - std::erfc(-lo / r2));
  return 1.0 - 0.5 * (std::erfc(-lo / r2) + std::erfc(hi / r2));
}

}  // namespace detail

/// S(hw) = sum_k S_k G(hw - hw_k; broadening) with unit-area Gaussians of
/// standard deviation `broadening_mev`, averaged over each grid cell.
inline SpectralFunction spectral_function(std::span<const PhononMode> modes,
                                          double broadening_mev,
                                          const EnergyGrid& grid) {
  require(std::isfinite(broadening_mev) && broadening_mev > 0.0,
          "broadening must be positive");
  const double h = grid.spacing();
  SpectralFunction out{grid, std::vector<double>(grid.n_points, 0.0)};
  for (std::size_t k = 0; k < modes.size(); ++k) {
    const auto& m = modes[k];
    validate(m);
    if (m.partial_hr == 0.0) continue;
    const double lo = (grid.min_energy - 0.5 * h - m.energy) / broadening_mev;
    const double hi = (grid.max_energy + 0.5 * h - m.energy) / broadening_mev;
    const double captured = detail::normal_cdf_diff(lo, hi);
    if (1.0 - captured > 1e-3)
      throw validation_error("grid too narrow for mode " + std::to_string(k) +
                             " at " + std::to_string(m.energy) + " meV");
    for (std::size_t i = 0; i < grid.n_points; ++i) {
      const double e = grid.point(i);
      const double a = (e - 0.5 * h - m.energy) / broadening_mev;
      const double b = (e + 0.5 * h - m.energy) / broadening_mev;
      out.density[i] += m.partial_hr * detail::normal_cdf_diff(a, b) / h;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Phonon sticks

/// Distribution of net emitted quanta p (Stokes > 0, anti-Stokes < 0) for one
/// mode: weight[i] belongs to p = p_min + i.
struct NetPhononDistribution {
  int p_min = 0;
  std::vector<double> weight;

  int p_max() const { return p_min + static_cast<int>(weight.size()) - 1; }
  double at(int p) const {
    if (p < p_min || p > p_max()) return 0.0;
    return weight[static_cast<std::size_t>(p - p_min)];
  }
};

struct PhononStick {
  std::vector<int> quanta;  // net quanta per mode
  double offset = 0.0;      // E - E_zpl, meV
  double weight = 0.0;
};

/// Per-mode weights from the Fourier coefficients of the periodic factor
/// G_k(theta) = exp(S(2n+1)(cos theta - 1) - i S sin theta), theta = w t.
inline NetPhononDistribution mode_sideband_weights(double hr, double energy_mev,
                                                   double temperature_k) {
  const double n = bose_occupation(energy_mev, temperature_k);
  if (hr == 0.0) return {0, {1.0}};
  const double s_plus = hr * (n + 1.0);
  const double s_minus = hr * n;
  const int p_max = static_cast<int>(std::ceil(s_plus + 12.0 * std::sqrt(s_plus + 1.0) + 12.0));
  const int p_min = n > 0.0
      ? -static_cast<int>(std::ceil(s_minus + 12.0 * std::sqrt(s_minus + 1.0) + 12.0))
      : 0;
  std::size_t nfft = 64;
  while (nfft < 2 * static_cast<std::size_t>(p_max - p_min + 1)) nfft *= 2;

  std::vector<std::complex<double>> g(nfft);
  for (std::size_t j = 0; j < nfft; ++j) {
    const double th = 2.0 * kPi * static_cast<double>(j) / static_cast<double>(nfft);
    const double re = hr * (2.0 * n + 1.0) * (std::cos(th) - 1.0);
    const double im = -hr * std::sin(th);
    g[j] = std::exp(std::complex<double>(re, im));
  }
  NetPhononDistribution out{p_min, {}};
  out.weight.reserve(static_cast<std::size_t>(p_max - p_min + 1));
  for (int p = p_min; p <= p_max; ++p) {
    double acc = 0.0;
    for (std::size_t j = 0; j < nfft; ++j) {
      const double th = 2.0 * kPi * static_cast<double>(j) / static_cast<double>(nfft);
      acc += (g[j] * std::polar(1.0, static_cast<double>(p) * th)).real();
    }
    out.weight.push_back(std::max(0.0, acc / static_cast<double>(nfft)));
  }
  return out;
}

namespace detail {

inline std::vector<PhononStick> convolve_modes(
    std::span<const PhononMode> modes,
    const std::vector<NetPhononDistribution>& dists, double prune) {
  std::vector<PhononStick> sticks{PhononStick{{}, 0.0, 1.0}};
  for (std::size_t k = 0; k < modes.size(); ++k) {
    std::vector<PhononStick> next;
    const auto& d = dists[k];
    for (const auto& s : sticks) {
      for (int p = d.p_min; p <= d.p_max(); ++p) {
        const double w = s.weight * d.at(p);
        if (w <= prune) continue;
        PhononStick t = s;
        t.quanta.push_back(p);
        t.offset -= static_cast<double>(p) * modes[k].energy;
        t.weight = w;
        next.push_back(std::move(t));
      }
    }
    sticks = std::move(next);
  }
  return sticks;
}

}  // namespace detail

/// All multi-mode sticks with weight above `prune` (total weight ~1).
inline std::vector<PhononStick> phonon_sticks(std::span<const PhononMode> modes,
                                              double temperature_k,
                                              double prune = 1e-15) {
  std::vector<NetPhononDistribution> dists;
  for (const auto& m : modes) {
    validate(m);
    dists.push_back(mode_sideband_weights(m.partial_hr, m.energy, temperature_k));
  }
  return detail::convolve_modes(modes, dists, prune);
}

// ---------------------------------------------------------------------------
// Franck-Condon oracle

namespace detail {

/// Generalized Laguerre L_n^{(alpha)}(x) by upward recurrence.
inline double laguerre(int n, double alpha, double x) {
  if (n == 0) return 1.0;
  double l0 = 1.0;
  double l1 = 1.0 + alpha - x;
  for (int j = 1; j < n; ++j) {
    const double l2 = ((2.0 * j + 1.0 + alpha - x) * l1 - (j + alpha) * l0) / (j + 1.0);
    l0 = l1;
    l1 = l2;
  }
  return l1;
}

/// |<m|k'>|^2 between oscillator levels displaced by Huang-Rhys factor s.
inline double franck_condon(int m, int k, double s) {
  if (s == 0.0) return m == k ? 1.0 : 0.0;
  const int lo = std::min(m, k);
  const int d = std::abs(k - m);
  const double lag = laguerre(lo, d, s);
  if (lag == 0.0) return 0.0;
  const double logv = -s + d * std::log(s) + std::lgamma(lo + 1.0) -
                      std::lgamma(lo + d + 1.0) + 2.0 * std::log(std::abs(lag));
  return std::exp(logv);
}

}  // namespace detail

inline constexpr int kMaxBruteforceModes = 3;
inline constexpr int kMaxBruteforceQuanta = 64;

/// Per-mode net-phonon weights from explicit thermal Franck-Condon sums.
/// `max_quanta` caps the final-state level; 0 picks it automatically.
inline NetPhononDistribution mode_sideband_weights_fc(double hr,
                                                      double energy_mev,
                                                      double temperature_k,
                                                      int max_quanta = 0) {
  const double x = temperature_k > 0.0
      ? std::exp(-energy_mev / (kBoltzmannMevPerK * temperature_k))
      : 0.0;
  int m_max = 0;
  if (x > 0.0) {
    while (std::pow(x, m_max + 1) > 1e-17 && m_max < kMaxBruteforceQuanta) ++m_max;
  }
  int k_max = max_quanta;
  if (k_max <= 0)
    k_max = m_max + static_cast<int>(std::ceil(hr + 14.0 * std::sqrt(hr) + 16.0));
  if (k_max > kMaxBruteforceQuanta)
    throw validation_error("brute-force quanta cap exceeds " +
                           std::to_string(kMaxBruteforceQuanta));
  m_max = std::min(m_max, k_max);
  std::map<int, double> acc;
  for (int m = 0; m <= m_max; ++m) {
    const double pm = (1.0 - x) * std::pow(x, m);
    if (pm == 0.0) continue;
    for (int k = 0; k <= k_max; ++k) acc[k - m] += pm * detail::franck_condon(m, k, hr);
  }
  NetPhononDistribution out{acc.begin()->first, {}};
  for (int p = out.p_min; p <= acc.rbegin()->first; ++p) {
    auto it = acc.find(p);
    out.weight.push_back(it == acc.end() ? 0.0 : it->second);
  }
  return out;
}

inline std::vector<PhononStick> phonon_sticks_bruteforce(
    std::span<const PhononMode> modes, double temperature_k, int max_quanta = 0,
    double prune = 1e-15) {
  if (static_cast<int>(modes.size()) > kMaxBruteforceModes)
    throw validation_error("brute-force oracle supports at most 3 modes");
  std::vector<NetPhononDistribution> dists;
  for (const auto& m : modes) {
    validate(m);
    dists.push_back(mode_sideband_weights_fc(m.partial_hr, m.energy,
                                             temperature_k, max_quanta));
  }
  return detail::convolve_modes(modes, dists, prune);
}

// ---------------------------------------------------------------------------
// Line dressing: core profile plus acoustic wing, unit area per stick

namespace detail {

// 8-point Gauss-Legendre on [-1, 1].
inline constexpr std::array<double, 8> kGl8x = {
    -0.9602898564975363, -0.7966664774136267, -0.5255324099163290,
    -0.1834346424956498, 0.1834346424956498,  0.5255324099163290,
    0.7966664774136267,  0.9602898564975363};
inline constexpr std::array<double, 8> kGl8w = {
    0.1012285362903763, 0.2223810344533745, 0.3137066458778873,
    0.3626837833783620, 0.3626837833783620, 0.3137066458778873,
    0.2223810344533745, 0.1012285362903763};

template <class F>
double gauss_legendre(F&& f, double a, double b) {
  const double mid = 0.5 * (a + b);
  const double half = 0.5 * (b - a);
  double s = 0.0;
  for (std::size_t i = 0; i < 8; ++i) s += kGl8w[i] * f(mid + half * kGl8x[i]);
  return s * half;
}

}  // namespace detail

class LineDressing {
 public:
  explicit LineDressing(const EmitterModel& m)
      : profile_(m.profile),
        half_width_(0.5 * m.zpl_linewidth),
        sigma_(m.zpl_linewidth / (2.0 * std::sqrt(2.0 * std::log(2.0)))),
        coupling_(m.acoustic_coupling),
        cutoff_(m.acoustic_cutoff),
        kt_(kBoltzmannMevPerK * m.temperature) {
    if (coupling_ > 0.0) {
      const double span = 60.0 * cutoff_;
      const int panels = 480;
      for (int i = 0; i < panels; ++i) {
        const double a = span * i / panels;
        const double b = span * (i + 1) / panels;
        stokes_weight_ += detail::gauss_legendre([&](double d) { return stokes_density(d); }, a, b);
        anti_weight_ += detail::gauss_legendre([&](double d) { return anti_stokes_density(d); }, a, b);
      }
    }
    norm_ = 1.0 + stokes_weight_ + anti_weight_;
  }

  /// Wing density at detuning delta >= 0 below (Stokes) or above the stick.
  double stokes_density(double delta) const {
    return coupling_ * thermal_stokes(delta) * std::exp(-delta / cutoff_) / (cutoff_ * cutoff_);
  }
  double anti_stokes_density(double delta) const {
    return coupling_ * thermal_anti(delta) * std::exp(-delta / cutoff_) / (cutoff_ * cutoff_);
  }

  // Cell averages over [d - h/2, d + h/2], d = E - E_stick in meV; h = 0
  // gives point densities. All values are pre-divided by the stick norm.
  double core(double d, double h) const {
    if (profile_ == LineProfile::lorentzian) {
      if (h == 0.0) return half_width_ / (kPi * (d * d + half_width_ * half_width_)) / norm_;
      const double u = (d + 0.5 * h) / half_width_;
      const double v = (d - 0.5 * h) / half_width_;
      return std::atan2(u - v, 1.0 + u * v) / (kPi * h) / norm_;
    }
    if (h == 0.0)
      return std::exp(-0.5 * d * d / (sigma_ * sigma_)) /
             (sigma_ * std::sqrt(2.0 * kPi)) / norm_;
    return detail::normal_cdf_diff((d - 0.5 * h) / sigma_, (d + 0.5 * h) / sigma_) / h / norm_;
  }

  double stokes_wing(double d, double h) const {
    if (coupling_ == 0.0) return 0.0;
    if (h == 0.0) return d < 0.0 ? stokes_density(-d) / norm_ : 0.0;
    // delta = -d over the part of the cell with d < 0
    const double hi = -(d - 0.5 * h);
    const double lo = std::max(0.0, -(d + 0.5 * h));
    if (hi <= 0.0 || lo > kWingReach * cutoff_) return 0.0;
    return detail::gauss_legendre([&](double x) { return stokes_density(x); }, lo, hi) / h / norm_;
  }

  double anti_stokes_wing(double d, double h) const {
    if (coupling_ == 0.0 || kt_ == 0.0) return 0.0;
    if (h == 0.0) return d > 0.0 ? anti_stokes_density(d) / norm_ : 0.0;
    const double hi = d + 0.5 * h;
    const double lo = std::max(0.0, d - 0.5 * h);
    if (hi <= 0.0 || lo > kWingReach * cutoff_) return 0.0;
    return detail::gauss_legendre([&](double x) { return anti_stokes_density(x); }, lo, hi) / h / norm_;
  }

  double total(double d, double h) const {
    return core(d, h) + stokes_wing(d, h) + anti_stokes_wing(d, h);
  }

  double stokes_wing_weight() const { return stokes_weight_ / norm_; }
  double anti_stokes_wing_weight() const { return anti_weight_ / norm_; }
  double cutoff() const { return cutoff_; }
  bool has_wing() const { return coupling_ > 0.0; }
  static constexpr double kWingReach = 40.0;

 private:
  // (n + 1) * delta and n * delta, finite at delta -> 0.
  double thermal_stokes(double delta) const {
    if (kt_ == 0.0) return delta;
    if (delta == 0.0) return kt_;
    return -delta / std::expm1(-delta / kt_);
  }
  double thermal_anti(double delta) const {
    if (kt_ == 0.0) return 0.0;
    if (delta == 0.0) return kt_;
    const double x = delta / kt_;
    if (x > 700.0) return 0.0;
    return delta / std::expm1(x);
  }

  LineProfile profile_;
  double half_width_;
  double sigma_;
  double coupling_;
  double cutoff_;
  double kt_;
  double stokes_weight_ = 0.0;
  double anti_weight_ = 0.0;
  double norm_ = 1.0;
};

// ---------------------------------------------------------------------------
// Lineshapes

struct LineshapeResult {
  Spectrum spectrum;       // normalized to unit integral on the grid
  double zpl_weight = 0.0; // share of the zero-phonon channel on the grid
  double grid_mass = 0.0;  // fraction of total emission captured by the grid
};

namespace detail {

inline std::vector<PhononStick> merge_by_energy(std::vector<PhononStick> sticks) {
  std::sort(sticks.begin(), sticks.end(),
            [](const auto& a, const auto& b) { return a.offset < b.offset; });
  std::vector<PhononStick> out;
  for (auto& s : sticks) {
    if (!out.empty() && std::abs(out.back().offset - s.offset) < 1e-9) {
      out.back().weight += s.weight;
      continue;
    }
    s.quanta.clear();
    out.push_back(std::move(s));
  }
  return out;
}

inline void check_lineshape_inputs(const EmitterModel& model, const EnergyGrid& grid) {
  validate(model);
  require(grid.min_energy < model.zpl_energy && model.zpl_energy < grid.max_energy,
          "grid must contain the ZPL energy");
  // One quantum = HR-weighted mean phonon energy.
  double s = 0.0, sw = 0.0;
  for (const auto& m : model.modes) {
    s += m.partial_hr;
    sw += m.partial_hr * m.energy;
  }
  const double quantum = s > 0.0 ? sw / s : 0.0;
  require(grid.min_energy <= model.zpl_energy - 5.0 * quantum * 1e-3 + 1e-12,
          "grid must extend at least 5 phonon quanta below the ZPL");
}

inline LineshapeResult render_sticks(const EmitterModel& model, const EnergyGrid& grid,
                                     std::vector<PhononStick> sticks) {
  const LineDressing dressing(model);
  const double h = grid.spacing() * 1e3;
  // Zero-phonon stick first so its share can be tracked separately.
  double zpl_stick = 0.0;
  for (const auto& s : sticks) {
    bool zero = true;
    for (int q : s.quanta) zero = zero && q == 0;
    if (zero) zpl_stick += s.weight;
  }
  sticks = merge_by_energy(std::move(sticks));
  Spectrum spec{grid, std::vector<double>(grid.n_points, 0.0)};
  double zpl_mass = 0.0;
  for (std::size_t i = 0; i < grid.n_points; ++i) {
    const double e = (grid.point(i) - model.zpl_energy) * 1e3;
    double acc = 0.0;
    for (const auto& s : sticks) acc += s.weight * dressing.total(e - s.offset, h);
    spec.intensity[i] = acc;
    zpl_mass += zpl_stick * dressing.total(e, h);
  }
  double mass = 0.0;
  for (double v : spec.intensity) mass += v * h;
  if (1.0 - mass > 1e-3)
    throw numerical_error("grid truncation loses " + std::to_string(1.0 - mass) +
                          " of the total emission weight");
  // Intensities are per meV on the way in; report per eV, unit area on grid.
  for (double& v : spec.intensity) v *= 1e3 / mass;
  return LineshapeResult{std::move(spec), zpl_mass * h / mass, mass};
}

}  // namespace detail

inline LineshapeResult lineshape_detailed(const EmitterModel& model, const EnergyGrid& grid) {
  detail::check_lineshape_inputs(model, grid);
  return detail::render_sticks(model, grid, phonon_sticks(model.modes, model.temperature));
}

/// Normalized emission spectrum (unit integral over the grid, 1/eV).
inline Spectrum lineshape(const EmitterModel& model, const EnergyGrid& grid) {
  return lineshape_detailed(model, grid).spectrum;
}

/// Franck-Condon oracle with the same dressing; at most 3 modes.
inline Spectrum lineshape_bruteforce(const EmitterModel& model, const EnergyGrid& grid,
                                     int max_quanta = 0) {
  if (static_cast<int>(model.modes.size()) > kMaxBruteforceModes)
    throw validation_error("brute-force oracle supports at most 3 modes");
  detail::check_lineshape_inputs(model, grid);
  return detail::render_sticks(
             model, grid,
             phonon_sticks_bruteforce(model.modes, model.temperature, max_quanta))
      .spectrum;
}

}  // namespace ncdipole
