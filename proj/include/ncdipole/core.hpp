#pragma once

// Shared domain types for the non-Condon emitter toolkit: unit conventions,
// energy grids, spectra, polarization maps and the parametric emitter model.
//
// Conventions:
//   - photon energies in eV, phonon energies and widths in meV
//   - angles are radians inside the library; files and the CLI use degrees
//   - orientation angles live on [-pi/2, pi/2) (an axis, period pi)

#include <cmath>
#include <cstddef>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

namespace ncdipole {

inline constexpr double kBoltzmannEvPerK = 8.617333262e-5;
inline constexpr double kBoltzmannMevPerK = kBoltzmannEvPerK * 1e3;
inline constexpr double kHcEvNm = 1239.841984;
inline constexpr double kPi = std::numbers::pi;

// Error categories map one-to-one onto CLI exit codes (2, 3, 4).
struct validation_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct numerical_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct io_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline void require(bool ok, const std::string& what) {
  if (!ok) throw validation_error(what);
}

inline constexpr double deg2rad(double deg) { return deg * kPi / 180.0; }
inline constexpr double rad2deg(double rad) { return rad * 180.0 / kPi; }

inline double wavelength_nm(double energy_ev) { return kHcEvNm / energy_ev; }

/// Reduce an axis angle (period pi) to [-pi/2, pi/2).
inline double canonical_orientation(double angle) {
  double a = std::fmod(angle + kPi / 2.0, kPi);
  if (a < 0.0) a += kPi;
  double out = a - kPi / 2.0;
  if (out >= kPi / 2.0) out -= kPi;
  return out;
}

/// Signed difference a - b of two axis angles, reduced to [-pi/2, pi/2).
inline double orientation_difference(double a, double b) {
  return canonical_orientation(a - b);
}

// ---------------------------------------------------------------------------
// Energy grid

struct EnergyGrid {
  double min_energy = 0.0;  // eV (meV for phonon-axis grids)
  double max_energy = 0.0;
  std::size_t n_points = 0;

  double spacing() const {
    return (max_energy - min_energy) / static_cast<double>(n_points - 1);
  }
  double point(std::size_t i) const {
    if (i + 1 == n_points) return max_energy;
    return min_energy + static_cast<double>(i) * spacing();
  }
  std::vector<double> points() const {
    std::vector<double> out(n_points);
    for (std::size_t i = 0; i < n_points; ++i) out[i] = point(i);
    return out;
  }
  std::size_t size() const { return n_points; }
};

inline EnergyGrid make_grid(double min_energy, double max_energy,
                            long long n_points) {
  require(std::isfinite(min_energy) && std::isfinite(max_energy),
          "grid bounds must be finite");
  require(n_points >= 2, "grid needs at least 2 points");
  require(min_energy < max_energy, "grid min must be below grid max");
  return EnergyGrid{min_energy, max_energy,
                    static_cast<std::size_t>(n_points)};
}

// ---------------------------------------------------------------------------
// Spectra and maps

struct Spectrum {
  EnergyGrid grid;
  std::vector<double> intensity;

  /// Rectangle-rule integral; intensities are cell averages.
  double integral() const {
    double s = 0.0;
    for (double v : intensity) s += v;
    return s * grid.spacing();
  }
};

inline void validate(const Spectrum& s) {
  require(s.intensity.size() == s.grid.n_points,
          "spectrum length does not match grid");
  for (double v : s.intensity)
    require(std::isfinite(v) && v >= 0.0,
            "spectrum intensities must be finite and non-negative");
}

struct PolarizationMap {
  EnergyGrid grid;
  std::vector<double> angles;     // radians
  std::vector<double> intensity;  // row-major [energy][angle]

  std::size_t n_angles() const { return angles.size(); }
  double at(std::size_t e, std::size_t a) const {
    return intensity[e * angles.size() + a];
  }
  double& at(std::size_t e, std::size_t a) {
    return intensity[e * angles.size() + a];
  }
};

inline void validate(const PolarizationMap& m) {
  require(!m.angles.empty(), "polarization map has no angles");
  require(m.intensity.size() == m.grid.n_points * m.angles.size(),
          "polarization map dimensions do not match grid x angles");
  for (double v : m.intensity)
    require(std::isfinite(v) && v >= 0.0,
            "map intensities must be finite and non-negative");
}

/// One energy bin of a polarization map.
struct MapSlice {
  double center_energy = 0.0;  // mean energy of member points, eV
  std::vector<double> angular_profile;
  std::size_t n_points = 0;
  bool partial = false;  // fewer grid points than a full bin holds
};

/// Bin a map along energy. Bins are [min + i*w, min + (i+1)*w); the final
/// grid point belongs to the last bin, which is kept and flagged partial when
/// it holds fewer points than a full bin.
inline std::vector<MapSlice> slice_map(const PolarizationMap& map,
                                       double bin_width_mev) {
  validate(map);
  const double h_mev = map.grid.spacing() * 1e3;
  require(std::isfinite(bin_width_mev) && bin_width_mev > 0.0,
          "bin width must be positive");
  require(bin_width_mev >= h_mev * (1.0 - 1e-9),
          "bin width is smaller than the grid spacing");
  const double w_ev = bin_width_mev * 1e-3;
  const auto full = static_cast<std::size_t>(
      std::floor(bin_width_mev / h_mev + 1e-9));

  std::vector<MapSlice> out;
  std::vector<double> energy_sums;
  const std::size_t na = map.n_angles();
  for (std::size_t i = 0; i < map.grid.n_points; ++i) {
    const double e = map.grid.point(i);
    auto b = static_cast<std::size_t>(
        std::floor((e - map.grid.min_energy) / w_ev + 1e-9));
    if (b >= out.size()) {
      out.resize(b + 1);
      energy_sums.resize(b + 1, 0.0);
      for (auto& s : out)
        if (s.angular_profile.empty()) s.angular_profile.assign(na, 0.0);
    }
    auto& s = out[b];
    for (std::size_t a = 0; a < na; ++a) s.angular_profile[a] += map.at(i, a);
    s.n_points += 1;
    energy_sums[b] += e;
  }
  // Drop empty bins (possible only when the bin width is below ~2 spacings).
  std::vector<MapSlice> kept;
  for (std::size_t b = 0; b < out.size(); ++b) {
    if (out[b].n_points == 0) continue;
    out[b].center_energy = energy_sums[b] / static_cast<double>(out[b].n_points);
    out[b].partial = out[b].n_points < full;
    kept.push_back(std::move(out[b]));
  }
  return kept;
}

// ---------------------------------------------------------------------------
// Emitter model

struct PhononMode {
  double energy = 0.0;          // meV
  double partial_hr = 0.0;      // S_k
  double partial_dq = 0.0;      // amu^1/2 Angstrom
  double grad_magnitude = 0.0;  // g_k, relative to mu0 per unit dQ
  double grad_direction = 0.0;  // alpha_k, radians
};

inline void validate(const PhononMode& m) {
  require(std::isfinite(m.energy) && m.energy > 0.0,
          "mode energy must be positive");
  require(std::isfinite(m.partial_hr) && m.partial_hr >= 0.0,
          "partial HR factor must be non-negative");
  require(std::isfinite(m.partial_dq) && m.partial_dq >= 0.0,
          "partial dQ must be non-negative");
  require(std::isfinite(m.grad_magnitude) && m.grad_magnitude >= 0.0,
          "gradient magnitude must be non-negative");
  require(std::isfinite(m.grad_direction), "gradient direction must be finite");
}

enum class LineProfile { lorentzian, gaussian };

struct EmitterModel {
  double zpl_energy = 1.848;        // eV
  double equilibrium_angle = 0.0;   // psi0, radians
  double equilibrium_dipole = 1.0;  // mu0
  std::vector<PhononMode> modes;
  double zpl_linewidth = 0.15;  // FWHM, meV
  LineProfile profile = LineProfile::lorentzian;

  // Phenomenological acoustic wing.
  double acoustic_coupling = 0.0;  // Stokes wing weight at T = 0
  double acoustic_cutoff = 7.0;    // meV

  // Effective acoustic dipole gradient; its vector is scaled by strain_bias.
  double acoustic_grad = 0.0;
  double acoustic_grad_direction = kPi / 2.0;  // radians
  // Thermal variance of the acoustic coordinate: 2 * fluctuation * n(cutoff).
  double acoustic_fluctuation = 0.0;

  double anti_stokes_gain = 1.0;
  double temperature = 300.0;  // K
  double strain_bias = 0.0;    // [-1, 1]
  double opsb_energy = 165.0;  // meV, picks the optical sideband mode

  double total_hr() const {
    double s = 0.0;
    for (const auto& m : modes) s += m.partial_hr;
    return s;
  }
};

inline void validate(const EmitterModel& m) {
  require(std::isfinite(m.zpl_energy) && m.zpl_energy > 0.0,
          "zpl_energy must be positive");
  require(std::isfinite(m.equilibrium_angle), "equilibrium angle must be finite");
  require(std::isfinite(m.equilibrium_dipole) && m.equilibrium_dipole > 0.0,
          "equilibrium dipole must be positive");
  require(std::isfinite(m.zpl_linewidth) && m.zpl_linewidth > 0.0,
          "zpl_linewidth must be positive");
  require(std::isfinite(m.acoustic_coupling) && m.acoustic_coupling >= 0.0,
          "acoustic_coupling must be non-negative");
  require(std::isfinite(m.acoustic_cutoff) && m.acoustic_cutoff > 0.0,
          "acoustic_cutoff must be positive");
  require(std::isfinite(m.acoustic_grad) && m.acoustic_grad >= 0.0,
          "acoustic_grad must be non-negative");
  require(std::isfinite(m.acoustic_grad_direction),
          "acoustic_grad_direction must be finite");
  require(std::isfinite(m.acoustic_fluctuation) && m.acoustic_fluctuation >= 0.0,
          "acoustic_fluctuation must be non-negative");
  require(std::isfinite(m.anti_stokes_gain) && m.anti_stokes_gain >= 0.0,
          "anti_stokes_gain must be non-negative");
  require(std::isfinite(m.temperature) && m.temperature >= 0.0,
          "temperature must be non-negative");
  require(std::isfinite(m.strain_bias) && m.strain_bias >= -1.0 &&
              m.strain_bias <= 1.0,
          "strain_bias must lie in [-1, 1]");
  require(std::isfinite(m.opsb_energy) && m.opsb_energy > 0.0,
          "opsb_energy must be positive");
  for (const auto& mode : m.modes) validate(mode);
  require(std::isfinite(m.total_hr()), "total HR factor must be finite");
}

}  // namespace ncdipole
