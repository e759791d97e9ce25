#pragma once

// Coordinate-dependent transition dipole and the orientation it imprints on
// each part of the vibronic spectrum.
//
//   mu(Q) = mu0 (cos psi0, sin psi0) + sum_k g_k q_k dQ_k (cos a_k, sin a_k)
//
// Every vibronic channel (ZPL, phonon replica, acoustic wing at detuning d)
// emits linearly polarized light along the axis of mu at its characteristic
// displacement. Channels are mixed incoherently: their linear Stokes vectors
// add, weighted by channel intensity.

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "ncdipole/core.hpp"
#include "ncdipole/vibronic.hpp"

namespace ncdipole {

struct DipoleAxis {
  double angle = 0.0;      // radians, canonical axis branch
  double magnitude = 0.0;  // units of mu0
};

namespace detail {

inline DipoleAxis axis_of(double x, double y, double scale) {
  const double r = std::hypot(x, y);
  if (!(r > 1e-14 * scale))
    throw numerical_error("dipole vanishes at this displacement; orientation undefined");
  return {canonical_orientation(std::atan2(y, x)), r};
}

}  // namespace detail

/// Dipole axis at displacement q (units of each mode's dQ_k).
inline DipoleAxis dipole_at_displacement(const EmitterModel& model,
                                         std::span<const double> q) {
  require(q.size() == model.modes.size(), "displacement vector length must equal mode count");
  double x = model.equilibrium_dipole * std::cos(model.equilibrium_angle);
  double y = model.equilibrium_dipole * std::sin(model.equilibrium_angle);
  double scale = model.equilibrium_dipole;
  for (std::size_t k = 0; k < q.size(); ++k) {
    require(std::isfinite(q[k]), "displacements must be finite");
    const auto& m = model.modes[k];
    const double amp = m.grad_magnitude * q[k] * m.partial_dq;
    x += amp * std::cos(m.grad_direction);
    y += amp * std::sin(m.grad_direction);
    scale += std::abs(amp);
  }
  return detail::axis_of(x, y, scale);
}

struct ModeRotation {
  std::size_t mode_index = 0;
  double phonon_energy = 0.0;  // meV
  double delta_theta = 0.0;    // radians, signed
};

/// Axis deviation from psi0 at the one-phonon geometry (q_k = 1) of each mode.
inline std::vector<ModeRotation> mode_rotations(const EmitterModel& model) {
  validate(model);
  std::vector<ModeRotation> out;
  std::vector<double> q(model.modes.size(), 0.0);
  for (std::size_t k = 0; k < model.modes.size(); ++k) {
    q[k] = 1.0;
    const auto ax = dipole_at_displacement(model, q);
    q[k] = 0.0;
    out.push_back({k, model.modes[k].energy,
                   orientation_difference(ax.angle, model.equilibrium_angle)});
  }
  return out;
}

/// Blend each mode's gradient direction toward its mirror image about psi0
/// when its rotation sense disagrees with sign(strain_bias). |bias| = 1 gives
/// every mode the rotation sense of the bias; bias = 0 is the identity.
inline EmitterModel apply_strain_bias(const EmitterModel& model) {
  validate(model);
  EmitterModel out = model;
  const double b = model.strain_bias;
  if (b == 0.0) return out;
  const double want = b > 0.0 ? 1.0 : -1.0;
  for (auto& m : out.modes) {
    const double s = std::sin(m.grad_direction - model.equilibrium_angle);
    if (s == 0.0 || (s > 0.0) == (want > 0.0)) continue;
    const double mirrored = 2.0 * model.equilibrium_angle - m.grad_direction;
    m.grad_direction += std::abs(b) * (mirrored - m.grad_direction);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Channel mixture

/// Linear Stokes components (s3 = 0 for in-plane dipoles).
struct LinearStokes {
  double s0 = 0.0;
  double s1 = 0.0;
  double s2 = 0.0;
};

namespace detail {

/// Probabilists' Gauss-Hermite rule (weights sum to 1) via Golub-Welsch.
inline void gauss_hermite(int n, std::vector<double>& nodes, std::vector<double>& weights) {
  Eigen::MatrixXd j = Eigen::MatrixXd::Zero(n, n);
  for (int i = 1; i < n; ++i) j(i, i - 1) = j(i - 1, i) = std::sqrt(static_cast<double>(i));
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(j);
  nodes.resize(n);
  weights.resize(n);
  for (int i = 0; i < n; ++i) {
    nodes[i] = es.eigenvalues()(i);
    weights[i] = es.eigenvectors()(0, i) * es.eigenvectors()(0, i);
  }
}

}  // namespace detail

/// Evaluates the channel-mixed linear Stokes vector of an emitter at any
/// detuning from the ZPL. Built once per model; evaluation is const.
class ChannelMixer {
 public:
  explicit ChannelMixer(const EmitterModel& model)
      : model_(model), dressing_(model) {
    validate(model);
    const double mu0 = model.equilibrium_dipole;
    const double x0 = mu0 * std::cos(model.equilibrium_angle);
    const double y0 = mu0 * std::sin(model.equilibrium_angle);
    scale_ = mu0;
    for (const auto& m : model.modes) {
      gx_.push_back(m.grad_magnitude * m.partial_dq * std::cos(m.grad_direction));
      gy_.push_back(m.grad_magnitude * m.partial_dq * std::sin(m.grad_direction));
    }
    const double ac = model.strain_bias * model.acoustic_grad;
    ax_ = ac * std::cos(model.acoustic_grad_direction);
    ay_ = ac * std::sin(model.acoustic_grad_direction);

    const double var = model.temperature > 0.0
        ? 2.0 * model.acoustic_fluctuation * bose_occupation(model.acoustic_cutoff, model.temperature)
        : 0.0;
    sigma_ = std::sqrt(var);
    if (sigma_ > 0.0 && (ax_ != 0.0 || ay_ != 0.0)) {
      detail::gauss_hermite(16, gh_nodes_, gh_weights_);
    } else {
      gh_nodes_ = {0.0};
      gh_weights_ = {1.0};
    }

    auto sticks = phonon_sticks(model.modes, model.temperature, 1e-14);
    std::sort(sticks.begin(), sticks.end(),
              [](const auto& a, const auto& b) { return a.offset < b.offset; });
    for (const auto& s : sticks) {
      Channel c{s.offset, s.weight, x0, y0, 0.0, 0.0};
      for (std::size_t k = 0; k < s.quanta.size(); ++k) {
        const int p = s.quanta[k];
        if (p == 0) continue;
        const double q = p > 0 ? -std::sqrt(static_cast<double>(p))
                               : model.anti_stokes_gain * std::sqrt(static_cast<double>(-p));
        c.x += q * gx_[k];
        c.y += q * gy_[k];
      }
      polarization(c.x, c.y, 0.0, c.c2, c.s2);
      channels_.push_back(c);
    }
  }

  /// Stokes vector per meV of detuning d = E - E_zpl (meV); h > 0 averages
  /// over the cell [d - h/2, d + h/2], h = 0 gives point values.
  LinearStokes at(double d, double h) const {
    LinearStokes out;
    const double reach = LineDressing::kWingReach * dressing_.cutoff() + h;
    for (const auto& c : channels_) {
      const double dd = d - c.offset;
      const double core = c.weight * dressing_.core(dd, h);
      out.s0 += core;
      out.s1 += core * c.c2;
      out.s2 += core * c.s2;
      if (dressing_.has_wing() && std::abs(dd) < reach) add_wings(c, dd, h, out);
    }
    return out;
  }

  const EmitterModel& model() const { return model_; }
  const LineDressing& dressing() const { return dressing_; }

 private:
  struct Channel {
    double offset;
    double weight;
    double x, y;    // dipole at the channel's optical displacement
    double c2, s2;  // mean cos 2psi, sin 2psi of the core
  };

  // Mean (cos 2psi, sin 2psi) of the dipole base + (qbar + sigma z) * acoustic
  // vector, z standard normal.
  void polarization(double bx, double by, double qbar, double& c2, double& s2) const {
    c2 = 0.0;
    s2 = 0.0;
    for (std::size_t i = 0; i < gh_nodes_.size(); ++i) {
      const double q = qbar + sigma_ * gh_nodes_[i];
      const double x = bx + q * ax_;
      const double y = by + q * ay_;
      const double r2 = x * x + y * y;
      if (!(r2 > 1e-28 * scale_ * scale_))
        throw numerical_error("dipole vanishes inside a vibronic channel");
      c2 += gh_weights_[i] * (x * x - y * y) / r2;
      s2 += gh_weights_[i] * 2.0 * x * y / r2;
    }
  }

  void add_wings(const Channel& c, double dd, double h, LinearStokes& out) const {
    const double cut = dressing_.cutoff();
    const double gain = model_.anti_stokes_gain;
    auto accumulate = [&](double delta, double density, double sign, double& w0, double& w1, double& w2) {
      double c2, s2;
      polarization(c.x, c.y, sign * std::sqrt(delta / cut), c2, s2);
      w0 += density;
      w1 += density * c2;
      w2 += density * s2;
    };
    double w0 = 0.0, w1 = 0.0, w2 = 0.0;
    if (h == 0.0) {
      if (dd < 0.0) {
        const double v = dressing_.stokes_wing(dd, 0.0);
        accumulate(-dd, v, -1.0, w0, w1, w2);
      } else if (dd > 0.0) {
        const double v = dressing_.anti_stokes_wing(dd, 0.0);
        if (v > 0.0) accumulate(dd, v, gain, w0, w1, w2);
      }
    } else {
      // Stokes part of the cell: delta = -x for x in [dd - h/2, min(dd + h/2, 0)].
      const double s_hi = -(dd - 0.5 * h);
      const double s_lo = std::max(0.0, -(dd + 0.5 * h));
      if (s_hi > 0.0 && s_lo <= LineDressing::kWingReach * cut) {
        const double mid = 0.5 * (s_lo + s_hi), half = 0.5 * (s_hi - s_lo);
        for (std::size_t i = 0; i < 8; ++i) {
          const double delta = mid + half * detail::kGl8x[i];
          const double v = dressing_.stokes_wing(-delta, 0.0) * detail::kGl8w[i] * half / h;
          accumulate(delta, v, -1.0, w0, w1, w2);
        }
      }
      const double a_hi = dd + 0.5 * h;
      const double a_lo = std::max(0.0, dd - 0.5 * h);
      if (a_hi > 0.0 && a_lo <= LineDressing::kWingReach * cut) {
        const double mid = 0.5 * (a_lo + a_hi), half = 0.5 * (a_hi - a_lo);
        for (std::size_t i = 0; i < 8; ++i) {
          const double delta = mid + half * detail::kGl8x[i];
          const double v = dressing_.anti_stokes_wing(delta, 0.0) * detail::kGl8w[i] * half / h;
          if (v > 0.0) accumulate(delta, v, gain, w0, w1, w2);
        }
      }
    }
    out.s0 += c.weight * w0;
    out.s1 += c.weight * w1;
    out.s2 += c.weight * w2;
  }

  EmitterModel model_;
  LineDressing dressing_;
  std::vector<Channel> channels_;
  std::vector<double> gx_, gy_;
  double ax_ = 0.0, ay_ = 0.0;
  double sigma_ = 0.0;
  double scale_ = 1.0;
  std::vector<double> gh_nodes_, gh_weights_;
};

// ---------------------------------------------------------------------------
// Orientation curves

inline constexpr double kInvalidAngle = std::numeric_limits<double>::quiet_NaN();

struct OrientationCurve {
  std::vector<double> energies;  // eV
  std::vector<double> psi;       // radians, canonical; NaN where undefined
  std::vector<double> dolp;
  std::vector<double> weight;    // channel-summed intensity
  std::vector<bool> valid;
  // Linear Stokes components behind psi and dolp (same units as weight).
  std::vector<double> s1;
  std::vector<double> s2;

  std::size_t size() const { return energies.size(); }
};

/// Validity and (psi, dolp) from accumulated Stokes sums. Points below 1e-6
/// of the peak weight are invalid; psi is left defined wherever weight > 0.
inline void finalize_curve(OrientationCurve& c, double relative_floor = 1e-6) {
  double peak = 0.0;
  for (double w : c.weight) peak = std::max(peak, w);
  const std::size_t n = c.weight.size();
  c.psi.assign(n, kInvalidAngle);
  c.dolp.assign(n, 0.0);
  c.valid.assign(n, false);
  for (std::size_t i = 0; i < n; ++i) {
    const double w = c.weight[i];
    if (!(w > 0.0)) continue;
    const double r = std::hypot(c.s1[i], c.s2[i]);
    c.dolp[i] = std::min(1.0, r / w);
    if (r > 0.0) c.psi[i] = canonical_orientation(0.5 * std::atan2(c.s2[i], c.s1[i]));
    c.valid[i] = w >= relative_floor * peak && r > 0.0;
  }
}

/// psi(E) and DOLP(E) of the incoherent channel mixture on `grid` (cell averages).
inline OrientationCurve orientation_vs_energy(const EmitterModel& model, const EnergyGrid& grid) {
  validate(model);
  const ChannelMixer mixer(model);
  const double h = grid.spacing() * 1e3;
  OrientationCurve c;
  c.energies = grid.points();
  for (double e : c.energies) {
    const auto s = mixer.at((e - model.zpl_energy) * 1e3, h);
    c.weight.push_back(s.s0 * 1e3);
    c.s1.push_back(s.s1 * 1e3);
    c.s2.push_back(s.s2 * 1e3);
  }
  double total = 0.0;
  for (double w : c.weight) total += w;
  require(total > 0.0, "grid does not overlap the emission band");
  finalize_curve(c);
  return c;
}

/// Sum consecutive points of a curve into bins of `bin_width_mev`, using the
/// same tiling as slice_map, and recompute psi/dolp from the binned Stokes sums.
inline OrientationCurve bin_curve(const OrientationCurve& c, const EnergyGrid& grid,
                                  double bin_width_mev) {
  require(c.size() == grid.n_points, "curve does not match grid");
  PolarizationMap m{grid, {0.0, kPi / 4.0, kPi / 2.0}, {}};
  m.intensity.reserve(3 * c.size());
  for (std::size_t i = 0; i < c.size(); ++i) {
    // Stokes components need not be non-negative, so offset them into
    // positive analyzer-like channels: I(0) = w + s1, I(45) = w + s2, I(90) = w - s1.
    m.intensity.push_back(c.weight[i] + c.s1[i]);
    m.intensity.push_back(c.weight[i] + c.s2[i]);
    m.intensity.push_back(c.weight[i] - c.s1[i]);
  }
  for (double& v : m.intensity) v = std::max(0.0, v);
  const auto slices = slice_map(m, bin_width_mev);
  OrientationCurve out;
  for (const auto& s : slices) {
    const double w = 0.5 * (s.angular_profile[0] + s.angular_profile[2]);
    out.energies.push_back(s.center_energy);
    out.weight.push_back(w);
    out.s1.push_back(0.5 * (s.angular_profile[0] - s.angular_profile[2]));
    out.s2.push_back(s.angular_profile[1] - w);
  }
  finalize_curve(out);
  return out;
}

/// max psi - min psi over valid points whose weight exceeds `relative_floor`
/// of the peak weight. Angles are unwrapped along energy (period pi).
inline double orientation_sweep(const OrientationCurve& c, double relative_floor = 0.0) {
  double peak = 0.0;
  for (std::size_t i = 0; i < c.size(); ++i)
    if (c.valid[i]) peak = std::max(peak, c.weight[i]);
  double lo = 0.0, hi = 0.0, prev = 0.0;
  bool any = false;
  for (std::size_t i = 0; i < c.size(); ++i) {
    if (!c.valid[i] || !(c.weight[i] > relative_floor * peak)) continue;
    double a = c.psi[i];
    if (any) a = prev + orientation_difference(a, prev);
    if (!any) lo = hi = a;
    lo = std::min(lo, a);
    hi = std::max(hi, a);
    prev = a;
    any = true;
  }
  if (!any) throw numerical_error("no valid points for an orientation sweep");
  return hi - lo;
}

/// Index of the mode nearest model.opsb_energy.
inline std::size_t opsb_mode(const EmitterModel& model) {
  require(!model.modes.empty(), "model has no optical modes");
  std::size_t best = 0;
  for (std::size_t k = 1; k < model.modes.size(); ++k)
    if (std::abs(model.modes[k].energy - model.opsb_energy) <
        std::abs(model.modes[best].energy - model.opsb_energy))
      best = k;
  return best;
}

/// psi at the centroid of the OPSB mode's one-phonon Stokes replica (its
/// dressed profile within +-10 meV) minus psi at the ZPL energy, radians.
inline double opsb_offset(const EmitterModel& model) {
  validate(model);
  const auto k = opsb_mode(model);
  const auto& mode = model.modes[k];
  if (!(mode.partial_hr > 0.0)) throw numerical_error("no optical sideband weight");
  const LineDressing dressing(model);
  // The core is symmetric about the replica, so only the wings move the centroid.
  double mass = dressing.core(0.0, 20.0) * 20.0;
  double moment = 0.0;
  const int panels = 400;
  for (int i = 0; i < panels; ++i) {
    const double a = -10.0 + 20.0 * i / panels;
    const double b = -10.0 + 20.0 * (i + 1) / panels;
    auto wing = [&](double d) { return dressing.stokes_wing(d, 0.0) + dressing.anti_stokes_wing(d, 0.0); };
    mass += detail::gauss_legendre(wing, a, b);
    moment += detail::gauss_legendre([&](double d) { return d * wing(d); }, a, b);
  }
  const double centroid = -mode.energy + moment / mass;
  const ChannelMixer mixer(model);
  const auto at_opsb = mixer.at(centroid, 0.0);
  const auto at_zpl = mixer.at(0.0, 0.0);
  if (!(std::hypot(at_opsb.s1, at_opsb.s2) > 0.0) || !(std::hypot(at_zpl.s1, at_zpl.s2) > 0.0))
    throw numerical_error("orientation undefined at the ZPL or OPSB center");
  const double psi_opsb = 0.5 * std::atan2(at_opsb.s2, at_opsb.s1);
  const double psi_zpl = 0.5 * std::atan2(at_zpl.s2, at_zpl.s1);
  return orientation_difference(psi_opsb, psi_zpl);
}

}  // namespace ncdipole
