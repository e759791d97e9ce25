#pragma once

// Time-tagged photon streams from a pulsed single emitter with uncorrelated
// background, split onto two detectors, and the pulsed g2 estimator built
// from the cross-channel delay histogram.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "ncdipole/core.hpp"

namespace ncdipole {

struct PhotonStream {
  std::vector<std::int64_t> time_tags;  // ps, ascending
  std::vector<std::uint8_t> channel;    // 0 or 1

  std::size_t size() const { return time_tags.size(); }
};

struct StreamParams {
  double signal_prob = 0.0;      // per pulse
  double background_rate = 0.0;  // detected counts/s
  double rep_rate = 40.0;        // MHz
  double lifetime = 1.5;         // ns
  double duration = 1.0;         // s
  std::uint64_t seed = 42;
};

inline PhotonStream simulate_stream(const StreamParams& p) {
  require(std::isfinite(p.signal_prob) && p.signal_prob >= 0.0 && p.signal_prob <= 1.0,
          "signal_prob must lie in [0, 1]");
  require(std::isfinite(p.background_rate) && p.background_rate >= 0.0,
          "background rate must be non-negative");
  require(std::isfinite(p.rep_rate) && p.rep_rate > 0.0, "repetition rate must be positive");
  require(std::isfinite(p.lifetime) && p.lifetime > 0.0, "lifetime must be positive");
  require(std::isfinite(p.duration) && p.duration > 0.0, "duration must be positive");
  const double period_ps = 1e6 / p.rep_rate;
  const double tau_ps = p.lifetime * 1e3;
  require(tau_ps < period_ps / 5.0, "lifetime too long for the repetition period (pulse overlap)");
  const double span_ps = p.duration * 1e12;

  std::mt19937_64 rng(p.seed);
  std::bernoulli_distribution split(0.5);
  std::vector<std::pair<std::int64_t, std::uint8_t>> events;

  const auto n_pulses = static_cast<std::int64_t>(std::floor(span_ps / period_ps));
  if (p.signal_prob > 0.0) {
    std::exponential_distribution<double> delay(1.0 / tau_ps);
    if (p.signal_prob >= 1.0) {
      for (std::int64_t j = 0; j < n_pulses; ++j) {
        const double t = static_cast<double>(j) * period_ps + delay(rng);
        events.emplace_back(std::llround(t), split(rng));
      }
    } else {
      // Gaps between emitting pulses are geometric.
      std::geometric_distribution<std::int64_t> skip(p.signal_prob);
      for (std::int64_t j = skip(rng); j < n_pulses; j += 1 + skip(rng)) {
        const double t = static_cast<double>(j) * period_ps + delay(rng);
        events.emplace_back(std::llround(t), split(rng));
      }
    }
  }
  if (p.background_rate > 0.0) {
    std::exponential_distribution<double> gap(p.background_rate * 1e-12);
    for (double t = gap(rng); t < span_ps; t += gap(rng))
      events.emplace_back(std::llround(t), split(rng));
  }
  std::sort(events.begin(), events.end());
  PhotonStream s;
  s.time_tags.reserve(events.size());
  s.channel.reserve(events.size());
  for (const auto& [t, c] : events) {
    s.time_tags.push_back(t);
    s.channel.push_back(c);
  }
  return s;
}

struct G2Histogram {
  std::vector<double> bin_centers;  // ns
  std::vector<std::int64_t> coincidences;
  double rep_period = 0.0;  // ns
  double g2_zero = 0.0;
  double g2_zero_err = 0.0;
  std::int64_t center_area = 0;
  std::vector<std::int64_t> side_areas;  // peaks m = -M..-1, 1..M
  std::int64_t total_pairs = 0;
};

/// 1 - rho^2 for a single emitter contributing fraction rho of all counts.
inline double g2_zero_expected(double signal_fraction) {
  require(signal_fraction >= 0.0 && signal_fraction <= 1.0, "signal fraction must lie in [0, 1]");
  return 1.0 - signal_fraction * signal_fraction;
}

/// Histogram of tau = t1 - t0 over |tau| <= window. Peak areas count every
/// pair within +-T/2 of m*T; g2(0) is the center area over the mean side area.
inline G2Histogram g2_histogram(const PhotonStream& s, double bin_width_ns, double window_ns,
                                double rep_period_ns) {
  require(s.time_tags.size() == s.channel.size(), "stream arrays differ in length");
  require(std::isfinite(rep_period_ns) && rep_period_ns > 0.0, "repetition period must be positive");
  require(std::isfinite(bin_width_ns) && bin_width_ns > 0.0, "bin width must be positive");
  require(bin_width_ns <= rep_period_ns, "bin width exceeds the repetition period");
  require(std::isfinite(window_ns) && window_ns >= 5.0 * rep_period_ns - 1e-9,
          "window must span at least 5 repetition periods each side");

  std::vector<std::int64_t> t0, t1;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i > 0) require(s.time_tags[i] >= s.time_tags[i - 1], "time tags must be sorted");
    (s.channel[i] == 0 ? t0 : t1).push_back(s.time_tags[i]);
  }
  if (t0.empty() || t1.empty()) throw validation_error("both detector channels need events");

  const double period_ps = rep_period_ns * 1e3;
  const auto w_ps = std::llround(window_ns * 1e3);
  const double bw_ps = bin_width_ns * 1e3;
  const auto nbins = static_cast<std::size_t>(std::ceil(2.0 * window_ns / bin_width_ns - 1e-9));
  const int n_side = static_cast<int>(std::floor((window_ns - 0.5 * rep_period_ns) / rep_period_ns + 1e-9));
  require(n_side >= 2, "window too short for side peaks");

  G2Histogram h;
  h.rep_period = rep_period_ns;
  h.coincidences.assign(nbins, 0);
  for (std::size_t i = 0; i < nbins; ++i)
    h.bin_centers.push_back(-window_ns + (static_cast<double>(i) + 0.5) * bin_width_ns);
  std::vector<std::int64_t> peaks(static_cast<std::size_t>(2 * n_side + 1), 0);

  std::size_t lo = 0;
  for (const std::int64_t b : t1) {
    while (lo < t0.size() && t0[lo] < b - w_ps) ++lo;
    for (std::size_t j = lo; j < t0.size() && t0[j] <= b + w_ps; ++j) {
      const std::int64_t tau = b - t0[j];
      auto bin = static_cast<std::size_t>(std::floor((static_cast<double>(tau + w_ps)) / bw_ps));
      h.coincidences[std::min(bin, nbins - 1)] += 1;
      ++h.total_pairs;
      const auto m = std::llround(static_cast<double>(tau) / period_ps);
      if (std::abs(m) <= n_side) peaks[static_cast<std::size_t>(m + n_side)] += 1;
    }
  }

  h.center_area = peaks[static_cast<std::size_t>(n_side)];
  for (int m = -n_side; m <= n_side; ++m)
    if (m != 0) h.side_areas.push_back(peaks[static_cast<std::size_t>(m + n_side)]);
  double mean = 0.0;
  for (auto v : h.side_areas) mean += static_cast<double>(v);
  mean /= static_cast<double>(h.side_areas.size());
  if (!(mean > 0.0)) throw numerical_error("side peaks are empty; g2(0) undefined");
  double var = 0.0;
  for (auto v : h.side_areas) var += (static_cast<double>(v) - mean) * (static_cast<double>(v) - mean);
  var /= static_cast<double>(h.side_areas.size() - 1);
  const double se_mean = std::sqrt(var / static_cast<double>(h.side_areas.size()));
  const double c = static_cast<double>(h.center_area);
  h.g2_zero = c / mean;
  const double e_center = std::sqrt(std::max(c, 1.0)) / mean;
  const double e_side = c * se_mean / (mean * mean);
  h.g2_zero_err = std::hypot(e_center, e_side);
  return h;
}

/// Stream parameters giving signal fraction rho at a total detected rate.
inline StreamParams stream_for_fraction(double rho, double total_rate = 5e4, double rep_rate_mhz = 40.0,
                                        double lifetime_ns = 1.5, double duration_s = 1.0,
                                        std::uint64_t seed = 42) {
  require(rho >= 0.0 && rho <= 1.0, "signal fraction must lie in [0, 1]");
  require(total_rate > 0.0, "total rate must be positive");
  StreamParams p;
  p.signal_prob = rho * total_rate / (rep_rate_mhz * 1e6);
  require(p.signal_prob <= 1.0, "total rate exceeds one photon per pulse");
  p.background_rate = (1.0 - rho) * total_rate;
  p.rep_rate = rep_rate_mhz;
  p.lifetime = lifetime_ns;
  p.duration = duration_s;
  p.seed = seed;
  return p;
}

}  // namespace ncdipole
