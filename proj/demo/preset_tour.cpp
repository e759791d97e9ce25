// Walks one preset through spectrum, polarization map, map analysis and a g2 run.
// Usage: preset_tour [preset] [temperature_k]

#include <cmath>
#include <cstdio>
#include <string>

#include "ncdipole/ncdipole.hpp"

using namespace ncdipole;

int main(int argc, char** argv) {
  const std::string preset = argc > 1 ? argv[1] : "strong_coupling";
  auto model = load_preset_model(preset);
  if (argc > 2) model.temperature = std::stod(argv[2]);
  const auto cfg = load_preset(preset);

  const auto spec = lineshape_detailed(model, parse_grid(cfg.get("spectrum_grid")));
  std::printf("%s at %.0f K: zpl weight %.5f, total dq %.3f\n", preset.c_str(), model.temperature,
              spec.zpl_weight, total_dq(model.modes));

  for (const auto& r : mode_rotations(model))
    std::printf("  mode rotation %+.3f deg\n", rad2deg(r.delta_theta));

  const auto map = simulate_polarization_map(model, parse_grid(cfg.get("zpl_band_grid")),
                                             default_analyzer_angles(), {});
  const auto a = analyze_map(map, MapMode::analyzer, 4.0);
  std::printf("ZPL band: %zu bins, orientation sweep %.2f deg\n", a.bins.size(),
              rad2deg(orientation_sweep(a.curve)));
  for (const auto& b : a.bins)
    if (b.valid)
      std::printf("  %.4f eV  theta0 %+7.2f deg  dolp %.3f\n", b.energy, rad2deg(b.theta0), b.dolp);

  if (preset == "strong_coupling") std::printf("OPSB offset %+.2f deg\n", rad2deg(opsb_offset(model)));

  const double rho = std::sqrt(0.89);
  const auto h = g2_histogram(simulate_stream(stream_for_fraction(rho, 5e4, 40.0, 1.5, 10.0, 7)), 0.1, 262.5, 25.0);
  std::printf("g2(0) = %.3f +- %.3f (expected %.3f)\n", h.g2_zero, h.g2_zero_err, g2_zero_expected(rho));
}
