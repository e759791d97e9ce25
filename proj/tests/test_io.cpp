#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "ncdipole/ncdipole.hpp"

using namespace ncdipole;
namespace fs = std::filesystem;

namespace {

class TempDir : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("ncdipole_io_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string write(const std::string& name, const std::string& text) {
    const auto p = dir_ / name;
    std::ofstream(p) << text;
    return p.string();
  }
  template <class F>
  std::string write_with(const std::string& name, F f) {
    const auto p = dir_ / name;
    std::ofstream out(p);
    f(out);
    return p.string();
  }

  fs::path dir_;
};

}  // namespace

TEST(Presets, AggregateTotals) {
  struct Want {
    const char* name;
    double hr, dq;
  };
  for (const auto& w : {Want{"weak_coupling", 2.71, 0.42}, Want{"strong_coupling", 5.96, 0.87}}) {
    const auto m = load_preset_model(w.name);
    ASSERT_EQ(m.modes.size(), 4u);
    double hr = 0.0;
    for (const auto& k : m.modes) hr += k.partial_hr;
    EXPECT_NEAR(hr, w.hr, 1e-9) << w.name;
    EXPECT_NEAR(total_dq(m.modes), w.dq, 1e-6) << w.name;
  }
}

TEST(Presets, GridsParseAndCoverTheZpl) {
  for (const char* name : {"weak_coupling", "strong_coupling"}) {
    const auto c = load_preset(name);
    const auto m = model_from_config(c);
    for (const char* key : {"spectrum_grid", "zpl_band_grid"}) {
      const auto g = parse_grid(c.get(key));
      EXPECT_LT(g.min_energy, m.zpl_energy);
      EXPECT_GT(g.max_energy, m.zpl_energy);
    }
    const auto o = parse_grid(c.get("opsb_band_grid"));
    EXPECT_LT(o.min_energy, m.zpl_energy - 0.165);
    EXPECT_GT(o.max_energy, m.zpl_energy - 0.165);
  }
}

TEST(Presets, UnknownPresetIsNamed) {
  try {
    load_preset("no_such_emitter");
    FAIL();
  } catch (const validation_error& e) {
    EXPECT_NE(std::string(e.what()).find("no_such_emitter"), std::string::npos);
  }
  EXPECT_THROW(load_preset("../etc/passwd"), validation_error);
}

TEST(Config, ParsesCommentsAndWhitespace) {
  std::istringstream in("# header\n\n  a = 1.5  # trailing\nname=weak\n b =  x y \n");
  const auto c = parse_config(in, "t");
  EXPECT_DOUBLE_EQ(c.number("a"), 1.5);
  EXPECT_EQ(c.get("name"), "weak");
  EXPECT_EQ(c.get("b"), "x y");
  EXPECT_FALSE(c.has("header"));
  EXPECT_THROW(c.get("missing"), validation_error);
  EXPECT_DOUBLE_EQ(c.number_or("missing", 7.0), 7.0);
}

TEST(Config, RejectsMalformedLines) {
  std::istringstream a("just words\n");
  EXPECT_THROW(parse_config(a, "t"), validation_error);
  std::istringstream b(" = 3\n");
  EXPECT_THROW(parse_config(b, "t"), validation_error);
  std::istringstream c("x = abc\n");
  EXPECT_THROW(parse_config(c, "t").number("x"), validation_error);
}

TEST(Config, MergeLaterWins) {
  std::istringstream a("temperature_k = 300\nstrain_bias = -1\n");
  std::istringstream b("temperature_k = 6\n");
  auto c = parse_config(a, "a");
  c.merge(parse_config(b, "b"));
  EXPECT_DOUBLE_EQ(c.number("temperature_k"), 6.0);
  EXPECT_DOUBLE_EQ(c.number("strain_bias"), -1.0);
  const auto e = c.entries();
  ASSERT_EQ(e.size(), 2u);
  EXPECT_EQ(e[0].first, "temperature_k");
}

TEST(Config, ModelKeysAndValidation) {
  std::istringstream in("zpl_energy_ev = 2.1\nequilibrium_angle_deg = 30\nprofile = gaussian\nstrain_bias = 0.5\n");
  const auto m = model_from_config(parse_config(in, "t"));
  EXPECT_DOUBLE_EQ(m.zpl_energy, 2.1);
  EXPECT_NEAR(m.equilibrium_angle, deg2rad(30.0), 1e-15);
  EXPECT_EQ(m.profile, LineProfile::gaussian);
  EXPECT_TRUE(m.modes.empty());
  std::istringstream bad_profile("profile = voigt\n");
  EXPECT_THROW(model_from_config(parse_config(bad_profile, "t")), validation_error);
  std::istringstream bad_bias("strain_bias = 2\n");
  EXPECT_THROW(model_from_config(parse_config(bad_bias, "t")), validation_error);
}

TEST(Grid, ParseAndFormat) {
  const auto g = parse_grid("1.3:2.0:2001");
  EXPECT_DOUBLE_EQ(g.min_energy, 1.3);
  EXPECT_DOUBLE_EQ(g.max_energy, 2.0);
  EXPECT_EQ(g.n_points, 2001u);
  EXPECT_EQ(format_grid(g), "1.3:2:2001");
  EXPECT_THROW(parse_grid("1.3:2.0"), validation_error);
  EXPECT_THROW(parse_grid("1.3:2.0:10.5"), validation_error);
  EXPECT_THROW(parse_grid("2.0:1.3:10"), validation_error);
  EXPECT_THROW(parse_grid("a:b:c"), validation_error);
}

TEST_F(TempDir, ConfigResolvesModesFileRelativeToItself) {
  const auto modes = load_preset_model("weak_coupling").modes;
  fs::create_directories(dir_ / "sub");
  write_with("sub/m.csv", [&](std::ostream& o) { csv::write_modes(o, modes); });
  const auto cfg = write("sub/e.cfg", "modes_file = m.csv\nzpl_energy_ev = 1.9\n");
  const auto m = model_from_config(load_config(cfg));
  ASSERT_EQ(m.modes.size(), modes.size());
  for (std::size_t k = 0; k < modes.size(); ++k) {
    EXPECT_NEAR(m.modes[k].energy, modes[k].energy, 1e-9);
    EXPECT_NEAR(m.modes[k].partial_dq, modes[k].partial_dq, 1e-11);
    EXPECT_NEAR(m.modes[k].grad_direction, modes[k].grad_direction, 1e-11);
  }
  EXPECT_THROW(load_config(dir_ / "absent.cfg"), io_error);
}

TEST_F(TempDir, ModesRejectsBadRows) {
  const auto bad_header = write("h.csv", "energy,hr\n1,2\n");
  EXPECT_THROW(csv::read_modes(bad_header), validation_error);
  const auto negative = write("n.csv", "energy_mev,partial_hr,partial_dq,grad_magnitude,grad_direction_deg\n-5,1,0.1,0,0\n");
  try {
    csv::read_modes(negative);
    FAIL();
  } catch (const validation_error& e) {
    EXPECT_NE(std::string(e.what()).find("row 1"), std::string::npos);
  }
  const auto ragged = write("r.csv", "energy_mev,partial_hr,partial_dq,grad_magnitude,grad_direction_deg\n5,1,0.1\n");
  EXPECT_THROW(csv::read_modes(ragged), validation_error);
  const auto text = write("t.csv", "energy_mev,partial_hr,partial_dq,grad_magnitude,grad_direction_deg\n5,x,0.1,0,0\n");
  EXPECT_THROW(csv::read_modes(text), validation_error);
  EXPECT_THROW(csv::read_modes((dir_ / "none.csv").string()), io_error);
}

TEST_F(TempDir, SpectrumRoundTrip) {
  auto m = load_preset_model("weak_coupling");
  const auto s = lineshape(m, parse_grid(load_preset("weak_coupling").get("spectrum_grid")));
  const auto p = write_with("s.csv", [&](std::ostream& o) { csv::write_spectrum(o, s, {{"preset", "weak_coupling"}}); });
  const auto t = csv::read_table(p);
  ASSERT_EQ(t.comments.size(), 1u);
  EXPECT_EQ(t.comments[0], " preset = weak_coupling");
  const auto back = csv::read_spectrum(p);
  EXPECT_EQ(back.grid.n_points, s.grid.n_points);
  for (std::size_t i = 0; i < s.intensity.size(); ++i)
    EXPECT_NEAR(back.intensity[i], s.intensity[i], 1e-11 * std::abs(s.intensity[i]) + 1e-300);
}

TEST_F(TempDir, MapRoundTrip) {
  const auto g = parse_grid(load_preset("strong_coupling").get("zpl_band_grid"));
  MapOptions opt;
  opt.noise = NoiseModel::poisson;
  const auto map = simulate_polarization_map(load_preset_model("strong_coupling"), g, default_analyzer_angles(), opt);
  const auto p = write_with("m.csv", [&](std::ostream& o) { csv::write_map(o, map); });
  const auto back = csv::read_map(p);
  EXPECT_EQ(back.grid.n_points, map.grid.n_points);
  ASSERT_EQ(back.angles.size(), map.angles.size());
  for (std::size_t a = 0; a < map.angles.size(); ++a) EXPECT_NEAR(back.angles[a], map.angles[a], 1e-12);
  EXPECT_EQ(back.intensity, map.intensity);  // integer counts survive exactly
}

TEST_F(TempDir, MapRejectsRaggedAndUngrouped) {
  const auto ragged = write("r.csv", "energy_ev,angle_deg,intensity\n1.0,0,1\n1.0,90,2\n1.1,0,3\n");
  EXPECT_THROW(csv::read_map(ragged), validation_error);
  const auto angles = write("a.csv", "energy_ev,angle_deg,intensity\n1.0,0,1\n1.0,90,2\n1.1,0,3\n1.1,45,4\n");
  EXPECT_THROW(csv::read_map(angles), validation_error);
  const auto uneven = write("u.csv", "energy_ev,angle_deg,intensity\n1.0,0,1\n1.1,0,1\n1.3,0,1\n");
  EXPECT_THROW(csv::read_map(uneven), validation_error);
}

TEST_F(TempDir, OrientationAndReportHeaders) {
  const auto g = parse_grid(load_preset("strong_coupling").get("zpl_band_grid"));
  const auto r = run_roundtrip(load_preset_model("strong_coupling"), g, {});
  const auto po = write_with("o.csv", [&](std::ostream& o) { csv::write_orientation(o, r.analysis.curve); });
  const auto to = csv::read_table(po);
  EXPECT_EQ(to.header, (std::vector<std::string>{"energy_ev", "psi_deg", "dolp", "weight", "valid"}));
  EXPECT_EQ(to.rows.size(), r.analysis.curve.size());
  const auto pr = write_with("r.csv", [&](std::ostream& o) { csv::write_report(o, r.analysis); });
  const auto tr = csv::read_table(pr);
  EXPECT_EQ(tr.header, (std::vector<std::string>{"energy_ev", "theta0_deg", "dolp", "psi_deg", "chi_deg", "dop",
                                                 "valid", "rms_residual"}));
  // psi survives with 12 significant digits
  for (std::size_t i = 0; i < to.rows.size(); ++i)
    EXPECT_NEAR(csv::to_double(to.rows[i][1], "psi"), rad2deg(r.analysis.curve.psi[i]), 1e-9);
}

TEST_F(TempDir, RqwpAndAngleScan) {
  const StokesVector s{2.0, 0.5, -0.4, 0.3};
  RqwpTrace t{uniform_angles(16), {}};
  for (double th : t.qwp_angles) t.intensity.push_back(rqwp_intensity(s, th));
  const auto p = write_with("q.csv", [&](std::ostream& o) { csv::write_rqwp(o, t); });
  const auto back = extract_stokes_rqwp(csv::read_rqwp(p));
  EXPECT_NEAR(back.s3, 0.3, 1e-10);
  const auto scan = write("scan.csv", "angle_deg,intensity\n0,3\n45,2\n90,1\n135,2\n");
  const auto [a, v] = csv::read_angle_scan(scan);
  const auto f = fit_malus(a, v);
  EXPECT_NEAR(f.theta0, 0.0, 1e-12);
  EXPECT_NEAR(f.dolp, 0.5, 1e-12);
}

TEST_F(TempDir, StreamAndHistogram) {
  const auto st = simulate_stream(stream_for_fraction(0.9, 5e4, 40.0, 1.5, 0.5, 3));
  const auto ps = write_with("st.csv", [&](std::ostream& o) { csv::write_stream(o, st); });
  const auto back = csv::read_stream(ps);
  EXPECT_EQ(back.time_tags, st.time_tags);
  EXPECT_EQ(back.channel, st.channel);
  const auto h = g2_histogram(st, 0.1, 262.5, 25.0);
  const auto ph = write_with("h.csv", [&](std::ostream& o) { csv::write_histogram(o, h); });
  const auto t = csv::read_table(ph);
  EXPECT_EQ(t.header, (std::vector<std::string>{"tau_ns", "coincidences"}));
  ASSERT_FALSE(t.comments.empty());
  EXPECT_EQ(t.comments.back().rfind(" g2_zero=", 0), 0u);
  double total = 0.0;
  for (const auto& r : t.rows) total += csv::to_double(r[1], "c");
  EXPECT_EQ(total, static_cast<double>(h.total_pairs));
  const auto badch = write("b.csv", "time_ps,channel\n10,2\n");
  EXPECT_THROW(csv::read_stream(badch), validation_error);
}

TEST(Csv, NumberFormatting) {
  EXPECT_EQ(csv::num(0.1), "0.1");
  EXPECT_EQ(csv::num(NAN), "nan");
  EXPECT_EQ(csv::num(1.0 / 3.0), "0.333333333333");
  EXPECT_EQ(csv::split_fields("a, b ,c,"), (std::vector<std::string>{"a", "b", "c", ""}));
  EXPECT_THROW(csv::to_double("1.5x", "f"), validation_error);
  EXPECT_THROW(csv::to_double("", "f"), validation_error);
}
