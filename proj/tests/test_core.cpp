#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "ncdipole/core.hpp"

using namespace ncdipole;

TEST(MakeGrid, TwoPointGrid) {
  const auto g = make_grid(1.80, 1.90, 2);
  const auto p = g.points();
  ASSERT_EQ(p.size(), 2u);
  EXPECT_DOUBLE_EQ(p[0], 1.80);
  EXPECT_DOUBLE_EQ(p[1], 1.90);
}

TEST(MakeGrid, OneMevSpacing) {
  const auto g = make_grid(1.60, 1.90, 301);
  EXPECT_NEAR(g.spacing(), 1e-3, 1e-15);
}

TEST(MakeGrid, RejectsBadInput) {
  EXPECT_THROW(make_grid(1.90, 1.80, 10), validation_error);
  EXPECT_THROW(make_grid(1.80, 1.80, 10), validation_error);
  EXPECT_THROW(make_grid(1.80, 1.90, 1), validation_error);
  EXPECT_THROW(make_grid(NAN, 1.90, 10), validation_error);
  EXPECT_THROW(make_grid(1.8, INFINITY, 10), validation_error);
}

TEST(MakeGrid, SpacingConstantToOnePartInTenToTwelve) {
  const auto g = make_grid(0.05, 3.15, 3101);
  const auto p = g.points();
  const double h = g.spacing();
  for (std::size_t i = 1; i < p.size(); ++i) {
    EXPECT_GT(p[i], p[i - 1]);
    EXPECT_NEAR(p[i] - p[i - 1], h, 1e-12 * h * 1e3);
  }
  EXPECT_EQ(p.back(), 3.15);
}

namespace {

PolarizationMap filled_map(const EnergyGrid& g, std::size_t n_angles, double value) {
  PolarizationMap m{g, std::vector<double>(n_angles), std::vector<double>(g.n_points * n_angles, value)};
  for (std::size_t a = 0; a < n_angles; ++a) m.angles[a] = deg2rad(5.0 * a);
  return m;
}

}  // namespace

TEST(SliceMap, IntegerTiling) {
  const auto g = make_grid(1.600, 1.899, 300);
  const auto slices = slice_map(filled_map(g, 6, 1.0), 4.0);
  ASSERT_EQ(slices.size(), 75u);
  for (const auto& s : slices) {
    EXPECT_EQ(s.n_points, 4u);
    EXPECT_FALSE(s.partial);
  }
}

TEST(SliceMap, UniformMapGivesIdenticalProfiles) {
  const auto g = make_grid(1.6, 1.7, 101);
  for (double bw : {1.0, 3.0, 4.0, 7.5}) {
    const auto slices = slice_map(filled_map(g, 8, 1.0), bw);
    for (const auto& s : slices)
      for (double v : s.angular_profile) EXPECT_DOUBLE_EQ(v, s.angular_profile[0]);
  }
}

TEST(SliceMap, PartialTrailingBinIsKeptAndFlagged) {
  const auto g = make_grid(1.600, 1.609, 10);  // 10 points, bins of 4
  const auto slices = slice_map(filled_map(g, 3, 1.0), 4.0);
  ASSERT_EQ(slices.size(), 3u);
  EXPECT_EQ(slices[2].n_points, 2u);
  EXPECT_TRUE(slices[2].partial);
  EXPECT_FALSE(slices[0].partial);
  EXPECT_NEAR(slices[0].center_energy, 1.6015, 1e-12);
}

TEST(SliceMap, ConservesCounts) {
  const auto g = make_grid(1.6, 1.75, 151);
  auto m = filled_map(g, 5, 0.0);
  for (std::size_t i = 0; i < m.intensity.size(); ++i) m.intensity[i] = std::fmod(i * 0.37, 3.1);
  const double total = std::accumulate(m.intensity.begin(), m.intensity.end(), 0.0);
  for (double bw : {1.0, 4.0, 6.3}) {
    double s = 0.0;
    for (const auto& sl : slice_map(m, bw))
      for (double v : sl.angular_profile) s += v;
    EXPECT_NEAR(s, total, 1e-9 * total);
  }
}

TEST(SliceMap, RejectsBinNarrowerThanSpacing) {
  const auto g = make_grid(1.6, 1.7, 101);
  EXPECT_THROW(slice_map(filled_map(g, 4, 1.0), 0.5), validation_error);
  EXPECT_THROW(slice_map(filled_map(g, 4, 1.0), 0.0), validation_error);
}

TEST(Angles, CanonicalBranch) {
  for (double deg : {-720.0, -270.0, -90.0, -45.0, 0.0, 44.0, 89.999, 90.0, 135.0, 450.0}) {
    const double c = rad2deg(canonical_orientation(deg2rad(deg)));
    EXPECT_GE(c, -90.0);
    EXPECT_LT(c, 90.0);
    EXPECT_NEAR(std::remainder(c - deg, 180.0), 0.0, 1e-9);
  }
  EXPECT_NEAR(rad2deg(canonical_orientation(deg2rad(90.0))), -90.0, 1e-12);
  EXPECT_NEAR(rad2deg(orientation_difference(deg2rad(85.0), deg2rad(-85.0))), -10.0, 1e-12);
}

TEST(Units, WavelengthConversion) {
  EXPECT_NEAR(wavelength_nm(1.0), 1239.841984, 1e-9);
  EXPECT_NEAR(kBoltzmannMevPerK * 300.0, 25.852, 1e-3);
}

TEST(Validation, ModelAndModeChecks) {
  EmitterModel m;
  EXPECT_NO_THROW(validate(m));
  m.zpl_linewidth = 0.0;
  EXPECT_THROW(validate(m), validation_error);
  m = EmitterModel{};
  m.strain_bias = 1.5;
  EXPECT_THROW(validate(m), validation_error);
  m = EmitterModel{};
  m.temperature = -1.0;
  EXPECT_THROW(validate(m), validation_error);
  m = EmitterModel{};
  m.modes.push_back({-5.0, 1.0, 0.1, 0.0, 0.0});
  EXPECT_THROW(validate(m), validation_error);
}
