#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "oracles.hpp"
#include "smlmsim/density.hpp"
#include "smlmsim/random.hpp"
#include "smlmsim/sampler.hpp"

namespace smlm {
namespace {

const FrameGeometry kGeometry{};

EmitterDataset to_dataset(const std::vector<std::vector<Position3>>& frames) {
  EmitterDataset ds(frames.size());
  for (std::size_t f = 0; f < frames.size(); ++f)
    for (const auto& p : frames[f]) ds[f].push_back({static_cast<std::int64_t>(f), p.x_nm, p.y_nm, p.z_nm, 1000.0});
  return ds;
}

std::vector<std::vector<Position3>> csr_frames(double density, int n, std::uint64_t seed) {
  std::vector<std::vector<Position3>> out;
  for (int f = 0; f < n; ++f) {
    auto rng = RandomStream::derive(seed, StreamPurpose::sampling, static_cast<std::uint64_t>(f));
    out.push_back(sample_csr(kGeometry, density, rng));
  }
  return out;
}

TEST(MeanNnDistance, CollinearHandExample) {
  const EmitterDataset ds{{{0, 0, 0, 0, 1}, {0, 100, 0, 0, 1}, {0, 250, 0, 0, 1}}};
  EXPECT_NEAR(mean_nn_distance(ds), 350.0 / 3.0, 1e-12);
}

TEST(MeanNnDistance, TwoPoints) {
  const EmitterDataset ds{{{0, 10, 20, 0, 1}, {0, 70, 100, 0, 1}}};
  EXPECT_DOUBLE_EQ(mean_nn_distance(ds), 100.0);
}

TEST(MeanNnDistance, SparseFramesAreSkipped) {
  const EmitterDataset ds{{}, {{1, 5, 5, 0, 1}}, {{2, 0, 0, 0, 1}, {2, 30, 40, 0, 1}}};
  EXPECT_DOUBLE_EQ(mean_nn_distance(ds), 50.0);
}

TEST(MeanNnDistance, FailsWithoutAnyPair) {
  const EmitterDataset ds{{}, {{1, 5, 5, 0, 1}}};
  EXPECT_THROW(mean_nn_distance(ds), std::domain_error);
}

TEST(MeanNnDistance, Full3dUsesDepth) {
  const EmitterDataset ds{{{0, 0, 0, 0, 1}, {0, 30, 0, 40, 1}}};
  EXPECT_DOUBLE_EQ(mean_nn_distance(ds, NnMetric::lateral2d), 30.0);
  EXPECT_DOUBLE_EQ(mean_nn_distance(ds, NnMetric::full3d), 50.0);
}

TEST(NearestNeighbors, MatchesBruteForcePerFrame) {
  RandomStream rng(71);
  for (int trial = 0; trial < 500; ++trial) {
    const int n = 2 + static_cast<int>(rng.uniform() * 99);
    std::vector<Position3> pts;
    for (int i = 0; i < n; ++i)
      pts.push_back({rng.uniform() * 6400.0, rng.uniform() * 6400.0, -750.0 + rng.uniform() * 1500.0});
    if (trial % 5 == 0) pts.push_back(pts.front());  // duplicate point: zero distance
    for (auto metric : {NnMetric::lateral2d, NnMetric::full3d}) {
      const auto got = nearest_neighbor_distances(pts, metric);
      const auto ref = oracle::brute_force_nn(pts, metric == NnMetric::full3d);
      ASSERT_EQ(got.size(), ref.size());
      for (std::size_t i = 0; i < got.size(); ++i)
        ASSERT_NEAR(got[i], ref[i], 1e-9 * std::max(1.0, ref[i]));
    }
  }
}

TEST(MeanNnDistance, CsrDensity10MatchesBruteForceOracle) {
  const auto frames = csr_frames(10.0, 10000, 3);
  const double got = mean_nn_distance(to_dataset(frames));
  const double ref = oracle::brute_force_mean_nn(frames);
  EXPECT_NEAR(got / ref, 1.0, 1e-9);
}

TEST(BuildCsrCurve, DecreasingAndCloseToThePlaneValue) {
  const std::vector<double> d{2.0, 5.0, 10.0};
  const NnCurve curve = build_csr_curve(kGeometry, d, 5000, 17);
  ASSERT_EQ(curve.entries.size(), 3u);
  EXPECT_TRUE(curve.is_monotone());
  EXPECT_GT(curve.entries[0].mean_nn_nm, curve.entries[1].mean_nn_nm);
  EXPECT_GT(curve.entries[1].mean_nn_nm, curve.entries[2].mean_nn_nm);
  // Edge effects and count fluctuation put the bounded-frame value about 15%
  // above the unbounded-plane 0.5 / sqrt(rho); the all-pairs oracle is exact.
  const double ref = oracle::brute_force_mean_nn(csr_frames(10.0, 5000, 4242));
  EXPECT_NEAR(curve.entries[2].mean_nn_nm / ref, 1.0, 0.01);
}

TEST(BuildCsrCurve, ApproachesThePlaneValueWhenEdgesAreNegligible) {
  // 1000 points per frame: the border strip is a small fraction of the area.
  const std::vector<double> d{1000.0};
  const NnCurve curve = build_csr_curve(kGeometry, d, 1000, 23);
  const double plane = 0.5 / std::sqrt(1000.0 / (6400.0 * 6400.0));
  EXPECT_NEAR(curve.entries[0].mean_nn_nm / plane, 1.0, 0.10);
}

TEST(BuildCsrCurve, DeterministicAndThreadIndependent) {
  const std::vector<double> d{1.0, 4.0};
  const NnCurve a = build_csr_curve(kGeometry, d, 6000, 5, 1);
  const NnCurve b = build_csr_curve(kGeometry, d, 6000, 5, 4);
  ASSERT_EQ(a.entries.size(), b.entries.size());
  for (std::size_t i = 0; i < a.entries.size(); ++i)
    EXPECT_EQ(a.entries[i].mean_nn_nm, b.entries[i].mean_nn_nm);
}

TEST(BuildCsrCurve, RejectsBadInput) {
  const std::vector<double> unsorted{5.0, 2.0};
  const std::vector<double> ok{2.0, 5.0};
  const std::vector<double> nonpositive{0.0, 2.0};
  EXPECT_THROW(build_csr_curve(kGeometry, unsorted, 1000, 1), std::invalid_argument);
  EXPECT_THROW(build_csr_curve(kGeometry, nonpositive, 1000, 1), std::invalid_argument);
  EXPECT_THROW(build_csr_curve(kGeometry, ok, 999, 1), std::invalid_argument);
}

TEST(BuildCsrCurve, NoisyCurveIsRejectedAsNonMonotone) {
  // Densities this close cannot be ordered by 1000 frames each.
  const std::vector<double> d{5.0, 5.0001, 5.0002, 5.0003, 5.0004, 5.0005};
  EXPECT_THROW(build_csr_curve(kGeometry, d, 1000, 1), std::runtime_error);
}

NnCurve toy_curve() {
  NnCurve c;
  c.entries = {{1.0, 3000.0}, {2.0, 2500.0}, {4.0, 2000.0}};
  c.mc_frames_per_entry = 1000;
  return c;
}

TEST(DensityForMeanNn, KnotsAreExact) {
  const NnCurve c = toy_curve();
  for (const auto& e : c.entries) {
    const auto nd = density_for_mean_nn(e.mean_nn_nm, c);
    EXPECT_EQ(nd.value, e.density);
    EXPECT_FALSE(nd.extrapolated);
  }
}

TEST(DensityForMeanNn, InterpolatesAndExtrapolatesLinearly) {
  const NnCurve c = toy_curve();
  EXPECT_DOUBLE_EQ(density_for_mean_nn(2250.0, c).value, 3.0);
  const auto lo = density_for_mean_nn(3500.0, c);
  EXPECT_TRUE(lo.extrapolated);
  EXPECT_DOUBLE_EQ(lo.value, 0.0);
  const auto hi = density_for_mean_nn(1750.0, c);
  EXPECT_TRUE(hi.extrapolated);
  EXPECT_DOUBLE_EQ(hi.value, 5.0);
}

TEST(DensityForMeanNn, MonotoneInMeanNn) {
  const NnCurve c = toy_curve();
  double prev = 1e300;
  for (double nn = 1500.0; nn <= 3600.0; nn += 7.0) {
    const double v = density_for_mean_nn(nn, c).value;
    EXPECT_LE(v, prev);
    prev = v;
  }
}

TEST(NominalDensity, CsrRoundTripAtDensity5) {
  const auto curve = build_csr_curve(kGeometry, geometric_densities(1.0, 20.0, 17), 20000, 99);
  const auto nd = nominal_density(to_dataset(csr_frames(5.0, 10000, 1234)), curve);
  EXPECT_FALSE(nd.extrapolated);
  EXPECT_NEAR(nd.value / 5.0, 1.0, 0.05) << nd.value;
}

TEST(NominalDensity, HelixDatasetIsDenserThanItsCount) {
  const auto curve = build_csr_curve(kGeometry, geometric_densities(1.0, 40.0, 17), 5000, 7);
  std::vector<std::vector<Position3>> frames;
  for (int f = 0; f < 2000; ++f) {
    auto rng = RandomStream::derive(8, StreamPurpose::sampling, static_cast<std::uint64_t>(f));
    const auto cloud = build_helix_cloud(kGeometry, HelixParams{}, rng);
    frames.push_back(select_frame_emitters(cloud, 5.0, rng));
  }
  const auto nd = nominal_density(to_dataset(frames), curve);
  RecordProperty("helix_nominal_density", std::to_string(nd.value));
  std::printf("helix nominal density at count 5: %.3f\n", nd.value);
  EXPECT_GT(nd.value, 5.0);
}

TEST(NnCurve, JsonRoundTrip) {
  NnCurve c = toy_curve();
  c.seed = 42;
  c.geometry.width_px = 32;
  const NnCurve back = NnCurve::from_json(c.to_json());
  EXPECT_EQ(back.geometry, c.geometry);
  EXPECT_EQ(back.seed, 42u);
  EXPECT_EQ(back.mc_frames_per_entry, 1000u);
  ASSERT_EQ(back.entries.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(back.entries[i].density, c.entries[i].density);
    EXPECT_EQ(back.entries[i].mean_nn_nm, c.entries[i].mean_nn_nm);
  }
  EXPECT_EQ(c.to_json().at("format_version"), NnCurve::kFormatVersion);
}

TEST(NnCurve, FromJsonRejectsWrongVersionAndNonMonotoneEntries) {
  auto j = toy_curve().to_json();
  j["format_version"] = 99;
  EXPECT_ANY_THROW(NnCurve::from_json(j));
  auto k = toy_curve().to_json();
  k["entries"][1]["mean_nn_nm"] = 3100.0;
  EXPECT_ANY_THROW(NnCurve::from_json(k));
}

TEST(GeometricDensities, EndpointsAndRatio) {
  const auto d = geometric_densities(0.38, 13.0, 9);
  ASSERT_EQ(d.size(), 9u);
  EXPECT_DOUBLE_EQ(d.front(), 0.38);
  EXPECT_DOUBLE_EQ(d.back(), 13.0);
  for (std::size_t i = 2; i < d.size(); ++i) EXPECT_NEAR(d[i] / d[i - 1], d[1] / d[0], 1e-12);
}

}  // namespace
}  // namespace smlm
