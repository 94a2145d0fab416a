#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "oracles.hpp"
#include "smlmsim/random.hpp"
#include "smlmsim/sampler.hpp"

namespace smlm {
namespace {

const FrameGeometry kGeometry{};  // 64x64 px @ 100 nm, z in [-750, 750]

TEST(RandomStream, MatchesXoshiroReferenceVector) {
  auto r = RandomStream::from_state({1, 2, 3, 4});
  EXPECT_EQ(r(), 11520u);
  EXPECT_EQ(r(), 0u);
  EXPECT_EQ(r(), 1509978240u);
  EXPECT_EQ(r(), 1215971899390074240u);
}

TEST(RandomStream, DerivedStreamsAreReproducibleAndDistinct) {
  auto a = RandomStream::derive(42, StreamPurpose::sampling, 7);
  auto b = RandomStream::derive(42, StreamPurpose::sampling, 7);
  auto c = RandomStream::derive(42, StreamPurpose::sampling, 8);
  auto d = RandomStream::derive(42, StreamPurpose::noise, 7);
  for (int i = 0; i < 16; ++i) {
    const auto va = a();
    EXPECT_EQ(va, b());
    EXPECT_NE(va, c());
    EXPECT_NE(va, d());
  }
}

TEST(RandomStream, UniformInUnitInterval) {
  RandomStream r(3);
  for (int i = 0; i < 100000; ++i) {
    const double u = r.uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
  }
}

// ---------------------------------------------------------------------------
// sample_csr
// ---------------------------------------------------------------------------
TEST(SampleCsr, ZeroDensityIsAlwaysEmpty) {
  RandomStream rng(1);
  for (int i = 0; i < 1000; ++i) EXPECT_TRUE(sample_csr(kGeometry, 0.0, rng).empty());
}

TEST(SampleCsr, RejectsNegativeDensity) {
  RandomStream rng(1);
  EXPECT_THROW(sample_csr(kGeometry, -1.0, rng), std::invalid_argument);
}

struct CsrRun {
  double mean_count;
  std::vector<double> xs, ys, zs;
};

CsrRun run_csr(double density, int frames, std::uint64_t seed) {
  CsrRun run{};
  std::size_t total = 0;
  for (int f = 0; f < frames; ++f) {
    auto rng = RandomStream::derive(seed, StreamPurpose::sampling, static_cast<std::uint64_t>(f));
    const auto pts = sample_csr(kGeometry, density, rng);
    total += pts.size();
    for (const auto& p : pts) {
      EXPECT_TRUE(kGeometry.contains(p.x_nm, p.y_nm, p.z_nm));
      run.xs.push_back(p.x_nm);
      run.ys.push_back(p.y_nm);
      run.zs.push_back(p.z_nm);
    }
  }
  run.mean_count = static_cast<double>(total) / frames;
  return run;
}

TEST(SampleCsr, PoissonCountAndUniformPositionsAtDensity5) {
  const auto run = run_csr(5.0, 100000, 11);
  EXPECT_GE(run.mean_count, 4.93);
  EXPECT_LE(run.mean_count, 5.07);
  EXPECT_GT(oracle::chi_square_uniform_p(run.xs, 0.0, kGeometry.width_nm(), 64), 0.01);
  EXPECT_GT(oracle::chi_square_uniform_p(run.ys, 0.0, kGeometry.height_nm(), 64), 0.01);
  EXPECT_GT(oracle::chi_square_uniform_p(run.zs, kGeometry.z_min_nm, kGeometry.z_max_nm, 64), 0.01);
}

TEST(SampleCsr, MeanCountAtSweepEndpoint13) {
  const auto run = run_csr(13.0, 100000, 12);
  EXPECT_TRUE(oracle::mean_in_3sigma(run.mean_count, 13.0, std::sqrt(13.0), 100000))
      << run.mean_count;
}

TEST(SampleCsr, MarginalsPassKolmogorovSmirnov) {
  auto run = run_csr(1.0, 100000, 13);
  ASSERT_GT(run.xs.size(), 90000u);
  run.xs.resize(std::min<std::size_t>(run.xs.size(), 100000));
  EXPECT_GT(oracle::ks_uniform_p(run.xs, 0.0, kGeometry.width_nm()), 0.01);
  EXPECT_GT(oracle::ks_uniform_p(run.ys, 0.0, kGeometry.height_nm()), 0.01);
  EXPECT_GT(oracle::ks_uniform_p(run.zs, kGeometry.z_min_nm, kGeometry.z_max_nm), 0.01);
}

TEST(SampleCsr, DeterministicForFixedSeed) {
  auto a = RandomStream::derive(5, StreamPurpose::sampling, 0);
  auto b = RandomStream::derive(5, StreamPurpose::sampling, 0);
  EXPECT_EQ(sample_csr(kGeometry, 8.0, a), sample_csr(kGeometry, 8.0, b));
}

// ---------------------------------------------------------------------------
// build_helix_cloud
// ---------------------------------------------------------------------------
TEST(HelixCloud, DefaultParamsGive15000PointsInsideTheDomain) {
  RandomStream rng(21);
  const auto cloud = build_helix_cloud(kGeometry, HelixParams{}, rng);
  EXPECT_EQ(cloud.points.size(), 15000u);
  EXPECT_EQ(cloud.axes.size(), 3u);
  for (const auto& p : cloud.points) ASSERT_TRUE(kGeometry.contains(p.x_nm, p.y_nm, p.z_nm));
}

TEST(HelixCloud, ZeroJitterPointsSitOnTheHelixRadius) {
  HelixParams params;
  params.jitter_sigma_nm = 0.0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    RandomStream rng(seed);
    const auto cloud = build_helix_cloud(kGeometry, params, rng);
    for (std::size_t i = 0; i < cloud.points.size(); ++i) {
      const auto& axis = cloud.axes[static_cast<std::size_t>(cloud.structure_id[i])];
      const double r = distance_to_axis(cloud.points[i], axis);
      ASSERT_LT(std::abs(r - params.helix_radius_nm), 1e-9 * params.helix_radius_nm);
    }
  }
}

TEST(HelixCloud, SingleStrandConfigurationIsSupported) {
  HelixParams params;
  params.strands_per_structure = 1;
  params.seeds_per_structure = 2000;
  RandomStream rng(4);
  const auto cloud = build_helix_cloud(kGeometry, params, rng);
  EXPECT_EQ(cloud.points.size(), 6000u);
}

TEST(HelixCloud, CloudSpansTheFieldOfView) {
  HelixParams params;
  params.seeds_per_structure = 1000;
  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    RandomStream rng(seed);
    const auto cloud = build_helix_cloud(kGeometry, params, rng);
    double x0 = 1e300, x1 = -1e300, y0 = 1e300, y1 = -1e300;
    for (const auto& p : cloud.points) {
      x0 = std::min(x0, p.x_nm);
      x1 = std::max(x1, p.x_nm);
      y0 = std::min(y0, p.y_nm);
      y1 = std::max(y1, p.y_nm);
    }
    const bool spans = (x1 - x0) >= 0.9 * kGeometry.width_nm() || (y1 - y0) >= 0.9 * kGeometry.height_nm();
    ASSERT_TRUE(spans) << "seed " << seed;
  }
}

TEST(HelixCloud, DegenerateGeometryHitsTheRedrawCap) {
  // A radius far larger than the field of view leaves almost no admissible points.
  HelixParams params;
  params.helix_radius_nm = 1e7;
  params.seeds_per_structure = 100;
  FrameGeometry g = kGeometry;
  g.z_min_nm = -1e8;
  g.z_max_nm = 1e8;
  RandomStream rng(2);
  EXPECT_THROW(build_helix_cloud(g, params, rng), std::runtime_error);
}

TEST(HelixCloud, RejectsInvalidParams) {
  HelixParams params;
  params.pitch_nm = 0.0;
  RandomStream rng(1);
  EXPECT_THROW(build_helix_cloud(kGeometry, params, rng), std::invalid_argument);
}

// ---------------------------------------------------------------------------
// select_frame_emitters
// ---------------------------------------------------------------------------
TEST(SelectFrameEmitters, ZeroDensityIsEmpty) {
  RandomStream rng(1);
  const auto cloud = build_helix_cloud(kGeometry, HelixParams{}, rng);
  EXPECT_TRUE(select_frame_emitters(cloud, 0.0, rng).empty());
}

TEST(SelectFrameEmitters, MeanCountAtDensity13) {
  RandomStream rng(8);
  const auto cloud = build_helix_cloud(kGeometry, HelixParams{}, rng);
  std::size_t total = 0;
  const int draws = 100000;
  for (int i = 0; i < draws; ++i) total += select_frame_emitters(cloud, 13.0, rng).size();
  EXPECT_TRUE(oracle::mean_in_3sigma(static_cast<double>(total) / draws, 13.0, std::sqrt(13.0), draws));
}

TEST(SelectFrameEmitters, CountIsCappedAtCloudSizeAndPointsAreDistinct) {
  PointCloud cloud;
  cloud.points = {{1, 1, 0}, {2, 2, 0}, {3, 3, 0}, {4, 4, 0}};
  RandomStream rng(3);
  bool saw_full = false;
  for (int i = 0; i < 1000; ++i) {
    auto pts = select_frame_emitters(cloud, 10.0, rng);
    ASSERT_LE(pts.size(), 4u);
    saw_full |= pts.size() == 4;
    std::sort(pts.begin(), pts.end(), [](auto& a, auto& b) { return a.x_nm < b.x_nm; });
    ASSERT_EQ(std::adjacent_find(pts.begin(), pts.end()), pts.end());
  }
  EXPECT_TRUE(saw_full);
}

TEST(SelectFrameEmitters, EveryPointIsEquallyLikely) {
  PointCloud cloud;
  for (int i = 0; i < 10; ++i) cloud.points.push_back({static_cast<double>(i), 0, 0});
  std::vector<double> picks;
  RandomStream rng(17);
  for (int i = 0; i < 50000; ++i)
    for (const auto& p : select_frame_emitters(cloud, 3.0, rng)) picks.push_back(p.x_nm + 0.5);
  EXPECT_GT(oracle::chi_square_uniform_p(picks, 0.0, 10.0, 10), 0.01);
}

TEST(SelectFrameEmitters, RejectsEmptyCloud) {
  RandomStream rng(1);
  EXPECT_THROW(select_frame_emitters(PointCloud{}, 1.0, rng), std::invalid_argument);
}

// ---------------------------------------------------------------------------
// assign_photons
// ---------------------------------------------------------------------------
TEST(AssignPhotons, FixedModeGivesTheMean) {
  RandomStream rng(1);
  const std::vector<Position3> pos(50, Position3{10, 10, 0});
  const auto em = assign_photons(pos, {PhotonMode::fixed, 5000.0, 3.0}, rng);
  ASSERT_EQ(em.size(), 50u);
  for (const auto& e : em) EXPECT_EQ(e.photons, 5000.0);
}

TEST(AssignPhotons, GammaModeMoments) {
  RandomStream rng(99);
  const std::vector<Position3> pos(100000, Position3{});
  const auto em = assign_photons(pos, {PhotonMode::gamma, 1000.0, 3.0}, rng);
  std::vector<double> ph;
  for (const auto& e : em) ph.push_back(e.photons);
  const auto m = oracle::moments(ph);
  const double var = 1000.0 * 1000.0 / 3.0;
  const double mu4 = var * var * (3.0 + 6.0 / 3.0);  // central 4th moment of Gamma(k)
  EXPECT_TRUE(oracle::mean_in_3sigma(m.mean, 1000.0, std::sqrt(var), ph.size())) << m.mean;
  EXPECT_TRUE(oracle::variance_in_3sigma(m.variance, var, mu4, ph.size())) << m.variance;
}

TEST(AssignPhotons, EmptyInputGivesEmptyOutput) {
  RandomStream rng(1);
  EXPECT_TRUE(assign_photons({}, PhotonModel{}, rng).empty());
}

TEST(AssignPhotons, RejectsInvalidModel) {
  RandomStream rng(1);
  EXPECT_THROW(assign_photons({}, {PhotonMode::gamma, 0.0, 3.0}, rng), std::invalid_argument);
}

}  // namespace
}  // namespace smlm
