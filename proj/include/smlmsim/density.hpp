// ============================================================================
// density.hpp -- mean nearest-neighbour distance and nominal frame density
//
// The nominal density of a dataset is the emitters-per-frame value at which
// uniformly (CSR) sampled frames show the same mean nearest-neighbour
// distance. It is read off a Monte Carlo reference curve by monotone
// piecewise-linear interpolation.
// ============================================================================
#pragma once
#include <cstdint>
#include <span>
#include <vector>

#include <json.hpp>

#include "smlmsim/types.hpp"

namespace smlm {

enum class NnMetric { lateral2d, full3d };

/// Distance from each point to its nearest other point in the same set.
/// Sort-and-sweep along x; returns an empty vector for fewer than 2 points.
std::vector<double> nearest_neighbor_distances(std::span<const Position3> points,
                                               NnMetric metric);

/// Running pooled sum over emitter-level nearest-neighbour distances.
struct NnAccumulator {
  double sum_nm = 0.0;
  std::uint64_t count = 0;

  void add_frame(std::span<const Position3> points, NnMetric metric);
  void merge(const NnAccumulator& other) noexcept {
    sum_nm += other.sum_nm;
    count += other.count;
  }
  /// Throws std::domain_error when no frame contributed.
  double mean() const;
};

/// Frames with fewer than two emitters contribute nothing. Throws
/// std::domain_error when no frame has at least two emitters.
double mean_nn_distance(const EmitterDataset& dataset, NnMetric metric = NnMetric::lateral2d);

struct NnCurveEntry {
  double density = 0.0;
  double mean_nn_nm = 0.0;
};

struct NnCurve {
  static constexpr int kFormatVersion = 1;

  FrameGeometry geometry;
  std::vector<NnCurveEntry> entries;
  std::uint64_t mc_frames_per_entry = 0;
  std::uint64_t seed = 0;

  /// Densities strictly increasing, mean NN strictly decreasing.
  bool is_monotone() const noexcept;

  nlohmann::json to_json() const;
  static NnCurve from_json(const nlohmann::json& j);
};

/// Monte Carlo CSR reference curve (lateral metric). Frames for entry e and
/// frame f use the substream derived from (seed, e, f). Throws
/// std::runtime_error if the resulting curve is not monotone.
NnCurve build_csr_curve(const FrameGeometry& geometry, std::span<const double> densities,
                        std::uint64_t mc_frames_per_entry, std::uint64_t seed,
                        unsigned threads = 1);

struct NominalDensity {
  double value = 0.0;
  double mean_nn_nm = 0.0;
  /// Set when the mean NN lies outside the curve's range.
  bool extrapolated = false;
};

NominalDensity density_for_mean_nn(double mean_nn_nm, const NnCurve& curve);

NominalDensity nominal_density(const EmitterDataset& dataset, const NnCurve& curve);

/// Geometrically spaced densities in [lo, hi], inclusive.
std::vector<double> geometric_densities(double lo, double hi, int count);

}  // namespace smlm
