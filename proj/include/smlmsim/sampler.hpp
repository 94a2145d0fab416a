// ============================================================================
// sampler.hpp -- emitter position sampling and photon assignment
//
// Two regimes: complete spatial randomness (homogeneous Poisson process over
// the 3D domain) and structure-based sampling, where each frame's emitters
// are drawn from a freshly generated cloud of helical microtubule-like
// strands.
// ============================================================================
#pragma once
#include <cstddef>
#include <span>
#include <vector>

#include "smlmsim/random.hpp"
#include "smlmsim/types.hpp"

namespace smlm {

struct HelixParams {
  int n_structures = 3;
  int seeds_per_structure = 5000;
  int strands_per_structure = 3;
  double helix_radius_nm = 25.0;
  double pitch_nm = 300.0;
  double jitter_sigma_nm = 5.0;

  void validate() const;
  std::size_t total_points() const noexcept {
    return static_cast<std::size_t>(n_structures) *
           static_cast<std::size_t>(seeds_per_structure);
  }
};

/// Straight structure axis; `start` and `end` lie on opposite lateral faces.
struct StructureAxis {
  Position3 start;
  Position3 end;
};

struct PointCloud {
  std::vector<Position3> points;
  /// Per-point index into `axes`.
  std::vector<int> structure_id;
  std::vector<StructureAxis> axes;
  HelixParams params;
};

enum class PhotonMode { fixed, gamma };

struct PhotonModel {
  PhotonMode mode = PhotonMode::gamma;
  double mean_photons = 5000.0;
  double gamma_shape = 3.0;

  void validate() const;
};

/// Poisson(density) points, uniform over the lateral extent and [z_min, z_max].
std::vector<Position3> sample_csr(const FrameGeometry& geometry, double density,
                                  RandomStream& rng);

/// Builds one structured scene. Throws std::runtime_error when the
/// lateral re-draw cap is exhausted (degenerate geometry).
PointCloud build_helix_cloud(const FrameGeometry& geometry, const HelixParams& params,
                             RandomStream& rng);

/// k ~ Poisson(density), capped at the cloud size, drawn without replacement.
std::vector<Position3> select_frame_emitters(const PointCloud& cloud, double density,
                                             RandomStream& rng);

/// Emitters with frame_id left at 0.
std::vector<Emitter> assign_photons(std::span<const Position3> positions,
                                    const PhotonModel& model, RandomStream& rng);

/// Perpendicular distance from `p` to the infinite line through `axis`.
double distance_to_axis(const Position3& p, const StructureAxis& axis) noexcept;

}  // namespace smlm
