#include "smlmsim/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string>
#include <unordered_set>

namespace smlm {

void FrameGeometry::validate() const {
  if (width_px < 8 || height_px < 8)
    throw std::invalid_argument("frame geometry must be at least 8x8 pixels");
  if (!(pixel_size_nm > 0.0))
    throw std::invalid_argument("pixel_size_nm must be positive");
  if (!(z_min_nm < z_max_nm))
    throw std::invalid_argument("z_min_nm must be below z_max_nm");
}

void HelixParams::validate() const {
  if (n_structures < 1 || seeds_per_structure < 1 || strands_per_structure < 1)
    throw std::invalid_argument("helix counts must be >= 1");
  if (!(helix_radius_nm > 0.0) || !(pitch_nm > 0.0))
    throw std::invalid_argument("helix radius and pitch must be positive");
  if (!(jitter_sigma_nm >= 0.0))
    throw std::invalid_argument("helix jitter must be non-negative");
}

void PhotonModel::validate() const {
  if (!(mean_photons > 0.0)) throw std::invalid_argument("mean_photons must be positive");
  if (!(gamma_shape > 0.0)) throw std::invalid_argument("gamma_shape must be positive");
}

std::vector<Position3> sample_csr(const FrameGeometry& geometry, double density,
                                  RandomStream& rng) {
  if (!(density >= 0.0)) throw std::invalid_argument("density must be non-negative");
  std::vector<Position3> out;
  if (density == 0.0) return out;

  std::poisson_distribution<int> count_dist(density);
  const int n = count_dist(rng);
  out.reserve(static_cast<std::size_t>(n));
  const double w = geometry.width_nm();
  const double h = geometry.height_nm();
  const double dz = geometry.z_max_nm - geometry.z_min_nm;
  for (int i = 0; i < n; ++i) {
    const double x = rng.uniform() * w;
    const double y = rng.uniform() * h;
    const double z = geometry.z_min_nm + rng.uniform() * dz;
    out.push_back({x, y, z});
  }
  return out;
}

namespace {

struct Vec3 {
  double x, y, z;
};

Vec3 operator-(const Position3& a, const Position3& b) {
  return {a.x_nm - b.x_nm, a.y_nm - b.y_nm, a.z_nm - b.z_nm};
}
double dot(const Vec3& a, const Vec3& b) { return a.x * b.x + a.y * b.y + a.z * b.z; }
Vec3 cross(const Vec3& a, const Vec3& b) {
  return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}
Vec3 normalized(const Vec3& v) {
  const double n = std::sqrt(dot(v, v));
  return {v.x / n, v.y / n, v.z / n};
}

// The axis runs between two opposite lateral faces, at a single depth chosen
// so that the helical tube stays inside the axial range.
StructureAxis draw_axis(const FrameGeometry& g, double radius, RandomStream& rng) {
  const double w = g.width_nm();
  const double h = g.height_nm();
  double z_lo = g.z_min_nm + radius;
  double z_hi = g.z_max_nm - radius;
  if (z_lo > z_hi) z_lo = z_hi = 0.5 * (g.z_min_nm + g.z_max_nm);
  const double z = z_lo + rng.uniform() * (z_hi - z_lo);

  StructureAxis axis;
  if (rng.uniform() < 0.5) {
    axis.start = {0.0, rng.uniform() * h, z};
    axis.end = {w, rng.uniform() * h, z};
  } else {
    axis.start = {rng.uniform() * w, 0.0, z};
    axis.end = {rng.uniform() * w, h, z};
  }
  return axis;
}

}  // namespace

double distance_to_axis(const Position3& p, const StructureAxis& axis) noexcept {
  const Vec3 u = normalized(axis.end - axis.start);
  const Vec3 d = p - axis.start;
  const Vec3 c = cross(d, u);
  return std::sqrt(dot(c, c));
}

PointCloud build_helix_cloud(const FrameGeometry& geometry, const HelixParams& params,
                             RandomStream& rng) {
  geometry.validate();
  params.validate();

  PointCloud cloud;
  cloud.params = params;
  cloud.points.reserve(params.total_points());
  cloud.structure_id.reserve(params.total_points());

  const double two_pi = 2.0 * std::numbers::pi;
  const std::size_t per_structure = static_cast<std::size_t>(params.seeds_per_structure);
  const std::size_t redraw_cap = 100 * per_structure + 1000;
  std::normal_distribution<double> jitter(0.0, 1.0);

  for (int s = 0; s < params.n_structures; ++s) {
    const StructureAxis axis = draw_axis(geometry, params.helix_radius_nm, rng);
    cloud.axes.push_back(axis);

    const Vec3 along = axis.end - axis.start;
    const double length = std::sqrt(dot(along, along));
    const Vec3 u = normalized(along);
    // The axis is parallel to the focal plane, so (0,0,1) is perpendicular.
    const Vec3 n1{0.0, 0.0, 1.0};
    const Vec3 n2 = normalized(cross(u, n1));
    const double phase0 = rng.uniform() * two_pi;

    std::size_t accepted = 0;
    std::size_t attempts = 0;
    while (accepted < per_structure) {
      if (++attempts > redraw_cap)
        throw std::runtime_error("helix cloud: re-draw cap exceeded (degenerate geometry)");

      // Every strand has the same arc length per unit axis length, so uniform
      // t and a uniform strand choice is uniform in arc length.
      const double t = rng.uniform() * length;
      const int strand = static_cast<int>(rng.uniform() * params.strands_per_structure);
      const double phi = phase0 + two_pi * t / params.pitch_nm +
                         two_pi * strand / params.strands_per_structure;
      const double c = std::cos(phi) * params.helix_radius_nm;
      const double sn = std::sin(phi) * params.helix_radius_nm;

      Position3 p{axis.start.x_nm + t * u.x + c * n1.x + sn * n2.x,
                  axis.start.y_nm + t * u.y + c * n1.y + sn * n2.y,
                  axis.start.z_nm + t * u.z + c * n1.z + sn * n2.z};
      if (params.jitter_sigma_nm > 0.0) {
        p.x_nm += params.jitter_sigma_nm * jitter(rng);
        p.y_nm += params.jitter_sigma_nm * jitter(rng);
        p.z_nm += params.jitter_sigma_nm * jitter(rng);
      }

      if (p.x_nm < 0.0 || p.x_nm > geometry.width_nm() || p.y_nm < 0.0 ||
          p.y_nm > geometry.height_nm())
        continue;
      p.z_nm = std::clamp(p.z_nm, geometry.z_min_nm, geometry.z_max_nm);

      cloud.points.push_back(p);
      cloud.structure_id.push_back(s);
      ++accepted;
    }
  }
  return cloud;
}

std::vector<Position3> select_frame_emitters(const PointCloud& cloud, double density,
                                             RandomStream& rng) {
  if (cloud.points.empty()) throw std::invalid_argument("select_frame_emitters: empty cloud");
  if (!(density >= 0.0)) throw std::invalid_argument("density must be non-negative");
  std::vector<Position3> out;
  if (density == 0.0) return out;

  std::poisson_distribution<long long> count_dist(density);
  const auto k = static_cast<std::size_t>(
      std::min<long long>(count_dist(rng), static_cast<long long>(cloud.points.size())));
  out.reserve(k);
  // Floyd's algorithm: k distinct indices in O(k).
  const std::size_t n = cloud.points.size();
  std::unordered_set<std::size_t> chosen;
  chosen.reserve(k);
  for (std::size_t j = n - k; j < n; ++j) {
    const std::size_t t = std::uniform_int_distribution<std::size_t>(0, j)(rng);
    const std::size_t pick = chosen.insert(t).second ? t : j;
    if (pick == j) chosen.insert(j);
    out.push_back(cloud.points[pick]);
  }
  return out;
}

std::vector<Emitter> assign_photons(std::span<const Position3> positions,
                                    const PhotonModel& model, RandomStream& rng) {
  model.validate();
  std::vector<Emitter> out;
  out.reserve(positions.size());
  std::gamma_distribution<double> gamma(model.gamma_shape,
                                        model.mean_photons / model.gamma_shape);
  for (const auto& p : positions) {
    Emitter e;
    e.x_nm = p.x_nm;
    e.y_nm = p.y_nm;
    e.z_nm = p.z_nm;
    e.photons = model.mode == PhotonMode::fixed ? model.mean_photons : gamma(rng);
    out.push_back(e);
  }
  return out;
}

}  // namespace smlm
