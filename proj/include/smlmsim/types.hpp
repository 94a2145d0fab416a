// ============================================================================
// types.hpp -- domain types shared across modules
// ============================================================================
#pragma once
#include <cstddef>
#include <cstdint>
#include <vector>

namespace smlm {

/// Lateral extent in pixels plus the axial working range. Lateral
/// coordinates run from the frame corner; z = 0 is the focal plane.
struct FrameGeometry {
  int width_px = 64;
  int height_px = 64;
  double pixel_size_nm = 100.0;
  double z_min_nm = -750.0;
  double z_max_nm = 750.0;

  /// Throws std::invalid_argument when an invariant is violated.
  void validate() const;

  double width_nm() const noexcept { return width_px * pixel_size_nm; }
  double height_nm() const noexcept { return height_px * pixel_size_nm; }
  std::size_t pixel_count() const noexcept {
    return static_cast<std::size_t>(width_px) * static_cast<std::size_t>(height_px);
  }

  bool contains(double x_nm, double y_nm, double z_nm) const noexcept {
    return x_nm >= 0.0 && x_nm <= width_nm() && y_nm >= 0.0 && y_nm <= height_nm() &&
           z_nm >= z_min_nm && z_nm <= z_max_nm;
  }

  friend bool operator==(const FrameGeometry&, const FrameGeometry&) = default;
};

struct Position3 {
  double x_nm = 0.0;
  double y_nm = 0.0;
  double z_nm = 0.0;

  friend bool operator==(const Position3&, const Position3&) = default;
};

/// One fluorophore activation.
struct Emitter {
  std::int64_t frame_id = 0;
  double x_nm = 0.0;
  double y_nm = 0.0;
  double z_nm = 0.0;
  double photons = 0.0;  ///< expected detected photons

  Position3 position() const noexcept { return {x_nm, y_nm, z_nm}; }

  friend bool operator==(const Emitter&, const Emitter&) = default;
};

using FrameEmitters = std::vector<Emitter>;
/// Per-frame emitter lists, indexed by frame id.
using EmitterDataset = std::vector<FrameEmitters>;

enum class FrameKind { expected, counts };

/// Row-major pixel grid; `kind == counts` means integral camera values.
struct Frame {
  FrameGeometry geometry;
  FrameKind kind = FrameKind::expected;
  std::vector<double> pixels;

  Frame() = default;
  Frame(const FrameGeometry& g, FrameKind k, double fill = 0.0)
      : geometry(g), kind(k), pixels(g.pixel_count(), fill) {}

  int width() const noexcept { return geometry.width_px; }
  int height() const noexcept { return geometry.height_px; }

  double& at(int ix, int iy) noexcept {
    return pixels[static_cast<std::size_t>(iy) * geometry.width_px + ix];
  }
  double at(int ix, int iy) const noexcept {
    return pixels[static_cast<std::size_t>(iy) * geometry.width_px + ix];
  }
};

}  // namespace smlm
