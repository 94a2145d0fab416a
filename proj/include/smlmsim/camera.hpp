// ============================================================================
// camera.hpp -- sCMOS-style camera noise chain
//
// expected photons -> Poisson(QE * mu) electrons -> + N(0, read_noise)
//                  -> * gain -> + baseline -> round, clamp to 16 bit
// ============================================================================
#pragma once
#include "smlmsim/random.hpp"
#include "smlmsim/types.hpp"

namespace smlm {

struct CameraModel {
  double read_noise_e = 3.0;
  double gain_adu_per_e = 1.0;
  double baseline_adu = 100.0;
  double quantum_efficiency = 1.0;

  void validate() const;
};

inline constexpr double kMaxAdu = 65535.0;

/// Throws std::invalid_argument for a counts frame.
Frame apply_noise(const Frame& expected, const CameraModel& cam, RandomStream& rng);

/// Noise-free counterpart of apply_noise: round(gain * QE * mu + baseline).
Frame quantize_noiseless(const Frame& expected, const CameraModel& cam);

/// max(0, (adu - baseline) / gain) per pixel.
Frame photons_from_adu(const Frame& counts, const CameraModel& cam);

}  // namespace smlm
