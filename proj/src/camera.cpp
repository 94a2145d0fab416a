#include "smlmsim/camera.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

namespace smlm {

void CameraModel::validate() const {
  if (!(read_noise_e >= 0.0)) throw std::invalid_argument("read_noise_e must be non-negative");
  if (!(gain_adu_per_e > 0.0)) throw std::invalid_argument("gain_adu_per_e must be positive");
  if (!(baseline_adu >= 0.0)) throw std::invalid_argument("baseline_adu must be non-negative");
  if (!(quantum_efficiency > 0.0 && quantum_efficiency <= 1.0))
    throw std::invalid_argument("quantum_efficiency must lie in (0, 1]");
}

namespace {

double to_adu(double electrons, const CameraModel& cam) {
  return std::clamp(std::round(cam.gain_adu_per_e * electrons + cam.baseline_adu), 0.0, kMaxAdu);
}

}  // namespace

Frame apply_noise(const Frame& expected, const CameraModel& cam, RandomStream& rng) {
  if (expected.kind != FrameKind::expected)
    throw std::invalid_argument("apply_noise expects an expected-photon frame");
  cam.validate();

  Frame out(expected.geometry, FrameKind::counts);
  std::normal_distribution<double> read(0.0, 1.0);
  for (std::size_t i = 0; i < expected.pixels.size(); ++i) {
    const double mu = cam.quantum_efficiency * expected.pixels[i];
    double electrons = 0.0;
    if (mu > 0.0) {
      std::poisson_distribution<long long> shot(mu);
      electrons = static_cast<double>(shot(rng));
    }
    if (cam.read_noise_e > 0.0) electrons += cam.read_noise_e * read(rng);
    out.pixels[i] = to_adu(electrons, cam);
  }
  return out;
}

Frame quantize_noiseless(const Frame& expected, const CameraModel& cam) {
  if (expected.kind != FrameKind::expected)
    throw std::invalid_argument("quantize_noiseless expects an expected-photon frame");
  cam.validate();
  Frame out(expected.geometry, FrameKind::counts);
  for (std::size_t i = 0; i < expected.pixels.size(); ++i)
    out.pixels[i] = to_adu(cam.quantum_efficiency * expected.pixels[i], cam);
  return out;
}

Frame photons_from_adu(const Frame& counts, const CameraModel& cam) {
  cam.validate();
  Frame out(counts.geometry, FrameKind::expected);
  for (std::size_t i = 0; i < counts.pixels.size(); ++i)
    out.pixels[i] = std::max(0.0, (counts.pixels[i] - cam.baseline_adu) / cam.gain_adu_per_e);
  return out;
}

}  // namespace smlm
