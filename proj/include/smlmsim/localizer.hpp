// ============================================================================
// localizer.hpp -- classical single-emitter localization
//
// Candidate detection on a smoothed photon image followed by a per-candidate
// Poisson maximum-likelihood fit of the pixel-integrated astigmatic Gaussian.
// Overlapping PSFs are not jointly fitted.
// ============================================================================
#pragma once
#include <array>
#include <span>
#include <vector>

#include "smlmsim/camera.hpp"
#include "smlmsim/optics.hpp"
#include "smlmsim/types.hpp"

namespace smlm {

struct PixelPos {
  int x = 0;
  int y = 0;

  friend bool operator==(const PixelPos&, const PixelPos&) = default;
};

struct DetectionOptions {
  double threshold_sigma = 4.0;
  double min_separation_px = 5.0;
};

/// Local maxima of the Gaussian-smoothed photon image that exceed
/// median + threshold_sigma * sqrt(median), brightest first, at least
/// min_separation_px apart.
std::vector<PixelPos> detect_candidates(const Frame& counts, const CameraModel& cam,
                                        const AstigmaticPsf& psf,
                                        const DetectionOptions& options = {});

struct FitOptions {
  int window_px = 15;
  int min_window_px = 9;
  int max_iterations = 200;
  double position_tolerance_nm = 0.01;
  double relative_tolerance = 1e-6;
  bool record_trace = false;
};

struct FitResult {
  double x_nm = 0.0;
  double y_nm = 0.0;
  double z_nm = 0.0;
  double photons = 0.0;
  double background = 0.0;
  bool converged = false;
  int iterations = 0;
  double log_likelihood = 0.0;
  /// Log-likelihood after each accepted step (only with record_trace).
  std::vector<double> likelihood_trace;
};

/// Throws std::runtime_error when the fit window holds no signal at all.
FitResult fit_mle(const Frame& counts, const CameraModel& cam, const AstigmaticPsf& psf,
                  PixelPos seed, const FitOptions& options = {});

/// Detect and fit every frame; non-converged and laterally out-of-domain fits
/// are dropped. Output frame i holds emitters with frame_id = i.
EmitterDataset localize_stack(std::span<const Frame> frames, const CameraModel& cam,
                              const AstigmaticPsf& psf, const DetectionOptions& detection = {},
                              const FitOptions& fit = {}, unsigned threads = 1);

// ----------------------------------------------------------------------------
// Likelihood model, exposed for gradient checks.
// ----------------------------------------------------------------------------

/// Parameter order: x, y, z (nm, window-local lateral), photons, background.
using FitParams = std::array<double, 5>;

/// Photon data on a window whose lower-left pixel corner is the local origin.
class PoissonWindowModel {
public:
  PoissonWindowModel(std::vector<double> data, int width, int height, double pixel_size_nm,
                     const AstigmaticPsf& psf);

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  std::span<const double> data() const noexcept { return data_; }

  /// sum(d log mu - mu); the log(d!) constant is dropped.
  double log_likelihood(const FitParams& p) const;
  FitParams gradient(const FitParams& p) const;
  /// Gradient plus the Fisher information matrix (row-major 5x5).
  double evaluate(const FitParams& p, FitParams& grad, std::array<double, 25>& fisher) const;

private:
  struct AxisTerms {
    std::vector<double> value;   // integrated fraction per pixel
    std::vector<double> d_pos;   // d/d(center)
    std::vector<double> d_sig;   // d/d(sigma)
  };
  void axis_terms(double center, double sigma, int n, AxisTerms& out) const;

  std::vector<double> data_;
  int width_;
  int height_;
  double pixel_;
  AstigmaticPsf psf_;
};

}  // namespace smlm
