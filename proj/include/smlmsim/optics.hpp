// ============================================================================
// optics.hpp -- astigmatic Gaussian PSF and pixel-integrated rendering
// ============================================================================
#pragma once
#include <span>

#include "smlmsim/types.hpp"

namespace smlm {

/// Defocus curve sigma(z) = sigma0 * sqrt(1 + ((z -/+ gamma) / d)^2).
struct AstigmaticPsf {
  double sigma0_nm = 130.0;
  double gamma_nm = 250.0;
  double d_nm = 400.0;

  void validate() const;
};

struct PsfWidths {
  double sigma_x_nm;
  double sigma_y_nm;
};

PsfWidths sigma_xy(double z_nm, const AstigmaticPsf& psf) noexcept;

/// Pixels further than this many sigmas from the emitter are left at zero.
inline constexpr double kPsfSupportSigmas = 6.0;

/// Standard normal CDF.
double normal_cdf(double u) noexcept;

/// Adds one emitter's pixel-integrated PSF into `frame`.
void accumulate_emitter(Frame& frame, const Emitter& e, const AstigmaticPsf& psf);

Frame render_emitter(const Emitter& e, const FrameGeometry& geometry,
                     const AstigmaticPsf& psf);

/// Sum of all emitters (in list order) plus a constant background.
Frame render_frame(std::span<const Emitter> emitters, const FrameGeometry& geometry,
                   const AstigmaticPsf& psf, double background);

}  // namespace smlm
