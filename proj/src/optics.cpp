#include "smlmsim/optics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <vector>

namespace smlm {

void AstigmaticPsf::validate() const {
  if (!(sigma0_nm > 0.0)) throw std::invalid_argument("psf sigma0_nm must be positive");
  if (!(d_nm > 0.0)) throw std::invalid_argument("psf d_nm must be positive");
}

PsfWidths sigma_xy(double z_nm, const AstigmaticPsf& psf) noexcept {
  const double ax = (z_nm - psf.gamma_nm) / psf.d_nm;
  const double ay = (z_nm + psf.gamma_nm) / psf.d_nm;
  return {psf.sigma0_nm * std::sqrt(1.0 + ax * ax), psf.sigma0_nm * std::sqrt(1.0 + ay * ay)};
}

double normal_cdf(double u) noexcept { return 0.5 * std::erfc(-u / std::numbers::sqrt2); }

namespace {

// Fraction of a 1D Gaussian falling in each pixel of [first, last].
void pixel_fractions(double center, double sigma, double pixel, int first, int last,
                     std::vector<double>& out) {
  out.resize(static_cast<std::size_t>(last - first + 1));
  double lower = normal_cdf((first * pixel - center) / sigma);
  for (int i = first; i <= last; ++i) {
    const double upper = normal_cdf(((i + 1) * pixel - center) / sigma);
    out[static_cast<std::size_t>(i - first)] = upper - lower;
    lower = upper;
  }
}

}  // namespace

void accumulate_emitter(Frame& frame, const Emitter& e, const AstigmaticPsf& psf) {
  if (e.photons == 0.0) return;
  const auto& g = frame.geometry;
  const auto [sx, sy] = sigma_xy(e.z_nm, psf);
  const double reach = kPsfSupportSigmas * std::max(sx, sy);
  const double px = g.pixel_size_nm;

  const int x0 = std::max(0, static_cast<int>(std::floor((e.x_nm - reach) / px)));
  const int x1 = std::min(g.width_px - 1, static_cast<int>(std::floor((e.x_nm + reach) / px)));
  const int y0 = std::max(0, static_cast<int>(std::floor((e.y_nm - reach) / px)));
  const int y1 = std::min(g.height_px - 1, static_cast<int>(std::floor((e.y_nm + reach) / px)));
  if (x0 > x1 || y0 > y1) return;

  std::vector<double> fx, fy;
  pixel_fractions(e.x_nm, sx, px, x0, x1, fx);
  pixel_fractions(e.y_nm, sy, px, y0, y1, fy);
  for (int iy = y0; iy <= y1; ++iy) {
    const double wy = e.photons * fy[static_cast<std::size_t>(iy - y0)];
    for (int ix = x0; ix <= x1; ++ix) frame.at(ix, iy) += wy * fx[static_cast<std::size_t>(ix - x0)];
  }
}

Frame render_emitter(const Emitter& e, const FrameGeometry& geometry,
                     const AstigmaticPsf& psf) {
  Frame frame(geometry, FrameKind::expected);
  accumulate_emitter(frame, e, psf);
  return frame;
}

Frame render_frame(std::span<const Emitter> emitters, const FrameGeometry& geometry,
                   const AstigmaticPsf& psf, double background) {
  if (!(background >= 0.0)) throw std::invalid_argument("background must be non-negative");
  Frame frame(geometry, FrameKind::expected);
  for (const auto& e : emitters) accumulate_emitter(frame, e, psf);
  if (background != 0.0)
    for (auto& v : frame.pixels) v += background;
  return frame;
}

}  // namespace smlm
