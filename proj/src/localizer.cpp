#include "smlmsim/localizer.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include <Eigen/Dense>

#include "smlmsim/parallel.hpp"

namespace smlm {

// ============================================================================
// Detection
// ============================================================================
namespace {

std::vector<double> gaussian_kernel(double sigma_px) {
  const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma_px)));
  std::vector<double> k(static_cast<std::size_t>(2 * radius + 1));
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    const double v = std::exp(-0.5 * i * i / (sigma_px * sigma_px));
    k[static_cast<std::size_t>(i + radius)] = v;
    sum += v;
  }
  for (auto& v : k) v /= sum;
  return k;
}

// Separable convolution; weights are renormalized where the kernel leaves
// the frame so a flat image stays flat at the borders.
std::vector<double> smooth(const Frame& f, double sigma_px) {
  const int w = f.width();
  const int h = f.height();
  const auto k = gaussian_kernel(sigma_px);
  const int r = static_cast<int>(k.size() / 2);
  std::vector<double> tmp(f.pixels.size()), out(f.pixels.size());

  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc = 0.0, norm = 0.0;
      for (int i = -r; i <= r; ++i) {
        const int xx = x + i;
        if (xx < 0 || xx >= w) continue;
        const double kw = k[static_cast<std::size_t>(i + r)];
        acc += kw * f.at(xx, y);
        norm += kw;
      }
      tmp[static_cast<std::size_t>(y) * w + x] = acc / norm;
    }
  }
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc = 0.0, norm = 0.0;
      for (int i = -r; i <= r; ++i) {
        const int yy = y + i;
        if (yy < 0 || yy >= h) continue;
        const double kw = k[static_cast<std::size_t>(i + r)];
        acc += kw * tmp[static_cast<std::size_t>(yy) * w + x];
        norm += kw;
      }
      out[static_cast<std::size_t>(y) * w + x] = acc / norm;
    }
  }
  return out;
}

double median_of(std::vector<double> v) {
  if (v.empty()) return 0.0;
  const auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
  std::nth_element(v.begin(), mid, v.end());
  if (v.size() % 2 == 1) return *mid;
  const double hi = *mid;
  const double lo = *std::max_element(v.begin(), mid);
  return 0.5 * (lo + hi);
}

}  // namespace

std::vector<PixelPos> detect_candidates(const Frame& counts, const CameraModel& cam,
                                        const AstigmaticPsf& psf,
                                        const DetectionOptions& options) {
  if (counts.kind != FrameKind::counts)
    throw std::invalid_argument("detect_candidates expects a camera counts frame");
  const Frame photons = photons_from_adu(counts, cam);
  const int w = photons.width();
  const int h = photons.height();
  const auto smoothed = smooth(photons, psf.sigma0_nm / photons.geometry.pixel_size_nm);
  const double background = median_of(photons.pixels);
  const double threshold =
      background + options.threshold_sigma * std::sqrt(std::max(background, 1.0));

  struct Peak {
    PixelPos pos;
    double value;
  };
  std::vector<Peak> peaks;
  auto value = [&](int x, int y) { return smoothed[static_cast<std::size_t>(y) * w + x]; };
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double v = value(x, y);
      if (v <= threshold) continue;
      bool is_max = true;
      for (int dy = -1; dy <= 1 && is_max; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
          if (dx == 0 && dy == 0) continue;
          const int xx = x + dx, yy = y + dy;
          if (xx < 0 || yy < 0 || xx >= w || yy >= h) continue;
          // Ties are broken in raster order so a plateau yields one peak.
          const bool earlier = dy < 0 || (dy == 0 && dx < 0);
          const double nv = value(xx, yy);
          if (earlier ? nv >= v : nv > v) {
            is_max = false;
            break;
          }
        }
      }
      if (is_max) peaks.push_back({{x, y}, v});
    }
  }

  std::stable_sort(peaks.begin(), peaks.end(),
                   [](const Peak& a, const Peak& b) { return a.value > b.value; });
  std::vector<PixelPos> accepted;
  const double min_sep2 = options.min_separation_px * options.min_separation_px;
  for (const auto& p : peaks) {
    const bool crowded = std::any_of(accepted.begin(), accepted.end(), [&](const PixelPos& a) {
      const double dx = a.x - p.pos.x, dy = a.y - p.pos.y;
      return dx * dx + dy * dy < min_sep2;
    });
    if (!crowded) accepted.push_back(p.pos);
  }
  return accepted;
}

// ============================================================================
// Likelihood model
// ============================================================================
namespace {

constexpr double kInvSqrt2Pi = 0.39894228040143267794;

double normal_pdf(double u) { return kInvSqrt2Pi * std::exp(-0.5 * u * u); }

}  // namespace

PoissonWindowModel::PoissonWindowModel(std::vector<double> data, int width, int height,
                                       double pixel_size_nm, const AstigmaticPsf& psf)
    : data_(std::move(data)), width_(width), height_(height), pixel_(pixel_size_nm), psf_(psf) {
  if (data_.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height))
    throw std::invalid_argument("window data size does not match its dimensions");
}

void PoissonWindowModel::axis_terms(double center, double sigma, int n, AxisTerms& out) const {
  out.value.resize(static_cast<std::size_t>(n));
  out.d_pos.resize(static_cast<std::size_t>(n));
  out.d_sig.resize(static_cast<std::size_t>(n));
  double u_lo = (0.0 - center) / sigma;
  double cdf_lo = normal_cdf(u_lo);
  double pdf_lo = normal_pdf(u_lo);
  for (int i = 0; i < n; ++i) {
    const double u_hi = ((i + 1) * pixel_ - center) / sigma;
    const double cdf_hi = normal_cdf(u_hi);
    const double pdf_hi = normal_pdf(u_hi);
    const auto k = static_cast<std::size_t>(i);
    out.value[k] = cdf_hi - cdf_lo;
    out.d_pos[k] = -(pdf_hi - pdf_lo) / sigma;
    out.d_sig[k] = -(pdf_hi * u_hi - pdf_lo * u_lo) / sigma;
    u_lo = u_hi;
    cdf_lo = cdf_hi;
    pdf_lo = pdf_hi;
  }
}

double PoissonWindowModel::log_likelihood(const FitParams& p) const {
  const auto [sx, sy] = sigma_xy(p[2], psf_);
  AxisTerms ax, ay;
  axis_terms(p[0], sx, width_, ax);
  axis_terms(p[1], sy, height_, ay);
  double ll = 0.0;
  for (int j = 0; j < height_; ++j) {
    for (int i = 0; i < width_; ++i) {
      const double mu = p[3] * ax.value[static_cast<std::size_t>(i)] * ay.value[static_cast<std::size_t>(j)] + p[4];
      const double d = data_[static_cast<std::size_t>(j) * width_ + i];
      ll += (d > 0.0 ? d * std::log(mu) : 0.0) - mu;
    }
  }
  return ll;
}

double PoissonWindowModel::evaluate(const FitParams& p, FitParams& grad,
                                    std::array<double, 25>& fisher) const {
  const auto [sx, sy] = sigma_xy(p[2], psf_);
  const double s0sq_over_d2 = psf_.sigma0_nm * psf_.sigma0_nm / (psf_.d_nm * psf_.d_nm);
  const double dsx_dz = s0sq_over_d2 * (p[2] - psf_.gamma_nm) / sx;
  const double dsy_dz = s0sq_over_d2 * (p[2] + psf_.gamma_nm) / sy;

  AxisTerms ax, ay;
  axis_terms(p[0], sx, width_, ax);
  axis_terms(p[1], sy, height_, ay);

  grad.fill(0.0);
  fisher.fill(0.0);
  double ll = 0.0;
  const double n_ph = p[3];
  for (int j = 0; j < height_; ++j) {
    const auto jj = static_cast<std::size_t>(j);
    for (int i = 0; i < width_; ++i) {
      const auto ii = static_cast<std::size_t>(i);
      const double px = ax.value[ii], py = ay.value[jj];
      const double mu = n_ph * px * py + p[4];
      const double d = data_[jj * static_cast<std::size_t>(width_) + ii];
      ll += (d > 0.0 ? d * std::log(mu) : 0.0) - mu;

      const std::array<double, 5> dmu{
          n_ph * ax.d_pos[ii] * py,
          n_ph * px * ay.d_pos[jj],
          n_ph * (ax.d_sig[ii] * dsx_dz * py + px * ay.d_sig[jj] * dsy_dz),
          px * py,
          1.0,
      };
      const double resid = d / mu - 1.0;
      for (std::size_t a = 0; a < 5; ++a) {
        grad[a] += resid * dmu[a];
        for (std::size_t b = a; b < 5; ++b) fisher[a * 5 + b] += dmu[a] * dmu[b] / mu;
      }
    }
  }
  for (std::size_t a = 0; a < 5; ++a)
    for (std::size_t b = 0; b < a; ++b) fisher[a * 5 + b] = fisher[b * 5 + a];
  return ll;
}

FitParams PoissonWindowModel::gradient(const FitParams& p) const {
  FitParams g;
  std::array<double, 25> fisher;
  evaluate(p, g, fisher);
  return g;
}

// ============================================================================
// MLE fit
// ============================================================================
namespace {

struct Window {
  int x0, y0, width, height;
};

Window fit_window(const FrameGeometry& g, PixelPos seed, const FitOptions& o) {
  auto span = [&](int center, int size) {
    const int half = o.window_px / 2;
    int lo = std::max(0, center - half);
    int hi = std::min(size - 1, center + half);
    const int min_len = std::min(o.min_window_px, size);
    while (hi - lo + 1 < min_len) {
      if (lo > 0) --lo;
      else ++hi;
    }
    return std::pair{lo, hi - lo + 1};
  };
  const auto [x0, w] = span(std::clamp(seed.x, 0, g.width_px - 1), g.width_px);
  const auto [y0, h] = span(std::clamp(seed.y, 0, g.height_px - 1), g.height_px);
  return {x0, y0, w, h};
}

using Mat5 = Eigen::Matrix<double, 5, 5>;
using Vec5 = Eigen::Matrix<double, 5, 1>;

Vec5 solve_damped(const std::array<double, 25>& fisher, const FitParams& grad, double lambda) {
  Mat5 a;
  double max_diag = 0.0;
  for (int r = 0; r < 5; ++r) {
    for (int c = 0; c < 5; ++c) a(r, c) = fisher[static_cast<std::size_t>(r * 5 + c)];
    max_diag = std::max(max_diag, a(r, r));
  }
  // The ridge keeps flat directions (e.g. z without astigmatism) solvable.
  const double ridge = 1e-12 * std::max(max_diag, 1e-300);
  for (int r = 0; r < 5; ++r) a(r, r) += lambda * a(r, r) + ridge;
  Vec5 g;
  for (int r = 0; r < 5; ++r) g(r) = grad[static_cast<std::size_t>(r)];
  return a.ldlt().solve(g);
}

}  // namespace

FitResult fit_mle(const Frame& counts, const CameraModel& cam, const AstigmaticPsf& psf,
                  PixelPos seed, const FitOptions& options) {
  if (counts.kind != FrameKind::counts)
    throw std::invalid_argument("fit_mle expects a camera counts frame");
  psf.validate();
  const auto& g = counts.geometry;
  const Window win = fit_window(g, seed, options);
  const double px = g.pixel_size_nm;

  std::vector<double> data;
  data.reserve(static_cast<std::size_t>(win.width) * static_cast<std::size_t>(win.height));
  for (int j = 0; j < win.height; ++j)
    for (int i = 0; i < win.width; ++i)
      data.push_back(std::max(0.0, (counts.at(win.x0 + i, win.y0 + j) - cam.baseline_adu) /
                                       cam.gain_adu_per_e));
  if (std::all_of(data.begin(), data.end(), [](double v) { return v == 0.0; }))
    throw std::runtime_error("fit_mle: fit window contains no signal");

  // Initial guess: background-subtracted centroid, in-focus, window median.
  const double b0 = std::max(median_of(data), 1e-3);
  double wsum = 0.0, cx = 0.0, cy = 0.0, total = 0.0;
  for (int j = 0; j < win.height; ++j) {
    for (int i = 0; i < win.width; ++i) {
      const double v = data[static_cast<std::size_t>(j) * win.width + i];
      total += v;
      const double wgt = std::max(0.0, v - b0);
      wsum += wgt;
      cx += wgt * (i + 0.5) * px;
      cy += wgt * (j + 0.5) * px;
    }
  }
  const double area = static_cast<double>(data.size());
  FitParams p{wsum > 0.0 ? cx / wsum : 0.5 * win.width * px,
              wsum > 0.0 ? cy / wsum : 0.5 * win.height * px, 0.0,
              std::max(total - b0 * area, 1.0), b0};
  p[2] = std::clamp(0.0, g.z_min_nm, g.z_max_nm);

  const PoissonWindowModel model(std::move(data), win.width, win.height, px, psf);
  // Lateral position may wander at most one window width outside the window.
  const double x_lo = -win.width * px, x_hi = 2.0 * win.width * px;
  const double y_lo = -win.height * px, y_hi = 2.0 * win.height * px;
  auto project = [&](FitParams q) {
    q[0] = std::clamp(q[0], x_lo, x_hi);
    q[1] = std::clamp(q[1], y_lo, y_hi);
    q[2] = std::clamp(q[2], g.z_min_nm, g.z_max_nm);
    q[3] = std::max(q[3], 1e-3);
    q[4] = std::max(q[4], 1e-6);
    return q;
  };

  FitResult result;
  FitParams grad;
  std::array<double, 25> fisher;
  double ll = model.evaluate(p, grad, fisher);
  if (options.record_trace) result.likelihood_trace.push_back(ll);

  double lambda = 1e-3;
  bool converged = false;
  int iter = 0;
  for (; iter < options.max_iterations; ++iter) {
    // Undamped scoring step as the convergence measure; bound-blocked
    // components do not count.
    Vec5 full = solve_damped(fisher, grad, 0.0);
    if ((p[2] <= g.z_min_nm && full(2) < 0.0) || (p[2] >= g.z_max_nm && full(2) > 0.0)) full(2) = 0.0;
    if (std::abs(full(0)) < options.position_tolerance_nm &&
        std::abs(full(1)) < options.position_tolerance_nm &&
        std::abs(full(2)) < options.position_tolerance_nm &&
        std::abs(full(3)) < options.relative_tolerance * p[3] &&
        std::abs(full(4)) < options.relative_tolerance * p[4]) {
      converged = true;
      break;
    }

    bool accepted = false;
    while (lambda < 1e12) {
      const Vec5 step = solve_damped(fisher, grad, lambda);
      FitParams trial = p;
      for (std::size_t k = 0; k < 5; ++k) trial[k] += step(static_cast<Eigen::Index>(k));
      trial = project(trial);
      const double trial_ll = model.log_likelihood(trial);
      if (std::isfinite(trial_ll) && trial_ll >= ll) {
        p = trial;
        lambda = std::max(lambda * 0.1, 1e-9);
        accepted = true;
        break;
      }
      lambda *= 10.0;
    }
    if (!accepted) break;  // no ascent direction left at any damping
    ll = model.evaluate(p, grad, fisher);
    if (options.record_trace) result.likelihood_trace.push_back(ll);
  }

  result.x_nm = win.x0 * px + p[0];
  result.y_nm = win.y0 * px + p[1];
  result.z_nm = p[2];
  result.photons = p[3];
  result.background = p[4];
  result.converged = converged;
  result.iterations = iter;
  result.log_likelihood = ll;
  return result;
}

EmitterDataset localize_stack(std::span<const Frame> frames, const CameraModel& cam,
                              const AstigmaticPsf& psf, const DetectionOptions& detection,
                              const FitOptions& fit, unsigned threads) {
  EmitterDataset out(frames.size());
  parallel_for(frames.size(), threads, [&](std::size_t f) {
    const Frame& frame = frames[f];
    for (const PixelPos& c : detect_candidates(frame, cam, psf, detection)) {
      FitResult r;
      try {
        r = fit_mle(frame, cam, psf, c, fit);
      } catch (const std::runtime_error&) {
        continue;
      }
      if (!r.converged || !frame.geometry.contains(r.x_nm, r.y_nm, r.z_nm)) continue;
      out[f].push_back({static_cast<std::int64_t>(f), r.x_nm, r.y_nm, r.z_nm, r.photons});
    }
  });
  return out;
}

}  // namespace smlm
