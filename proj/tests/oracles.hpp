// ============================================================================
// oracles.hpp -- independent reference computations used by the tests
//
// Nothing here calls into the code paths it is used to check.
// ============================================================================
#pragma once
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <span>
#include <utility>
#include <vector>

#include <boost/math/distributions/chi_squared.hpp>

#include "smlmsim/types.hpp"

namespace smlm::oracle {

// ---------------------------------------------------------------------------
// Statistics
// ---------------------------------------------------------------------------
struct Moments {
  double mean = 0.0;
  double variance = 0.0;  // unbiased
  std::size_t n = 0;
};

inline Moments moments(std::span<const double> v) {
  Moments m;
  m.n = v.size();
  if (v.empty()) return m;
  m.mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - m.mean) * (x - m.mean);
  m.variance = v.size() > 1 ? ss / static_cast<double>(v.size() - 1) : 0.0;
  return m;
}

/// |sample mean - mu| <= 3 sd / sqrt(n).
inline bool mean_in_3sigma(double sample_mean, double mu, double sd, std::size_t n) {
  return std::abs(sample_mean - mu) <= 3.0 * sd / std::sqrt(static_cast<double>(n));
}

/// 3 sigma band for a sample variance, using Var(s^2) ~ (mu4 - sigma^4) / n.
inline bool variance_in_3sigma(double sample_var, double sigma2, double mu4, std::size_t n) {
  return std::abs(sample_var - sigma2) <= 3.0 * std::sqrt((mu4 - sigma2 * sigma2) / static_cast<double>(n));
}

/// Pearson chi-square goodness-of-fit p-value against uniform bins.
inline double chi_square_uniform_p(std::span<const double> samples, double lo, double hi, int bins) {
  std::vector<double> counts(static_cast<std::size_t>(bins), 0.0);
  for (double s : samples) {
    auto b = static_cast<long>((s - lo) / (hi - lo) * bins);
    b = std::clamp(b, 0L, static_cast<long>(bins - 1));
    counts[static_cast<std::size_t>(b)] += 1.0;
  }
  const double expected = static_cast<double>(samples.size()) / bins;
  double chi2 = 0.0;
  for (double c : counts) chi2 += (c - expected) * (c - expected) / expected;
  boost::math::chi_squared dist(bins - 1);
  return boost::math::cdf(boost::math::complement(dist, chi2));
}

/// Pearson chi-square goodness of fit of integer counts against a Poisson(lambda)
/// law. Tail cells are pooled until every expected count is at least 5.
inline double chi_square_poisson_p(std::span<const long long> counts, double lambda) {
  long long kmax = 0;
  for (long long c : counts) kmax = std::max(kmax, c);
  std::vector<double> observed(static_cast<std::size_t>(kmax) + 2, 0.0);
  for (long long c : counts) observed[static_cast<std::size_t>(c)] += 1.0;
  const double n = static_cast<double>(counts.size());
  std::vector<double> expected(observed.size(), 0.0);
  double pk = std::exp(-lambda), cdf = 0.0;
  for (std::size_t k = 0; k + 1 < expected.size(); ++k) {
    expected[k] = n * pk;
    cdf += pk;
    pk *= lambda / static_cast<double>(k + 1);
  }
  expected.back() = n * std::max(0.0, 1.0 - cdf);  // P(N > kmax)

  // Pool from both ends toward the mode.
  std::vector<std::pair<double, double>> cells;  // (observed, expected)
  double po = 0.0, pe = 0.0;
  for (std::size_t k = 0; k < observed.size(); ++k) {
    po += observed[k];
    pe += expected[k];
    if (pe >= 5.0) {
      cells.emplace_back(po, pe);
      po = pe = 0.0;
    }
  }
  if (pe > 0.0 || po > 0.0) {
    if (cells.empty()) return 1.0;
    cells.back().first += po;
    cells.back().second += pe;
  }
  if (cells.size() < 2) return 1.0;
  double chi2 = 0.0;
  for (const auto& [o, e] : cells) chi2 += (o - e) * (o - e) / e;
  boost::math::chi_squared dist(static_cast<double>(cells.size() - 1));
  return boost::math::cdf(boost::math::complement(dist, chi2));
}

/// One-sample Kolmogorov-Smirnov p-value against U(lo, hi), asymptotic
/// distribution with the Stephens small-sample correction.
inline double ks_uniform_p(std::vector<double> samples, double lo, double hi) {
  std::sort(samples.begin(), samples.end());
  const double n = static_cast<double>(samples.size());
  double d = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double f = (samples[i] - lo) / (hi - lo);
    d = std::max({d, (static_cast<double>(i) + 1.0) / n - f, f - static_cast<double>(i) / n});
  }
  const double sn = std::sqrt(n);
  const double lambda = (sn + 0.12 + 0.11 / sn) * d;
  double q = 0.0;
  for (int k = 1; k <= 200; ++k) {
    const double term = 2.0 * ((k % 2) ? 1.0 : -1.0) * std::exp(-2.0 * k * k * lambda * lambda);
    q += term;
    if (std::abs(term) < 1e-12) break;
  }
  return std::clamp(q, 0.0, 1.0);
}

// ---------------------------------------------------------------------------
// Geometry
// ---------------------------------------------------------------------------
/// All-pairs O(n^2) nearest-neighbour distances.
inline std::vector<double> brute_force_nn(std::span<const Position3> pts, bool use_z) {
  std::vector<double> out;
  if (pts.size() < 2) return out;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < pts.size(); ++j) {
      if (i == j) continue;
      const double dx = pts[i].x_nm - pts[j].x_nm;
      const double dy = pts[i].y_nm - pts[j].y_nm;
      const double dz = use_z ? pts[i].z_nm - pts[j].z_nm : 0.0;
      best = std::min(best, std::sqrt(dx * dx + dy * dy + dz * dz));
    }
    out.push_back(best);
  }
  return out;
}

/// Pooled mean NN distance over frames with >= 2 points (lateral).
inline double brute_force_mean_nn(const std::vector<std::vector<Position3>>& frames) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& f : frames) {
    for (double d : brute_force_nn(f, false)) sum += d;
    if (f.size() >= 2) n += f.size();
  }
  return sum / static_cast<double>(n);
}

// ---------------------------------------------------------------------------
// PSF
// ---------------------------------------------------------------------------
/// Midpoint quadrature of a normalized 2D Gaussian density over one pixel,
/// using sub x sub cells.
inline double midpoint_pixel(double x0, double y0, double sx, double sy, double pixel, int ix,
                             int iy, int sub) {
  const double h = pixel / sub;
  const double norm = 1.0 / (2.0 * M_PI * sx * sy);
  double acc = 0.0;
  for (int b = 0; b < sub; ++b) {
    const double y = iy * pixel + (b + 0.5) * h;
    const double gy = std::exp(-0.5 * (y - y0) * (y - y0) / (sy * sy));
    for (int a = 0; a < sub; ++a) {
      const double x = ix * pixel + (a + 0.5) * h;
      acc += gy * std::exp(-0.5 * (x - x0) * (x - x0) / (sx * sx));
    }
  }
  return acc * norm * h * h;
}

// ---------------------------------------------------------------------------
// Matching
// ---------------------------------------------------------------------------
struct BruteMatch {
  std::size_t pairs = 0;
  double total_distance = 0.0;
};

/// Exhaustive search over all partial injections gt -> pred restricted to
/// gated pairs; maximizes the pair count, then minimizes total 3D distance.
inline BruteMatch brute_force_match(std::span<const Emitter> gt, std::span<const Emitter> pred,
                                    double lateral_tol, double axial_tol) {
  BruteMatch best;
  best.total_distance = std::numeric_limits<double>::infinity();
  std::vector<char> used(pred.size(), 0);

  auto rec = [&](auto&& self, std::size_t i, std::size_t pairs, double dist) -> void {
    if (i == gt.size()) {
      if (pairs > best.pairs || (pairs == best.pairs && dist < best.total_distance)) {
        best.pairs = pairs;
        best.total_distance = dist;
      }
      return;
    }
    self(self, i + 1, pairs, dist);  // gt[i] unmatched
    for (std::size_t j = 0; j < pred.size(); ++j) {
      if (used[j]) continue;
      const double dx = pred[j].x_nm - gt[i].x_nm;
      const double dy = pred[j].y_nm - gt[i].y_nm;
      const double dz = pred[j].z_nm - gt[i].z_nm;
      if (std::sqrt(dx * dx + dy * dy) > lateral_tol || std::abs(dz) > axial_tol) continue;
      used[j] = 1;
      self(self, i + 1, pairs + 1, dist + std::sqrt(dx * dx + dy * dy + dz * dz));
      used[j] = 0;
    }
  };
  rec(rec, 0, 0, 0.0);
  if (best.pairs == 0) best.total_distance = 0.0;
  return best;
}

}  // namespace smlm::oracle
