#include "smlmsim/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "smlmsim/assignment.hpp"

namespace smlm {

void MatchTolerance::validate() const {
  if (!(lateral_nm > 0.0) || !(axial_nm > 0.0))
    throw std::invalid_argument("match tolerances must be positive");
}

MatchResult match_frame(std::span<const Emitter> gt, std::span<const Emitter> pred,
                        const MatchTolerance& tol, std::int64_t frame_id) {
  MatchResult out;
  const std::size_t ng = gt.size();
  const std::size_t np = pred.size();

  // Gated-out pairs cost more than any complete set of admissible pairs, so
  // the optimum maximizes the pair count first, then minimizes distance.
  const double gate_diag = std::hypot(tol.lateral_nm, tol.axial_nm);
  const double penalty = gate_diag * static_cast<double>(std::max(ng, np) + 1) + 1.0;

  std::vector<long> gt_to_pred(ng, -1);
  if (ng > 0 && np > 0) {
    CostMatrix cost(ng, np, penalty);
    for (std::size_t i = 0; i < ng; ++i) {
      for (std::size_t j = 0; j < np; ++j) {
        const double dx = pred[j].x_nm - gt[i].x_nm;
        const double dy = pred[j].y_nm - gt[i].y_nm;
        const double dz = pred[j].z_nm - gt[i].z_nm;
        if (std::hypot(dx, dy) <= tol.lateral_nm && std::abs(dz) <= tol.axial_nm)
          cost(i, j) = std::sqrt(dx * dx + dy * dy + dz * dz);
      }
    }
    const auto assigned = solve_assignment(cost);
    for (std::size_t i = 0; i < ng; ++i) {
      const long j = assigned[i];
      if (j >= 0 && cost(i, static_cast<std::size_t>(j)) < penalty) gt_to_pred[i] = j;
    }
  }

  std::vector<char> pred_used(np, 0);
  for (std::size_t i = 0; i < ng; ++i) {
    const long j = gt_to_pred[i];
    if (j < 0) {
      out.false_negatives.push_back({frame_id, i});
      continue;
    }
    const auto& p = pred[static_cast<std::size_t>(j)];
    pred_used[static_cast<std::size_t>(j)] = 1;
    out.pairs.push_back({frame_id, i, static_cast<std::size_t>(j), p.x_nm - gt[i].x_nm,
                         p.y_nm - gt[i].y_nm, p.z_nm - gt[i].z_nm});
  }
  for (std::size_t j = 0; j < np; ++j)
    if (!pred_used[j]) out.false_positives.push_back({frame_id, j});
  return out;
}

MatchResult match(const EmitterDataset& gt, const EmitterDataset& pred, const MatchTolerance& tol) {
  tol.validate();
  MatchResult out;
  const std::size_t n_frames = std::max(gt.size(), pred.size());
  const FrameEmitters empty;
  for (std::size_t f = 0; f < n_frames; ++f) {
    const auto& g = f < gt.size() ? gt[f] : empty;
    const auto& p = f < pred.size() ? pred[f] : empty;
    auto m = match_frame(g, p, tol, static_cast<std::int64_t>(f));
    out.pairs.insert(out.pairs.end(), m.pairs.begin(), m.pairs.end());
    out.false_positives.insert(out.false_positives.end(), m.false_positives.begin(),
                               m.false_positives.end());
    out.false_negatives.insert(out.false_negatives.end(), m.false_negatives.begin(),
                               m.false_negatives.end());
  }
  return out;
}

double jaccard(const MatchResult& m) noexcept {
  const std::size_t denom = m.n_tp() + m.n_fp() + m.n_fn();
  if (denom == 0) return 1.0;
  return static_cast<double>(m.n_tp()) / static_cast<double>(denom);
}

Rmse rmse(const MatchResult& m) {
  if (m.pairs.empty()) throw std::domain_error("RMSE undefined without matched pairs");
  double lat = 0.0, ax = 0.0;
  for (const auto& p : m.pairs) {
    lat += p.dx_nm * p.dx_nm + p.dy_nm * p.dy_nm;
    ax += p.dz_nm * p.dz_nm;
  }
  const double n = static_cast<double>(m.pairs.size());
  return {std::sqrt(lat / n), std::sqrt(ax / n), std::sqrt((lat + ax) / n)};
}

Efficiency efficiency(double ji, double rmse_lateral_nm, double rmse_axial_nm,
                      const EfficiencyWeights& w) {
  const double miss = 100.0 * (1.0 - ji);
  Efficiency e;
  e.lateral = 100.0 - std::hypot(miss, w.lateral_per_nm * rmse_lateral_nm);
  e.axial = 100.0 - std::hypot(miss, w.axial_per_nm * rmse_axial_nm);
  e.three_d = 0.5 * (e.lateral + e.axial);
  return e;
}

double subpixel_bias(std::span<const Emitter> pred, double pixel_size_nm, int bins) {
  if (pred.size() < kMinSubpixelSamples)
    throw std::invalid_argument("subpixel_bias needs at least 100 predictions");
  if (!(pixel_size_nm > 0.0) || bins < 1)
    throw std::invalid_argument("subpixel_bias: invalid pixel size or bin count");

  const auto b = static_cast<std::size_t>(bins);
  std::vector<std::size_t> hist(b * b, 0);
  auto bin_of = [&](double coord) {
    const double u = coord / pixel_size_nm;
    const double frac = u - std::floor(u);
    return std::min(b - 1, static_cast<std::size_t>(frac * static_cast<double>(b)));
  };
  for (const auto& e : pred) ++hist[bin_of(e.y_nm) * b + bin_of(e.x_nm)];

  const double n = static_cast<double>(pred.size());
  const double uniform = 1.0 / static_cast<double>(b * b);
  double tv = 0.0;
  for (std::size_t c : hist) tv += std::abs(static_cast<double>(c) / n - uniform);
  return 0.5 * tv;
}

nlohmann::json MetricsReport::to_json() const {
  auto opt = [](const std::optional<double>& v) -> nlohmann::json {
    return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
  };
  return {{"ji", ji},
          {"rmse_lateral_nm", opt(rmse_lateral_nm)},
          {"rmse_axial_nm", opt(rmse_axial_nm)},
          {"rmse_volumetric_nm", opt(rmse_volumetric_nm)},
          {"efficiency_lateral", opt(efficiency_lateral)},
          {"efficiency_axial", opt(efficiency_axial)},
          {"efficiency_3d", opt(efficiency_3d)},
          {"n_tp", n_tp},
          {"n_fp", n_fp},
          {"n_fn", n_fn},
          {"nominal_density", opt(nominal_density)},
          {"subpixel_bias", opt(subpixel_bias)}};
}

MetricsReport evaluate(const EmitterDataset& gt, const EmitterDataset& pred,
                       const EvaluationOptions& options) {
  const MatchResult m = match(gt, pred, options.tolerance);
  MetricsReport r;
  r.ji = jaccard(m);
  r.n_tp = m.n_tp();
  r.n_fp = m.n_fp();
  r.n_fn = m.n_fn();
  if (!m.pairs.empty()) {
    const Rmse e = rmse(m);
    r.rmse_lateral_nm = e.lateral_nm;
    r.rmse_axial_nm = e.axial_nm;
    r.rmse_volumetric_nm = e.volumetric_nm;
    const Efficiency eff = efficiency(r.ji, e.lateral_nm, e.axial_nm, options.weights);
    r.efficiency_lateral = eff.lateral;
    r.efficiency_axial = eff.axial;
    r.efficiency_3d = eff.three_d;
  }

  std::vector<Emitter> flat;
  for (const auto& frame : pred) flat.insert(flat.end(), frame.begin(), frame.end());
  if (flat.size() >= kMinSubpixelSamples)
    r.subpixel_bias = subpixel_bias(flat, options.pixel_size_nm, options.subpixel_bins);

  if (options.curve != nullptr) {
    try {
      r.nominal_density = nominal_density(gt, *options.curve).value;
    } catch (const std::domain_error&) {
      // fewer than two emitters in every frame: left undefined
    }
  }
  return r;
}

}  // namespace smlm
