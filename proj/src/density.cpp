#include "smlmsim/density.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "smlmsim/parallel.hpp"
#include "smlmsim/random.hpp"
#include "smlmsim/sampler.hpp"

namespace smlm {

std::vector<double> nearest_neighbor_distances(std::span<const Position3> points,
                                               NnMetric metric) {
  const std::size_t n = points.size();
  std::vector<double> out;
  if (n < 2) return out;

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return points[a].x_nm < points[b].x_nm;
  });

  const bool use_z = metric == NnMetric::full3d;
  auto dist2 = [&](const Position3& a, const Position3& b) {
    const double dx = a.x_nm - b.x_nm;
    const double dy = a.y_nm - b.y_nm;
    const double dz = use_z ? a.z_nm - b.z_nm : 0.0;
    return dx * dx + dy * dy + dz * dz;
  };

  out.assign(n, 0.0);
  for (std::size_t k = 0; k < n; ++k) {
    const Position3& p = points[order[k]];
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t j = k + 1; j < n; ++j) {
      const double dx = points[order[j]].x_nm - p.x_nm;
      if (dx * dx >= best) break;
      best = std::min(best, dist2(p, points[order[j]]));
    }
    for (std::size_t j = k; j-- > 0;) {
      const double dx = p.x_nm - points[order[j]].x_nm;
      if (dx * dx >= best) break;
      best = std::min(best, dist2(p, points[order[j]]));
    }
    out[order[k]] = std::sqrt(best);
  }
  return out;
}

void NnAccumulator::add_frame(std::span<const Position3> points, NnMetric metric) {
  if (points.size() < 2) return;
  for (double d : nearest_neighbor_distances(points, metric)) sum_nm += d;
  count += points.size();
}

double NnAccumulator::mean() const {
  if (count == 0)
    throw std::domain_error("mean nearest-neighbour distance undefined: no frame has >= 2 emitters");
  return sum_nm / static_cast<double>(count);
}

double mean_nn_distance(const EmitterDataset& dataset, NnMetric metric) {
  NnAccumulator acc;
  std::vector<Position3> points;
  for (const auto& frame : dataset) {
    points.clear();
    for (const auto& e : frame) points.push_back(e.position());
    acc.add_frame(points, metric);
  }
  return acc.mean();
}

bool NnCurve::is_monotone() const noexcept {
  for (std::size_t i = 1; i < entries.size(); ++i) {
    if (!(entries[i].density > entries[i - 1].density)) return false;
    if (!(entries[i].mean_nn_nm < entries[i - 1].mean_nn_nm)) return false;
  }
  return !entries.empty();
}

nlohmann::json NnCurve::to_json() const {
  nlohmann::json j;
  j["format_version"] = kFormatVersion;
  j["geometry"] = {{"width_px", geometry.width_px},       {"height_px", geometry.height_px},
                   {"pixel_size_nm", geometry.pixel_size_nm}, {"z_min_nm", geometry.z_min_nm},
                   {"z_max_nm", geometry.z_max_nm}};
  j["entries"] = nlohmann::json::array();
  for (const auto& e : entries) j["entries"].push_back({{"density", e.density}, {"mean_nn_nm", e.mean_nn_nm}});
  j["mc_frames_per_entry"] = mc_frames_per_entry;
  j["seed"] = seed;
  return j;
}

NnCurve NnCurve::from_json(const nlohmann::json& j) {
  if (j.at("format_version").get<int>() != kFormatVersion)
    throw std::runtime_error("unsupported NN curve format_version");
  NnCurve c;
  const auto& g = j.at("geometry");
  c.geometry.width_px = g.at("width_px").get<int>();
  c.geometry.height_px = g.at("height_px").get<int>();
  c.geometry.pixel_size_nm = g.at("pixel_size_nm").get<double>();
  c.geometry.z_min_nm = g.at("z_min_nm").get<double>();
  c.geometry.z_max_nm = g.at("z_max_nm").get<double>();
  for (const auto& e : j.at("entries"))
    c.entries.push_back({e.at("density").get<double>(), e.at("mean_nn_nm").get<double>()});
  c.mc_frames_per_entry = j.at("mc_frames_per_entry").get<std::uint64_t>();
  c.seed = j.at("seed").get<std::uint64_t>();
  if (!c.is_monotone()) throw std::runtime_error("NN curve entries are not monotone");
  return c;
}

NnCurve build_csr_curve(const FrameGeometry& geometry, std::span<const double> densities,
                        std::uint64_t mc_frames_per_entry, std::uint64_t seed, unsigned threads) {
  geometry.validate();
  if (densities.empty()) throw std::invalid_argument("build_csr_curve: no densities");
  if (mc_frames_per_entry < 1000)
    throw std::invalid_argument("build_csr_curve: mc_frames_per_entry must be >= 1000");
  for (std::size_t i = 0; i < densities.size(); ++i) {
    if (!(densities[i] > 0.0)) throw std::invalid_argument("build_csr_curve: densities must be > 0");
    if (i > 0 && !(densities[i] > densities[i - 1]))
      throw std::invalid_argument("build_csr_curve: densities must be strictly ascending");
  }

  // Fixed-size chunks keep the reduction order independent of the worker count.
  constexpr std::uint64_t kChunk = 4096;
  const std::uint64_t chunks_per_entry = (mc_frames_per_entry + kChunk - 1) / kChunk;
  const std::size_t n_tasks = densities.size() * chunks_per_entry;
  std::vector<NnAccumulator> partial(n_tasks);

  parallel_for(n_tasks, threads, [&](std::size_t task) {
    const std::size_t entry = task / chunks_per_entry;
    const std::uint64_t chunk = task % chunks_per_entry;
    const std::uint64_t first = chunk * kChunk;
    const std::uint64_t last = std::min(first + kChunk, mc_frames_per_entry);
    NnAccumulator acc;
    for (std::uint64_t f = first; f < last; ++f) {
      auto rng = RandomStream::derive(seed, StreamPurpose::curve,
                                      (static_cast<std::uint64_t>(entry) << 40) | f);
      acc.add_frame(sample_csr(geometry, densities[entry], rng), NnMetric::lateral2d);
    }
    partial[task] = acc;
  });

  NnCurve curve;
  curve.geometry = geometry;
  curve.mc_frames_per_entry = mc_frames_per_entry;
  curve.seed = seed;
  for (std::size_t e = 0; e < densities.size(); ++e) {
    NnAccumulator acc;
    for (std::uint64_t c = 0; c < chunks_per_entry; ++c) acc.merge(partial[e * chunks_per_entry + c]);
    curve.entries.push_back({densities[e], acc.mean()});
  }
  if (!curve.is_monotone())
    throw std::runtime_error(
        "CSR curve is not monotone; increase mc_frames_per_entry or widen the density spacing");
  return curve;
}

NominalDensity density_for_mean_nn(double mean_nn_nm, const NnCurve& curve) {
  if (!curve.is_monotone()) throw std::invalid_argument("nominal density needs a monotone curve");
  const auto& en = curve.entries;
  NominalDensity out;
  out.mean_nn_nm = mean_nn_nm;
  for (const auto& e : en) {
    if (e.mean_nn_nm == mean_nn_nm) {
      out.value = e.density;
      return out;
    }
  }
  if (en.size() == 1) {
    // A single knot carries no slope information.
    out.value = en[0].density;
    out.extrapolated = true;
    return out;
  }

  std::size_t seg = 0;
  if (mean_nn_nm > en.front().mean_nn_nm) {
    out.extrapolated = true;
  } else if (mean_nn_nm < en.back().mean_nn_nm) {
    out.extrapolated = true;
    seg = en.size() - 2;
  } else {
    while (seg + 2 < en.size() && mean_nn_nm < en[seg + 1].mean_nn_nm) ++seg;
  }
  const auto& a = en[seg];
  const auto& b = en[seg + 1];
  out.value = a.density + (mean_nn_nm - a.mean_nn_nm) * (b.density - a.density) /
                              (b.mean_nn_nm - a.mean_nn_nm);
  return out;
}

NominalDensity nominal_density(const EmitterDataset& dataset, const NnCurve& curve) {
  return density_for_mean_nn(mean_nn_distance(dataset, NnMetric::lateral2d), curve);
}

std::vector<double> geometric_densities(double lo, double hi, int count) {
  if (!(lo > 0.0) || !(hi >= lo) || count < 1)
    throw std::invalid_argument("geometric_densities: need 0 < lo <= hi and count >= 1");
  std::vector<double> out;
  if (count == 1) return {lo};
  const double ratio = std::log(hi / lo) / (count - 1);
  for (int i = 0; i < count; ++i) out.push_back(lo * std::exp(ratio * i));
  out.back() = hi;
  return out;
}

}  // namespace smlm
