#include "smlmsim/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "smlmsim/parallel.hpp"

namespace smlm {

namespace {

std::uint64_t frame_index(std::int64_t frame_id) {
  if (frame_id < 0) throw std::invalid_argument("frame id must be non-negative");
  return static_cast<std::uint64_t>(frame_id);
}

std::vector<Position3> sample_positions(const SimulationConfig& c, std::int64_t frame_id) {
  auto rng = RandomStream::derive(c.master_seed, StreamPurpose::sampling, frame_index(frame_id));
  if (c.sampling_mode == SamplingMode::csr) return sample_csr(c.geometry, c.density, rng);
  const PointCloud cloud = build_helix_cloud(c.geometry, c.helix, rng);
  return select_frame_emitters(cloud, c.density, rng);
}

}  // namespace

PointCloud regenerate_cloud(const SimulationConfig& config, std::int64_t frame_id) {
  auto rng = RandomStream::derive(config.master_seed, StreamPurpose::sampling, frame_index(frame_id));
  return build_helix_cloud(config.geometry, config.helix, rng);
}

FrameEmitters simulate_frame_emitters(const SimulationConfig& config, std::int64_t frame_id) {
  const auto positions = sample_positions(config, frame_id);
  auto rng = RandomStream::derive(config.master_seed, StreamPurpose::photons, frame_index(frame_id));
  auto emitters = assign_photons(positions, config.photon_model, rng);
  for (auto& e : emitters) {
    e.frame_id = frame_id;
    if (!config.geometry.contains(e.x_nm, e.y_nm, e.z_nm))
      throw std::logic_error("sampled emitter outside the frame domain");
  }
  return emitters;
}

SimulatedFrame simulate_frame(const SimulationConfig& config, std::int64_t frame_id) {
  SimulatedFrame out;
  out.emitters = simulate_frame_emitters(config, frame_id);
  const Frame expected = render_frame(out.emitters, config.geometry, config.psf, config.background_photons);
  auto rng = RandomStream::derive(config.master_seed, StreamPurpose::noise, frame_index(frame_id));
  out.counts = apply_noise(expected, config.camera, rng);
  return out;
}

DatasetManifest generate_dataset(const SimulationConfig& config, const std::filesystem::path& out_dir,
                                 unsigned threads) {
  config.validate();
  std::filesystem::create_directories(out_dir);

  DatasetManifest manifest;
  manifest.config = config;
  manifest.frame_file = kFrameFileName;
  manifest.gt_file = kGtFileName;

  std::ofstream frames_out(out_dir / kFrameFileName, std::ios::binary);
  std::ofstream gt_out(out_dir / kGtFileName, std::ios::binary);
  if (!frames_out || !gt_out) throw FormatError("cannot write dataset files in " + out_dir.string());
  gt_out << kCsvHeader << '\n';

  // Workers fill one block of frames; a single writer appends it in order.
  constexpr std::int64_t kBlock = 256;
  Fnv1a64 hash;
  std::vector<SimulatedFrame> block;
  std::vector<std::uint8_t> bytes;
  std::string csv;
  for (std::int64_t first = 0; first < config.n_frames; first += kBlock) {
    const std::int64_t count = std::min(kBlock, config.n_frames - first);
    block.assign(static_cast<std::size_t>(count), {});
    parallel_for(static_cast<std::size_t>(count), threads, [&](std::size_t i) {
      block[i] = simulate_frame(config, first + static_cast<std::int64_t>(i));
    });

    bytes.clear();
    csv.clear();
    for (const auto& f : block) {
      append_frame_bytes(f.counts, bytes);
      for (const auto& e : f.emitters) csv += format_csv_row(e);
    }
    hash.update(bytes);
    frames_out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    gt_out << csv;
    if (!frames_out || !gt_out) throw FormatError("write failed in " + out_dir.string());
  }
  frames_out.close();
  gt_out.close();

  manifest.checksum = hash.value();
  write_manifest(out_dir, manifest);
  return manifest;
}

LoadedDataset load_dataset(const std::filesystem::path& dir) {
  LoadedDataset d;
  d.manifest = read_manifest(dir, true);
  d.frames = read_frames(dir / d.manifest.frame_file, d.manifest.config.geometry);
  if (static_cast<std::int64_t>(d.frames.size()) != d.manifest.config.n_frames)
    throw FormatError("frame count does not match the manifest");
  d.ground_truth = read_emitter_csv(dir / d.manifest.gt_file, d.frames.size());
  return d;
}

// ============================================================================
// Density sweep
// ============================================================================
namespace {

// Per-frame (sum of NN distances, contributing emitters) from positions only.
struct PilotStats {
  double mean_nn = 0.0;
  double ratio_variance = 0.0;  // per-frame variance of the linearized ratio
};

PilotStats run_pilot(const SimulationConfig& config, std::uint64_t frames, unsigned threads) {
  std::vector<double> sums(frames), counts(frames);
  parallel_for(static_cast<std::size_t>(frames), threads, [&](std::size_t f) {
    auto rng = RandomStream::derive(config.master_seed, StreamPurpose::pilot, f);
    std::vector<Position3> pos;
    if (config.sampling_mode == SamplingMode::csr) {
      pos = sample_csr(config.geometry, config.density, rng);
    } else {
      const auto cloud = build_helix_cloud(config.geometry, config.helix, rng);
      pos = select_frame_emitters(cloud, config.density, rng);
    }
    NnAccumulator acc;
    acc.add_frame(pos, NnMetric::lateral2d);
    sums[f] = acc.sum_nm;
    counts[f] = static_cast<double>(acc.count);
  });

  double s = 0.0, c = 0.0;
  for (std::size_t f = 0; f < frames; ++f) {
    s += sums[f];
    c += counts[f];
  }
  if (c == 0.0) throw std::domain_error("pilot run produced no frame with >= 2 emitters");
  PilotStats out;
  out.mean_nn = s / c;
  const double c_bar = c / static_cast<double>(frames);
  double v = 0.0;
  for (std::size_t f = 0; f < frames; ++f) {
    const double r = sums[f] - out.mean_nn * counts[f];
    v += r * r;
  }
  out.ratio_variance = v / static_cast<double>(frames - 1) / (c_bar * c_bar);
  return out;
}

double curve_slope(const NnCurve& curve, double density) {
  const auto& en = curve.entries;
  std::size_t seg = 0;
  while (seg + 2 < en.size() && en[seg + 1].density < density) ++seg;
  return (en[seg + 1].mean_nn_nm - en[seg].mean_nn_nm) / (en[seg + 1].density - en[seg].density);
}

std::string dataset_dir_name(std::size_t index, double target) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "nd%02zu_%.3f", index, target);
  return buf;
}

}  // namespace

std::uint64_t frames_for_precision(const SimulationConfig& config, double count_density,
                                   const NnCurve& curve, double precision,
                                   std::uint64_t pilot_frames, unsigned threads) {
  if (curve.entries.size() < 2) throw std::invalid_argument("frames_for_precision: curve too short");
  SimulationConfig pilot_cfg = config;
  pilot_cfg.density = count_density;
  const PilotStats stats = run_pilot(pilot_cfg, pilot_frames, threads);
  const NominalDensity nominal = density_for_mean_nn(stats.mean_nn, curve);
  const double slope = std::abs(curve_slope(curve, nominal.value));
  const double allowed_se_nm = precision * nominal.value * slope;
  return static_cast<std::uint64_t>(std::ceil(stats.ratio_variance / (allowed_se_nm * allowed_se_nm)));
}

nlohmann::json SweepReport::to_json() const {
  nlohmann::json j;
  j["format_version"] = 1;
  j["curve"] = curve.to_json();
  j["datasets"] = nlohmann::json::array();
  for (const auto& e : entries) {
    j["datasets"].push_back({{"target_nominal_density", e.target},
                             {"count_density", e.count_density},
                             {"n_frames", e.n_frames},
                             {"nominal_density", e.nominal_density},
                             {"extrapolated", e.extrapolated},
                             {"directory", e.directory.generic_string()}});
  }
  return j;
}

SweepReport run_sweep(const SimulationConfig& base, const std::filesystem::path& out_dir,
                      const SweepOptions& options, unsigned threads) {
  base.validate();
  if (options.targets.empty()) throw std::invalid_argument("sweep: no target densities");
  if (!(options.precision > 0.0)) throw std::invalid_argument("sweep: precision must be positive");
  if (options.pilot_frames < 2) throw std::invalid_argument("sweep: pilot_frames must be >= 2");
  std::filesystem::create_directories(out_dir);

  SweepReport report;
  report.curve = build_csr_curve(base.geometry, options.curve_densities,
                                 options.curve_frames_per_entry, base.master_seed, threads);
  {
    std::ofstream out(out_dir / "curve.json", std::ios::binary);
    out << report.curve.to_json().dump(2) << '\n';
  }

  for (std::size_t t = 0; t < options.targets.size(); ++t) {
    const double target = options.targets[t];
    SimulationConfig cfg = base;
    cfg.master_seed = splitmix64(base.master_seed ^ (0x5eedULL + t));

    // CSR frames are their own reference; structured frames need the count
    // density that yields the target nominal density.
    cfg.density = target;
    if (cfg.sampling_mode == SamplingMode::structured) {
      for (int round = 0; round < options.calibration_rounds; ++round) {
        const PilotStats s = run_pilot(cfg, options.pilot_frames, threads);
        const double nominal = density_for_mean_nn(s.mean_nn, report.curve).value;
        if (!(nominal > 0.0)) break;
        cfg.density *= target / nominal;
      }
    }

    const std::uint64_t needed =
        frames_for_precision(cfg, cfg.density, report.curve, options.precision, options.pilot_frames, threads);
    const std::uint64_t frames = std::min<std::uint64_t>(
        std::max<std::uint64_t>(needed, static_cast<std::uint64_t>(base.n_frames)),
        options.max_frames_per_dataset);
    cfg.n_frames = static_cast<std::int64_t>(frames);

    SweepEntry entry;
    entry.target = target;
    entry.count_density = cfg.density;
    entry.n_frames = cfg.n_frames;
    entry.directory = dataset_dir_name(t, target);
    generate_dataset(cfg, out_dir / entry.directory, threads);

    const auto gt = read_emitter_csv(out_dir / entry.directory / kGtFileName, frames);
    const NominalDensity nd = nominal_density(gt, report.curve);
    entry.nominal_density = nd.value;
    entry.extrapolated = nd.extrapolated;
    report.entries.push_back(entry);
  }

  std::ofstream out(out_dir / "sweep.json", std::ios::binary);
  out << report.to_json().dump(2) << '\n';
  return report;
}

// ============================================================================
// Reconstruction
// ============================================================================
GrayImage render_reconstruction(const EmitterDataset& localizations, const FrameGeometry& geometry,
                                int upsample, double display_gamma) {
  geometry.validate();
  if (upsample < 1) throw std::invalid_argument("upsample must be >= 1");
  GrayImage img;
  img.width = geometry.width_px * upsample;
  img.height = geometry.height_px * upsample;
  img.pixels.assign(static_cast<std::size_t>(img.width) * static_cast<std::size_t>(img.height), 0);

  const double bin = geometry.pixel_size_nm / upsample;
  std::vector<std::uint32_t> hist(img.pixels.size(), 0);
  for (const auto& frame : localizations) {
    for (const auto& e : frame) {
      const double bx = std::floor(e.x_nm / bin);
      const double by = std::floor(e.y_nm / bin);
      if (bx < 0 || by < 0 || bx >= img.width || by >= img.height) continue;
      ++hist[static_cast<std::size_t>(by) * static_cast<std::size_t>(img.width) + static_cast<std::size_t>(bx)];
    }
  }
  const std::uint32_t peak = *std::max_element(hist.begin(), hist.end());
  if (peak == 0) return img;
  for (std::size_t i = 0; i < hist.size(); ++i) {
    if (hist[i] == 0) continue;
    const double v = 255.0 * std::pow(static_cast<double>(hist[i]) / peak, display_gamma);
    img.pixels[i] = static_cast<std::uint8_t>(std::clamp(std::lround(v), 1L, 255L));
  }
  return img;
}

}  // namespace smlm
