// ============================================================================
// pipeline.hpp -- on-the-fly frame generation, density sweeps, reconstruction
// ============================================================================
#pragma once
#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include <json.hpp>

#include "smlmsim/density.hpp"
#include "smlmsim/io.hpp"

namespace smlm {

/// Emitters of frame `frame_id`. Structured mode builds a fresh cloud for
/// every frame from the frame's sampling substream.
FrameEmitters simulate_frame_emitters(const SimulationConfig& config, std::int64_t frame_id);

/// The structure cloud frame `frame_id` samples from (structured mode).
PointCloud regenerate_cloud(const SimulationConfig& config, std::int64_t frame_id);

struct SimulatedFrame {
  FrameEmitters emitters;
  Frame counts;
};

SimulatedFrame simulate_frame(const SimulationConfig& config, std::int64_t frame_id);

inline constexpr const char* kFrameFileName = "frames.raw";
inline constexpr const char* kGtFileName = "ground_truth.csv";

/// Writes frames.raw, ground_truth.csv and manifest.json into `out_dir`.
/// Output bytes do not depend on `threads`.
DatasetManifest generate_dataset(const SimulationConfig& config,
                                 const std::filesystem::path& out_dir, unsigned threads = 1);

struct LoadedDataset {
  DatasetManifest manifest;
  std::vector<Frame> frames;
  EmitterDataset ground_truth;
};

LoadedDataset load_dataset(const std::filesystem::path& dir);

// ---------------------------------------------------------------------------
// Density sweep
// ---------------------------------------------------------------------------
struct SweepOptions {
  std::vector<double> targets = geometric_densities(0.38, 13.0, 9);
  /// Reference curve knots; must bracket the targets.
  std::vector<double> curve_densities = geometric_densities(0.2, 20.0, 33);
  std::uint64_t curve_frames_per_entry = 400000;
  /// Relative standard error aimed for in each measured nominal density.
  double precision = 0.03;
  std::uint64_t pilot_frames = 20000;
  std::uint64_t max_frames_per_dataset = 5000000;
  int calibration_rounds = 4;
};

struct SweepEntry {
  double target = 0.0;
  double count_density = 0.0;  ///< emitters/frame fed to the sampler
  std::int64_t n_frames = 0;
  double nominal_density = 0.0;  ///< measured on the written ground truth
  bool extrapolated = false;
  std::filesystem::path directory;
};

struct SweepReport {
  NnCurve curve;
  std::vector<SweepEntry> entries;

  nlohmann::json to_json() const;
};

/// One dataset per target nominal density, each sized so its nominal
/// density is measured to about `precision`.
SweepReport run_sweep(const SimulationConfig& base, const std::filesystem::path& out_dir,
                      const SweepOptions& options = {}, unsigned threads = 1);

/// Frames needed for the nominal density at `count_density` to reach the
/// relative standard error `precision`, from a positions-only pilot.
std::uint64_t frames_for_precision(const SimulationConfig& config, double count_density,
                                   const NnCurve& curve, double precision,
                                   std::uint64_t pilot_frames, unsigned threads = 1);

// ---------------------------------------------------------------------------
// Reconstruction
// ---------------------------------------------------------------------------
/// 2D localization histogram at pixel_size / upsample, display-scaled as
/// 255 * (count / max)^gamma.
GrayImage render_reconstruction(const EmitterDataset& localizations, const FrameGeometry& geometry,
                                int upsample = 10, double display_gamma = 0.5);

}  // namespace smlm
