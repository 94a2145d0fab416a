// ============================================================================
// io.hpp -- configuration, emitter CSV, raw frame stacks, PNG
//
// Frame stack format: little-endian uint16 pixels, row-major, frames
// concatenated, no header. Dimensions and frame count live in the JSON
// manifest next to it.
//
// Emitter CSV: mandatory header `frame,x_nm,y_nm,z_nm,photons`, LF line
// endings, '.' decimal separator; positions written to 0.001 nm and
// photons to 0.01.
// ============================================================================
#pragma once
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "smlmsim/camera.hpp"
#include "smlmsim/optics.hpp"
#include "smlmsim/sampler.hpp"
#include "smlmsim/types.hpp"

namespace smlm {

/// I/O or format failure; `line` is 1-based when the error is tied to one.
class FormatError : public std::runtime_error {
public:
  FormatError(const std::string& what, std::size_t line = 0)
      : std::runtime_error(line ? what + " (line " + std::to_string(line) + ")" : what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

private:
  std::size_t line_;
};

enum class SamplingMode { csr, structured };

struct SimulationConfig {
  FrameGeometry geometry;
  AstigmaticPsf psf;
  CameraModel camera;
  PhotonModel photon_model;
  SamplingMode sampling_mode = SamplingMode::csr;
  HelixParams helix;
  double density = 5.0;
  std::int64_t n_frames = 1000;
  std::uint64_t master_seed = 0;
  double background_photons = 50.0;

  void validate() const;
};

/// Sectioned key = value text. Absent keys keep their defaults; unknown
/// sections or keys are rejected.
SimulationConfig parse_config(std::istream& in);
SimulationConfig load_config(const std::filesystem::path& path);
std::string format_config(const SimulationConfig& config);

nlohmann::json config_to_json(const SimulationConfig& config);
SimulationConfig config_from_json(const nlohmann::json& j);

// ---------------------------------------------------------------------------
// Emitter CSV
// ---------------------------------------------------------------------------
inline constexpr const char* kCsvHeader = "frame,x_nm,y_nm,z_nm,photons";

/// One CSV line (with trailing LF).
std::string format_csv_row(const Emitter& e);
void write_emitter_csv(std::ostream& out, const EmitterDataset& dataset);
void write_emitter_csv(const std::filesystem::path& path, const EmitterDataset& dataset);

/// Frame i of the result holds rows with frame == i; the dataset is at least
/// `min_frames` long. Throws FormatError with the offending line number.
EmitterDataset read_emitter_csv(std::istream& in, std::size_t min_frames = 0);
EmitterDataset read_emitter_csv(const std::filesystem::path& path, std::size_t min_frames = 0);

// ---------------------------------------------------------------------------
// Raw frames and manifest
// ---------------------------------------------------------------------------
/// Appends the frame as little-endian uint16 pixels.
void append_frame_bytes(const Frame& counts, std::vector<std::uint8_t>& out);
std::vector<Frame> decode_frames(std::span<const std::uint8_t> bytes, const FrameGeometry& g);
std::vector<Frame> read_frames(const std::filesystem::path& path, const FrameGeometry& g);

/// Streaming FNV-1a 64-bit hash.
class Fnv1a64 {
public:
  void update(std::span<const std::uint8_t> bytes) noexcept {
    for (auto b : bytes) {
      h_ ^= b;
      h_ *= 0x100000001b3ULL;
    }
  }
  std::uint64_t value() const noexcept { return h_; }

private:
  std::uint64_t h_ = 0xcbf29ce484222325ULL;
};

std::uint64_t file_checksum(const std::filesystem::path& path);
std::string checksum_hex(std::uint64_t v);

struct DatasetManifest {
  static constexpr int kFormatVersion = 1;

  SimulationConfig config;
  std::filesystem::path frame_file;  ///< relative to the manifest directory
  std::filesystem::path gt_file;
  int format_version = kFormatVersion;
  std::uint64_t checksum = 0;

  nlohmann::json to_json() const;
  static DatasetManifest from_json(const nlohmann::json& j);
};

inline constexpr const char* kManifestName = "manifest.json";

void write_manifest(const std::filesystem::path& dir, const DatasetManifest& m);
/// Reads `dir/manifest.json` and verifies the frame checksum.
DatasetManifest read_manifest(const std::filesystem::path& dir, bool verify_checksum = true);

// ---------------------------------------------------------------------------
// 8-bit grayscale images
// ---------------------------------------------------------------------------
struct GrayImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;  ///< row-major, row 0 at the top
};

void write_png(const std::filesystem::path& path, const GrayImage& image);
GrayImage read_png(const std::filesystem::path& path);

}  // namespace smlm
