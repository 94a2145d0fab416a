#include "smlmsim/io.hpp"

#include <charconv>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iterator>
#include <map>
#include <set>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <png.h>

namespace smlm {

// ============================================================================
// Configuration
// ============================================================================
void SimulationConfig::validate() const {
  geometry.validate();
  psf.validate();
  camera.validate();
  photon_model.validate();
  helix.validate();
  if (n_frames < 1) throw std::invalid_argument("n_frames must be >= 1");
  if (!(density >= 0.0)) throw std::invalid_argument("density must be non-negative");
  if (!(background_photons >= 0.0)) throw std::invalid_argument("background_photons must be non-negative");
}

namespace {

namespace pt = boost::property_tree;

const std::set<std::string>& known_keys(const std::string& section) {
  static const std::map<std::string, std::set<std::string>> keys{
      {"geometry", {"width_px", "height_px", "pixel_size_nm", "z_min_nm", "z_max_nm"}},
      {"psf", {"sigma0_nm", "gamma_nm", "d_nm"}},
      {"camera", {"read_noise_e", "gain_adu_per_e", "baseline_adu", "quantum_efficiency"}},
      {"photon_model", {"mode", "mean_photons", "gamma_shape"}},
      {"helix",
       {"n_structures", "seeds_per_structure", "strands_per_structure", "helix_radius_nm",
        "pitch_nm", "jitter_sigma_nm"}},
      {"simulation", {"sampling_mode", "density", "n_frames", "master_seed", "background_photons"}},
  };
  const auto it = keys.find(section);
  if (it == keys.end()) throw FormatError("unknown config section [" + section + "]");
  return it->second;
}

template <class T>
void read_key(const pt::ptree& tree, const char* path, T& value) {
  if (const auto v = tree.get_optional<std::string>(path)) {
    try {
      value = tree.get<T>(path);
    } catch (const pt::ptree_error&) {
      throw FormatError(std::string("invalid value for ") + path + ": '" + *v + "'");
    }
  }
}

const char* to_string(SamplingMode m) { return m == SamplingMode::csr ? "csr" : "structured"; }
const char* to_string(PhotonMode m) { return m == PhotonMode::fixed ? "fixed" : "gamma"; }

SamplingMode sampling_mode_from(const std::string& s) {
  if (s == "csr") return SamplingMode::csr;
  if (s == "structured") return SamplingMode::structured;
  throw FormatError("sampling_mode must be 'csr' or 'structured', got '" + s + "'");
}

PhotonMode photon_mode_from(const std::string& s) {
  if (s == "fixed") return PhotonMode::fixed;
  if (s == "gamma") return PhotonMode::gamma;
  throw FormatError("photon_model.mode must be 'fixed' or 'gamma', got '" + s + "'");
}

}  // namespace

SimulationConfig parse_config(std::istream& in) {
  pt::ptree tree;
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw FormatError("config: " + e.message(), e.line());
  }
  for (const auto& [section, body] : tree) {
    if (body.empty() && !body.data().empty())
      throw FormatError("config key '" + section + "' must live inside a [section]");
    const auto& allowed = known_keys(section);
    for (const auto& [key, unused] : body)
      if (!allowed.contains(key)) throw FormatError("unknown config key " + section + "." + key);
  }

  SimulationConfig c;
  read_key(tree, "geometry.width_px", c.geometry.width_px);
  read_key(tree, "geometry.height_px", c.geometry.height_px);
  read_key(tree, "geometry.pixel_size_nm", c.geometry.pixel_size_nm);
  read_key(tree, "geometry.z_min_nm", c.geometry.z_min_nm);
  read_key(tree, "geometry.z_max_nm", c.geometry.z_max_nm);
  read_key(tree, "psf.sigma0_nm", c.psf.sigma0_nm);
  read_key(tree, "psf.gamma_nm", c.psf.gamma_nm);
  read_key(tree, "psf.d_nm", c.psf.d_nm);
  read_key(tree, "camera.read_noise_e", c.camera.read_noise_e);
  read_key(tree, "camera.gain_adu_per_e", c.camera.gain_adu_per_e);
  read_key(tree, "camera.baseline_adu", c.camera.baseline_adu);
  read_key(tree, "camera.quantum_efficiency", c.camera.quantum_efficiency);
  if (auto mode = tree.get_optional<std::string>("photon_model.mode"))
    c.photon_model.mode = photon_mode_from(*mode);
  read_key(tree, "photon_model.mean_photons", c.photon_model.mean_photons);
  read_key(tree, "photon_model.gamma_shape", c.photon_model.gamma_shape);
  read_key(tree, "helix.n_structures", c.helix.n_structures);
  read_key(tree, "helix.seeds_per_structure", c.helix.seeds_per_structure);
  read_key(tree, "helix.strands_per_structure", c.helix.strands_per_structure);
  read_key(tree, "helix.helix_radius_nm", c.helix.helix_radius_nm);
  read_key(tree, "helix.pitch_nm", c.helix.pitch_nm);
  read_key(tree, "helix.jitter_sigma_nm", c.helix.jitter_sigma_nm);
  if (auto mode = tree.get_optional<std::string>("simulation.sampling_mode"))
    c.sampling_mode = sampling_mode_from(*mode);
  read_key(tree, "simulation.density", c.density);
  read_key(tree, "simulation.n_frames", c.n_frames);
  read_key(tree, "simulation.master_seed", c.master_seed);
  read_key(tree, "simulation.background_photons", c.background_photons);

  c.validate();
  return c;
}

SimulationConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open config file " + path.string());
  return parse_config(in);
}

std::string format_config(const SimulationConfig& c) {
  std::ostringstream o;
  o.precision(17);
  o << "[geometry]\n"
    << "width_px = " << c.geometry.width_px << "\nheight_px = " << c.geometry.height_px
    << "\npixel_size_nm = " << c.geometry.pixel_size_nm << "\nz_min_nm = " << c.geometry.z_min_nm
    << "\nz_max_nm = " << c.geometry.z_max_nm << "\n\n[psf]\n"
    << "sigma0_nm = " << c.psf.sigma0_nm << "\ngamma_nm = " << c.psf.gamma_nm
    << "\nd_nm = " << c.psf.d_nm << "\n\n[camera]\n"
    << "read_noise_e = " << c.camera.read_noise_e << "\ngain_adu_per_e = " << c.camera.gain_adu_per_e
    << "\nbaseline_adu = " << c.camera.baseline_adu
    << "\nquantum_efficiency = " << c.camera.quantum_efficiency << "\n\n[photon_model]\n"
    << "mode = " << to_string(c.photon_model.mode) << "\nmean_photons = " << c.photon_model.mean_photons
    << "\ngamma_shape = " << c.photon_model.gamma_shape << "\n\n[helix]\n"
    << "n_structures = " << c.helix.n_structures
    << "\nseeds_per_structure = " << c.helix.seeds_per_structure
    << "\nstrands_per_structure = " << c.helix.strands_per_structure
    << "\nhelix_radius_nm = " << c.helix.helix_radius_nm << "\npitch_nm = " << c.helix.pitch_nm
    << "\njitter_sigma_nm = " << c.helix.jitter_sigma_nm << "\n\n[simulation]\n"
    << "sampling_mode = " << to_string(c.sampling_mode) << "\ndensity = " << c.density
    << "\nn_frames = " << c.n_frames << "\nmaster_seed = " << c.master_seed
    << "\nbackground_photons = " << c.background_photons << "\n";
  return o.str();
}

nlohmann::json config_to_json(const SimulationConfig& c) {
  return {
      {"geometry",
       {{"width_px", c.geometry.width_px},
        {"height_px", c.geometry.height_px},
        {"pixel_size_nm", c.geometry.pixel_size_nm},
        {"z_min_nm", c.geometry.z_min_nm},
        {"z_max_nm", c.geometry.z_max_nm}}},
      {"psf", {{"sigma0_nm", c.psf.sigma0_nm}, {"gamma_nm", c.psf.gamma_nm}, {"d_nm", c.psf.d_nm}}},
      {"camera",
       {{"read_noise_e", c.camera.read_noise_e},
        {"gain_adu_per_e", c.camera.gain_adu_per_e},
        {"baseline_adu", c.camera.baseline_adu},
        {"quantum_efficiency", c.camera.quantum_efficiency}}},
      {"photon_model",
       {{"mode", to_string(c.photon_model.mode)},
        {"mean_photons", c.photon_model.mean_photons},
        {"gamma_shape", c.photon_model.gamma_shape}}},
      {"helix",
       {{"n_structures", c.helix.n_structures},
        {"seeds_per_structure", c.helix.seeds_per_structure},
        {"strands_per_structure", c.helix.strands_per_structure},
        {"helix_radius_nm", c.helix.helix_radius_nm},
        {"pitch_nm", c.helix.pitch_nm},
        {"jitter_sigma_nm", c.helix.jitter_sigma_nm}}},
      {"sampling_mode", to_string(c.sampling_mode)},
      {"density", c.density},
      {"n_frames", c.n_frames},
      {"master_seed", c.master_seed},
      {"background_photons", c.background_photons},
  };
}

SimulationConfig config_from_json(const nlohmann::json& j) {
  SimulationConfig c;
  const auto& g = j.at("geometry");
  c.geometry = {g.at("width_px").get<int>(), g.at("height_px").get<int>(),
                g.at("pixel_size_nm").get<double>(), g.at("z_min_nm").get<double>(),
                g.at("z_max_nm").get<double>()};
  const auto& p = j.at("psf");
  c.psf = {p.at("sigma0_nm").get<double>(), p.at("gamma_nm").get<double>(), p.at("d_nm").get<double>()};
  const auto& cam = j.at("camera");
  c.camera = {cam.at("read_noise_e").get<double>(), cam.at("gain_adu_per_e").get<double>(),
              cam.at("baseline_adu").get<double>(), cam.at("quantum_efficiency").get<double>()};
  const auto& ph = j.at("photon_model");
  c.photon_model = {photon_mode_from(ph.at("mode").get<std::string>()),
                    ph.at("mean_photons").get<double>(), ph.at("gamma_shape").get<double>()};
  const auto& h = j.at("helix");
  c.helix = {h.at("n_structures").get<int>(),          h.at("seeds_per_structure").get<int>(),
             h.at("strands_per_structure").get<int>(), h.at("helix_radius_nm").get<double>(),
             h.at("pitch_nm").get<double>(),           h.at("jitter_sigma_nm").get<double>()};
  c.sampling_mode = sampling_mode_from(j.at("sampling_mode").get<std::string>());
  c.density = j.at("density").get<double>();
  c.n_frames = j.at("n_frames").get<std::int64_t>();
  c.master_seed = j.at("master_seed").get<std::uint64_t>();
  c.background_photons = j.at("background_photons").get<double>();
  c.validate();
  return c;
}

// ============================================================================
// Emitter CSV
// ============================================================================
std::string format_csv_row(const Emitter& e) {
  char buf[160];
  const int n = std::snprintf(buf, sizeof buf, "%lld,%.3f,%.3f,%.3f,%.2f\n",
                              static_cast<long long>(e.frame_id), e.x_nm, e.y_nm, e.z_nm, e.photons);
  return std::string(buf, static_cast<std::size_t>(n));
}

void write_emitter_csv(std::ostream& out, const EmitterDataset& dataset) {
  out << kCsvHeader << '\n';
  for (const auto& frame : dataset)
    for (const auto& e : frame) out << format_csv_row(e);
}

void write_emitter_csv(const std::filesystem::path& path, const EmitterDataset& dataset) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write " + path.string());
  write_emitter_csv(out, dataset);
  if (!out) throw FormatError("write failed for " + path.string());
}

namespace {

template <class T>
T parse_field(std::string_view field, std::size_t line, const char* name) {
  T value{};
  const auto* first = field.data();
  const auto* last = field.data() + field.size();
  const auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last)
    throw FormatError(std::string("invalid ") + name + " value '" + std::string(field) + "'", line);
  return value;
}

}  // namespace

EmitterDataset read_emitter_csv(std::istream& in, std::size_t min_frames) {
  EmitterDataset out(min_frames);
  std::string line;
  std::size_t line_no = 0;
  if (!std::getline(in, line)) throw FormatError("empty CSV: header line is mandatory", 1);
  ++line_no;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kCsvHeader) throw FormatError("unexpected CSV header '" + line + "'", line_no);

  std::string_view fields[5];
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::string_view rest(line);
    std::size_t n = 0;
    for (;;) {
      const auto comma = rest.find(',');
      if (n == 5) throw FormatError("expected 5 columns", line_no);
      fields[n++] = rest.substr(0, comma);
      if (comma == std::string_view::npos) break;
      rest.remove_prefix(comma + 1);
    }
    if (n != 5) throw FormatError("expected 5 columns", line_no);

    Emitter e;
    e.frame_id = parse_field<std::int64_t>(fields[0], line_no, "frame");
    if (e.frame_id < 0) throw FormatError("negative frame id", line_no);
    e.x_nm = parse_field<double>(fields[1], line_no, "x_nm");
    e.y_nm = parse_field<double>(fields[2], line_no, "y_nm");
    e.z_nm = parse_field<double>(fields[3], line_no, "z_nm");
    e.photons = parse_field<double>(fields[4], line_no, "photons");
    const auto f = static_cast<std::size_t>(e.frame_id);
    if (f >= out.size()) out.resize(f + 1);
    out[f].push_back(e);
  }
  return out;
}

EmitterDataset read_emitter_csv(const std::filesystem::path& path, std::size_t min_frames) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  return read_emitter_csv(in, min_frames);
}

// ============================================================================
// Raw frames and manifest
// ============================================================================
void append_frame_bytes(const Frame& counts, std::vector<std::uint8_t>& out) {
  if (counts.kind != FrameKind::counts) throw std::invalid_argument("only counts frames are stored");
  out.reserve(out.size() + 2 * counts.pixels.size());
  for (double v : counts.pixels) {
    const auto u = static_cast<std::uint16_t>(v);
    out.push_back(static_cast<std::uint8_t>(u & 0xff));
    out.push_back(static_cast<std::uint8_t>(u >> 8));
  }
}

std::vector<Frame> decode_frames(std::span<const std::uint8_t> bytes, const FrameGeometry& g) {
  const std::size_t frame_bytes = 2 * g.pixel_count();
  if (bytes.size() % frame_bytes != 0)
    throw FormatError("frame data size is not a multiple of the frame size");
  std::vector<Frame> frames(bytes.size() / frame_bytes);
  for (std::size_t f = 0; f < frames.size(); ++f) {
    Frame fr(g, FrameKind::counts);
    const auto* p = bytes.data() + f * frame_bytes;
    for (std::size_t i = 0; i < fr.pixels.size(); ++i)
      fr.pixels[i] = static_cast<double>(static_cast<std::uint16_t>(p[2 * i] | (p[2 * i + 1] << 8)));
    frames[f] = std::move(fr);
  }
  return frames;
}

std::vector<Frame> read_frames(const std::filesystem::path& path, const FrameGeometry& g) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                        std::istreambuf_iterator<char>());
  return decode_frames(bytes, g);
}

std::uint64_t file_checksum(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  Fnv1a64 h;
  std::vector<char> buf(1 << 16);
  while (in) {
    in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    const auto got = static_cast<std::size_t>(in.gcount());
    h.update({reinterpret_cast<const std::uint8_t*>(buf.data()), got});
  }
  return h.value();
}

std::string checksum_hex(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

nlohmann::json DatasetManifest::to_json() const {
  return {{"format_version", format_version},
          {"width_px", config.geometry.width_px},
          {"height_px", config.geometry.height_px},
          {"n_frames", config.n_frames},
          {"pixel_format", "uint16le"},
          {"frame_file", frame_file.generic_string()},
          {"gt_file", gt_file.generic_string()},
          {"checksum_fnv1a64", checksum_hex(checksum)},
          {"config", config_to_json(config)}};
}

DatasetManifest DatasetManifest::from_json(const nlohmann::json& j) {
  DatasetManifest m;
  m.format_version = j.at("format_version").get<int>();
  if (m.format_version != kFormatVersion) throw FormatError("unsupported manifest format_version");
  m.config = config_from_json(j.at("config"));
  m.frame_file = j.at("frame_file").get<std::string>();
  m.gt_file = j.at("gt_file").get<std::string>();
  const auto hex = j.at("checksum_fnv1a64").get<std::string>();
  const auto [ptr, ec] = std::from_chars(hex.data(), hex.data() + hex.size(), m.checksum, 16);
  if (ec != std::errc() || ptr != hex.data() + hex.size()) throw FormatError("bad manifest checksum field");
  return m;
}

void write_manifest(const std::filesystem::path& dir, const DatasetManifest& m) {
  std::ofstream out(dir / kManifestName, std::ios::binary);
  if (!out) throw FormatError("cannot write manifest in " + dir.string());
  out << m.to_json().dump(2) << '\n';
}

DatasetManifest read_manifest(const std::filesystem::path& dir, bool verify_checksum) {
  std::ifstream in(dir / kManifestName, std::ios::binary);
  if (!in) throw FormatError("cannot open " + (dir / kManifestName).string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("manifest: ") + e.what());
  }
  auto m = DatasetManifest::from_json(j);
  if (verify_checksum && file_checksum(dir / m.frame_file) != m.checksum)
    throw FormatError("frame file checksum does not match the manifest");
  return m;
}

// ============================================================================
// PNG
// ============================================================================
void write_png(const std::filesystem::path& path, const GrayImage& image) {
  png_image img;
  std::memset(&img, 0, sizeof img);
  img.version = PNG_IMAGE_VERSION;
  img.width = static_cast<png_uint_32>(image.width);
  img.height = static_cast<png_uint_32>(image.height);
  img.format = PNG_FORMAT_GRAY;
  if (!png_image_write_to_file(&img, path.c_str(), 0, image.pixels.data(), 0, nullptr))
    throw FormatError("PNG write failed: " + std::string(img.message));
}

GrayImage read_png(const std::filesystem::path& path) {
  png_image img;
  std::memset(&img, 0, sizeof img);
  img.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&img, path.c_str()))
    throw FormatError("PNG read failed: " + std::string(img.message));
  img.format = PNG_FORMAT_GRAY;
  GrayImage out;
  out.width = static_cast<int>(img.width);
  out.height = static_cast<int>(img.height);
  out.pixels.resize(PNG_IMAGE_SIZE(img));
  if (!png_image_finish_read(&img, nullptr, out.pixels.data(), 0, nullptr)) {
    png_image_free(&img);
    throw FormatError("PNG decode failed: " + std::string(img.message));
  }
  return out;
}

}  // namespace smlm
