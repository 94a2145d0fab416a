// ============================================================================
// smlmsim_cli.cpp -- command-line front end
//
//   smlmsim [--config FILE] [--seed N] [--threads N] <command> ...
//
// Commands: generate, sweep, density {build,apply}, localize, evaluate, render.
// Failures exit nonzero and print {"error": {...}} to stderr.
// ============================================================================
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "smlmsim/density.hpp"
#include "smlmsim/io.hpp"
#include "smlmsim/localizer.hpp"
#include "smlmsim/metrics.hpp"
#include "smlmsim/pipeline.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct GlobalOptions {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  unsigned threads = 1;
};

smlm::SimulationConfig resolve_config(const GlobalOptions& g) {
  smlm::SimulationConfig c = g.config_path.empty() ? smlm::SimulationConfig{} : smlm::load_config(g.config_path);
  if (g.seed) c.master_seed = *g.seed;
  c.validate();
  return c;
}

void write_json(const json& j, const std::string& path) {
  if (path.empty() || path == "-") {
    std::cout << j.dump(2) << '\n';
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw smlm::FormatError("cannot write " + path);
  out << j.dump(2) << '\n';
}

int fail(const std::string& type, const std::string& message, int code) {
  std::cerr << json{{"error", {{"type", type}, {"message", message}}}}.dump() << '\n';
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"SMLM frame simulator and localization evaluation toolkit"};
  app.require_subcommand(1);
  GlobalOptions global;
  app.add_option("--config", global.config_path, "Simulation config file (sectioned key = value)")
      ->check(CLI::ExistingFile);
  app.add_option("--seed", global.seed, "Master seed (overrides the config)");
  app.add_option("--threads", global.threads, "Worker threads (0 = hardware concurrency)");

  // generate -----------------------------------------------------------------
  auto* gen = app.add_subcommand("generate", "Simulate a frame stack with ground truth");
  std::string gen_out;
  std::optional<double> gen_density;
  std::optional<std::int64_t> gen_frames;
  std::optional<std::string> gen_mode;
  gen->add_option("--out", gen_out, "Output directory")->required();
  gen->add_option("--density", gen_density, "Emitters per frame (overrides the config)");
  gen->add_option("--frames", gen_frames, "Number of frames (overrides the config)");
  gen->add_option("--mode", gen_mode, "Sampling mode")->check(CLI::IsMember({"csr", "structured"}));

  // sweep --------------------------------------------------------------------
  auto* sweep = app.add_subcommand("sweep", "Nine datasets spanning nominal densities 0.38 to 13.0");
  std::string sweep_out;
  smlm::SweepOptions sweep_opts;
  sweep->add_option("--out", sweep_out, "Output directory")->required();
  sweep->add_option("--targets", sweep_opts.targets, "Target nominal densities");
  sweep->add_option("--precision", sweep_opts.precision, "Relative standard error per dataset");
  sweep->add_option("--curve-densities", sweep_opts.curve_densities, "Reference curve knots (ascending)");
  sweep->add_option("--curve-frames", sweep_opts.curve_frames_per_entry, "Monte Carlo frames per curve entry");
  sweep->add_option("--pilot-frames", sweep_opts.pilot_frames, "Positions-only pilot frames");
  sweep->add_option("--max-frames", sweep_opts.max_frames_per_dataset, "Frame cap per dataset");

  // density ------------------------------------------------------------------
  auto* dens = app.add_subcommand("density", "Build or apply a CSR nearest-neighbour curve");
  dens->require_subcommand(1);
  auto* dens_build = dens->add_subcommand("build", "Monte Carlo CSR reference curve");
  std::string curve_out;
  std::vector<double> curve_densities = smlm::geometric_densities(0.2, 20.0, 33);
  std::uint64_t curve_frames = 200000;
  dens_build->add_option("--out", curve_out, "Curve JSON path")->required();
  dens_build->add_option("--densities", curve_densities, "Ascending densities");
  dens_build->add_option("--mc-frames", curve_frames, "Frames per entry (>= 1000)");
  auto* dens_apply = dens->add_subcommand("apply", "Nominal density of an emitter CSV");
  std::string apply_curve, apply_csv;
  bool apply_3d = false;
  dens_apply->add_option("--curve", apply_curve, "Curve JSON")->required()->check(CLI::ExistingFile);
  dens_apply->add_option("--gt", apply_csv, "Emitter CSV")->required()->check(CLI::ExistingFile);
  dens_apply->add_flag("--full3d", apply_3d, "Also report the 3D mean nearest-neighbour distance");

  // localize -----------------------------------------------------------------
  auto* loc = app.add_subcommand("localize", "Detect and MLE-fit emitters in a generated dataset");
  std::string loc_dataset, loc_out;
  smlm::DetectionOptions det_opts;
  loc->add_option("--dataset", loc_dataset, "Dataset directory (with manifest.json)")->required();
  loc->add_option("--out", loc_out, "Prediction CSV")->required();
  loc->add_option("--threshold-sigma", det_opts.threshold_sigma, "Detection threshold");

  // evaluate -----------------------------------------------------------------
  auto* eval = app.add_subcommand("evaluate", "Score predictions against ground truth");
  std::string eval_gt, eval_pred, eval_curve, eval_out;
  smlm::EvaluationOptions eval_opts;
  std::optional<double> eval_pixel;
  eval->add_option("--gt", eval_gt, "Ground-truth CSV")->required()->check(CLI::ExistingFile);
  eval->add_option("--pred", eval_pred, "Prediction CSV")->required()->check(CLI::ExistingFile);
  eval->add_option("--curve", eval_curve, "CSR curve JSON for the nominal density")->check(CLI::ExistingFile);
  eval->add_option("--lateral-tol", eval_opts.tolerance.lateral_nm, "Lateral gate (nm)");
  eval->add_option("--axial-tol", eval_opts.tolerance.axial_nm, "Axial gate (nm)");
  eval->add_option("--pixel-size", eval_pixel, "Pixel size for the sub-pixel bias (nm)");
  eval->add_option("--out", eval_out, "Report JSON (default stdout)");

  // render -------------------------------------------------------------------
  auto* rend = app.add_subcommand("render", "Histogram reconstruction PNG");
  std::string rend_pred, rend_out;
  int upsample = 10;
  rend->add_option("--pred", rend_pred, "Localization CSV")->required()->check(CLI::ExistingFile);
  rend->add_option("--out", rend_out, "PNG path")->required();
  rend->add_option("--upsample", upsample, "Bins per camera pixel")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    return fail("usage", e.what(), 2);
  }

  try {
    if (gen->parsed()) {
      auto cfg = resolve_config(global);
      if (gen_density) cfg.density = *gen_density;
      if (gen_frames) cfg.n_frames = *gen_frames;
      if (gen_mode) cfg.sampling_mode = *gen_mode == "csr" ? smlm::SamplingMode::csr : smlm::SamplingMode::structured;
      cfg.validate();
      const auto manifest = smlm::generate_dataset(cfg, gen_out, global.threads);
      write_json(manifest.to_json(), "");
    } else if (sweep->parsed()) {
      const auto cfg = resolve_config(global);
      const auto report = smlm::run_sweep(cfg, sweep_out, sweep_opts, global.threads);
      write_json(report.to_json()["datasets"], "");
    } else if (dens_build->parsed()) {
      const auto cfg = resolve_config(global);
      const auto curve = smlm::build_csr_curve(cfg.geometry, curve_densities, curve_frames,
                                               cfg.master_seed, global.threads);
      write_json(curve.to_json(), curve_out);
    } else if (dens_apply->parsed()) {
      std::ifstream in(apply_curve);
      const auto curve = smlm::NnCurve::from_json(json::parse(in));
      const auto gt = smlm::read_emitter_csv(fs::path(apply_csv));
      const auto nd = smlm::nominal_density(gt, curve);
      json j{{"mean_nn_nm", nd.mean_nn_nm}, {"nominal_density", nd.value}, {"extrapolated", nd.extrapolated}};
      if (apply_3d) j["mean_nn_3d_nm"] = smlm::mean_nn_distance(gt, smlm::NnMetric::full3d);
      if (nd.extrapolated)
        std::cerr << "warning: mean NN distance lies outside the curve; value extrapolated\n";
      write_json(j, "");
    } else if (loc->parsed()) {
      const auto data = smlm::load_dataset(loc_dataset);
      const auto& c = data.manifest.config;
      const auto pred = smlm::localize_stack(data.frames, c.camera, c.psf, det_opts, {}, global.threads);
      smlm::write_emitter_csv(fs::path(loc_out), pred);
    } else if (eval->parsed()) {
      const auto gt = smlm::read_emitter_csv(fs::path(eval_gt));
      const auto pred = smlm::read_emitter_csv(fs::path(eval_pred));
      if (gt.size() != pred.size() && !gt.empty() && !pred.empty())
        std::cerr << "warning: frame ranges differ (gt " << gt.size() << ", pred " << pred.size() << " frames)\n";
      std::optional<smlm::NnCurve> curve;
      if (!eval_curve.empty()) {
        std::ifstream in(eval_curve);
        curve = smlm::NnCurve::from_json(json::parse(in));
        eval_opts.curve = &*curve;
      }
      eval_opts.pixel_size_nm = eval_pixel ? *eval_pixel : resolve_config(global).geometry.pixel_size_nm;
      write_json(smlm::evaluate(gt, pred, eval_opts).to_json(), eval_out);
    } else if (rend->parsed()) {
      const auto cfg = resolve_config(global);
      const auto pred = smlm::read_emitter_csv(fs::path(rend_pred));
      smlm::write_png(rend_out, smlm::render_reconstruction(pred, cfg.geometry, upsample));
    }
  } catch (const smlm::FormatError& e) {
    return fail("format", e.what(), 3);
  } catch (const std::invalid_argument& e) {
    return fail("invalid_argument", e.what(), 4);
  } catch (const std::exception& e) {
    return fail("runtime", e.what(), 1);
  }
  return 0;
}
