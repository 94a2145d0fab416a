// ============================================================================
// metrics.hpp -- ground truth / prediction matching and localization scores
// ============================================================================
#pragma once
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include <json.hpp>

#include "smlmsim/density.hpp"
#include "smlmsim/types.hpp"

namespace smlm {

struct MatchTolerance {
  double lateral_nm = 250.0;
  double axial_nm = 500.0;

  void validate() const;
};

struct MatchPair {
  std::int64_t frame_id = 0;
  std::size_t gt_index = 0;    ///< index within the ground-truth frame
  std::size_t pred_index = 0;  ///< index within the prediction frame
  double dx_nm = 0.0;          ///< prediction minus ground truth
  double dy_nm = 0.0;
  double dz_nm = 0.0;
};

struct EmitterRef {
  std::int64_t frame_id = 0;
  std::size_t index = 0;
};

struct MatchResult {
  std::vector<MatchPair> pairs;
  std::vector<EmitterRef> false_positives;  ///< unmatched predictions
  std::vector<EmitterRef> false_negatives;  ///< unmatched ground truth

  std::size_t n_tp() const noexcept { return pairs.size(); }
  std::size_t n_fp() const noexcept { return false_positives.size(); }
  std::size_t n_fn() const noexcept { return false_negatives.size(); }
};

/// Per frame, the gated assignment with the most pairs and, among those,
/// the smallest total 3D distance. Frames are aligned by index.
MatchResult match(const EmitterDataset& gt, const EmitterDataset& pred,
                  const MatchTolerance& tol = {});

/// Single-frame matching; frame_id is stamped on the output records.
MatchResult match_frame(std::span<const Emitter> gt, std::span<const Emitter> pred,
                        const MatchTolerance& tol, std::int64_t frame_id = 0);

/// TP / (TP + FP + FN); 1.0 when all three are zero.
double jaccard(const MatchResult& m) noexcept;

struct Rmse {
  double lateral_nm = 0.0;
  double axial_nm = 0.0;
  double volumetric_nm = 0.0;
};

/// Throws std::domain_error when there are no pairs.
Rmse rmse(const MatchResult& m);

struct EfficiencyWeights {
  double lateral_per_nm = 1.0;
  double axial_per_nm = 0.5;
};

struct Efficiency {
  double lateral = 0.0;
  double axial = 0.0;
  double three_d = 0.0;
};

/// 100 - sqrt((100 (1 - ji))^2 + (alpha * rmse)^2) per axis; 3D is the mean.
Efficiency efficiency(double ji, double rmse_lateral_nm, double rmse_axial_nm,
                      const EfficiencyWeights& w = {});

inline constexpr std::size_t kMinSubpixelSamples = 100;

/// Total-variation distance between the joint sub-pixel histogram of the
/// predictions and the uniform distribution. Throws std::invalid_argument
/// below kMinSubpixelSamples predictions.
double subpixel_bias(std::span<const Emitter> pred, double pixel_size_nm, int bins = 20);

struct MetricsReport {
  double ji = 0.0;
  std::optional<double> rmse_lateral_nm;
  std::optional<double> rmse_axial_nm;
  std::optional<double> rmse_volumetric_nm;
  std::optional<double> efficiency_lateral;
  std::optional<double> efficiency_axial;
  std::optional<double> efficiency_3d;
  std::size_t n_tp = 0;
  std::size_t n_fp = 0;
  std::size_t n_fn = 0;
  std::optional<double> nominal_density;
  std::optional<double> subpixel_bias;

  /// Keys are exactly the field names; undefined values serialize as null.
  nlohmann::json to_json() const;
};

struct EvaluationOptions {
  MatchTolerance tolerance;
  EfficiencyWeights weights;
  double pixel_size_nm = 100.0;
  int subpixel_bins = 20;
  const NnCurve* curve = nullptr;  ///< nominal density of the ground truth, if set
};

MetricsReport evaluate(const EmitterDataset& gt, const EmitterDataset& pred,
                       const EvaluationOptions& options);

}  // namespace smlm
