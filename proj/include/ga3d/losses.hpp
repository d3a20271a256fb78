#pragma once

#include <array>
#include <span>
#include <vector>

#include "ga3d/anchors.hpp"
#include "ga3d/common.hpp"
#include "ga3d/feature_map.hpp"

namespace ga3d {

/// A scalar loss with the gradient of the parameter it differentiates.
struct LossValue {
  double value = 0;
  std::vector<double> gradient;
};

/// Probabilities are clamped to [kProbClamp, 1 - kProbClamp] before the log;
/// gradients are taken at the clamped point.
inline constexpr double kProbClamp = 1e-7;

/// -balance * (1 - p_t)^gamma * log(p_t), p_t = p for target 1 else 1 - p.
/// Gradient w.r.t. p (length-1 vector).
LossValue focal_loss(double p, int target, double gamma = 2.0,
                     double balance = 0.25);

/// 0.5 r^2 / beta inside |r| < beta, |r| - 0.5 beta outside; C1 at the knee.
LossValue smooth_l1(double residual, double beta = 1.0);

/// Softmax cross-entropy against the bin containing true_value. Bins are the
/// intervals between consecutive edges; out-of-range values clamp to the
/// first/last bin. Gradient w.r.t. the logits.
LossValue multibin_ce(std::span<const double> logits, double true_value,
                      std::span<const double> bin_edges);

/// Center of the argmax-logit bin (ties to the lower bin).
double multibin_decode(std::span<const double> logits,
                       std::span<const double> bin_edges);

/// Scale-invariant log-depth loss over valid pixels:
/// mean(d^2) - lambda * mean(d)^2 with d = pred - gt. Gradient w.r.t. the
/// prediction grid (zero at invalid pixels). Throws on an empty mask.
LossValue si_loss(const FeatureMap& pred_log_depth,
                  const FeatureMap& gt_log_depth,
                  const std::vector<bool>& valid_mask, double lambda);

/// Edge-aware smoothness: mean over all pixels of |forward depth difference|
/// weighted by exp(-L1 image gradient), horizontal and vertical terms; the
/// last column/row of each direction is omitted. Gradient w.r.t. pred_depth.
LossValue smoothness_loss(const FeatureMap& pred_depth,
                          const FeatureMap& image);

struct DepthLossConfig {
  double lambda = 0.3;
  double alpha_smooth = 0.3;
};

struct DepthScale {
  FeatureMap pred_log_depth;
  FeatureMap gt_log_depth;
  std::vector<bool> valid_mask;
  FeatureMap image;
};

struct DepthLossResult {
  double value = 0;
  std::vector<std::vector<double>> per_scale_gradient;
};

/// Sum over scales of si_loss + alpha_smooth * smoothness_loss.
DepthLossResult total_depth_loss(std::span<const DepthScale> scales,
                                 const DepthLossConfig& config);

struct DetectionLossConfig {
  double gamma = 2.0;
  double balance = 0.25;   // foreground weight; background gets 1 - balance
  double beta = 1.0;       // shared smooth-L1 knee
  double clip_floor = 1e-3;
  bool clip_to_zero = false;  // alternative: zero out sub-floor components
  std::array<std::vector<double>, 3> dim_bin_edges;  // w, h, l
};

/// Per-anchor network outputs. dim_logits[i] holds one logit vector per
/// dimension (w, h, l) for anchor i.
struct DetectionPredictions {
  std::vector<double> objectness;
  std::vector<RegressionTarget> regression;
  std::vector<std::array<std::vector<double>, 3>> dim_logits;
};

struct DetectionLossResult {
  double value = 0;
  double cls = 0, reg = 0, dim = 0;  // post-clip component values
  DetectionPredictions gradients;
};

/// Classification (focal, sum / max(1, #fg)) + regression (mean smooth-L1
/// over fg x 12) + dimension (mean multi-bin CE over fg x 3); each component
/// floored at clip_floor (or zeroed below it with clip_to_zero) before the
/// sum. Floored/zeroed components contribute zero gradient.
DetectionLossResult detection_loss(const DetectionPredictions& preds,
                                   const EncodedTargets& targets,
                                   const DetectionLossConfig& config);

}  // namespace ga3d
