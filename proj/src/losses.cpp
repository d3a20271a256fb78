#include "ga3d/losses.hpp"

#include <algorithm>
#include <cmath>

namespace ga3d {

namespace {

double clamp_prob(double p) {
  return std::clamp(p, kProbClamp, 1.0 - kProbClamp);
}

std::size_t bin_of(double value, std::span<const double> edges) {
  // Bin i covers [edges[i], edges[i+1]); out-of-range values clamp.
  const auto it = std::upper_bound(edges.begin(), edges.end(), value);
  const std::ptrdiff_t raw = (it - edges.begin()) - 1;
  const std::ptrdiff_t bins = static_cast<std::ptrdiff_t>(edges.size()) - 1;
  return static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(raw, 0, bins - 1));
}

void check_edges(std::span<const double> logits, std::span<const double> edges) {
  if (edges.size() < 3) throw ConfigError("multibin: need at least 2 bins");
  for (std::size_t i = 1; i < edges.size(); ++i) {
    if (!(edges[i] > edges[i - 1]))
      throw ConfigError("multibin: bin edges must be strictly increasing");
  }
  if (logits.size() != edges.size() - 1)
    throw ShapeError("multibin: logit count must equal bin count");
}

}  // namespace

LossValue focal_loss(double p, int target, double gamma, double balance) {
  const double pc = clamp_prob(p);
  const double pt = target == 1 ? pc : 1.0 - pc;
  const double one_minus = 1.0 - pt;
  const double pow_term = std::pow(one_minus, gamma);
  LossValue out;
  out.value = -balance * pow_term * std::log(pt);
  double dpt = -balance * (pow_term / pt);
  if (gamma != 0.0)
    dpt += balance * gamma * std::pow(one_minus, gamma - 1.0) * std::log(pt);
  out.gradient = {target == 1 ? dpt : -dpt};
  return out;
}

LossValue smooth_l1(double residual, double beta) {
  if (!(beta > 0)) throw ConfigError("smooth_l1: beta must be positive");
  LossValue out;
  const double a = std::abs(residual);
  if (a < beta) {
    out.value = 0.5 * residual * residual / beta;
    out.gradient = {residual / beta};
  } else {
    out.value = a - 0.5 * beta;
    out.gradient = {residual > 0 ? 1.0 : (residual < 0 ? -1.0 : 0.0)};
  }
  return out;
}

LossValue multibin_ce(std::span<const double> logits, double true_value,
                      std::span<const double> bin_edges) {
  check_edges(logits, bin_edges);
  const std::size_t target = bin_of(true_value, bin_edges);
  const double max_logit = *std::max_element(logits.begin(), logits.end());
  double sum = 0;
  std::vector<double> softmax(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) {
    softmax[i] = std::exp(logits[i] - max_logit);
    sum += softmax[i];
  }
  LossValue out;
  out.value = std::log(sum) - (logits[target] - max_logit);
  out.gradient.resize(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out.gradient[i] = softmax[i] / sum - (i == target ? 1.0 : 0.0);
  }
  return out;
}

double multibin_decode(std::span<const double> logits,
                       std::span<const double> bin_edges) {
  check_edges(logits, bin_edges);
  const std::size_t best =
      std::max_element(logits.begin(), logits.end()) - logits.begin();
  return 0.5 * (bin_edges[best] + bin_edges[best + 1]);
}

LossValue si_loss(const FeatureMap& pred_log_depth,
                  const FeatureMap& gt_log_depth,
                  const std::vector<bool>& valid_mask, double lambda) {
  if (!pred_log_depth.same_shape(gt_log_depth) || pred_log_depth.channels != 1)
    throw ShapeError("si_loss: grids must be single-channel and same shape");
  if (valid_mask.size() != pred_log_depth.size())
    throw ShapeError("si_loss: mask size mismatch");
  long n = 0;
  double sum = 0, sum_sq = 0;
  for (std::size_t i = 0; i < valid_mask.size(); ++i) {
    if (!valid_mask[i]) continue;
    ++n;
    const double d = pred_log_depth.data[i] - gt_log_depth.data[i];
    sum += d;
    sum_sq += d * d;
  }
  if (n == 0) throw InputError("si_loss: no valid pixels");
  LossValue out;
  const double nd = static_cast<double>(n);
  out.value = sum_sq / nd - lambda * (sum * sum) / (nd * nd);
  out.gradient.assign(valid_mask.size(), 0.0);
  const double mean_term = 2.0 * lambda * sum / (nd * nd);
  for (std::size_t i = 0; i < valid_mask.size(); ++i) {
    if (!valid_mask[i]) continue;
    const double d = pred_log_depth.data[i] - gt_log_depth.data[i];
    out.gradient[i] = 2.0 * d / nd - mean_term;
  }
  return out;
}

LossValue smoothness_loss(const FeatureMap& pred_depth,
                          const FeatureMap& image) {
  if (pred_depth.channels != 1)
    throw ShapeError("smoothness_loss: depth must be single-channel");
  if (image.rows != pred_depth.rows || image.cols != pred_depth.cols)
    throw ShapeError("smoothness_loss: image/depth grid mismatch");
  const int R = pred_depth.rows, W = pred_depth.cols;
  const double n_pixels = static_cast<double>(R) * W;

  LossValue out;
  out.gradient.assign(pred_depth.size(), 0.0);
  double total = 0;

  const auto image_grad_l1 = [&](int r0, int c0, int r1, int c1) {
    double acc = 0;
    for (int ch = 0; ch < image.channels; ++ch)
      acc += std::abs(image.at(ch, r1, c1) - image.at(ch, r0, c0));
    return acc;
  };
  const auto add_term = [&](int r0, int c0, int r1, int c1) {
    const double dz = pred_depth.at(0, r1, c1) - pred_depth.at(0, r0, c0);
    const double w = std::exp(-image_grad_l1(r0, c0, r1, c1));
    total += std::abs(dz) * w;
    const double s = (dz > 0 ? 1.0 : (dz < 0 ? -1.0 : 0.0)) * w / n_pixels;
    out.gradient[pred_depth.index(0, r1, c1)] += s;
    out.gradient[pred_depth.index(0, r0, c0)] -= s;
  };

  for (int r = 0; r < R; ++r)
    for (int c = 0; c + 1 < W; ++c) add_term(r, c, r, c + 1);
  for (int r = 0; r + 1 < R; ++r)
    for (int c = 0; c < W; ++c) add_term(r, c, r + 1, c);

  out.value = total / n_pixels;
  return out;
}

DepthLossResult total_depth_loss(std::span<const DepthScale> scales,
                                 const DepthLossConfig& config) {
  if (scales.empty()) throw InputError("total_depth_loss: need at least one scale");
  if (config.lambda < 0 || config.lambda > 1)
    throw ConfigError("total_depth_loss: lambda must lie in [0, 1]");
  if (config.alpha_smooth < 0)
    throw ConfigError("total_depth_loss: alpha_smooth must be >= 0");
  DepthLossResult out;
  for (const DepthScale& scale : scales) {
    const LossValue si = si_loss(scale.pred_log_depth, scale.gt_log_depth,
                                 scale.valid_mask, config.lambda);
    const LossValue smooth = smoothness_loss(scale.pred_log_depth, scale.image);
    out.value += si.value + config.alpha_smooth * smooth.value;
    std::vector<double> grad(si.gradient.size());
    for (std::size_t i = 0; i < grad.size(); ++i)
      grad[i] = si.gradient[i] + config.alpha_smooth * smooth.gradient[i];
    out.per_scale_gradient.push_back(std::move(grad));
  }
  return out;
}

DetectionLossResult detection_loss(const DetectionPredictions& preds,
                                   const EncodedTargets& targets,
                                   const DetectionLossConfig& config) {
  const std::size_t n = targets.state.size();
  if (preds.objectness.size() != n || preds.regression.size() != n ||
      preds.dim_logits.size() != n)
    throw ShapeError("detection_loss: prediction sizes must match anchor count");

  DetectionLossResult out;
  out.gradients.objectness.assign(n, 0.0);
  out.gradients.regression.assign(n, RegressionTarget{});
  out.gradients.dim_logits.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (int d = 0; d < 3; ++d)
      out.gradients.dim_logits[i][d].assign(preds.dim_logits[i][d].size(), 0.0);
  }

  const double n_fg = std::max<std::size_t>(1, targets.foreground_count());

  // Classification: focal over labeled anchors, normalized by foreground count.
  double cls_raw = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (targets.state[i] == AnchorState::ignore) continue;
    const int label = targets.state[i] == AnchorState::foreground ? 1 : 0;
    const double weight = label == 1 ? config.balance : 1.0 - config.balance;
    const LossValue f = focal_loss(preds.objectness[i], label, config.gamma, weight);
    cls_raw += f.value / n_fg;
    out.gradients.objectness[i] = f.gradient[0] / n_fg;
  }

  // Regression: mean smooth-L1 over foreground anchors and 12 targets.
  double reg_raw = 0;
  long reg_terms = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (targets.state[i] != AnchorState::foreground) continue;
    const auto pred = preds.regression[i].to_array();
    const auto tgt = targets.regression[i].to_array();
    std::array<double, 12> grad{};
    for (int j = 0; j < 12; ++j) {
      const LossValue s = smooth_l1(pred[j] - tgt[j], config.beta);
      reg_raw += s.value;
      grad[j] = s.gradient[0];
      ++reg_terms;
    }
    out.gradients.regression[i] = RegressionTarget::from_array(grad);
  }
  if (reg_terms > 0) {
    reg_raw /= reg_terms;
    for (std::size_t i = 0; i < n; ++i) {
      if (targets.state[i] != AnchorState::foreground) continue;
      auto g = out.gradients.regression[i].to_array();
      for (double& v : g) v /= reg_terms;
      out.gradients.regression[i] = RegressionTarget::from_array(g);
    }
  }

  // Dimensions: mean multi-bin cross-entropy over foreground anchors x 3.
  double dim_raw = 0;
  long dim_terms = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (targets.state[i] != AnchorState::foreground) continue;
    for (int d = 0; d < 3; ++d) {
      const LossValue ce = multibin_ce(preds.dim_logits[i][d],
                                       targets.gt_dims[i][d],
                                       config.dim_bin_edges[d]);
      dim_raw += ce.value;
      out.gradients.dim_logits[i][d] = ce.gradient;
      ++dim_terms;
    }
  }
  if (dim_terms > 0) {
    dim_raw /= dim_terms;
    for (std::size_t i = 0; i < n; ++i) {
      for (int d = 0; d < 3; ++d)
        for (double& v : out.gradients.dim_logits[i][d]) v /= dim_terms;
    }
  }

  // Components that fall below the clip floor contribute a constant (or
  // nothing in clip_to_zero mode) and no gradient.
  const auto clip = [&](double raw, auto&& zero_grads) {
    if (raw >= config.clip_floor) return raw;
    zero_grads();
    return config.clip_to_zero ? 0.0 : config.clip_floor;
  };
  out.cls = clip(cls_raw, [&] {
    std::fill(out.gradients.objectness.begin(), out.gradients.objectness.end(), 0.0);
  });
  out.reg = clip(reg_raw, [&] {
    std::fill(out.gradients.regression.begin(), out.gradients.regression.end(),
              RegressionTarget{});
  });
  out.dim = clip(dim_raw, [&] {
    for (auto& anchor : out.gradients.dim_logits)
      for (auto& v : anchor) std::fill(v.begin(), v.end(), 0.0);
  });
  out.value = out.cls + out.reg + out.dim;
  return out;
}

}  // namespace ga3d
