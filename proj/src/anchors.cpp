#include "ga3d/anchors.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

namespace ga3d {

namespace {

/// Numerically stable streaming moments with exact pairwise merge, so
/// sharded accumulation reproduces the sequential result.
struct Welford {
  long n = 0;
  double mean = 0;
  double m2 = 0;

  void add(double x) {
    ++n;
    const double d = x - mean;
    mean += d / n;
    m2 += d * (x - mean);
  }
  void merge(const Welford& o) {
    if (o.n == 0) return;
    if (n == 0) {
      *this = o;
      return;
    }
    const double d = o.mean - mean;
    const long total = n + o.n;
    mean += d * o.n / total;
    m2 += o.m2 + d * d * (static_cast<double>(n) * o.n / total);
    n = total;
  }
  double population_variance() const { return n > 0 ? m2 / n : 0.0; }
};

struct DimAccumulator {
  Welford w, h, l;
  double min_w = std::numeric_limits<double>::infinity(), max_w = -min_w;
  double min_h = min_w, max_h = -min_w;
  double min_l = min_w, max_l = -min_w;

  void add(const LabelRecord& r) {
    w.add(r.w3d);
    h.add(r.h3d);
    l.add(r.l3d);
    min_w = std::min(min_w, r.w3d);
    max_w = std::max(max_w, r.w3d);
    min_h = std::min(min_h, r.h3d);
    max_h = std::max(max_h, r.h3d);
    min_l = std::min(min_l, r.l3d);
    max_l = std::max(max_l, r.l3d);
  }
  void merge(const DimAccumulator& o) {
    w.merge(o.w);
    h.merge(o.h);
    l.merge(o.l);
    min_w = std::min(min_w, o.min_w);
    max_w = std::max(max_w, o.max_w);
    min_h = std::min(min_h, o.min_h);
    max_h = std::max(max_h, o.max_h);
    min_l = std::min(min_l, o.min_l);
    max_l = std::max(max_l, o.max_l);
  }
  DimStats stats() const {
    DimStats d;
    d.count = w.n;
    d.mean_w = w.mean;
    d.std_w = std::sqrt(w.population_variance());
    d.min_w = min_w;
    d.max_w = max_w;
    d.mean_h = h.mean;
    d.std_h = std::sqrt(h.population_variance());
    d.min_h = min_h;
    d.max_h = max_h;
    d.mean_l = l.mean;
    d.std_l = std::sqrt(l.population_variance());
    d.min_l = min_l;
    d.max_l = max_l;
    return d;
  }
};

struct FrameAccumulator {
  std::vector<Welford> z, sin_a, cos_a;  // per shape
  std::map<std::string, DimAccumulator> dims;

  explicit FrameAccumulator(std::size_t shapes)
      : z(shapes), sin_a(shapes), cos_a(shapes) {}
  FrameAccumulator() = default;
};

struct Window {
  int r0, r1, c0, c1;  // inclusive
  bool empty() const { return r0 > r1 || c0 > c1; }
};

/// Grid cells whose anchor of shape `s` can overlap `box` at all.
Window overlap_window(const AnchorGrid& grid, const AnchorShape& s,
                      const Box2D& box) {
  const double half_w = 0.5 * (s.w2d + box.width());
  const double half_h = 0.5 * (s.h2d + box.height());
  const double gx = box.center_x(), gy = box.center_y();
  Window w;
  w.c0 = std::max(0, static_cast<int>(std::floor((gx - half_w) / grid.stride - 0.5)));
  w.c1 = std::min(grid.cols - 1,
                  static_cast<int>(std::ceil((gx + half_w) / grid.stride - 0.5)));
  w.r0 = std::max(0, static_cast<int>(std::floor((gy - half_h) / grid.stride - 0.5)));
  w.r1 = std::min(grid.rows - 1,
                  static_cast<int>(std::ceil((gy + half_h) / grid.stride - 0.5)));
  return w;
}

double prior_std(double variance) {
  return std::max(std::sqrt(variance), kStdFloor);
}

const ShapeStats& usable_shape_stats(const AnchorGrid& grid, std::size_t shape) {
  if (!grid.priors) throw ConfigError("anchor grid carries no priors");
  if (!grid.priors->usable(shape)) {
    throw Error("no usable statistics for anchor shape " + std::to_string(shape));
  }
  return grid.priors->shapes[shape];
}

const DimStats& class_dim_stats(const AnchorGrid& grid,
                                const std::string& category) {
  const auto it = grid.priors->classes.find(category);
  if (it == grid.priors->classes.end())
    throw Error("no dimension statistics for class " + category);
  return it->second;
}

long parse_long(const std::string& tok) {
  std::size_t pos = 0;
  const long v = std::stol(tok, &pos);
  if (pos != tok.size()) throw ParseError("anchor stats: bad integer '" + tok + "'");
  return v;
}

double parse_real(const std::string& tok) {
  const char* begin = tok.c_str();
  char* end = nullptr;
  const double v = std::strtod(begin, &end);
  if (end != begin + tok.size() || tok.empty())
    throw ParseError("anchor stats: bad real '" + tok + "'");
  return v;
}

}  // namespace

AnchorGrid build_grid(const CameraIntrinsics& intr, int stride,
                      std::span<const double> scales,
                      std::span<const double> ratios) {
  intr.validate();
  if (stride < 1) throw ConfigError("build_grid: stride must be >= 1");
  if (scales.empty() || ratios.empty())
    throw ConfigError("build_grid: scales and ratios must be nonempty");
  AnchorGrid grid;
  grid.stride = stride;
  grid.rows = (intr.image_h + stride - 1) / stride;
  grid.cols = (intr.image_w + stride - 1) / stride;
  grid.shapes.reserve(scales.size() * ratios.size());
  for (double s : scales) {
    for (double ratio : ratios) {
      if (!(s > 0) || !(ratio > 0))
        throw ConfigError("build_grid: scales and ratios must be positive");
      const double root = std::sqrt(ratio);
      grid.shapes.push_back({s * root, s / root});
    }
  }
  return grid;
}

std::size_t EncodedTargets::foreground_count() const {
  return static_cast<std::size_t>(
      std::count(state.begin(), state.end(), AnchorState::foreground));
}

AnchorStats collect_stats(const AnchorGrid& grid,
                          std::span<const FrameGroundTruth> corpus,
                          double iou_threshold, int jobs, long min_support) {
  if (corpus.empty()) throw InputError("collect_stats: empty corpus");
  const std::size_t num_shapes = grid.shapes.size();

  std::vector<FrameAccumulator> per_frame(corpus.size());
  parallel_for(corpus.size(), jobs, [&](std::size_t f) {
    FrameAccumulator acc(num_shapes);
    for (const LabelRecord& r : corpus[f].labels) {
      if (r.is_dontcare()) continue;
      if (!r.bbox2d.valid() || r.bbox2d.area() <= 0) continue;
      acc.dims[r.category].add(r);
      const double sa = std::sin(r.alpha), ca = std::cos(r.alpha);
      for (std::size_t s = 0; s < num_shapes; ++s) {
        const Window w = overlap_window(grid, grid.shapes[s], r.bbox2d);
        if (w.empty()) continue;
        for (int row = w.r0; row <= w.r1; ++row) {
          for (int col = w.c0; col <= w.c1; ++col) {
            const double iou =
                iou_2d(grid.anchor_box(row, col, static_cast<int>(s)), r.bbox2d);
            if (iou >= iou_threshold) {
              acc.z[s].add(r.z3d);
              acc.sin_a[s].add(sa);
              acc.cos_a[s].add(ca);
            }
          }
        }
      }
    }
    per_frame[f] = std::move(acc);
  });

  // Merge in frame order: result is independent of the jobs count.
  FrameAccumulator total(num_shapes);
  for (const FrameAccumulator& acc : per_frame) {
    for (std::size_t s = 0; s < num_shapes; ++s) {
      total.z[s].merge(acc.z[s]);
      total.sin_a[s].merge(acc.sin_a[s]);
      total.cos_a[s].merge(acc.cos_a[s]);
    }
    for (const auto& [cls, d] : acc.dims) total.dims[cls].merge(d);
  }

  AnchorStats stats;
  stats.min_support = min_support;
  stats.shapes.resize(num_shapes);
  for (std::size_t s = 0; s < num_shapes; ++s) {
    ShapeStats& out = stats.shapes[s];
    out.count = total.z[s].n;
    out.mean_z = total.z[s].mean;
    out.var_z = total.z[s].population_variance();
    out.mean_sin = total.sin_a[s].mean;
    out.var_sin = total.sin_a[s].population_variance();
    out.mean_cos = total.cos_a[s].mean;
    out.var_cos = total.cos_a[s].population_variance();
  }
  for (const auto& [cls, d] : total.dims) stats.classes[cls] = d.stats();
  return stats;
}

std::vector<bool> filter_ground(const AnchorGrid& grid,
                                const CameraIntrinsics& intr,
                                const GroundModel& ground, double tolerance) {
  if (std::isnan(tolerance) || tolerance < 0)
    throw ConfigError("filter_ground: tolerance must be >= 0");
  std::vector<bool> mask(grid.anchor_count(), false);
  if (std::isinf(tolerance)) {
    mask.assign(grid.anchor_count(), true);  // unfiltered ablation mode
    return mask;
  }
  if (!grid.priors) throw ConfigError("filter_ground: grid carries no priors");
  const AnchorStats& stats = *grid.priors;
  for (int r = 0; r < grid.rows; ++r) {
    for (int c = 0; c < grid.cols; ++c) {
      const Pixel center = grid.center(r, c);
      for (std::size_t s = 0; s < grid.shapes.size(); ++s) {
        if (!stats.usable(s)) continue;  // no prior depth: unconditionally out
        const double mean_z = stats.shapes[s].mean_z;
        if (!(mean_z > 0)) continue;
        const Point3 p = backproject(center.u, center.v, mean_z, intr);
        if (std::abs(p.y - ground.elevation) <= tolerance)
          mask[grid.anchor_index(r, c, static_cast<int>(s))] = true;
      }
    }
  }
  return mask;
}

EncodedTargets encode_targets(const AnchorGrid& grid,
                              std::span<const LabelRecord> labels,
                              const CameraIntrinsics& intr, double iou_fg,
                              double iou_bg) {
  if (iou_bg > iou_fg)
    throw ConfigError("encode_targets: iou_bg must not exceed iou_fg");
  if (!grid.priors) throw ConfigError("encode_targets: grid carries no priors");
  const std::size_t count = grid.anchor_count();
  const std::size_t num_shapes = grid.shapes.size();

  std::vector<double> best_iou(count, 0.0);
  std::vector<int> best_gt(count, -1);
  for (std::size_t g = 0; g < labels.size(); ++g) {
    const LabelRecord& r = labels[g];
    if (r.is_dontcare()) continue;
    if (!r.bbox2d.valid() || r.bbox2d.area() <= 0) continue;
    for (std::size_t s = 0; s < num_shapes; ++s) {
      const Window w = overlap_window(grid, grid.shapes[s], r.bbox2d);
      if (w.empty()) continue;
      for (int row = w.r0; row <= w.r1; ++row) {
        for (int col = w.c0; col <= w.c1; ++col) {
          const std::size_t idx = grid.anchor_index(row, col, static_cast<int>(s));
          const double iou =
              iou_2d(grid.anchor_box(row, col, static_cast<int>(s)), r.bbox2d);
          if (iou > best_iou[idx]) {
            best_iou[idx] = iou;
            best_gt[idx] = static_cast<int>(g);
          }
        }
      }
    }
  }

  EncodedTargets out;
  out.state.assign(count, AnchorState::background);
  out.matched_gt.assign(count, -1);
  out.regression.assign(count, RegressionTarget{});
  out.gt_dims.assign(count, {0.0, 0.0, 0.0});
  out.gt_category.assign(count, std::string());

  for (std::size_t idx = 0; idx < count; ++idx) {
    if (best_iou[idx] >= iou_fg && best_gt[idx] >= 0) {
      out.state[idx] = AnchorState::foreground;
      out.matched_gt[idx] = best_gt[idx];
    } else if (best_iou[idx] >= iou_bg) {
      out.state[idx] = AnchorState::ignore;
    }
  }

  for (std::size_t idx = 0; idx < count; ++idx) {
    if (out.state[idx] != AnchorState::foreground) continue;
    const LabelRecord& g = labels[out.matched_gt[idx]];
    const std::size_t s = idx % num_shapes;
    const std::size_t cell = idx / num_shapes;
    const int col = static_cast<int>(cell % grid.cols);
    const int row = static_cast<int>(cell / grid.cols);
    const AnchorShape& shape = grid.shapes[s];
    const Pixel a = grid.center(row, col);

    const ShapeStats& ss = usable_shape_stats(grid, s);
    const DimStats& ds = class_dim_stats(grid, g.category);

    RegressionTarget t;
    t.dx = (g.bbox2d.center_x() - a.u) / shape.w2d;
    t.dy = (g.bbox2d.center_y() - a.v) / shape.h2d;
    t.dw = std::log(g.bbox2d.width() / shape.w2d);
    t.dh = std::log(g.bbox2d.height() / shape.h2d);

    const Pixel pc = project({g.x3d, g.y3d - 0.5 * g.h3d, g.z3d}, intr);
    t.dcx = (pc.u - a.u) / shape.w2d;
    t.dcy = (pc.v - a.v) / shape.h2d;
    t.dz = (g.z3d - ss.mean_z) / prior_std(ss.var_z);
    t.dsin = (std::sin(g.alpha) - ss.mean_sin) / prior_std(ss.var_sin);
    t.dcos = (std::cos(g.alpha) - ss.mean_cos) / prior_std(ss.var_cos);
    t.dw3d = (g.w3d - ds.mean_w) / std::max(ds.std_w, kStdFloor);
    t.dh3d = (g.h3d - ds.mean_h) / std::max(ds.std_h, kStdFloor);
    t.dl3d = (g.l3d - ds.mean_l) / std::max(ds.std_l, kStdFloor);

    out.regression[idx] = t;
    out.gt_dims[idx] = {g.w3d, g.h3d, g.l3d};
    out.gt_category[idx] = g.category;
  }
  return out;
}

FrameDetections decode_targets(const AnchorGrid& grid,
                               std::span<const DecodeInput> inputs,
                               const CameraIntrinsics& intr) {
  if (!grid.priors) throw ConfigError("decode_targets: grid carries no priors");
  FrameDetections detections;
  detections.reserve(inputs.size());
  const std::size_t num_shapes = grid.shapes.size();
  for (const DecodeInput& in : inputs) {
    if (in.anchor_index >= grid.anchor_count())
      throw Error("decode_targets: anchor index out of range");
    const std::size_t s = in.anchor_index % num_shapes;
    const std::size_t cell = in.anchor_index / num_shapes;
    const int col = static_cast<int>(cell % grid.cols);
    const int row = static_cast<int>(cell / grid.cols);
    const AnchorShape& shape = grid.shapes[s];
    const Pixel a = grid.center(row, col);
    const ShapeStats& ss = usable_shape_stats(grid, s);
    const DimStats& ds = class_dim_stats(grid, in.category);
    const RegressionTarget& t = in.target;

    const double gw = shape.w2d * std::exp(t.dw);
    const double gh = shape.h2d * std::exp(t.dh);
    const double gx = a.u + t.dx * shape.w2d;
    const double gy = a.v + t.dy * shape.h2d;
    const Box2D box2d{gx - 0.5 * gw, gy - 0.5 * gh, gx + 0.5 * gw, gy + 0.5 * gh};

    const double pcx = a.u + t.dcx * shape.w2d;
    const double pcy = a.v + t.dcy * shape.h2d;
    const double z = ss.mean_z + t.dz * prior_std(ss.var_z);

    double sin_a = ss.mean_sin + t.dsin * prior_std(ss.var_sin);
    double cos_a = ss.mean_cos + t.dcos * prior_std(ss.var_cos);
    const double norm = std::hypot(sin_a, cos_a);
    double alpha = 0.0;
    if (norm > 1e-12) {
      sin_a /= norm;
      cos_a /= norm;
      alpha = std::atan2(sin_a, cos_a);
    }

    const double w3d = std::max(0.0, ds.mean_w + t.dw3d * std::max(ds.std_w, kStdFloor));
    const double h3d = std::max(0.0, ds.mean_h + t.dh3d * std::max(ds.std_h, kStdFloor));
    const double l3d = std::max(0.0, ds.mean_l + t.dl3d * std::max(ds.std_l, kStdFloor));

    const Point3 center = backproject(pcx, pcy, z, intr);
    const double yaw = yaw_from_alpha(alpha, center.x, center.z);

    Detection det;
    det.category = in.category;
    det.box2d = box2d;
    det.box3d = Box3D{center.x, center.y + 0.5 * h3d, center.z, w3d, h3d, l3d, yaw};
    det.alpha = alpha;
    det.score = in.score;
    detections.push_back(std::move(det));
  }
  return detections;
}

void write_anchor_stats(std::span<const AnchorShape> shapes,
                        const AnchorStats& stats, std::ostream& out) {
  if (shapes.size() != stats.shapes.size())
    throw ShapeError("write_anchor_stats: shape table size mismatch");
  out << "ga3d-anchor-stats 1\n";
  out << "shapes " << shapes.size() << '\n';
  for (std::size_t s = 0; s < shapes.size(); ++s) {
    const ShapeStats& st = stats.shapes[s];
    out << format_double(shapes[s].w2d) << ' ' << format_double(shapes[s].h2d)
        << ' ' << st.count << ' ' << format_double(st.mean_z) << ' '
        << format_double(st.var_z) << ' ' << format_double(st.mean_sin) << ' '
        << format_double(st.var_sin) << ' ' << format_double(st.mean_cos) << ' '
        << format_double(st.var_cos) << '\n';
  }
  out << "classes " << stats.classes.size() << '\n';
  for (const auto& [cls, d] : stats.classes) {
    out << cls << ' ' << d.count << ' ' << format_double(d.mean_w) << ' '
        << format_double(d.std_w) << ' ' << format_double(d.min_w) << ' '
        << format_double(d.max_w) << ' ' << format_double(d.mean_h) << ' '
        << format_double(d.std_h) << ' ' << format_double(d.min_h) << ' '
        << format_double(d.max_h) << ' ' << format_double(d.mean_l) << ' '
        << format_double(d.std_l) << ' ' << format_double(d.min_l) << ' '
        << format_double(d.max_l) << '\n';
  }
  out << "min_support " << stats.min_support << '\n';
}

std::pair<std::vector<AnchorShape>, AnchorStats> read_anchor_stats(
    std::istream& in) {
  std::string word;
  int version = 0;
  if (!(in >> word >> version) || word != "ga3d-anchor-stats" || version != 1)
    throw ParseError("anchor stats: bad header");
  std::size_t num_shapes = 0;
  if (!(in >> word >> num_shapes) || word != "shapes")
    throw ParseError("anchor stats: missing shapes section");
  std::vector<AnchorShape> shapes(num_shapes);
  AnchorStats stats;
  stats.shapes.resize(num_shapes);
  for (std::size_t s = 0; s < num_shapes; ++s) {
    std::string tok[9];
    for (auto& t : tok) {
      if (!(in >> t)) throw ParseError("anchor stats: truncated shape row");
    }
    shapes[s].w2d = parse_real(tok[0]);
    shapes[s].h2d = parse_real(tok[1]);
    ShapeStats& st = stats.shapes[s];
    st.count = parse_long(tok[2]);
    st.mean_z = parse_real(tok[3]);
    st.var_z = parse_real(tok[4]);
    st.mean_sin = parse_real(tok[5]);
    st.var_sin = parse_real(tok[6]);
    st.mean_cos = parse_real(tok[7]);
    st.var_cos = parse_real(tok[8]);
  }
  std::size_t num_classes = 0;
  if (!(in >> word >> num_classes) || word != "classes")
    throw ParseError("anchor stats: missing classes section");
  for (std::size_t k = 0; k < num_classes; ++k) {
    std::string cls;
    std::string tok[13];
    if (!(in >> cls)) throw ParseError("anchor stats: truncated class row");
    for (auto& t : tok) {
      if (!(in >> t)) throw ParseError("anchor stats: truncated class row");
    }
    DimStats d;
    d.count = parse_long(tok[0]);
    d.mean_w = parse_real(tok[1]);
    d.std_w = parse_real(tok[2]);
    d.min_w = parse_real(tok[3]);
    d.max_w = parse_real(tok[4]);
    d.mean_h = parse_real(tok[5]);
    d.std_h = parse_real(tok[6]);
    d.min_h = parse_real(tok[7]);
    d.max_h = parse_real(tok[8]);
    d.mean_l = parse_real(tok[9]);
    d.std_l = parse_real(tok[10]);
    d.min_l = parse_real(tok[11]);
    d.max_l = parse_real(tok[12]);
    stats.classes[cls] = d;
  }
  if (in >> word && word == "min_support") {
    long ms = 0;
    if (!(in >> ms)) throw ParseError("anchor stats: bad min_support");
    stats.min_support = ms;
  }
  return {std::move(shapes), std::move(stats)};
}

void attach_priors(AnchorGrid& grid, std::span<const AnchorShape> shapes,
                   AnchorStats stats) {
  if (shapes.size() != grid.shapes.size() ||
      stats.shapes.size() != grid.shapes.size())
    throw ShapeError("attach_priors: stats/grid shape mismatch");
  for (std::size_t s = 0; s < shapes.size(); ++s) {
    if (shapes[s].w2d != grid.shapes[s].w2d || shapes[s].h2d != grid.shapes[s].h2d)
      throw ShapeError("attach_priors: stats/grid shape mismatch");
  }
  grid.priors = std::move(stats);
}

}  // namespace ga3d
