#include "ga3d/config.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <sstream>

namespace ga3d {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

double parse_real(const std::string& tok) {
  const char* begin = tok.c_str();
  char* end = nullptr;
  const double v = std::strtod(begin, &end);
  if (end != begin + tok.size() || tok.empty())
    throw ConfigError("bad numeric value '" + tok + "'");
  return v;
}

int parse_int(const std::string& tok) {
  const double v = parse_real(tok);
  if (v != std::floor(v)) throw ConfigError("expected integer, got '" + tok + "'");
  return static_cast<int>(v);
}

}  // namespace

std::vector<double> parse_double_list(const std::string& text) {
  std::vector<double> out;
  std::istringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    const std::string t = trim(item);
    if (!t.empty()) out.push_back(parse_real(t));
  }
  return out;
}

std::vector<std::string> parse_string_list(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    const std::string t = trim(item);
    if (!t.empty()) out.push_back(t);
  }
  return out;
}

void apply_config_line(RunConfig& cfg, const std::string& key,
                       const std::string& value) {
  if (key == "data_root") cfg.data_root = value;
  else if (key == "split") cfg.split = value;
  else if (key == "out_dir") cfg.out_dir = value;
  else if (key == "jobs") cfg.jobs = parse_int(value);
  else if (key == "image_w") cfg.image_w = parse_int(value);
  else if (key == "image_h") cfg.image_h = parse_int(value);
  else if (key == "crop_rows") cfg.crop_rows = parse_int(value);
  else if (key == "camera") cfg.camera = value;
  else if (key == "stride") cfg.stride = parse_int(value);
  else if (key == "scales") cfg.scales = parse_double_list(value);
  else if (key == "ratios") cfg.ratios = parse_double_list(value);
  else if (key == "iou_stats") cfg.iou_stats = parse_real(value);
  else if (key == "iou_fg") cfg.iou_fg = parse_real(value);
  else if (key == "iou_bg") cfg.iou_bg = parse_real(value);
  else if (key == "min_support") cfg.min_support = parse_int(value);
  else if (key == "ground_tolerance") {
    cfg.ground_tolerance = value == "inf" ? std::numeric_limits<double>::infinity()
                                          : parse_real(value);
  } else if (key == "elevation") cfg.ground.elevation = parse_real(value);
  else if (key == "baseline") cfg.ground.virtual_baseline = parse_real(value);
  else if (key == "object_height") cfg.object_height = parse_real(value);
  else if (key == "hc_variables") {
    if (value == "angle") cfg.hill_climb.variables = RefineVariables::angle_only;
    else if (value == "angle_depth")
      cfg.hill_climb.variables = RefineVariables::angle_and_depth;
    else throw ConfigError("hc_variables must be 'angle' or 'angle_depth'");
  } else if (key == "hc_step_alpha") cfg.hill_climb.step_alpha = parse_real(value);
  else if (key == "hc_step_z") cfg.hill_climb.step_z = parse_real(value);
  else if (key == "hc_shrink") cfg.hill_climb.shrink = parse_real(value);
  else if (key == "hc_max_iter") cfg.hill_climb.max_iterations = parse_int(value);
  else if (key == "hc_epsilon") cfg.hill_climb.epsilon = parse_real(value);
  else if (key == "eval_classes") cfg.eval_classes = parse_string_list(value);
  else if (key == "eval_ious") cfg.eval_ious = parse_double_list(value);
  else throw ConfigError("unknown configuration key '" + key + "'");
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open config file: " + path.string());
  RunConfig cfg;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    const std::string stripped = trim(line);
    if (stripped.empty()) continue;
    const auto eq = stripped.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(path.string() + ":" + std::to_string(line_no) +
                        ": expected 'key = value'");
    }
    const std::string key = trim(stripped.substr(0, eq));
    const std::string value = trim(stripped.substr(eq + 1));
    try {
      apply_config_line(cfg, key, value);
    } catch (const ConfigError& e) {
      throw ConfigError(path.string() + ":" + std::to_string(line_no) + ": " +
                        e.what());
    }
  }
  return cfg;
}

void RunConfig::validate() const {
  if (image_w <= 0 || image_h <= 0) throw ConfigError("image size must be positive");
  if (crop_rows < 0) throw ConfigError("crop_rows must be >= 0");
  if (stride < 1) throw ConfigError("stride must be >= 1");
  if (scales.empty() || ratios.empty())
    throw ConfigError("scales and ratios must be nonempty");
  for (double s : scales)
    if (!(s > 0)) throw ConfigError("scales must be positive");
  for (double r : ratios)
    if (!(r > 0)) throw ConfigError("ratios must be positive");
  if (iou_bg > iou_fg) throw ConfigError("iou_bg must not exceed iou_fg");
  if (std::isnan(ground_tolerance) || ground_tolerance < 0)
    throw ConfigError("ground_tolerance must be >= 0");
  if (min_support < 0) throw ConfigError("min_support must be >= 0");
  ground.validate();
  hill_climb.validate();
}

}  // namespace ga3d
