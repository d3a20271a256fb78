#include "ga3d/kitti_io.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace ga3d {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_ws(const std::string& line) {
  std::vector<std::string> out;
  std::istringstream in(line);
  std::string tok;
  while (in >> tok) out.push_back(tok);
  return out;
}

double parse_number(const std::string& tok, int line_no) {
  const char* begin = tok.c_str();
  char* end = nullptr;
  const double v = std::strtod(begin, &end);
  if (end != begin + tok.size() || tok.empty() || !std::isfinite(v)) {
    throw ParseError("line " + std::to_string(line_no) +
                     ": non-numeric token '" + tok + "'");
  }
  return v;
}

}  // namespace

CalibrationFile parse_calibration(std::istream& in) {
  CalibrationFile calib;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string stripped = trim(line);
    if (stripped.empty()) continue;
    auto tokens = split_ws(stripped);
    std::string key = tokens[0];
    if (!key.empty() && key.back() == ':') key.pop_back();
    if (key.empty())
      throw ParseError("line " + std::to_string(line_no) + ": missing key");
    std::vector<double> values;
    values.reserve(tokens.size() - 1);
    for (std::size_t i = 1; i < tokens.size(); ++i)
      values.push_back(parse_number(tokens[i], line_no));

    const auto expect = [&](std::size_t n) {
      if (values.size() != n) {
        throw ParseError("line " + std::to_string(line_no) + ": key '" + key +
                         "' expects " + std::to_string(n) + " values, got " +
                         std::to_string(values.size()));
      }
    };
    if (key.size() == 2 && key[0] == 'P' && key[1] >= '0' && key[1] <= '3') {
      expect(12);
      Mat34 m;
      std::copy(values.begin(), values.end(), m.begin());
      calib.projections[key] = m;
    } else if (key == "R0_rect") {
      expect(9);
      Mat33 m;
      std::copy(values.begin(), values.end(), m.begin());
      calib.rectification = m;
    } else if (key == "Tr_velo_to_cam") {
      expect(12);
      Mat34 m;
      std::copy(values.begin(), values.end(), m.begin());
      calib.velo_to_cam = m;
    } else {
      calib.extras.emplace_back(key, std::move(values));
    }
  }
  return calib;
}

CalibrationFile parse_calibration_text(const std::string& text) {
  std::istringstream in(text);
  return parse_calibration(in);
}

CalibrationFile read_calibration(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open calibration file: " + path.string());
  return parse_calibration(in);
}

void write_calibration(const CalibrationFile& calib, std::ostream& out) {
  const auto emit = [&out](const std::string& key, const double* values,
                           std::size_t n) {
    out << key << ':';
    for (std::size_t i = 0; i < n; ++i) out << ' ' << format_double(values[i]);
    out << '\n';
  };
  for (const auto& [key, m] : calib.projections) emit(key, m.data(), m.size());
  if (calib.rectification)
    emit("R0_rect", calib.rectification->data(), calib.rectification->size());
  if (calib.velo_to_cam)
    emit("Tr_velo_to_cam", calib.velo_to_cam->data(), calib.velo_to_cam->size());
  for (const auto& [key, values] : calib.extras)
    emit(key, values.data(), values.size());
}

std::string calibration_to_text(const CalibrationFile& calib) {
  std::ostringstream out;
  write_calibration(calib, out);
  return out.str();
}

CameraIntrinsics intrinsics_from_calibration(const CalibrationFile& calib,
                                             const std::string& camera,
                                             int image_w, int image_h) {
  const auto it = calib.projections.find(camera);
  if (it == calib.projections.end())
    throw InputError("missing " + camera + " in calibration");
  const Mat34& p = it->second;
  CameraIntrinsics intr{p[0], p[5], p[2], p[6], p[7], image_w, image_h};
  intr.validate();
  return intr;
}

std::vector<LabelRecord> parse_labels(std::istream& in) {
  std::vector<LabelRecord> records;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string stripped = trim(line);
    if (stripped.empty()) continue;
    const auto tokens = split_ws(stripped);
    if (tokens.size() != 15 && tokens.size() != 16) {
      throw ParseError("line " + std::to_string(line_no) + ": expected 15 or 16 fields, got " +
                       std::to_string(tokens.size()));
    }
    LabelRecord r;
    r.category = tokens[0];
    r.truncation = parse_number(tokens[1], line_no);
    r.occlusion = static_cast<int>(std::lround(parse_number(tokens[2], line_no)));
    r.alpha = normalize_angle(parse_number(tokens[3], line_no));
    r.bbox2d = {parse_number(tokens[4], line_no), parse_number(tokens[5], line_no),
                parse_number(tokens[6], line_no), parse_number(tokens[7], line_no)};
    r.h3d = parse_number(tokens[8], line_no);
    r.w3d = parse_number(tokens[9], line_no);
    r.l3d = parse_number(tokens[10], line_no);
    r.x3d = parse_number(tokens[11], line_no);
    r.y3d = parse_number(tokens[12], line_no);
    r.z3d = parse_number(tokens[13], line_no);
    r.rotation_y = normalize_angle(parse_number(tokens[14], line_no));
    if (tokens.size() == 16) r.score = parse_number(tokens[15], line_no);
    if (!r.is_dontcare()) {
      if (r.h3d < 0 || r.w3d < 0 || r.l3d < 0) {
        throw ParseError("line " + std::to_string(line_no) +
                         ": negative dimensions on non-DontCare record");
      }
      if (r.z3d < 0) {
        throw ParseError("line " + std::to_string(line_no) +
                         ": negative depth on non-DontCare record");
      }
    }
    records.push_back(std::move(r));
  }
  return records;
}

std::vector<LabelRecord> parse_labels_text(const std::string& text) {
  std::istringstream in(text);
  return parse_labels(in);
}

std::vector<LabelRecord> read_labels(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open label file: " + path.string());
  return parse_labels(in);
}

void write_labels(std::span<const LabelRecord> labels, std::ostream& out) {
  char buf[512];
  for (const LabelRecord& r : labels) {
    int n = std::snprintf(
        buf, sizeof(buf),
        "%s %.2f %d %.2f %.2f %.2f %.2f %.2f %.2f %.2f %.2f %.2f %.2f %.2f %.2f",
        r.category.c_str(), r.truncation, r.occlusion, r.alpha, r.bbox2d.left,
        r.bbox2d.top, r.bbox2d.right, r.bbox2d.bottom, r.h3d, r.w3d, r.l3d,
        r.x3d, r.y3d, r.z3d, r.rotation_y);
    out.write(buf, n);
    if (r.score) {
      n = std::snprintf(buf, sizeof(buf), " %.6f", *r.score);
      out.write(buf, n);
    }
    out.put('\n');
  }
}

std::string labels_to_text(std::span<const LabelRecord> labels) {
  std::ostringstream out;
  write_labels(labels, out);
  return out.str();
}

void write_labels_file(std::span<const LabelRecord> labels,
                       const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot open label file for writing: " + path.string());
  write_labels(labels, out);
}

std::pair<std::vector<LabelRecord>, CalibrationFile> flip_horizontal(
    std::span<const LabelRecord> labels, const CalibrationFile& calib,
    int image_width) {
  if (image_width <= 0)
    throw ConfigError("flip_horizontal: image width must be positive");
  const double w1 = image_width - 1.0;

  std::vector<LabelRecord> flipped(labels.begin(), labels.end());
  for (LabelRecord& r : flipped) {
    const double left = r.bbox2d.left, right = r.bbox2d.right;
    r.bbox2d.left = w1 - right;
    r.bbox2d.right = w1 - left;
    r.x3d = -r.x3d;
    r.rotation_y = normalize_angle(kPi - r.rotation_y);
    if (r.z3d > 0) {
      r.alpha = alpha_from_yaw(r.rotation_y, r.x3d, r.z3d);
    } else {
      r.alpha = normalize_angle(kPi - r.alpha);  // sentinel geometry
    }
  }

  CalibrationFile out = calib;
  for (auto& [key, p] : out.projections) p[2] = w1 - p[2];
  return {std::move(flipped), std::move(out)};
}

std::pair<CalibrationFile, std::vector<LabelRecord>> crop_top(
    const CalibrationFile& calib, std::span<const LabelRecord> labels,
    int crop_rows) {
  if (crop_rows < 0) throw ConfigError("crop_top: crop_rows must be >= 0");
  CalibrationFile out_calib = calib;
  for (auto& [key, p] : out_calib.projections) p[6] -= crop_rows;
  std::vector<LabelRecord> out_labels(labels.begin(), labels.end());
  for (LabelRecord& r : out_labels) {
    r.bbox2d.top = std::max(0.0, r.bbox2d.top - crop_rows);
    r.bbox2d.bottom = std::max(0.0, r.bbox2d.bottom - crop_rows);
  }
  return {std::move(out_calib), std::move(out_labels)};
}

std::string frame_name(int frame_id) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%06d", frame_id);
  return buf;
}

std::vector<std::string> read_split(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open split file: " + path.string());
  std::vector<std::string> ids;
  std::string line;
  while (std::getline(in, line)) {
    const std::string id = trim(line);
    if (!id.empty()) ids.push_back(id);
  }
  return ids;
}

}  // namespace ga3d
