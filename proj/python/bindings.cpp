#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "ga3d/anchors.hpp"
#include "ga3d/boxes.hpp"
#include "ga3d/camera.hpp"
#include "ga3d/config.hpp"
#include "ga3d/evaluation.hpp"
#include "ga3d/gac.hpp"
#include "ga3d/kitti_io.hpp"
#include "ga3d/losses.hpp"
#include "ga3d/post_optim.hpp"
#include "ga3d/synthetic.hpp"

namespace py = pybind11;
using namespace ga3d;

namespace {

py::array_t<double> array_from_map(const FeatureMap& map) {
  py::array_t<double> out({map.channels, map.rows, map.cols});
  std::copy(map.data.begin(), map.data.end(), out.mutable_data());
  return out;
}

FeatureMap map_from_array(const py::array_t<double, py::array::c_style |
                                                         py::array::forcecast>& a) {
  FeatureMap map;
  if (a.ndim() == 2) {
    map = FeatureMap(1, static_cast<int>(a.shape(0)), static_cast<int>(a.shape(1)));
  } else if (a.ndim() == 3) {
    map = FeatureMap(static_cast<int>(a.shape(0)), static_cast<int>(a.shape(1)),
                     static_cast<int>(a.shape(2)));
  } else {
    throw ShapeError("expected a 2D or 3D array");
  }
  std::copy(a.data(), a.data() + a.size(), map.data.begin());
  return map;
}

Matrix matrix_from_array(const py::array_t<double, py::array::c_style |
                                                       py::array::forcecast>& a) {
  if (a.ndim() != 2) throw ShapeError("expected a 2D array");
  Matrix m(static_cast<int>(a.shape(0)), static_cast<int>(a.shape(1)));
  std::copy(a.data(), a.data() + a.size(), m.data.begin());
  return m;
}

std::vector<double> vector_from_array(
    const py::array_t<double, py::array::c_style | py::array::forcecast>& a) {
  return {a.data(), a.data() + a.size()};
}

OffsetField offsets_from_arrays(const py::array_t<double>& base,
                                const py::array_t<double>& residual, int rows,
                                int cols) {
  OffsetField f;
  f.rows = rows;
  f.cols = cols;
  f.base = vector_from_array(base);
  f.residual = vector_from_array(residual);
  f.validate();
  return f;
}

}  // namespace

PYBIND11_MODULE(ga3d, m) {
  m.doc() = "ground-aware monocular 3D detection toolkit";

  py::register_exception<InputError>(m, "InputError", PyExc_ValueError);
  py::register_exception<GeometryError>(m, "GeometryError", PyExc_ValueError);
  py::register_exception<ShapeError>(m, "ShapeError", PyExc_ValueError);

  py::class_<CameraIntrinsics>(m, "CameraIntrinsics")
      .def(py::init<double, double, double, double, double, int, int>(),
           py::arg("fx"), py::arg("fy"), py::arg("cx"), py::arg("cy"),
           py::arg("ty") = 0.0, py::arg("image_w") = 1280, py::arg("image_h") = 288)
      .def_readwrite("fx", &CameraIntrinsics::fx)
      .def_readwrite("fy", &CameraIntrinsics::fy)
      .def_readwrite("cx", &CameraIntrinsics::cx)
      .def_readwrite("cy", &CameraIntrinsics::cy)
      .def_readwrite("ty", &CameraIntrinsics::ty)
      .def_readwrite("image_w", &CameraIntrinsics::image_w)
      .def_readwrite("image_h", &CameraIntrinsics::image_h);

  py::class_<GroundModel>(m, "GroundModel")
      .def(py::init<double, double>(), py::arg("elevation") = 1.65,
           py::arg("virtual_baseline") = 0.54)
      .def_readwrite("elevation", &GroundModel::elevation)
      .def_readwrite("virtual_baseline", &GroundModel::virtual_baseline);

  py::class_<Box2D>(m, "Box2D")
      .def(py::init<double, double, double, double>(), py::arg("left"),
           py::arg("top"), py::arg("right"), py::arg("bottom"))
      .def_readwrite("left", &Box2D::left)
      .def_readwrite("top", &Box2D::top)
      .def_readwrite("right", &Box2D::right)
      .def_readwrite("bottom", &Box2D::bottom)
      .def("width", &Box2D::width)
      .def("height", &Box2D::height)
      .def("area", &Box2D::area);

  py::class_<Box3D>(m, "Box3D")
      .def(py::init<double, double, double, double, double, double, double>(),
           py::arg("x"), py::arg("y"), py::arg("z"), py::arg("w"), py::arg("h"),
           py::arg("l"), py::arg("yaw"))
      .def_readwrite("x", &Box3D::x)
      .def_readwrite("y", &Box3D::y)
      .def_readwrite("z", &Box3D::z)
      .def_readwrite("w", &Box3D::w)
      .def_readwrite("h", &Box3D::h)
      .def_readwrite("l", &Box3D::l)
      .def_readwrite("yaw", &Box3D::yaw);

  m.def(
      "project",
      [](double x, double y, double z, const CameraIntrinsics& intr) {
        const Pixel p = project({x, y, z}, intr);
        return py::make_tuple(p.u, p.v);
      },
      py::arg("x"), py::arg("y"), py::arg("z"), py::arg("intr"));
  m.def(
      "backproject",
      [](double u, double v, double z, const CameraIntrinsics& intr, bool exact) {
        const Point3 p = backproject(
            u, v, z, intr,
            exact ? BackprojectMode::exact : BackprojectMode::ignore_ty);
        return py::make_tuple(p.x, p.y, p.z);
      },
      py::arg("u"), py::arg("v"), py::arg("z"), py::arg("intr"),
      py::arg("exact") = true);
  m.def(
      "ground_depth",
      [](double v, const CameraIntrinsics& intr, const GroundModel& g)
          -> std::optional<double> { return ground_depth(v, intr, g); },
      py::arg("v"), py::arg("intr"), py::arg("ground") = GroundModel{});
  m.def("virtual_disparity", &virtual_disparity, py::arg("v"), py::arg("intr"),
        py::arg("ground") = GroundModel{});
  m.def(
      "depth_prior_map",
      [](const CameraIntrinsics& intr, const GroundModel& g, int stride, int rows,
         int cols) { return array_from_map(depth_prior_map(intr, g, stride, rows, cols)); },
      py::arg("intr"), py::arg("ground"), py::arg("stride"), py::arg("rows"),
      py::arg("cols"));

  m.def("corners3d", [](const Box3D& box) {
    const auto corners = corners3d(box);
    py::array_t<double> out({8, 3});
    auto* p = out.mutable_data();
    for (const Point3& c : corners) {
      *p++ = c.x;
      *p++ = c.y;
      *p++ = c.z;
    }
    return out;
  });
  m.def("project_box", &project_box, py::arg("box"), py::arg("intr"));
  m.def("iou_2d", &iou_2d);
  m.def("iou_bev", &iou_bev);
  m.def("iou_3d", &iou_3d);
  m.def("alpha_from_yaw", &alpha_from_yaw, py::arg("yaw"), py::arg("x"), py::arg("z"));
  m.def("yaw_from_alpha", &yaw_from_alpha, py::arg("alpha"), py::arg("x"), py::arg("z"));
  m.def("normalize_angle", &normalize_angle);

  py::class_<LabelRecord>(m, "LabelRecord")
      .def(py::init<>())
      .def_readwrite("category", &LabelRecord::category)
      .def_readwrite("truncation", &LabelRecord::truncation)
      .def_readwrite("occlusion", &LabelRecord::occlusion)
      .def_readwrite("alpha", &LabelRecord::alpha)
      .def_readwrite("bbox2d", &LabelRecord::bbox2d)
      .def_readwrite("h3d", &LabelRecord::h3d)
      .def_readwrite("w3d", &LabelRecord::w3d)
      .def_readwrite("l3d", &LabelRecord::l3d)
      .def_readwrite("x3d", &LabelRecord::x3d)
      .def_readwrite("y3d", &LabelRecord::y3d)
      .def_readwrite("z3d", &LabelRecord::z3d)
      .def_readwrite("rotation_y", &LabelRecord::rotation_y)
      .def_readwrite("score", &LabelRecord::score)
      .def("box3d", &LabelRecord::box3d);

  py::class_<CalibrationFile>(m, "CalibrationFile").def(py::init<>());

  m.def("parse_calibration", &parse_calibration_text, py::arg("text"));
  m.def("calibration_to_text", &calibration_to_text, py::arg("calib"));
  m.def("parse_labels", &parse_labels_text, py::arg("text"));
  m.def(
      "labels_to_text",
      [](const std::vector<LabelRecord>& labels) { return labels_to_text(labels); },
      py::arg("labels"));
  m.def("intrinsics_from_calibration", &intrinsics_from_calibration,
        py::arg("calib"), py::arg("camera"), py::arg("image_w"), py::arg("image_h"));
  m.def(
      "flip_horizontal",
      [](const std::vector<LabelRecord>& labels, const CalibrationFile& calib,
         int width) { return flip_horizontal(labels, calib, width); },
      py::arg("labels"), py::arg("calib"), py::arg("image_width"));
  m.def(
      "crop_top",
      [](const CalibrationFile& calib, const std::vector<LabelRecord>& labels,
         int rows) { return crop_top(calib, labels, rows); },
      py::arg("calib"), py::arg("labels"), py::arg("crop_rows"));

  py::class_<AnchorShape>(m, "AnchorShape")
      .def_readonly("w2d", &AnchorShape::w2d)
      .def_readonly("h2d", &AnchorShape::h2d);
  py::class_<AnchorStats>(m, "AnchorStats");
  py::class_<AnchorGrid>(m, "AnchorGrid")
      .def_readonly("stride", &AnchorGrid::stride)
      .def_readonly("rows", &AnchorGrid::rows)
      .def_readonly("cols", &AnchorGrid::cols)
      .def_readonly("shapes", &AnchorGrid::shapes)
      .def("anchor_count", &AnchorGrid::anchor_count)
      .def("anchor_box", &AnchorGrid::anchor_box)
      .def("set_priors",
           [](AnchorGrid& grid, const AnchorStats& stats) {
             attach_priors(grid, grid.shapes, stats);
           });

  py::class_<FrameGroundTruth>(m, "FrameGroundTruth")
      .def(py::init([](std::vector<LabelRecord> labels, CalibrationFile calib) {
             return FrameGroundTruth{std::move(labels), std::move(calib)};
           }),
           py::arg("labels"), py::arg("calib"))
      .def_readwrite("labels", &FrameGroundTruth::labels)
      .def_readwrite("calib", &FrameGroundTruth::calib);

  m.def(
      "build_grid",
      [](const CameraIntrinsics& intr, int stride, std::vector<double> scales,
         std::vector<double> ratios) { return build_grid(intr, stride, scales, ratios); },
      py::arg("intr"), py::arg("stride"), py::arg("scales"), py::arg("ratios"));
  m.def(
      "collect_stats",
      [](const AnchorGrid& grid, const std::vector<FrameGroundTruth>& corpus,
         double iou_threshold, int jobs, long min_support) {
        return collect_stats(grid, corpus, iou_threshold, jobs, min_support);
      },
      py::arg("grid"), py::arg("corpus"), py::arg("iou_threshold") = 0.5,
      py::arg("jobs") = 1, py::arg("min_support") = 10);
  m.def(
      "filter_ground",
      [](const AnchorGrid& grid, const CameraIntrinsics& intr,
         const GroundModel& ground, double tolerance) {
        const std::vector<bool> mask = filter_ground(grid, intr, ground, tolerance);
        py::array_t<bool> out(static_cast<py::ssize_t>(mask.size()));
        auto* p = out.mutable_data();
        for (bool b : mask) *p++ = b;
        return out;
      },
      py::arg("grid"), py::arg("intr"), py::arg("ground"), py::arg("tolerance"));

  m.def("base_offsets",
        [](int rows, int stride, const CameraIntrinsics& intr,
           const GroundModel& ground, double object_height) {
          const auto v = base_offsets(rows, stride, intr, ground, object_height);
          return py::array_t<double>(static_cast<py::ssize_t>(v.size()), v.data());
        });
  m.def(
      "gac_forward",
      [](const py::array_t<double>& features, const py::array_t<double>& prior,
         const py::array_t<double>& base, const py::array_t<double>& residual,
         const py::array_t<double>& mixing) {
        const FeatureMap f = map_from_array(features);
        const FeatureMap p = map_from_array(prior);
        const OffsetField off = offsets_from_arrays(base, residual, f.rows, f.cols);
        return array_from_map(gac_forward(f, p, off, matrix_from_array(mixing)));
      },
      py::arg("features"), py::arg("prior"), py::arg("base"), py::arg("residual"),
      py::arg("mixing"));
  m.def(
      "gac_backward",
      [](const py::array_t<double>& upstream, const py::array_t<double>& features,
         const py::array_t<double>& prior, const py::array_t<double>& base,
         const py::array_t<double>& residual, const py::array_t<double>& mixing) {
        const FeatureMap f = map_from_array(features);
        const FeatureMap p = map_from_array(prior);
        const OffsetField off = offsets_from_arrays(base, residual, f.rows, f.cols);
        GacGradients g = gac_backward(map_from_array(upstream), f, p, off,
                                      matrix_from_array(mixing));
        py::dict out;
        out["features"] = array_from_map(g.features);
        out["prior"] = array_from_map(g.prior);
        py::array_t<double> res({g.features.rows, g.features.cols});
        std::copy(g.residual.begin(), g.residual.end(), res.mutable_data());
        out["residual"] = res;
        py::array_t<double> mix({g.mixing.rows, g.mixing.cols});
        std::copy(g.mixing.data.begin(), g.mixing.data.end(), mix.mutable_data());
        out["mixing"] = mix;
        return out;
      },
      py::arg("upstream"), py::arg("features"), py::arg("prior"), py::arg("base"),
      py::arg("residual"), py::arg("mixing"));
  m.def("identity_mixing", [](int channels) {
    const Matrix m2 = Matrix::identity_mixing(channels);
    py::array_t<double> out({m2.rows, m2.cols});
    std::copy(m2.data.begin(), m2.data.end(), out.mutable_data());
    return out;
  });

  m.def(
      "focal_loss",
      [](double p, int target, double gamma, double balance) {
        const LossValue v = focal_loss(p, target, gamma, balance);
        return py::make_tuple(v.value, v.gradient[0]);
      },
      py::arg("p"), py::arg("target"), py::arg("gamma") = 2.0,
      py::arg("balance") = 0.25);
  m.def(
      "smooth_l1",
      [](double r, double beta) {
        const LossValue v = smooth_l1(r, beta);
        return py::make_tuple(v.value, v.gradient[0]);
      },
      py::arg("residual"), py::arg("beta") = 1.0);
  m.def(
      "multibin_ce",
      [](std::vector<double> logits, double value, std::vector<double> edges) {
        const LossValue v = multibin_ce(logits, value, edges);
        return py::make_tuple(v.value, v.gradient);
      },
      py::arg("logits"), py::arg("true_value"), py::arg("bin_edges"));
  m.def(
      "si_loss",
      [](const py::array_t<double>& pred, const py::array_t<double>& gt,
         const py::array_t<bool, py::array::c_style | py::array::forcecast>& mask,
         double lam) {
        const FeatureMap p = map_from_array(pred);
        const FeatureMap g = map_from_array(gt);
        std::vector<bool> valid(mask.data(), mask.data() + mask.size());
        const LossValue v = si_loss(p, g, valid, lam);
        py::array_t<double> grad({p.rows, p.cols});
        std::copy(v.gradient.begin(), v.gradient.end(), grad.mutable_data());
        return py::make_tuple(v.value, grad);
      },
      py::arg("pred_log_depth"), py::arg("gt_log_depth"), py::arg("valid_mask"),
      py::arg("lambda_") = 0.3);
  m.def(
      "smoothness_loss",
      [](const py::array_t<double>& pred, const py::array_t<double>& image) {
        const FeatureMap p = map_from_array(pred);
        const LossValue v = smoothness_loss(p, map_from_array(image));
        py::array_t<double> grad({p.rows, p.cols});
        std::copy(v.gradient.begin(), v.gradient.end(), grad.mutable_data());
        return py::make_tuple(v.value, grad);
      },
      py::arg("pred_depth"), py::arg("image"));

  py::enum_<RefineVariables>(m, "RefineVariables")
      .value("angle_only", RefineVariables::angle_only)
      .value("angle_and_depth", RefineVariables::angle_and_depth);
  py::class_<HillClimbConfig>(m, "HillClimbConfig")
      .def(py::init<>())
      .def_readwrite("variables", &HillClimbConfig::variables)
      .def_readwrite("step_alpha", &HillClimbConfig::step_alpha)
      .def_readwrite("step_z", &HillClimbConfig::step_z)
      .def_readwrite("shrink", &HillClimbConfig::shrink)
      .def_readwrite("max_iterations", &HillClimbConfig::max_iterations)
      .def_readwrite("epsilon", &HillClimbConfig::epsilon);
  m.def(
      "refine",
      [](const Box3D& box3d, const Box2D& box2d, const CameraIntrinsics& intr,
         const HillClimbConfig& cfg) {
        const RefineResult r = refine(box3d, box2d, intr, cfg);
        return py::make_tuple(r.box, r.iou, r.accepted_moves);
      },
      py::arg("box3d"), py::arg("box2d"), py::arg("intr"),
      py::arg("config") = HillClimbConfig{});

  m.def(
      "evaluate",
      [](const std::filesystem::path& predictions,
         const std::filesystem::path& ground_truth,
         std::vector<std::string> classes, std::vector<double> car_ious, int jobs) {
        EvalConfig cfg;
        cfg.classes = std::move(classes);
        cfg.iou_thresholds.clear();
        cfg.iou_thresholds["Car"] = std::move(car_ious);
        cfg.jobs = jobs;
        const EvalReport report = evaluate(predictions, ground_truth, cfg);
        py::dict metrics;
        for (const auto& [key, value] : report.metrics) {
          metrics[py::str(key.name())] =
              value ? py::cast(*value) : py::cast<py::none>(Py_None);
        }
        return py::make_tuple(metrics, report.warnings);
      },
      py::arg("predictions_dir"), py::arg("ground_truth_dir"),
      py::arg("classes") = std::vector<std::string>{"Car"},
      py::arg("car_ious") = std::vector<double>{0.7, 0.5}, py::arg("jobs") = 1);

  py::class_<ClassDims>(m, "ClassDims")
      .def(py::init<>())
      .def_readwrite("category", &ClassDims::category)
      .def_readwrite("mean_h", &ClassDims::mean_h)
      .def_readwrite("std_h", &ClassDims::std_h)
      .def_readwrite("mean_w", &ClassDims::mean_w)
      .def_readwrite("std_w", &ClassDims::std_w)
      .def_readwrite("mean_l", &ClassDims::mean_l)
      .def_readwrite("std_l", &ClassDims::std_l);
  py::class_<SceneSpec>(m, "SceneSpec")
      .def(py::init<>())
      .def_readwrite("seed", &SceneSpec::seed)
      .def_readwrite("min_objects", &SceneSpec::min_objects)
      .def_readwrite("max_objects", &SceneSpec::max_objects)
      .def_readwrite("min_depth", &SceneSpec::min_depth)
      .def_readwrite("max_depth", &SceneSpec::max_depth)
      .def_readwrite("min_lateral", &SceneSpec::min_lateral)
      .def_readwrite("max_lateral", &SceneSpec::max_lateral)
      .def_readwrite("classes", &SceneSpec::classes)
      .def_readwrite("camera", &SceneSpec::camera)
      .def_readwrite("ground", &SceneSpec::ground);
  py::class_<SyntheticFrame>(m, "SyntheticFrame")
      .def_readonly("calib", &SyntheticFrame::calib)
      .def_readonly("labels", &SyntheticFrame::labels);
  m.def("generate", &generate, py::arg("spec"), py::arg("frames"));
  m.def("write_dataset", &write_dataset, py::arg("frames"), py::arg("root"));
}
