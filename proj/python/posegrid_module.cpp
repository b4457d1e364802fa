#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <tuple>

#include <json.hpp>

#include "posegrid/engine.hpp"
#include "posegrid/features.hpp"
#include "posegrid/geometry.hpp"
#include "posegrid/harness.hpp"
#include "posegrid/json_codec.hpp"
#include "posegrid/scene.hpp"

namespace py = pybind11;
using namespace posegrid;

namespace {

nlohmann::json parse(const std::string& text) {
  return text.empty() ? nlohmann::json::object() : nlohmann::json::parse(text);
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "matching-free image-to-point-cloud registration core";

  py::class_<CameraIntrinsics>(m, "CameraIntrinsics")
      .def(py::init<>())
      .def_readwrite("fx", &CameraIntrinsics::fx)
      .def_readwrite("fy", &CameraIntrinsics::fy)
      .def_readwrite("cx", &CameraIntrinsics::cx)
      .def_readwrite("cy", &CameraIntrinsics::cy)
      .def_readwrite("width", &CameraIntrinsics::width)
      .def_readwrite("height", &CameraIntrinsics::height)
      .def("validate", &CameraIntrinsics::validate)
      .def("__repr__", [](const CameraIntrinsics& k) {
        return "CameraIntrinsics(" + std::to_string(k.width) + "x" +
               std::to_string(k.height) + ")";
      });

  py::class_<Pose>(m, "Pose")
      .def(py::init<>())
      .def(py::init<const Mat3&, const Vec3&>(), py::arg("rotation"),
           py::arg("translation"))
      .def_property_readonly("rotation", &Pose::rotation)
      .def_property_readonly("translation", &Pose::translation)
      .def_static("identity", &Pose::identity);

  m.def("euler_to_rotation", &euler_to_rotation, py::arg("yaw_deg"),
        py::arg("pitch_deg") = 0.0, py::arg("roll_deg") = 0.0);

  m.def(
      "pose_errors",
      [](const Pose& estimate, const Pose& truth) {
        const PoseErrors e = pose_errors(estimate, truth);
        return std::make_tuple(e.rre_deg, e.rte_m);
      },
      py::arg("estimate"), py::arg("truth"),
      "Rotation error in degrees and translation error in meters.");

  m.def(
      "project",
      [](const Vec3& point, const Pose& pose,
         const CameraIntrinsics& intrinsics)
          -> std::optional<std::tuple<int, int, double>> {
        const auto hit = project(point, pose, intrinsics);
        if (!hit) {
          return std::nullopt;
        }
        return std::make_tuple(hit->u, hit->v, hit->depth);
      },
      py::arg("point"), py::arg("pose"), py::arg("intrinsics"),
      "Pixel (u, v, depth) of a scene point, or None outside the frustum.");

  py::class_<ScenePair>(m, "ScenePair")
      .def_property_readonly(
          "cloud", [](const ScenePair& s) { return s.cloud.points; })
      .def_readonly("gt_pose", &ScenePair::gt_pose)
      .def_readonly("intrinsics", &ScenePair::intrinsics)
      .def_readonly("scene_id", &ScenePair::scene_id)
      .def_readonly("seed", &ScenePair::seed);

  m.def(
      "generate_scene",
      [](const std::string& config_json, std::uint64_t seed, int scene_id) {
        return generate_scene(scene_gen_from_json(parse(config_json)), seed,
                              scene_id);
      },
      py::arg("config_json") = "", py::arg("seed") = 0,
      py::arg("scene_id") = 0,
      "Synthesize one scene; the JSON config uses the CLI schema.");

  m.def(
      "perturb_problem",
      [](const ScenePair& scene, const std::string& config_json,
         std::uint64_t seed) {
        return perturb_problem(scene, perturb_from_json(parse(config_json)),
                               seed);
      },
      py::arg("scene"), py::arg("config_json") = "", py::arg("seed") = 0);

  py::class_<RegistrationResult>(m, "RegistrationResult")
      .def_readonly("final_pose", &RegistrationResult::final_pose)
      .def_readonly("iterations_run", &RegistrationResult::iterations_run)
      .def("to_json", [](const RegistrationResult& r) {
        return registration_result_to_json(r).dump(2);
      });

  m.def(
      "run_registration",
      [](const ScenePair& scene, const Pose& initial_pose,
         const std::string& engine_json, bool truth_known) {
        EngineConfig config = engine_config_from_json(parse(engine_json), ".");
        config.initial_pose = initial_pose;
        py::gil_scoped_release release;
        return run_registration(scene, config, truth_known);
      },
      py::arg("scene"), py::arg("initial_pose"), py::arg("engine_json") = "",
      py::arg("truth_known") = true);

  m.def(
      "run_benchmark",
      [](const std::string& suite_json) {
        const SuiteConfig config =
            suite_config_from_json(parse(suite_json), ".");
        BenchmarkReport report;
        {
          py::gil_scoped_release release;
          report = run_benchmark(config);
        }
        return report_to_json(report).dump(2);
      },
      py::arg("suite_json"),
      "Full suite run; returns the report as a JSON string.");

  m.def(
      "write_scene_files",
      [](const ScenePair& scene, const std::string& dir,
         const std::string& basename) {
        return write_scene_files(scene, dir, basename).json;
      },
      py::arg("scene"), py::arg("dir"), py::arg("basename"),
      "Writes the scene bundle to disk and returns the JSON path.");

  m.def(
      "load_scene_file",
      [](const std::string& path) {
        bool has_gt = false;
        ScenePair scene = load_scene_file(path, &has_gt);
        return std::make_pair(std::move(scene), has_gt);
      },
      py::arg("path"));
}
