// Command-line front end: scene synthesis, single-scene registration,
// benchmark suites, scorer training and gradient self-checks.
//
// Exit codes: 0 success, 2 config error, 3 no-overlap abort, 1 other failure.
// Input paths inside a config resolve against the config file's directory;
// output paths resolve against the working directory. Timing goes to stderr
// so stdout stays byte-stable for a fixed seed.

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "posegrid/engine.hpp"
#include "posegrid/harness.hpp"
#include "posegrid/json_codec.hpp"
#include "posegrid/losses.hpp"
#include "posegrid/rng.hpp"
#include "posegrid/scoring.hpp"

namespace {

using nlohmann::json;
using namespace posegrid;

// Raised for anything wrong with the request itself rather than the run.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct CommandArgs {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out;
};

json load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw ConfigError("cannot open config " + path);
  }
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

std::string config_dir(const std::string& path) {
  return std::filesystem::path(path).parent_path().string();
}

std::string resolve_against(const std::string& dir, const std::string& rel) {
  const std::filesystem::path p(rel);
  return p.is_absolute() ? rel : (std::filesystem::path(dir) / p).string();
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw std::runtime_error("cannot open " + path + " for writing");
  }
  out << text;
}

void emit(const json& doc, const std::string& out_path) {
  const std::string text = doc.dump(2) + "\n";
  if (out_path.empty()) {
    std::fputs(text.c_str(), stdout);
  } else {
    write_text_file(out_path, text);
  }
}

class Stopwatch {
 public:
  explicit Stopwatch(const char* label) : label_(label) {}
  ~Stopwatch() {
    const auto elapsed = std::chrono::steady_clock::now() - start_;
    std::fprintf(stderr, "%s: %.1f s\n", label_,
                 std::chrono::duration<double>(elapsed).count());
  }

 private:
  const char* label_;
  std::chrono::steady_clock::time_point start_ =
      std::chrono::steady_clock::now();
};

// Interprets the already-parsed JSON; any exception here is the user's fault.
template <typename F>
auto as_config(F&& f) {
  try {
    return f();
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(e.what());
  }
}

std::string scene_basename(int index) {
  char buffer[32];
  std::snprintf(buffer, sizeof(buffer), "scene_%03d", index);
  return buffer;
}

int cmd_synth(const CommandArgs& args) {
  const json config = load_config_file(args.config_path);
  int count = 1;
  std::uint64_t seed = 0;
  std::string out_dir;
  SceneGenConfig scene_config;
  as_config([&] {
    count = config.value("count", 1);
    if (count < 1) {
      throw ConfigError("synth: count must be >= 1");
    }
    seed = args.seed.value_or(config.value("seed", std::uint64_t{0}));
    out_dir = args.out.empty()
                  ? config.value("out_dir", std::string("scenes"))
                  : args.out;
    if (config.contains("scene")) {
      scene_config = scene_gen_from_json(config.at("scene"));
    }
    return 0;
  });

  Stopwatch timer("synth");
  json names = json::array();
  for (int i = 0; i < count; ++i) {
    const ScenePair scene =
        generate_scene(scene_config, mix_seed(seed, i + 1), i);
    const SceneFilePaths paths =
        write_scene_files(scene, out_dir, scene_basename(i));
    names.push_back(std::filesystem::path(paths.json).filename().string());
  }
  emit(json{{"count", count},
            {"seed", seed},
            {"out_dir", out_dir},
            {"scenes", names}},
       "");
  return 0;
}

int cmd_register(const CommandArgs& args) {
  const json config = load_config_file(args.config_path);
  const std::string base = config_dir(args.config_path);

  ScenePair scene;
  bool has_gt = false;
  EngineConfig engine;
  Pose initial;
  std::uint64_t seed = 0;
  as_config([&] {
    if (!config.contains("scene")) {
      throw ConfigError("register: missing scene path");
    }
    scene = load_scene_file(
        resolve_against(base, config.at("scene").get<std::string>()), &has_gt);
    if (config.contains("engine")) {
      engine = engine_config_from_json(config.at("engine"), base);
    }
    seed = args.seed.value_or(config.value("seed", scene.seed));
    if (config.contains("initial_pose")) {
      initial = pose_from_json(config.at("initial_pose"));
    } else if (config.contains("perturb")) {
      if (!has_gt) {
        throw ConfigError("register: perturbation needs a ground-truth pose");
      }
      initial = perturb_problem(scene, perturb_from_json(config.at("perturb")),
                                seed);
    } else {
      throw ConfigError("register: need initial_pose or perturb");
    }
    return 0;
  });
  engine.initial_pose = initial;

  Stopwatch timer("register");
  const RegistrationResult result = run_registration(scene, engine, has_gt);

  json doc{{"scene_id", scene.scene_id},
           {"seed", seed},
           {"truth_known", has_gt},
           {"initial_pose", pose_to_json(initial)},
           {"result", registration_result_to_json(result)}};
  if (has_gt) {
    const PoseErrors before = pose_errors(initial, scene.gt_pose);
    const PoseErrors after = pose_errors(result.final_pose, scene.gt_pose);
    doc["initial_rre_deg"] = round_sig(before.rre_deg);
    doc["initial_rte_m"] = round_sig(before.rte_m);
    doc["final_rre_deg"] = round_sig(after.rre_deg);
    doc["final_rte_m"] = round_sig(after.rte_m);
  }
  emit(doc, args.out);
  return 0;
}

int cmd_bench(const CommandArgs& args) {
  const json config = load_config_file(args.config_path);
  SuiteConfig suite = as_config([&] {
    SuiteConfig parsed =
        suite_config_from_json(config, config_dir(args.config_path));
    if (args.seed) {
      parsed.seed = *args.seed;
    }
    return parsed;
  });

  Stopwatch timer("bench");
  const BenchmarkReport report = run_benchmark(suite);
  const json doc = report_to_json(report);
  if (!args.out.empty()) {
    write_text_file(args.out + ".json", doc.dump(2) + "\n");
    std::string rows;
    for (const SceneRecord& record : report.scenes) {
      rows += scene_record_to_json(record).dump();
      rows += "\n";
    }
    write_text_file(args.out + ".jsonl", rows);
  }
  emit(doc, "");
  return 0;
}

int cmd_train_scorer(const CommandArgs& args) {
  const json config = load_config_file(args.config_path);
  std::uint64_t seed = 0;
  int scene_count = 10;
  SceneGenConfig scene_config;
  Schedule schedule = Schedule::defaults();
  TrainConfig train;
  as_config([&] {
    seed = args.seed.value_or(config.value("seed", std::uint64_t{0}));
    scene_count = config.value("scene_count", 10);
    if (scene_count < 1) {
      throw ConfigError("train-scorer: scene_count must be >= 1");
    }
    if (config.contains("scene")) {
      scene_config = scene_gen_from_json(config.at("scene"));
    }
    if (config.contains("schedule")) {
      schedule = schedule_from_json(config.at("schedule"));
    }
    if (config.contains("train")) {
      train = train_config_from_json(config.at("train"));
    }
    return 0;
  });
  const std::string prefix = args.out.empty() ? "scorer" : args.out;

  Stopwatch timer("train-scorer");
  std::vector<ScenePair> scenes;
  scenes.reserve(static_cast<std::size_t>(scene_count));
  for (int i = 0; i < scene_count; ++i) {
    scenes.push_back(generate_scene(scene_config, mix_seed(seed, i + 1), i));
  }
  const TrainResult result = train_scorer(scenes, schedule, train);

  const std::string params_path = prefix + ".params.bin";
  save_scorer_params(params_path, result.params);
  std::string csv = "step,loss\n";
  for (std::size_t i = 0; i < result.loss_curve.size(); ++i) {
    char line[64];
    std::snprintf(line, sizeof(line), "%zu,%.9g\n", i, result.loss_curve[i]);
    csv += line;
  }
  write_text_file(prefix + ".loss.csv", csv);

  emit(json{{"scene_count", scene_count},
            {"steps", result.loss_curve.size()},
            {"initial_loss", round_sig(result.loss_curve.front())},
            {"final_loss", round_sig(result.loss_curve.back())},
            {"final_learning_rate", round_sig(result.final_learning_rate)},
            {"params", params_path}},
       "");
  return 0;
}

// One named finite-difference comparison at a random base point.
struct CheckResult {
  std::string name;
  double max_rel_error = 0.0;
};

ScenePair small_check_scene(std::uint64_t seed) {
  SceneGenConfig config;
  config.point_count = 160;
  config.extent = 12.0;
  config.primitive_count = 4;
  config.intrinsics = CameraIntrinsics{6.0, 6.5, 6.0, 4.0, 12, 8};
  config.features.dim = 6;
  config.features.noise_sigma = 0.05;
  return generate_scene(config, seed);
}

CheckResult check_circle(std::uint64_t seed, double epsilon) {
  const ScenePair scene = small_check_scene(seed);
  CircleLossConfig config;
  config.radius = 1.5;
  const CorrespondenceSets sets = build_pos_neg_sets(scene, config);
  const FeatureMap2D& f2d = scene.features.map2d;
  const FeatureSet3D& f3d = scene.features.set3d;
  const ThetaTables thetas = capture_thetas(f2d, f3d, sets, config);

  const Eigen::Index n2 = f2d.values.size();
  const Eigen::Index n3 = f3d.values.size();
  Eigen::VectorXd point(n2 + n3);
  point.head(n2) = Eigen::Map<const Eigen::VectorXd>(f2d.values.data(), n2);
  point.tail(n3) = Eigen::Map<const Eigen::VectorXd>(f3d.values.data(), n3);

  const ScalarFunction fn = [&](const Eigen::VectorXd& x) {
    FeatureMap2D m = f2d;
    FeatureSet3D s = f3d;
    Eigen::Map<Eigen::VectorXd>(m.values.data(), n2) = x.head(n2);
    Eigen::Map<Eigen::VectorXd>(s.values.data(), n3) = x.tail(n3);
    const CircleLossResult res = circle_loss_frozen(m, s, sets, config, thetas);
    Eigen::VectorXd grad(n2 + n3);
    grad.head(n2) = Eigen::Map<const Eigen::VectorXd>(res.grad_2d.data(), n2);
    grad.tail(n3) = Eigen::Map<const Eigen::VectorXd>(res.grad_3d.data(), n3);
    return std::make_pair(res.value, std::move(grad));
  };
  return {"circle", grad_check(fn, point, epsilon)};
}

CheckResult check_focal(std::uint64_t seed, double epsilon) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> pred_draw(0.05, 0.95);
  const int n = 32;
  Eigen::VectorXd pred(n);
  Eigen::VectorXd labels(n);
  for (int i = 0; i < n; ++i) {
    pred[i] = pred_draw(rng);
    labels[i] = static_cast<double>(rng() & 1u);
  }
  const ScalarFunction fn = [&](const Eigen::VectorXd& x) {
    const ScalarLossResult res = focal_loss(x, labels);
    return std::make_pair(res.value, res.grad);
  };
  return {"focal", grad_check(fn, pred, epsilon)};
}

CheckResult check_cross_entropy(std::uint64_t seed, double epsilon) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> draw(0.0, 1.0);
  const int n = 27;
  Eigen::VectorXd scores(n);
  for (int i = 0; i < n; ++i) {
    scores[i] = draw(rng);
  }
  const int target = static_cast<int>(rng() % n);
  const ScalarFunction fn = [&](const Eigen::VectorXd& x) {
    const ScalarLossResult res = cross_entropy_scores(x, target);
    return std::make_pair(res.value, res.grad);
  };
  return {"cross_entropy", grad_check(fn, scores, epsilon)};
}

CheckResult check_conv(std::uint64_t seed, double epsilon) {
  SceneGenConfig scene_config;
  scene_config.point_count = 64;
  scene_config.extent = 10.0;
  scene_config.primitive_count = 3;
  scene_config.intrinsics = CameraIntrinsics{3.0, 3.5, 3.0, 3.0, 6, 6};
  scene_config.features.dim = 4;
  scene_config.features.noise_sigma = 0.05;
  const ScenePair scene = generate_scene(scene_config, seed);

  SamplingSpace space;
  space.rotation[0] = {true, 30.0, 3};
  space.translation[0] = {true, 1.0, 3};
  space.translation[2] = {true, 1.0, 3};
  const std::vector<Pose> candidates =
      sample_candidates(scene.gt_pose, space);
  const int target = static_cast<int>(
      nearest_candidate_index(candidates, scene.gt_pose, space));

  const VolumeInputs in{&scene.cloud,         &scene.features.set3d,
                        &scene.features.conf3d, &scene.features.map2d,
                        &scene.features.conf2d, &scene.intrinsics};
  ScorerParams params = init_scorer_params(
      2 * scene.features.map2d.dim() + 2, {4}, mix_seed(seed, 0xC0));
  const Eigen::VectorXd point = pack_params(params);

  const ScalarFunction fn = [&](const Eigen::VectorXd& x) {
    ScorerParams local = params;
    unpack_params(x, local);
    ScorerParams grads;
    const double value =
        scorer_state_loss(candidates, in, local, target, &grads);
    return std::make_pair(value, pack_params(grads));
  };
  return {"conv", grad_check(fn, point, epsilon)};
}

int cmd_grad_check(const CommandArgs& args) {
  json config = json::object();
  if (!args.config_path.empty()) {
    config = load_config_file(args.config_path);
  }
  std::uint64_t seed = 0;
  double epsilon = 1e-5;
  double tolerance = 1e-4;
  int points = 5;
  as_config([&] {
    seed = args.seed.value_or(config.value("seed", std::uint64_t{0}));
    epsilon = config.value("epsilon", epsilon);
    tolerance = config.value("tolerance", tolerance);
    points = config.value("points", points);
    if (epsilon <= 0.0 || tolerance <= 0.0 || points < 1) {
      throw ConfigError("grad-check: epsilon, tolerance, points must be > 0");
    }
    return 0;
  });

  Stopwatch timer("grad-check");
  using Check = CheckResult (*)(std::uint64_t, double);
  const Check checks[] = {check_circle, check_focal, check_cross_entropy,
                          check_conv};
  json rows = json::array();
  bool all_pass = true;
  for (const Check check : checks) {
    CheckResult worst;
    for (int r = 0; r < points; ++r) {
      const CheckResult res = check(mix_seed(seed, 0xD0 + r), epsilon);
      worst.name = res.name;
      worst.max_rel_error = std::max(worst.max_rel_error, res.max_rel_error);
    }
    const bool pass = worst.max_rel_error < tolerance;
    all_pass = all_pass && pass;
    rows.push_back(json{{"name", worst.name},
                        {"max_rel_error", round_sig(worst.max_rel_error)},
                        {"tolerance", tolerance},
                        {"pass", pass}});
  }
  emit(json{{"epsilon", epsilon},
            {"points", points},
            {"checks", rows},
            {"pass", all_pass}},
       args.out);
  return all_pass ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Matching-free image-to-point-cloud registration toolkit"};
  app.require_subcommand(1);

  struct Sub {
    CLI::App* cmd;
    CommandArgs args;
    int (*run)(const CommandArgs&);
  };
  std::vector<Sub> subs;
  const auto add = [&](const char* name, const char* help,
                       int (*run)(const CommandArgs&), bool config_required) {
    subs.push_back({app.add_subcommand(name, help), {}, run});
    Sub& sub = subs.back();
    auto* config =
        sub.cmd->add_option("config", sub.args.config_path, "JSON config file");
    if (config_required) {
      config->required()->check(CLI::ExistingFile);
    }
    sub.cmd->add_option("--seed", sub.args.seed,
                        "override the config's seed");
    sub.cmd->add_option("--out", sub.args.out, "output path");
  };
  subs.reserve(5);
  add("synth", "generate synthetic scenes", cmd_synth, true);
  add("register", "register one scene", cmd_register, true);
  add("bench", "run a benchmark suite", cmd_bench, true);
  add("train-scorer", "train the conv scorer", cmd_train_scorer, true);
  add("grad-check", "verify analytic gradients", cmd_grad_check, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    for (const Sub& sub : subs) {
      if (sub.cmd->parsed()) {
        return sub.run(sub.args);
      }
    }
    return 2;
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const NoOverlapError& e) {
    std::fprintf(stderr, "no overlap: %s\n", e.what());
    return 3;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}
