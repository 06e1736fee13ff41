#include "decotr/cli/app.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>

#include "decotr/cli/dataset.hpp"
#include "decotr/cli/manifest.hpp"
#include "decotr/errors.hpp"
#include "decotr/geometry/sampling.hpp"
#include "decotr/io/image_io.hpp"
#include "decotr/metrics/metrics.hpp"
#include "decotr/model/model.hpp"
#include "decotr/training/trainer.hpp"
#include "suite.hpp"

namespace decotr::cli {
namespace {

using json = nlohmann::ordered_json;

struct SynthArgs {
  std::uint64_t seed = 0;
  std::size_t count = 8;
  std::size_t height = 32;
  std::size_t width = 40;
  std::string out_dir;
};

struct TrainArgs {
  std::string config = "toy";
  std::string data_dir;
  std::size_t steps = 2000;
  std::uint64_t seed = 0;
  std::string out;
  std::size_t sparse_n = 64;
  std::size_t checkpoint_every = 0;
  double lr = training::AdamConfig{}.lr;
};

struct EvalArgs {
  std::string checkpoint;
  std::string data_dir;
  std::size_t sparse_n = 64;
  std::uint64_t seed = 0;
  double max_depth = training::kSceneMaxDepth;
  bool oracle = false;
  std::string csv = "metrics.csv";
};

struct CompleteArgs {
  std::string checkpoint;
  std::string image;
  std::string sparse;
  std::string intrinsics;
  std::string out;
};

struct GradcheckArgs {
  std::string config = "tiny";
  std::uint64_t seed = 0;
  std::string corrupt;
  std::string manifest;
};

// Smoothing window of the reported final training loss.
constexpr std::size_t kLossWindow = 100;

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

std::string exact(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// "toy" and "tiny" name the built-in configurations; anything else is a path.
model::ModelConfig load_config(const std::string& spec, Manifest& manifest) {
  if (spec == "toy") return model::ModelConfig::toy();
  if (spec == "tiny") return model::ModelConfig::tiny();
  manifest.set_path("config", spec);
  manifest.add_input(spec, fs::path(spec).filename().string());
  return model::ModelConfig::load(spec);
}

void add_dataset_inputs(Manifest& manifest, const fs::path& dir, const std::vector<training::Scene>& scenes) {
  for (const training::Scene& s : scenes) {
    const SceneFiles f = scene_files(dir, s.name);
    for (const fs::path& p : {f.depth, f.image, f.intrinsics}) manifest.add_input(p, p.filename().string());
  }
}

std::vector<fs::path> tree(const fs::path& dir) {
  std::vector<fs::path> files;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (e.is_regular_file()) files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  return files;
}

// Sparse draw of scene `index` in an evaluation with `seed`.
std::uint64_t eval_sparse_seed(std::uint64_t seed, std::size_t index) {
  return seed * 1000003u + static_cast<std::uint64_t>(index);
}

int synth(const SynthArgs& a, std::ostream& out) {
  const fs::path dir = a.out_dir;
  fs::create_directories(dir);
  Manifest manifest("synth", a.seed);
  manifest.set_argument("count", a.count);
  manifest.set_argument("height", a.height);
  manifest.set_argument("width", a.width);
  manifest.set_path("out_dir", dir);
  for (std::size_t i = 0; i < a.count; ++i) {
    training::SyntheticScene scene = training::make_synthetic_scene(a.seed + i, a.height, a.width);
    scene.name = scene_name(i);
    const SceneFiles f = save_scene(dir, scene);
    for (const fs::path& p : {f.depth, f.image, f.intrinsics}) manifest.add_output(p, p.filename().string());
  }
  manifest.write(dir / "manifest.json");
  out << "wrote " << a.count << " scenes to " << dir.string() << '\n';
  return kSuccess;
}

int train(const TrainArgs& a, std::ostream& out) {
  Manifest manifest("train", a.seed);
  const model::ModelConfig cfg = load_config(a.config, manifest);
  manifest.set_config(json::parse(cfg.to_json()));
  manifest.set_path("data_dir", a.data_dir);
  manifest.set_path("out", a.out);
  manifest.set_argument("steps", a.steps);
  manifest.set_argument("sparse_n", a.sparse_n);
  manifest.set_argument("checkpoint_every", a.checkpoint_every);
  manifest.set_argument("lr", a.lr);
  std::vector<training::Scene> scenes = load_dataset(a.data_dir);
  add_dataset_inputs(manifest, a.data_dir, scenes);
  for (const training::Scene& s : scenes) {
    if (s.depth.height != cfg.image_height || s.depth.width != cfg.image_width) {
      throw DimensionError("scene " + s.name + " is " + std::to_string(s.depth.height) + "x" +
                           std::to_string(s.depth.width) + " but the config expects " +
                           std::to_string(cfg.image_height) + "x" + std::to_string(cfg.image_width));
    }
  }

  training::TrainOptions options;
  options.seed = a.seed;
  options.sparse_points = a.sparse_n;
  options.adam.lr = a.lr;
  training::Trainer trainer(model::DecotrModel::create(cfg, a.seed), std::move(scenes), options);

  const fs::path dir = a.out;
  fs::create_directories(dir);
  std::ofstream log(dir / "loss.csv", std::ios::binary);
  if (!log) throw IoError("cannot write " + (dir / "loss.csv").string());
  log << "step,loss,loss_initial,loss_final\n";
  std::vector<training::StepRecord> recent;
  trainer.run(a.steps, [&](const training::StepRecord& r) {
    log << r.step << ',' << exact(r.loss) << ',' << exact(r.loss_initial) << ',' << exact(r.loss_final) << '\n';
    recent.push_back(r);
    if (recent.size() > kLossWindow) recent.erase(recent.begin());
    if (a.checkpoint_every > 0 && r.step % a.checkpoint_every == 0 && r.step < a.steps) {
      trainer.save(dir / ("checkpoint_" + std::to_string(r.step)));
    }
  });
  log.close();
  if (!log) throw IoError("cannot write " + (dir / "loss.csv").string());
  trainer.save(dir / "checkpoint");

  // loss.csv, the final checkpoint and any snapshots.
  for (const fs::path& p : tree(dir)) {
    if (p.filename() != "manifest.json") manifest.add_output(p, fs::relative(p, dir).generic_string());
  }
  if (recent.empty()) {
    manifest.set_result("final_loss", nullptr);
    manifest.write(dir / "manifest.json");
    out << "final_loss=none steps=0\n";
    return kSuccess;
  }
  double total = 0.0, initial = 0.0, final = 0.0;
  for (const auto& r : recent) {
    total += r.loss;
    initial += r.loss_initial;
    final += r.loss_final;
  }
  const double n = static_cast<double>(recent.size());
  manifest.set_result("final_loss", total / n);
  manifest.set_result("final_loss_initial", initial / n);
  manifest.set_result("final_loss_final", final / n);
  manifest.set_result("window", recent.size());
  manifest.write(dir / "manifest.json");
  out << "final_loss=" << fmt(total / n) << " loss_initial=" << fmt(initial / n) << " loss_final=" << fmt(final / n)
      << " window=" << recent.size() << " steps=" << a.steps << '\n';
  return kSuccess;
}

int eval(const EvalArgs& a, std::ostream& out) {
  if (a.checkpoint.empty() && !a.oracle) throw ConfigError("--checkpoint is required unless --oracle is given");
  Manifest manifest("eval", a.seed);
  manifest.set_path("checkpoint", a.checkpoint);
  manifest.set_path("data_dir", a.data_dir);
  manifest.set_path("csv", a.csv);
  manifest.set_argument("sparse_n", a.sparse_n);
  manifest.set_argument("max_depth", a.max_depth);
  manifest.set_argument("oracle", a.oracle);
  const std::vector<training::Scene> scenes = load_dataset(a.data_dir);
  add_dataset_inputs(manifest, a.data_dir, scenes);

  std::optional<model::DecotrModel> model;
  if (!a.checkpoint.empty()) {
    model = model::DecotrModel::load(a.checkpoint);
    manifest.set_config(json::parse(model->config().to_json()));
    for (const fs::path& p : tree(a.checkpoint)) {
      manifest.add_input(p, "checkpoint/" + fs::relative(p, a.checkpoint).generic_string());
    }
  }

  std::vector<metrics::MetricsReport> reports;
  json doc;
  doc["scenes"] = json::array();
  std::string csv = "scene," + metrics::csv_header() + "\n";
  for (std::size_t i = 0; i < scenes.size(); ++i) {
    const training::Scene& s = scenes[i];
    geometry::DepthMap pred = s.depth;
    if (!a.oracle) {
      NoGradGuard no_grad;
      const auto sparse = geometry::sample_sparse_depth(s.depth, a.sparse_n, eval_sparse_seed(a.seed, i));
      const Tensor depth = model->forward(s.image, sparse, s.intrinsics).final_depth;
      pred.values.assign(depth.data().begin(), depth.data().end());
    }
    reports.push_back(metrics::evaluate(pred, s.depth, a.max_depth));
    json entry;
    entry["name"] = s.name;
    const json fields = json::parse(metrics::report_to_json(reports.back()));
    for (const auto& [k, v] : fields.items()) entry[k] = v;
    doc["scenes"].push_back(entry);
    csv += s.name + "," + metrics::csv_row(reports.back()) + "\n";
  }
  const metrics::MetricsReport total = metrics::aggregate(reports);
  doc["aggregate"] = json::parse(metrics::report_to_json(total));
  csv += "aggregate," + metrics::csv_row(total) + "\n";

  const fs::path csv_path = a.csv;
  if (csv_path.has_parent_path()) fs::create_directories(csv_path.parent_path());
  {
    std::ofstream f(csv_path, std::ios::binary);
    f << csv;
    if (!f) throw IoError("cannot write " + csv_path.string());
  }
  manifest.add_output(csv_path, csv_path.filename().string());
  manifest.set_result("aggregate", doc["aggregate"]);
  fs::path manifest_path = csv_path;
  manifest_path.replace_extension(".manifest.json");
  manifest.write(manifest_path);
  out << doc.dump(2) << '\n';
  return kSuccess;
}

int complete(const CompleteArgs& a, std::ostream& out) {
  Manifest manifest("complete", 0);
  const model::DecotrModel model = model::DecotrModel::load(a.checkpoint);
  manifest.set_config(json::parse(model.config().to_json()));
  manifest.set_path("checkpoint", a.checkpoint);
  manifest.set_path("image", a.image);
  manifest.set_path("sparse", a.sparse);
  manifest.set_path("intrinsics", a.intrinsics);
  manifest.set_path("out", a.out);
  for (const fs::path& p : tree(a.checkpoint)) {
    manifest.add_input(p, "checkpoint/" + fs::relative(p, a.checkpoint).generic_string());
  }
  manifest.add_input(a.image, "image");
  manifest.add_input(a.sparse, "sparse");
  manifest.add_input(a.intrinsics, "intrinsics");
  const Tensor image = io::load_ppm(a.image);
  const geometry::SparseDepth sparse = io::load_pfm(a.sparse);
  const geometry::CameraIntrinsics intr = io::load_intrinsics(a.intrinsics);
  if (image.dim(1) != sparse.height || image.dim(2) != sparse.width) {
    throw DimensionError("image " + shape_string(image.shape()) + " and sparse depth " +
                         std::to_string(sparse.height) + "x" + std::to_string(sparse.width) + " are not aligned");
  }
  model::PipelineOutput result;
  {
    NoGradGuard no_grad;
    result = model.forward(image, sparse, intr);
  }
  const auto to_map = [&](const Tensor& t) {
    geometry::DepthMap d = geometry::DepthMap::zeros(sparse.height, sparse.width);
    d.values.assign(t.data().begin(), t.data().end());
    return d;
  };
  const fs::path dir = a.out;
  fs::create_directories(dir);
  io::save_pfm(dir / "final.pfm", to_map(result.final_depth));
  io::save_pfm(dir / "initial.pfm", to_map(result.initial_depth));
  manifest.add_output(dir / "final.pfm", "final.pfm");
  manifest.add_output(dir / "initial.pfm", "initial.pfm");
  manifest.write(dir / "manifest.json");
  out << "wrote " << (dir / "final.pfm").string() << " and " << (dir / "initial.pfm").string() << '\n';
  return kSuccess;
}

int gradcheck(const GradcheckArgs& a, std::ostream& out) {
  Manifest manifest("gradcheck", a.seed);
  const model::ModelConfig cfg = load_config(a.config, manifest);
  manifest.set_config(json::parse(cfg.to_json()));
  if (!a.corrupt.empty()) manifest.set_argument("corrupt", a.corrupt);

  debug::corrupt_backward(a.corrupt);
  std::vector<testing::CheckResult> results;
  try {
    results = testing::gradient_suite(cfg, a.seed);
  } catch (...) {
    debug::corrupt_backward("");
    throw;
  }
  debug::corrupt_backward("");
  for (auto& r : testing::oracle_suite(a.seed)) results.push_back(std::move(r));

  std::size_t failed = 0;
  json summary = json::array();
  for (const auto& r : results) {
    failed += !r.passed;
    out << (r.passed ? "PASS " : "FAIL ") << r.name << " max_error=" << fmt(r.max_error)
        << " tolerance=" << fmt(r.tolerance) << " cases=" << r.cases << '\n';
    summary.push_back({{"name", r.name}, {"max_error", r.max_error}, {"passed", r.passed}});
  }
  out << (failed == 0 ? "all " + std::to_string(results.size()) + " checks passed"
                      : std::to_string(failed) + " of " + std::to_string(results.size()) + " checks failed")
      << '\n';
  manifest.set_result("checks", summary);
  if (a.manifest.empty()) {
    out << manifest.to_json().dump(2) << '\n';
  } else {
    manifest.write(a.manifest);
  }
  return failed == 0 ? kSuccess : kNumericalError;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Depth completion with 2D and 3D attention on synthetic scenes", "decotr"};
  app.require_subcommand(1);

  SynthArgs sa;
  CLI::App* synth_cmd = app.add_subcommand("synth", "Write synthetic scenes (PFM depth, PPM image, intrinsics JSON)");
  synth_cmd->add_option("--seed", sa.seed, "Seed of the first scene");
  synth_cmd->add_option("--count", sa.count, "Number of scenes")->check(CLI::PositiveNumber);
  synth_cmd->add_option("--height", sa.height, "Image height")->check(CLI::Range(16, 4096));
  synth_cmd->add_option("--width", sa.width, "Image width")->check(CLI::Range(16, 4096));
  synth_cmd->add_option("--out-dir", sa.out_dir, "Output directory")->required();

  TrainArgs ta;
  CLI::App* train_cmd = app.add_subcommand("train", "Train on a scene directory");
  train_cmd->add_option("--config", ta.config, "Model config JSON, or toy / tiny")->capture_default_str();
  train_cmd->add_option("--data-dir", ta.data_dir, "Scene directory written by synth")->required();
  train_cmd->add_option("--steps", ta.steps, "Adam steps")->capture_default_str();
  train_cmd->add_option("--seed", ta.seed, "Initialization and sampling seed");
  train_cmd->add_option("--out", ta.out, "Output directory")->required();
  train_cmd->add_option("--sparse-n", ta.sparse_n, "Sparse points per training sample")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  train_cmd->add_option("--checkpoint-every", ta.checkpoint_every, "Also save a checkpoint every N steps");
  train_cmd->add_option("--lr", ta.lr, "Adam learning rate")->check(CLI::PositiveNumber)->capture_default_str();

  EvalArgs ea;
  CLI::App* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint on a scene directory");
  eval_cmd->add_option("--checkpoint", ea.checkpoint, "Checkpoint directory");
  eval_cmd->add_option("--data-dir", ea.data_dir, "Scene directory")->required();
  eval_cmd->add_option("--sparse-n", ea.sparse_n, "Sparse points per scene")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  eval_cmd->add_option("--seed", ea.seed, "Sparse sampling seed");
  eval_cmd->add_option("--max-depth", ea.max_depth, "Evaluation cap in metres")->capture_default_str();
  eval_cmd->add_flag("--oracle", ea.oracle, "Score ground truth against itself");
  eval_cmd->add_option("--csv", ea.csv, "Per-scene CSV output")->capture_default_str();

  CompleteArgs ca;
  CLI::App* complete_cmd = app.add_subcommand("complete", "Complete one sparse depth map");
  complete_cmd->add_option("--checkpoint", ca.checkpoint, "Checkpoint directory")->required();
  complete_cmd->add_option("--image", ca.image, "PPM image")->required();
  complete_cmd->add_option("--sparse", ca.sparse, "PFM sparse depth, 0 where missing")->required();
  complete_cmd->add_option("--intrinsics", ca.intrinsics, "Intrinsics JSON")->required();
  complete_cmd->add_option("--out", ca.out, "Output directory")->required();

  GradcheckArgs ga;
  CLI::App* grad_cmd = app.add_subcommand("gradcheck", "Run the gradient and oracle self-checks");
  grad_cmd->add_option("--config", ga.config, "Pipeline config for the end-to-end check, or toy / tiny")
      ->capture_default_str();
  grad_cmd->add_option("--seed", ga.seed, "Seed of the random instances");
  grad_cmd->add_option("--manifest", ga.manifest, "Write the manifest here instead of stdout");
  grad_cmd->add_option("--corrupt", ga.corrupt)->group("");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kSuccess;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    if (app.get_subcommands().empty()) err << app.help();
    return kInputError;
  }

  try {
    if (*synth_cmd) return synth(sa, out);
    if (*train_cmd) return train(ta, out);
    if (*eval_cmd) return eval(ea, out);
    if (*complete_cmd) return complete(ca, out);
    return gradcheck(ga, out);
  } catch (const NumericalError& e) {
    err << "numerical error: " << e.what() << '\n';
    return kNumericalError;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kInputError;
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return kInputError;
  } catch (const nlohmann::json::exception& e) {
    err << "error: " << e.what() << '\n';
    return kInputError;
  }
}

}  // namespace decotr::cli
