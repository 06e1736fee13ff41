#include "decotr/training/trainer.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "decotr/errors.hpp"
#include "decotr/geometry/sampling.hpp"
#include "decotr/tensor/serialize.hpp"
#include "decotr/training/loss.hpp"

namespace decotr::training {
namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

struct Losses {
  Tensor total;
  double initial;
  double final;
};

Losses pipeline_loss(const model::DecotrModel& model, const Scene& scene, const geometry::SparseDepth& sparse,
                     double aux_weight) {
  const model::PipelineOutput out = model.forward(scene.image, sparse, scene.intrinsics);
  const Tensor final_loss = masked_l1_loss(out.final_depth, scene.depth);
  const Tensor initial_loss = masked_l1_loss(out.initial_depth, scene.depth);
  const Tensor total = aux_weight == 0.0 ? final_loss : final_loss + initial_loss * aux_weight;
  return {total, initial_loss.item(), final_loss.item()};
}

}  // namespace

StepDraw draw_for_step(std::uint64_t seed, std::size_t step, std::size_t scene_count) {
  if (scene_count == 0) throw ContractError("training needs at least one scene");
  const std::uint64_t h = splitmix64(seed ^ splitmix64(static_cast<std::uint64_t>(step)));
  return {static_cast<std::size_t>(h % scene_count), splitmix64(h)};
}

Trainer::Trainer(model::DecotrModel model, std::vector<Scene> scenes, TrainOptions options)
    : model_(std::move(model)), scenes_(std::move(scenes)), options_(options), params_(model_.parameters()) {
  if (scenes_.empty()) throw ContractError("training needs at least one scene");
  if (options_.sparse_points == 0) throw ConfigError("sparse_points must be positive");
  if (!(options_.aux_weight >= 0.0)) throw ConfigError("aux_weight must be non-negative");
  adam_ = AdamState::zeros_like(params_);
}

StepRecord Trainer::step() {
  const StepDraw draw = draw_for_step(options_.seed, steps_done_, scenes_.size());
  const Scene& scene = scenes_[draw.scene];
  const geometry::SparseDepth sparse =
      geometry::sample_sparse_depth(scene.depth, options_.sparse_points, draw.sparse_seed);
  Tape::current().clear();
  const Losses l = pipeline_loss(model_, scene, sparse, options_.aux_weight);
  const double value = l.total.item();
  if (!std::isfinite(value)) {
    Tape::current().clear();
    throw NumericalError("non-finite loss at step " + std::to_string(steps_done_ + 1) + " on " + scene.name);
  }
  backward(l.total);
  adam_step(params_, adam_, options_.adam);
  ++steps_done_;
  return {steps_done_, value, l.initial, l.final};
}

void Trainer::run(std::size_t count, const std::function<void(const StepRecord&)>& on_step) {
  for (std::size_t i = 0; i < count; ++i) {
    const StepRecord r = step();
    if (on_step) on_step(r);
  }
}

void Trainer::save(const std::filesystem::path& dir) const {
  model_.save(dir);
  std::filesystem::create_directories(dir / "optimizer");
  for (std::size_t i = 0; i < params_.size(); ++i) {
    const Shape& shape = params_[i].second.shape();
    save_tensor(dir / "optimizer" / (params_[i].first + ".m.dtns"), Tensor::from_data(shape, adam_.m[i]));
    save_tensor(dir / "optimizer" / (params_[i].first + ".v.dtns"), Tensor::from_data(shape, adam_.v[i]));
  }
  nlohmann::ordered_json j;
  j["steps_done"] = steps_done_;
  j["adam_t"] = adam_.t;
  j["seed"] = options_.seed;
  j["sparse_points"] = options_.sparse_points;
  j["aux_weight"] = options_.aux_weight;
  j["lr"] = options_.adam.lr;
  j["beta1"] = options_.adam.beta1;
  j["beta2"] = options_.adam.beta2;
  j["eps"] = options_.adam.eps;
  std::ofstream out(dir / "trainer.json", std::ios::binary);
  out << j.dump(2) << '\n';
  if (!out) throw IoError("cannot write " + (dir / "trainer.json").string());
}

Trainer Trainer::resume(const std::filesystem::path& dir, std::vector<Scene> scenes) {
  std::ifstream in(dir / "trainer.json");
  if (!in) throw IoError("cannot open " + (dir / "trainer.json").string());
  nlohmann::json j;
  TrainOptions options;
  std::size_t steps_done = 0;
  std::uint64_t adam_t = 0;
  try {
    in >> j;
    steps_done = j.at("steps_done").get<std::size_t>();
    adam_t = j.at("adam_t").get<std::uint64_t>();
    options.seed = j.at("seed").get<std::uint64_t>();
    options.sparse_points = j.at("sparse_points").get<std::size_t>();
    options.aux_weight = j.at("aux_weight").get<double>();
    options.adam = {j.at("lr").get<double>(), j.at("beta1").get<double>(), j.at("beta2").get<double>(),
                    j.at("eps").get<double>()};
  } catch (const nlohmann::json::exception& e) {
    throw IoError("bad trainer state in " + dir.string() + ": " + e.what());
  }
  Trainer t(model::DecotrModel::load(dir), std::move(scenes), options);
  t.steps_done_ = steps_done;
  t.adam_.t = adam_t;
  for (std::size_t i = 0; i < t.params_.size(); ++i) {
    const std::string& name = t.params_[i].first;
    const Tensor m = load_tensor(dir / "optimizer" / (name + ".m.dtns"));
    const Tensor v = load_tensor(dir / "optimizer" / (name + ".v.dtns"));
    if (m.numel() != t.adam_.m[i].size() || v.numel() != t.adam_.v[i].size()) {
      throw ConfigError("optimizer state for " + name + " does not match the model");
    }
    t.adam_.m[i].assign(m.data().begin(), m.data().end());
    t.adam_.v[i].assign(v.data().begin(), v.data().end());
  }
  return t;
}

StepRecord evaluate_loss(const model::DecotrModel& model, const Scene& scene, std::size_t sparse_points,
                         std::uint64_t sparse_seed, double aux_weight) {
  NoGradGuard no_grad;
  const geometry::SparseDepth sparse = geometry::sample_sparse_depth(scene.depth, sparse_points, sparse_seed);
  const Losses l = pipeline_loss(model, scene, sparse, aux_weight);
  return {0, l.total.item(), l.initial, l.final};
}

}  // namespace decotr::training
