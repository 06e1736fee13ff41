#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <vector>

#include "decotr/model/model.hpp"
#include "decotr/training/optimizer.hpp"
#include "decotr/training/synthetic.hpp"

namespace decotr::training {

struct TrainOptions {
  std::uint64_t seed = 0;
  /// Valid pixels kept in each sampled sparse input.
  std::size_t sparse_points = 64;
  /// Weight of the masked l1 term on the initial depth; 0 trains on the final
  /// depth only.
  double aux_weight = 0.5;
  AdamConfig adam;
};

struct StepRecord {
  std::size_t step = 0;  // 1-based index of the completed step
  double loss = 0.0;
  double loss_initial = 0.0;
  double loss_final = 0.0;
};

/// Scene index and sparse-sampling seed used at a 0-based step.
struct StepDraw {
  std::size_t scene = 0;
  std::uint64_t sparse_seed = 0;
};
StepDraw draw_for_step(std::uint64_t seed, std::size_t step, std::size_t scene_count);

/// Single-sample Adam training. The scene and sparse input of every step are
/// pure functions of (seed, step), so a resumed run continues bit-exactly.
class Trainer {
 public:
  Trainer(model::DecotrModel model, std::vector<Scene> scenes, TrainOptions options);

  /// Runs one step. Throws NumericalError on a non-finite loss.
  StepRecord step();
  /// Runs `count` steps, calling `on_step` after each.
  void run(std::size_t count, const std::function<void(const StepRecord&)>& on_step = {});

  /// Writes the model checkpoint plus optimizer state into `dir`.
  void save(const std::filesystem::path& dir) const;
  /// Restores a trainer saved by save(), including its options.
  static Trainer resume(const std::filesystem::path& dir, std::vector<Scene> scenes);

  const model::DecotrModel& model() const { return model_; }
  std::size_t steps_done() const { return steps_done_; }
  const TrainOptions& options() const { return options_; }

 private:
  model::DecotrModel model_;
  std::vector<Scene> scenes_;
  TrainOptions options_;
  nn::ParameterList params_;
  AdamState adam_;
  std::size_t steps_done_ = 0;
};

/// Masked l1 of the final and initial depth on one scene with a fixed sparse
/// draw, without recording gradients.
StepRecord evaluate_loss(const model::DecotrModel& model, const Scene& scene, std::size_t sparse_points,
                         std::uint64_t sparse_seed, double aux_weight);

}  // namespace decotr::training
