#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "decotr/attention/mhsa2d.hpp"
#include "decotr/attention/point_attention.hpp"
#include "decotr/geometry/camera.hpp"
#include "decotr/geometry/point_cloud.hpp"
#include "decotr/model/config.hpp"
#include "decotr/nn/layers.hpp"

namespace decotr::model {

/// Softplus plus this floor keeps predicted depth strictly positive.
inline constexpr double kDepthFloor = 1e-3;

/// Maps a head pre-activation to depth: softplus(z) + kDepthFloor.
Tensor positive_depth(const Tensor& z);

/// conv_rgb(I) and conv_dep(S), concatenated along channels.
struct EarlyFusion {
  nn::Conv2d rgb;
  nn::Conv2d depth;

  /// image [3 x H x W], sparse [1 x H x W].
  Tensor operator()(const Tensor& image, const Tensor& sparse) const;
  void collect(const std::string& prefix, nn::ParameterList& out) const;
};

struct S2dTrOutput {
  Tensor initial_depth;       // [1 x H x W]
  Tensor initial_logit;       // pre-activation of initial_depth
  Tensor guidance;            // [C x H/r x W/r], undefined when use_3d is off
  Tensor f1;                  // fused input features
  std::vector<Tensor> skips;  // f^E_2 .. f^E_5
};

/// Early-fusion encoder-decoder with 2D attention enhancement of f_2 .. f_5
/// and two heads (initial depth, guidance features).
struct S2dTr {
  EarlyFusion fusion;
  std::vector<nn::Conv2d> encoder;         // produce f_2 .. f_5
  std::vector<attention::EnhanceBlock> enhance;
  std::vector<nn::Conv2d> decoder;         // levels 4, 3, 2, 1
  nn::Conv2d depth_head;
  std::optional<nn::Conv2d> guidance_head;
  std::size_t guidance_level = 0;          // m whose decoder output feeds the guidance head

  static S2dTr create(const ModelConfig& cfg, nn::Rng& rng);
  S2dTrOutput operator()(const Tensor& image, const Tensor& sparse) const;
  void collect(const std::string& prefix, nn::ParameterList& out) const;
};

/// L local vector-attention layers with feedforward blocks, then optional
/// global attention on farthest-point-sampled points.
struct ThreeDTr {
  std::vector<attention::VectorAttentionLayer> local;
  std::vector<nn::Mlp> feedforward;  // C -> 2C -> C
  std::optional<attention::GlobalAttentionLayer> global;
  std::size_t neighbors = 16;
  std::size_t global_points = 0;
  bool normalize_points = true;

  static ThreeDTr create(const ModelConfig& cfg, nn::Rng& rng);
  /// Returns updated features [N x C]; positions are not changed.
  /// Throws ContractError if N <= K.
  Tensor operator()(const geometry::FeaturePointCloud& cloud) const;
  void collect(const std::string& prefix, nn::ParameterList& out) const;
};

/// Upsamples projected 3D features back to full resolution through the
/// enhanced skips larger than the guidance map and f_1.
struct FinalDecoder {
  std::vector<nn::Conv2d> stages;
  std::vector<std::size_t> skip_levels;  // m of each stage's skip (1 means f_1)
  nn::Conv2d head;

  static FinalDecoder create(const ModelConfig& cfg, std::size_t guidance_level, nn::Rng& rng);
  /// Returns the head output, added to the initial pre-activation by the caller.
  Tensor operator()(const Tensor& projected, const S2dTrOutput& s2d) const;
  void collect(const std::string& prefix, nn::ParameterList& out) const;
};

struct PipelineOutput {
  Tensor initial_depth;  // [1 x H x W]
  Tensor final_depth;    // [1 x H x W]
  Tensor guidance;       // [C x H/r x W/r] after 3D processing, undefined without the 3D stage
};

class DecotrModel {
 public:
  static DecotrModel create(const ModelConfig& cfg, std::uint64_t seed);

  /// image [3 x H x W] in [0, 1]; sparse depth H x W.
  PipelineOutput forward(const Tensor& image, const geometry::SparseDepth& sparse,
                         const geometry::CameraIntrinsics& intr) const;

  /// Points lifted from the guidance map using the pooled initial depth.
  geometry::FeaturePointCloud uplift(const S2dTrOutput& s2d, const geometry::CameraIntrinsics& intr) const;

  const ModelConfig& config() const { return config_; }
  /// Every trainable tensor in a fixed order with unique names.
  nn::ParameterList parameters() const;

  /// Writes config.json and one tensor file per parameter into `dir`.
  void save(const std::filesystem::path& dir) const;
  /// Throws ConfigError if the stored tensors do not fit the stored config.
  static DecotrModel load(const std::filesystem::path& dir);

 private:
  ModelConfig config_;
  S2dTr s2d_;
  std::optional<ThreeDTr> three_d_;
  std::optional<FinalDecoder> final_decoder_;
};

}  // namespace decotr::model
