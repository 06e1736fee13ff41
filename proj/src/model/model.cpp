#include "decotr/model/model.hpp"

#include <algorithm>

#include "decotr/errors.hpp"
#include "decotr/geometry/sampling.hpp"
#include "decotr/tensor/ops.hpp"
#include "decotr/tensor/serialize.hpp"

namespace decotr::model {
namespace {

constexpr double kDepthHeadBias = 4.0;

Tensor upsample_to(const Tensor& x, std::size_t height, std::size_t width) {
  const std::size_t h = x.dim(1);
  const std::size_t w = x.dim(2);
  if (height % h != 0 || width % w != 0) {
    throw DimensionError("cannot upsample " + shape_string(x.shape()) + " to " + std::to_string(height) + "x" +
                         std::to_string(width));
  }
  if (height == h && width == w) return x;
  return upsample_nearest(x, height / h, width / w);
}

Tensor upsample_like(const Tensor& x, const Tensor& like) { return upsample_to(x, like.dim(1), like.dim(2)); }

void fill(Tensor t, double value) {
  for (double& v : t.mutable_data()) v = value;
}

}  // namespace

Tensor positive_depth(const Tensor& z) { return softplus(z) + kDepthFloor; }

Tensor EarlyFusion::operator()(const Tensor& image, const Tensor& sparse) const {
  if (image.rank() != 3 || image.dim(0) != 3) {
    throw DimensionError("image must be [3 x H x W], got " + shape_string(image.shape()));
  }
  if (sparse.rank() != 3 || sparse.dim(0) != 1 || sparse.dim(1) != image.dim(1) || sparse.dim(2) != image.dim(2)) {
    throw DimensionError("sparse depth " + shape_string(sparse.shape()) + " does not match image " +
                         shape_string(image.shape()));
  }
  return concat({rgb(image), depth(sparse)}, 0);
}

void EarlyFusion::collect(const std::string& prefix, nn::ParameterList& out) const {
  rgb.collect(prefix + ".conv_rgb", out);
  depth.collect(prefix + ".conv_dep", out);
}

S2dTr S2dTr::create(const ModelConfig& cfg, nn::Rng& rng) {
  cfg.validate();
  const auto& w = cfg.widths;
  S2dTr s;
  s.fusion.rgb = nn::Conv2d::create(3, cfg.rgb_channels, 3, {1, 1, 1}, rng, 1.0);
  s.fusion.depth = nn::Conv2d::create(1, w[0] - cfg.rgb_channels, 3, {1, 1, 1}, rng, 1.0);
  for (std::size_t m = 2; m <= 5; ++m) {
    s.encoder.push_back(nn::Conv2d::create(w[m - 2], w[m - 1], 3, {cfg.encoder_strides[m - 2], 1, 1}, rng));
  }
  if (cfg.enhance_2d) {
    const auto smallest = cfg.level_size(5);
    const attention::Mhsa2dConfig mcfg{cfg.attention_heads, w[4], smallest[0], smallest[1]};
    for (std::size_t m = 2; m <= 5; ++m) {
      const auto size = cfg.level_size(m);
      s.enhance.push_back(attention::EnhanceBlock::create(w[m - 1], size[0], size[1], mcfg, rng));
    }
  }
  for (std::size_t m = 4; m >= 1; --m) {
    s.decoder.push_back(nn::Conv2d::create(w[m] + w[m - 1], w[m - 1], 3, {1, 1, 1}, rng));
  }
  s.depth_head = nn::Conv2d::create(w[0], 1, 3, {1, 1, 1}, rng, 0.1);
  fill(s.depth_head.bias, kDepthHeadBias);
  if (cfg.use_3d) {
    const std::array<std::size_t, 2> g{cfg.image_height / cfg.uplift_downscale, cfg.image_width / cfg.uplift_downscale};
    for (std::size_t m = 1; m <= 4 && s.guidance_level == 0; ++m) {
      if (cfg.level_size(m) == g) s.guidance_level = m;
    }
    s.guidance_head = nn::Conv2d::create(w[s.guidance_level - 1], cfg.guidance_channels, 1, {}, rng, 1.0);
  }
  return s;
}

S2dTrOutput S2dTr::operator()(const Tensor& image, const Tensor& sparse) const {
  S2dTrOutput out;
  out.f1 = fusion(image, sparse);
  std::vector<Tensor> features{out.f1};
  for (const auto& conv : encoder) features.push_back(relu(conv(features.back())));
  const std::vector<Tensor> plain(features.begin() + 1, features.end());
  out.skips = enhance.empty() ? plain : attention::enhance_pyramid(plain, enhance);
  Tensor d = out.skips[3];
  for (std::size_t i = 0; i < decoder.size(); ++i) {
    const std::size_t m = 4 - i;
    const Tensor& skip = m == 1 ? out.f1 : out.skips[m - 2];
    d = relu(decoder[i](concat({upsample_like(d, skip), skip}, 0)));
    if (guidance_head && m == guidance_level) out.guidance = (*guidance_head)(d);
  }
  out.initial_logit = depth_head(d);
  out.initial_depth = positive_depth(out.initial_logit);
  return out;
}

void S2dTr::collect(const std::string& prefix, nn::ParameterList& out) const {
  fusion.collect(prefix + ".fusion", out);
  for (std::size_t i = 0; i < encoder.size(); ++i) encoder[i].collect(prefix + ".encoder" + std::to_string(i + 2), out);
  for (std::size_t i = 0; i < enhance.size(); ++i) enhance[i].collect(prefix + ".enhance" + std::to_string(i + 2), out);
  for (std::size_t i = 0; i < decoder.size(); ++i) decoder[i].collect(prefix + ".decoder" + std::to_string(4 - i), out);
  depth_head.collect(prefix + ".depth_head", out);
  if (guidance_head) guidance_head->collect(prefix + ".guidance_head", out);
}

ThreeDTr ThreeDTr::create(const ModelConfig& cfg, nn::Rng& rng) {
  ThreeDTr t;
  const std::size_t c = cfg.guidance_channels;
  for (std::size_t l = 0; l < cfg.layers; ++l) {
    t.local.push_back(attention::VectorAttentionLayer::create(c, rng, cfg.delta_in_value));
    t.feedforward.push_back(nn::Mlp::create(c, 2 * c, c, rng));
  }
  if (cfg.global_attention) t.global = attention::GlobalAttentionLayer::create(c, rng);
  t.neighbors = cfg.neighbors;
  t.global_points = cfg.global_points;
  t.normalize_points = cfg.normalize_points;
  return t;
}

Tensor ThreeDTr::operator()(const geometry::FeaturePointCloud& cloud) const {
  const std::size_t n = cloud.size();
  if (n <= neighbors) {
    throw ContractError("3D stage needs more than " + std::to_string(neighbors) + " points, got " + std::to_string(n));
  }
  const Tensor positions = normalize_points ? geometry::normalize_unit_ball(cloud).first.positions : cloud.positions;
  Tensor g = cloud.features;
  if (!local.empty()) {
    const geometry::NeighborTable table = geometry::knn(positions, neighbors);
    for (std::size_t l = 0; l < local.size(); ++l) {
      g = g + local[l](g, positions, table);
      g = g + feedforward[l](g);
    }
  }
  if (global) {
    const std::size_t m = global_points == 0 ? std::max<std::size_t>(2, n / 4) : global_points;
    const auto selected = geometry::downsample_fps(positions, std::min(m, n), 0);
    const auto owner = geometry::nearest_selected(positions, selected);
    const Tensor attended = (*global)(gather_rows(g, selected));
    g = g + gather_rows(attended, owner);
  }
  return g;
}

void ThreeDTr::collect(const std::string& prefix, nn::ParameterList& out) const {
  for (std::size_t l = 0; l < local.size(); ++l) {
    local[l].collect(prefix + ".layer" + std::to_string(l) + ".attention", out);
    feedforward[l].collect(prefix + ".layer" + std::to_string(l) + ".feedforward", out);
  }
  if (global) global->collect(prefix + ".global", out);
}

FinalDecoder FinalDecoder::create(const ModelConfig& cfg, std::size_t guidance_level, nn::Rng& rng) {
  FinalDecoder d;
  std::size_t channels = cfg.guidance_channels;
  for (std::size_t m = guidance_level - 1; m >= 1; --m) {
    const std::size_t out = cfg.widths[m - 1];
    d.stages.push_back(nn::Conv2d::create(channels + out, out, 3, {1, 1, 1}, rng));
    d.skip_levels.push_back(m);
    channels = out;
  }
  d.head = nn::Conv2d::create(channels, 1, 3, {1, 1, 1}, rng, 0.1);
  return d;
}

Tensor FinalDecoder::operator()(const Tensor& projected, const S2dTrOutput& s2d) const {
  Tensor x = projected;
  for (std::size_t i = 0; i < stages.size(); ++i) {
    const std::size_t m = skip_levels[i];
    const Tensor& skip = m == 1 ? s2d.f1 : s2d.skips[m - 2];
    x = relu(stages[i](concat({upsample_like(x, skip), skip}, 0)));
  }
  return head(upsample_like(x, s2d.initial_logit));
}

void FinalDecoder::collect(const std::string& prefix, nn::ParameterList& out) const {
  for (std::size_t i = 0; i < stages.size(); ++i) {
    stages[i].collect(prefix + ".stage" + std::to_string(skip_levels[i]), out);
  }
  head.collect(prefix + ".head", out);
}

DecotrModel DecotrModel::create(const ModelConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  nn::Rng rng(seed);
  DecotrModel model;
  model.config_ = cfg;
  model.s2d_ = S2dTr::create(cfg, rng);
  if (cfg.use_3d) {
    model.three_d_ = ThreeDTr::create(cfg, rng);
    model.final_decoder_ = FinalDecoder::create(cfg, model.s2d_.guidance_level, rng);
  }
  return model;
}

geometry::FeaturePointCloud DecotrModel::uplift(const S2dTrOutput& s2d, const geometry::CameraIntrinsics& intr) const {
  const std::size_t r = config_.uplift_downscale;
  // Every predicted depth is positive, so the valid-pixel average is a plain
  // box filter; as a strided convolution it stays differentiable.
  const Tensor box = Tensor::full({1, 1, r, r}, 1.0 / static_cast<double>(r * r));
  const Tensor pooled = r == 1 ? s2d.initial_depth : conv2d(s2d.initial_depth, box, Tensor(), {r, 0, 1});
  return geometry::unproject(pooled, intr.downscaled(r), s2d.guidance);
}

PipelineOutput DecotrModel::forward(const Tensor& image, const geometry::SparseDepth& sparse,
                                    const geometry::CameraIntrinsics& intr) const {
  if (image.rank() != 3 || image.dim(0) != 3 || image.dim(1) != config_.image_height ||
      image.dim(2) != config_.image_width) {
    throw DimensionError("image " + shape_string(image.shape()) + " does not match the model input size " +
                         std::to_string(config_.image_height) + "x" + std::to_string(config_.image_width));
  }
  if (sparse.height != config_.image_height || sparse.width != config_.image_width) {
    throw DimensionError("sparse depth size does not match the image");
  }
  intr.validate();
  const S2dTrOutput s2d = s2d_(image, sparse.to_tensor());
  if (!three_d_) return {s2d.initial_depth, s2d.initial_depth, Tensor()};
  geometry::FeaturePointCloud cloud = uplift(s2d, intr);
  cloud.features = (*three_d_)(cloud);
  const std::size_t r = config_.uplift_downscale;
  const Tensor projected =
      geometry::project(cloud, intr.downscaled(r), config_.image_height / r, config_.image_width / r).features;
  const Tensor logit = (*final_decoder_)(projected, s2d) + s2d.initial_logit;
  return {s2d.initial_depth, positive_depth(logit), projected};
}

nn::ParameterList DecotrModel::parameters() const {
  nn::ParameterList out;
  s2d_.collect("s2d", out);
  if (three_d_) three_d_->collect("tr3d", out);
  if (final_decoder_) final_decoder_->collect("final", out);
  return out;
}

void DecotrModel::save(const std::filesystem::path& dir) const {
  std::filesystem::create_directories(dir / "params");
  config_.save(dir / "config.json");
  for (const auto& [name, t] : parameters()) save_tensor(dir / "params" / (name + ".dtns"), t);
}

DecotrModel DecotrModel::load(const std::filesystem::path& dir) {
  DecotrModel model = create(ModelConfig::load(dir / "config.json"), 0);
  for (auto& [name, t] : model.parameters()) {
    Tensor stored;
    try {
      stored = load_tensor(dir / "params" / (name + ".dtns"));
    } catch (const IoError& e) {
      throw ConfigError("checkpoint does not match its config: " + std::string(e.what()));
    }
    if (stored.shape() != t.shape()) {
      throw ConfigError("checkpoint tensor " + name + " has shape " + shape_string(stored.shape()) + ", config expects " +
                        shape_string(t.shape()));
    }
    Tensor target = t;
    std::copy(stored.data().begin(), stored.data().end(), target.mutable_data().begin());
  }
  return model;
}

}  // namespace decotr::model
