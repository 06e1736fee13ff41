#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <set>
#include <sstream>

#include "decotr/errors.hpp"
#include "decotr/geometry/point_cloud.hpp"
#include "decotr/geometry/sampling.hpp"
#include "decotr/io/image_io.hpp"
#include "decotr/tensor/ops.hpp"
#include "geometry_oracles.hpp"
#include "random.hpp"

namespace decotr::geometry {
namespace {

using testing::random_tensor;
using testing::random_values;

DepthMap random_depth(std::size_t h, std::size_t w, std::uint64_t seed, double invalid_fraction = 0.3) {
  DepthMap d = DepthMap::zeros(h, w);
  const auto v = random_values(h * w, seed, 0.5, 10.0);
  const auto keep = random_values(h * w, seed + 1, 0.0, 1.0);
  for (std::size_t i = 0; i < d.size(); ++i) d.values[i] = keep[i] < invalid_fraction ? 0.0 : v[i];
  return d;
}

Tensor points(std::initializer_list<std::array<double, 3>> ps) {
  std::vector<double> data;
  for (const auto& p : ps) data.insert(data.end(), p.begin(), p.end());
  return Tensor::from_data({ps.size(), 3}, std::move(data));
}

TEST(Unproject, PrincipalPointLiesOnAxis) {
  const CameraIntrinsics intr{100, 100, 2, 1};
  DepthMap d = DepthMap::zeros(3, 4);
  d.at(1, 2) = 2.0;
  const auto cloud = unproject(d, intr, Tensor::zeros({1, 3, 4}));
  ASSERT_EQ(cloud.size(), 1u);
  EXPECT_EQ(cloud.position(0), (std::array<double, 3>{0, 0, 2}));
}

TEST(Unproject, OffAxisPixel) {
  const CameraIntrinsics intr{100, 100, 50, 40};
  DepthMap d = DepthMap::zeros(80, 200);
  d.at(40, 150) = 2.0;
  const auto cloud = unproject(d, intr, Tensor::zeros({1, 80, 200}));
  ASSERT_EQ(cloud.size(), 1u);
  EXPECT_EQ(cloud.position(0), (std::array<double, 3>{2, 0, 2}));
  EXPECT_EQ(cloud.pixels[0], (PixelIndex{150, 40}));
}

TEST(Unproject, InvalidPixelsProduceNoPoints) {
  const DepthMap d = random_depth(6, 7, 3);
  const auto cloud = unproject(d, {5, 5, 3, 3}, random_tensor({2, 6, 7}, 4));
  EXPECT_EQ(cloud.size(), d.valid_count());
  for (const PixelIndex& px : cloud.pixels) EXPECT_GT(d.at(px.v, px.u), 0.0);
}

TEST(Unproject, AllInvalidThrows) {
  EXPECT_THROW(unproject(DepthMap::zeros(2, 2), {1, 1, 0, 0}, Tensor::zeros({1, 2, 2})), GeometryError);
}

TEST(Unproject, FeatureShapeMismatchThrows) {
  EXPECT_THROW(unproject(random_depth(2, 3, 1, 0.0), {1, 1, 0, 0}, Tensor::zeros({1, 3, 2})), DimensionError);
}

TEST(Project, PrincipalAxisLandsOnPrincipalPoint) {
  const auto uv = project_point({0, 0, 2}, {100, 100, 50, 40});
  EXPECT_EQ(uv[0], 50.0);
  EXPECT_EQ(uv[1], 40.0);
  EXPECT_THROW(project_point({0, 0, 0}, {1, 1, 0, 0}), GeometryError);
  EXPECT_THROW(project_point({0, 0, -1}, {1, 1, 0, 0}), GeometryError);
}

TEST(Project, RoundTripReproducesFeaturesAndDepth) {
  const DepthMap d = random_depth(5, 6, 7);
  const Tensor f = random_tensor({3, 5, 6}, 8);
  const CameraIntrinsics intr{4.5, 5.5, 2.5, 2.0};
  const Projection back = project(unproject(d, intr, f), intr, 5, 6);
  EXPECT_EQ(back.depth, d);
  const auto fd = f.data();
  const auto bd = back.features.data();
  for (std::size_t c = 0; c < 3; ++c) {
    for (std::size_t i = 0; i < d.size(); ++i) {
      EXPECT_EQ(bd[c * d.size() + i], d.values[i] > 0 ? fd[c * d.size() + i] : 0.0);
    }
  }
}

TEST(Project, RoundTripPixelAndPositionError) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const DepthMap d = random_depth(8, 9, 100 + seed);
    const auto vals = random_values(4, seed, 1.0, 20.0);
    const CameraIntrinsics intr{vals[0] * 5, vals[1] * 5, vals[2] / 2, vals[3] / 2};
    const auto cloud = unproject(d, intr, Tensor::zeros({1, 8, 9}));
    for (std::size_t i = 0; i < cloud.size(); ++i) {
      const auto p = cloud.position(i);
      const auto uv = project_point(p, intr);
      EXPECT_NEAR(uv[0], static_cast<double>(cloud.pixels[i].u), 1e-9);
      EXPECT_NEAR(uv[1], static_cast<double>(cloud.pixels[i].v), 1e-9);
      const double z = p[2];
      EXPECT_NEAR(z * (uv[0] - intr.c_u) / intr.gamma_u, p[0], 1e-9);
      EXPECT_NEAR(z * (uv[1] - intr.c_v) / intr.gamma_v, p[1], 1e-9);
    }
  }
}

TEST(Project, GradientReachesFeatures) {
  const DepthMap d = random_depth(3, 3, 9);
  Tensor f = random_tensor({2, 3, 3}, 10, -1, 1, true);
  const auto cloud = unproject(d, {2, 2, 1, 1}, f);
  backward(sum(project(cloud, {2, 2, 1, 1}, 3, 3).features));
  const auto g = f.grad();
  for (std::size_t c = 0; c < 2; ++c) {
    for (std::size_t i = 0; i < 9; ++i) EXPECT_EQ(g[c * 9 + i], d.values[i] > 0 ? 1.0 : 0.0);
  }
}

TEST(Intrinsics, DownscaledCameraAgreesOnBlockCentres) {
  const CameraIntrinsics fine{30, 28, 15.5, 11.5};
  for (std::size_t f : {2u, 4u}) {
    const CameraIntrinsics coarse = fine.downscaled(f);
    for (std::size_t u = 0; u < 5; ++u) {
      // Coarse pixel centre u sits at fine coordinate f*u + (f-1)/2.
      const double fine_u = static_cast<double>(f * u) + (static_cast<double>(f) - 1.0) / 2.0;
      const double d = 2.0;
      EXPECT_NEAR(d * (fine_u - fine.c_u) / fine.gamma_u, d * (static_cast<double>(u) - coarse.c_u) / coarse.gamma_u,
                  1e-12);
    }
  }
  EXPECT_THROW((CameraIntrinsics{0, 1, 0, 0}.validate()), GeometryError);
}

TEST(Normalize, SymmetricPair) {
  FeaturePointCloud c;
  c.positions = points({{2, 0, 0}, {-2, 0, 0}});
  c.features = Tensor::zeros({2, 1});
  c.pixels = {{0, 0}, {1, 0}};
  const auto [n, t] = normalize_unit_ball(c);
  EXPECT_EQ(n.position(0), (std::array<double, 3>{1, 0, 0}));
  EXPECT_EQ(n.position(1), (std::array<double, 3>{-1, 0, 0}));
  EXPECT_EQ(t.centroid, (std::array<double, 3>{0, 0, 0}));
  EXPECT_EQ(t.scale, 2.0);
  const auto back = denormalize(n, t);
  EXPECT_EQ(back.position(0), c.position(0));
  EXPECT_EQ(back.position(1), c.position(1));
}

TEST(Normalize, SinglePointClampsScale) {
  FeaturePointCloud c;
  c.positions = points({{3, -1, 7}});
  c.features = Tensor::zeros({1, 1});
  c.pixels = {{0, 0}};
  const auto [n, t] = normalize_unit_ball(c);
  EXPECT_EQ(n.position(0), (std::array<double, 3>{0, 0, 0}));
  EXPECT_EQ(t.scale, 1.0);
}

TEST(Normalize, IdentityTransformLeavesCloud) {
  FeaturePointCloud c;
  c.positions = random_tensor({4, 3}, 3);
  c.features = Tensor::zeros({4, 1});
  c.pixels.resize(4);
  const auto back = denormalize(c, NormalizationTransform{});
  EXPECT_EQ(std::vector<double>(back.positions.data().begin(), back.positions.data().end()),
            std::vector<double>(c.positions.data().begin(), c.positions.data().end()));
  EXPECT_THROW(denormalize(c, {{0, 0, 0}, 0.0}), GeometryError);
}

TEST(Normalize, RandomCloudsReachUnitBallAndInvert) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    FeaturePointCloud c;
    c.positions = random_tensor({100, 3}, seed, -5, 9);
    c.features = random_tensor({100, 2}, seed + 1);
    c.pixels.resize(100);
    const auto [n, t] = normalize_unit_ball(c);
    double max_norm = 0.0;
    for (std::size_t i = 0; i < 100; ++i) {
      const auto p = n.position(i);
      const double r = std::sqrt(p[0] * p[0] + p[1] * p[1] + p[2] * p[2]);
      EXPECT_LE(r, 1.0 + 1e-12);
      max_norm = std::max(max_norm, r);
    }
    EXPECT_GE(max_norm, 1.0 - 1e-12);
    const auto back = denormalize(n, t);
    for (std::size_t i = 0; i < 300; ++i) EXPECT_NEAR(back.positions.data()[i], c.positions.data()[i], 1e-12);
    EXPECT_EQ(n.features.data()[0], c.features.data()[0]);
  }
}

TEST(Knn, CollinearTieGoesToLowerIndex) {
  const NeighborTable t = knn(points({{0, 0, 0}, {1, 0, 0}, {2, 0, 0}}), 1);
  EXPECT_EQ(t.at(0, 0), 1u);
  EXPECT_EQ(t.at(1, 0), 0u);
  EXPECT_EQ(t.at(2, 0), 1u);
}

TEST(Knn, FullNeighbourhoodListsEveryOtherPoint) {
  const Tensor p = random_tensor({6, 3}, 5);
  const NeighborTable t = knn(p, 5);
  for (std::size_t i = 0; i < 6; ++i) {
    std::set<std::size_t> row;
    for (std::size_t j = 0; j < 5; ++j) row.insert(t.at(i, j));
    EXPECT_EQ(row.size(), 5u);
    EXPECT_FALSE(row.count(i));
  }
}

TEST(Knn, RejectsOutOfRangeK) {
  const Tensor p = random_tensor({4, 3}, 5);
  EXPECT_THROW(knn(p, 4), ContractError);
  EXPECT_THROW(knn(p, 0), ContractError);
}

TEST(Knn, MatchesBruteForceOracle) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Tensor p = random_tensor({256, 3}, 1000 + seed);
    EXPECT_EQ(knn(p, 16).indices, testing::knn_oracle(p, 16)) << "seed " << seed;
  }
}

TEST(Knn, MatchesOracleWithManyTies) {
  // Integer lattice points produce large groups of equal distances.
  std::vector<double> grid;
  for (int x = 0; x < 5; ++x) {
    for (int y = 0; y < 5; ++y) {
      for (int z = 0; z < 3; ++z) grid.insert(grid.end(), {double(x), double(y), double(z)});
    }
  }
  const Tensor p = Tensor::from_data({75, 3}, grid);
  EXPECT_EQ(knn(p, 10).indices, testing::knn_oracle(p, 10));
}

TEST(Knn, TranslationInvariant) {
  std::vector<double> v = random_values(64 * 3, 77, -4, 4);
  for (double& x : v) x = std::round(x * 256.0) / 256.0;
  std::vector<double> shifted = v;
  for (std::size_t i = 0; i < shifted.size(); ++i) shifted[i] += (i % 3 == 0 ? 8.0 : i % 3 == 1 ? -16.0 : 32.0);
  const Tensor a = Tensor::from_data({64, 3}, v);
  const Tensor b = Tensor::from_data({64, 3}, shifted);
  EXPECT_EQ(knn(a, 8), knn(b, 8));
  EXPECT_EQ(downsample_fps(a, 12), downsample_fps(b, 12));
}

TEST(Fps, LinePicksFarEndpoint) {
  const Tensor p = points({{0, 0, 0}, {1, 0, 0}, {2, 0, 0}, {3, 0, 0}});
  EXPECT_EQ(downsample_fps(p, 2, 0), (std::vector<std::size_t>{0, 3}));
  const auto all = downsample_fps(p, 4, 0);
  EXPECT_EQ(std::set<std::size_t>(all.begin(), all.end()).size(), 4u);
  EXPECT_THROW(downsample_fps(p, 5, 0), ContractError);
  EXPECT_THROW(downsample_fps(p, 0, 0), ContractError);
}

TEST(Fps, MatchesGreedyOracle) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Tensor p = random_tensor({128, 3}, 2000 + seed);
    EXPECT_EQ(downsample_fps(p, 16, seed % 128), testing::fps_oracle(p, 16, seed % 128)) << "seed " << seed;
  }
}

TEST(NearestSelected, AssignsEachPointToClosestSelection) {
  const Tensor p = points({{0, 0, 0}, {1, 0, 0}, {2, 0, 0}, {3, 0, 0}});
  EXPECT_EQ(nearest_selected(p, {0, 3}), (std::vector<std::size_t>{0, 0, 1, 1}));
}

TEST(SparseDepth, DenseWhenCountExceedsValid) {
  const DepthMap d = random_depth(6, 6, 11);
  EXPECT_EQ(sample_sparse_depth(d, 1000, 1), d);
}

TEST(SparseDepth, DeterministicRestriction) {
  const DepthMap d = random_depth(20, 24, 12);
  const DepthMap a = sample_sparse_depth(d, 40, 5);
  EXPECT_EQ(a, sample_sparse_depth(d, 40, 5));
  EXPECT_NE(a, sample_sparse_depth(d, 40, 6));
  EXPECT_EQ(a.valid_count(), 40u);
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a.values[i] > 0) {
      EXPECT_EQ(a.values[i], d.values[i]);
    }
  }
  EXPECT_THROW(sample_sparse_depth(DepthMap::zeros(2, 2), 1, 0), ContractError);
  EXPECT_THROW(sample_sparse_depth(d, 0, 0), ContractError);
}

TEST(AveragePool, IgnoresInvalidPixels) {
  DepthMap d = DepthMap::zeros(2, 4);
  d.values = {1, 3, 0, 0, 0, 2, 0, 0};
  const DepthMap p = average_pool_valid(d, 2);
  EXPECT_EQ(p.values, (std::vector<double>{2, 0}));
}

TEST(ImageIo, PfmRoundTripAtFloatPrecision) {
  const DepthMap d = random_depth(5, 7, 13);
  std::stringstream ss;
  io::write_pfm(ss, d);
  const DepthMap back = io::read_pfm(ss);
  ASSERT_EQ(back.height, 5u);
  ASSERT_EQ(back.width, 7u);
  for (std::size_t i = 0; i < d.size(); ++i) EXPECT_EQ(back.values[i], static_cast<double>(static_cast<float>(d.values[i])));
}

TEST(ImageIo, PfmStoresBottomRowFirst) {
  DepthMap d = DepthMap::zeros(2, 1);
  d.values = {1.0, 2.0};
  std::stringstream ss;
  io::write_pfm(ss, d);
  const std::string s = ss.str();
  EXPECT_EQ(s.substr(0, 10), "Pf\n1 2\n-1.");
  float first = 0;
  std::memcpy(&first, s.data() + s.size() - 8, 4);
  EXPECT_EQ(first, 2.0f);
}

TEST(ImageIo, PfmRejectsBadHeader) {
  std::stringstream ss("PF\n1 1\n-1.0\n");
  EXPECT_THROW(io::read_pfm(ss), IoError);
  std::stringstream big("Pf\n1 1\n1.0\n....");
  EXPECT_THROW(io::read_pfm(big), IoError);
  std::stringstream truncated("Pf\n2 2\n-1.0\nab");
  EXPECT_THROW(io::read_pfm(truncated), IoError);
}

TEST(ImageIo, Pgm16QuantisesToUnit) {
  DepthMap d = DepthMap::zeros(1, 3);
  d.values = {1.2344, 0.0, 70.0};
  std::stringstream ss;
  io::write_pgm16(ss, d, 0.001);
  const DepthMap back = io::read_pgm16(ss);
  EXPECT_NEAR(back.values[0], 1.234, 1e-12);
  EXPECT_EQ(back.values[1], 0.0);
  EXPECT_NEAR(back.values[2], 65.535, 1e-12);
}

TEST(ImageIo, PpmRoundTrip) {
  const Tensor img = random_tensor({3, 4, 5}, 14, 0, 1);
  std::stringstream ss;
  io::write_ppm(ss, img);
  const Tensor back = io::read_ppm(ss);
  ASSERT_EQ(back.shape(), img.shape());
  for (std::size_t i = 0; i < img.numel(); ++i) EXPECT_NEAR(back.data()[i], img.data()[i], 0.5 / 255 + 1e-12);
}

TEST(ImageIo, IntrinsicsJsonRoundTrip) {
  const auto path = std::filesystem::temp_directory_path() / "decotr_intrinsics_test.json";
  const CameraIntrinsics intr{36.0, 36.5, 19.5, 15.5};
  io::save_intrinsics(path, intr);
  EXPECT_EQ(io::load_intrinsics(path), intr);
  std::filesystem::remove(path);
  EXPECT_THROW(io::load_intrinsics(path), IoError);
}

TEST(Unproject, DivergedTensorDepthIsNumericalNotDomain) {
  Tensor d = Tensor::from_data({1, 1, 2}, {1.0, std::nan("")});
  EXPECT_THROW(unproject(d, {1, 1, 0, 0}, Tensor::zeros({1, 1, 2})), NumericalError);
  Tensor neg = Tensor::from_data({1, 1, 2}, {1.0, -1.0});
  EXPECT_THROW(unproject(neg, {1, 1, 0, 0}, Tensor::zeros({1, 1, 2})), DomainError);
}

}  // namespace
}  // namespace decotr::geometry
