#include <gtest/gtest.h>
#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <fstream>
#include <random>
#include <sstream>

#include <json.hpp>

#include "decotr/cli/app.hpp"
#include "decotr/cli/dataset.hpp"
#include "decotr/cli/manifest.hpp"
#include "decotr/io/image_io.hpp"
#include "decotr/model/model.hpp"
#include "decotr/training/loss.hpp"
#include "decotr/training/synthetic.hpp"

namespace decotr::cli {
namespace {

struct Result {
  int code = -1;
  std::string out;
  std::string err;
};

Result run_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "decotr");
  std::vector<const char*> argv;
  for (const std::string& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  Result r;
  r.code = run(static_cast<int>(argv.size()), argv.data(), out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

std::string read_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

// Relative path -> bytes of every file below `dir`.
std::map<std::string, std::string> snapshot(const fs::path& dir) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (e.is_regular_file()) files[fs::relative(e.path(), dir).generic_string()] = read_bytes(e.path());
  }
  return files;
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    dir_ = fs::temp_directory_path() / ("decotr_cli_" + std::string(info->name()) + "_" + std::to_string(::getpid()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  fs::path path(const std::string& name) const { return dir_ / name; }

  // Tiny-config scenes (16 x 20).
  fs::path tiny_data(std::size_t count = 3) {
    const fs::path d = path("data");
    const Result r = run_cli({"synth", "--seed", "5", "--count", std::to_string(count), "--height", "16", "--width",
                              "20", "--out-dir", d.string()});
    EXPECT_EQ(r.code, 0) << r.err;
    return d;
  }

  fs::path dir_;
};

TEST(Manifest, BlobHashMatchesGitObjectIds) {
  // `printf 'hello\n' | git hash-object --stdin` and the empty blob.
  EXPECT_EQ(git_blob_sha1("hello\n"), "ce013625030ba8dba906f756967f9e9ca394464a");
  EXPECT_EQ(git_blob_sha1(""), "e69de29bb2d1d6434b8b29ae775ad8c2e48c5391");
}

TEST_F(CliTest, SynthWritesNamedTriplesAndManifest) {
  const fs::path d = path("scenes");
  const Result r = run_cli({"synth", "--seed", "0", "--count", "8", "--out-dir", d.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  for (std::size_t i = 0; i < 8; ++i) {
    const SceneFiles f = scene_files(d, scene_name(i));
    EXPECT_TRUE(fs::exists(f.depth) && fs::exists(f.image) && fs::exists(f.intrinsics)) << i;
  }
  EXPECT_TRUE(fs::exists(d / "scene_0000.depth.pfm"));
  EXPECT_TRUE(fs::exists(d / "scene_0007.image.ppm"));
  const auto manifest = nlohmann::json::parse(read_bytes(d / "manifest.json"));
  EXPECT_EQ(manifest["command"], "synth");
  ASSERT_EQ(manifest["outputs"].size(), 24u);
  for (const auto& o : manifest["outputs"]) {
    EXPECT_EQ(o["sha1"], git_blob_sha1(read_bytes(d / o["path"].get<std::string>()))) << o["path"];
  }
  EXPECT_EQ(manifest["content_hash"].get<std::string>().size(), 40u);
  EXPECT_TRUE(manifest.contains("started_at"));
}

TEST_F(CliTest, SynthIsByteIdenticalForTheSameSeed) {
  ASSERT_EQ(run_cli({"synth", "--seed", "3", "--count", "2", "--out-dir", path("a").string()}).code, 0);
  ASSERT_EQ(run_cli({"synth", "--seed", "3", "--count", "2", "--out-dir", path("b").string()}).code, 0);
  auto a = snapshot(path("a")), b = snapshot(path("b"));
  const auto ma = nlohmann::json::parse(a["manifest.json"]), mb = nlohmann::json::parse(b["manifest.json"]);
  EXPECT_EQ(ma["content_hash"], mb["content_hash"]);
  a.erase("manifest.json");
  b.erase("manifest.json");
  EXPECT_EQ(a, b);
}

TEST_F(CliTest, SynthDepthParsesBackToAnalyticValues) {
  ASSERT_EQ(run_cli({"synth", "--seed", "11", "--count", "2", "--out-dir", path("s").string()}).code, 0);
  for (std::size_t i = 0; i < 2; ++i) {
    const training::SyntheticScene analytic = training::make_synthetic_scene(11 + i, 32, 40);
    const geometry::DepthMap stored = io::load_pfm(scene_files(path("s"), scene_name(i)).depth);
    ASSERT_EQ(stored.size(), analytic.depth.size());
    for (std::size_t k = 0; k < stored.size(); ++k) {
      // PFM keeps 32-bit floats.
      EXPECT_NEAR(stored.values[k], analytic.depth.values[k], 1e-6 * analytic.depth.values[k]);
    }
    EXPECT_EQ(io::load_intrinsics(scene_files(path("s"), scene_name(i)).intrinsics), analytic.intrinsics);
  }
}

TEST_F(CliTest, SynthRejectsTooSmallImages) {
  const Result r = run_cli({"synth", "--height", "8", "--out-dir", path("s").string()});
  EXPECT_EQ(r.code, 1);
  EXPECT_FALSE(r.err.empty());
}

TEST_F(CliTest, TrainPrintsFinalLossAndWritesArtifacts) {
  const fs::path data = tiny_data();
  const Result r = run_cli({"train", "--config", "tiny", "--data-dir", data.string(), "--steps", "4", "--seed", "2",
                            "--out", path("run").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("final_loss="), std::string::npos) << r.out;
  const std::string log = read_bytes(path("run") / "loss.csv");
  EXPECT_EQ(log.rfind("step,loss,loss_initial,loss_final\n", 0), 0u);
  EXPECT_EQ(std::count(log.begin(), log.end(), '\n'), 5);
  EXPECT_NO_THROW(model::DecotrModel::load(path("run") / "checkpoint"));
  const auto manifest = nlohmann::json::parse(read_bytes(path("run") / "manifest.json"));
  EXPECT_EQ(manifest["config"]["image_height"], 16);
  EXPECT_EQ(manifest["inputs"].size(), 9u);
  EXPECT_TRUE(manifest["results"].contains("final_loss"));
}

TEST_F(CliTest, TrainWithZeroStepsWritesUntrainedCheckpoint) {
  const fs::path data = tiny_data(1);
  const Result r = run_cli({"train", "--config", "tiny", "--data-dir", data.string(), "--steps", "0", "--seed", "4",
                            "--out", path("run").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const model::DecotrModel loaded = model::DecotrModel::load(path("run") / "checkpoint");
  const model::DecotrModel fresh = model::DecotrModel::create(model::ModelConfig::tiny(), 4);
  const auto a = loaded.parameters(), b = fresh.parameters();
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_TRUE(std::equal(a[i].second.data().begin(), a[i].second.data().end(), b[i].second.data().begin()))
        << a[i].first;
  }
}

TEST_F(CliTest, TrainIsByteReproducible) {
  const fs::path data = tiny_data();
  for (const char* out : {"a", "b"}) {
    ASSERT_EQ(run_cli({"train", "--config", "tiny", "--data-dir", data.string(), "--steps", "6", "--seed", "9",
                       "--out", path(out).string()})
                  .code,
              0);
  }
  EXPECT_EQ(snapshot(path("a") / "checkpoint"), snapshot(path("b") / "checkpoint"));
  EXPECT_EQ(read_bytes(path("a") / "loss.csv"), read_bytes(path("b") / "loss.csv"));
}

TEST_F(CliTest, TrainInputErrorsExitWithOne) {
  const fs::path data = tiny_data(1);
  EXPECT_EQ(run_cli({"train", "--data-dir", path("missing").string(), "--out", path("o").string()}).code, 1);
  // Toy config expects 32 x 40 scenes.
  EXPECT_EQ(run_cli({"train", "--config", "toy", "--data-dir", data.string(), "--out", path("o").string()}).code, 1);
  write_text(path("bad.json"), R"({"layers": 2, "colour": 1})");
  const Result r = run_cli({"train", "--config", path("bad.json").string(), "--data-dir", data.string(), "--out",
                            path("o").string()});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("colour"), std::string::npos) << r.err;
  EXPECT_EQ(run_cli({"train", "--steps", "-3", "--data-dir", data.string(), "--out", path("o").string()}).code, 1);
}

TEST_F(CliTest, NonFiniteLossExitsWithTwo) {
  const fs::path data = tiny_data(1);
  // A step this large overflows the weights within a few updates.
  const Result r = run_cli({"train", "--config", "tiny", "--data-dir", data.string(), "--steps", "20", "--lr",
                            "1e150", "--out", path("o").string()});
  EXPECT_EQ(r.code, 2) << r.out << r.err;
  EXPECT_NE(r.err.find("numerical"), std::string::npos) << r.err;
}

TEST_F(CliTest, EvalOracleGivesZeroErrors) {
  const fs::path data = tiny_data();
  const Result r = run_cli({"eval", "--oracle", "--data-dir", data.string(), "--csv", path("m.csv").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto j = nlohmann::json::parse(r.out);
  ASSERT_EQ(j["scenes"].size(), 3u);
  for (const char* k : {"rmse", "mae", "abs_rel", "irmse", "imae"}) EXPECT_EQ(j["aggregate"][k], 0) << k;
  EXPECT_EQ(j["aggregate"]["delta1"], 100);
  EXPECT_EQ(j["aggregate"]["valid_count"], 3 * 16 * 20);
}

TEST_F(CliTest, EvalIsDeterministicAndAggregatesPooled) {
  const fs::path data = tiny_data();
  ASSERT_EQ(run_cli({"train", "--config", "tiny", "--data-dir", data.string(), "--steps", "0", "--out",
                     path("run").string()})
                .code,
            0);
  const std::vector<std::string> args{"eval", "--checkpoint", (path("run") / "checkpoint").string(), "--data-dir",
                                      data.string(), "--seed", "3", "--sparse-n", "40", "--csv"};
  auto first = args, second = args;
  first.push_back(path("a.csv").string());
  second.push_back(path("b.csv").string());
  const Result a = run_cli(first), b = run_cli(second);
  ASSERT_EQ(a.code, 0) << a.err;
  EXPECT_EQ(a.out, b.out);
  EXPECT_EQ(read_bytes(path("a.csv")), read_bytes(path("b.csv")));

  const auto j = nlohmann::json::parse(a.out);
  double sq = 0.0, abs = 0.0, n = 0.0;
  for (const auto& s : j["scenes"]) {
    const double c = s["valid_count"].get<double>();
    sq += std::pow(s["rmse"].get<double>(), 2) * c;
    abs += s["mae"].get<double>() * c;
    n += c;
  }
  // Per-scene values are printed with 6 significant digits.
  EXPECT_NEAR(std::sqrt(sq / n), j["aggregate"]["rmse"].get<double>(), 1e-5 * std::sqrt(sq / n));
  EXPECT_NEAR(abs / n, j["aggregate"]["mae"].get<double>(), 1e-5 * abs / n);

  const std::string csv = read_bytes(path("a.csv"));
  EXPECT_EQ(csv.rfind("scene,rmse,mae,abs_rel,irmse,imae,delta1,delta2,delta3,valid_count\n", 0), 0u);
  EXPECT_NE(csv.find("\naggregate,"), std::string::npos);
  EXPECT_TRUE(fs::exists(path("a.manifest.json")));
}

TEST_F(CliTest, EvalRejectsCheckpointThatDoesNotFitItsConfig) {
  const fs::path data = tiny_data(1);
  ASSERT_EQ(run_cli({"train", "--config", "tiny", "--data-dir", data.string(), "--steps", "0", "--out",
                     path("run").string()})
                .code,
            0);
  model::ModelConfig other = model::ModelConfig::tiny();
  other.guidance_channels = 12;
  other.save(path("run") / "checkpoint" / "config.json");
  const Result r = run_cli({"eval", "--checkpoint", (path("run") / "checkpoint").string(), "--data-dir",
                            data.string(), "--csv", path("m.csv").string()});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("checkpoint"), std::string::npos) << r.err;
}

TEST_F(CliTest, CompleteWritesPositiveMapsOfInputSize) {
  const fs::path data = tiny_data(1);
  ASSERT_EQ(run_cli({"train", "--config", "tiny", "--data-dir", data.string(), "--steps", "2", "--out",
                     path("run").string()})
                .code,
            0);
  const SceneFiles f = scene_files(data, scene_name(0));
  geometry::DepthMap sparse = geometry::DepthMap::zeros(16, 20);
  const geometry::DepthMap dense = io::load_pfm(f.depth);
  for (std::size_t i = 0; i < dense.size(); i += 9) sparse.values[i] = dense.values[i];
  io::save_pfm(path("sparse.pfm"), sparse);
  const Result r = run_cli({"complete", "--checkpoint", (path("run") / "checkpoint").string(), "--image",
                            f.image.string(), "--sparse", path("sparse.pfm").string(), "--intrinsics",
                            f.intrinsics.string(), "--out", path("done").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  for (const char* name : {"final.pfm", "initial.pfm"}) {
    const geometry::DepthMap d = io::load_pfm(path("done") / name);
    EXPECT_EQ(d.height, 16u);
    EXPECT_EQ(d.width, 20u);
    // Stored as 32-bit floats.
    for (double v : d.values) EXPECT_GE(v, static_cast<double>(static_cast<float>(1e-3)));
  }
  EXPECT_TRUE(fs::exists(path("done") / "manifest.json"));
}

TEST_F(CliTest, CompleteRejectsMisalignedInputs) {
  const fs::path data = tiny_data(1);
  ASSERT_EQ(run_cli({"train", "--config", "tiny", "--data-dir", data.string(), "--steps", "0", "--out",
                     path("run").string()})
                .code,
            0);
  io::save_pfm(path("sparse.pfm"), geometry::DepthMap::zeros(16, 21));
  const SceneFiles f = scene_files(data, scene_name(0));
  const Result r = run_cli({"complete", "--checkpoint", (path("run") / "checkpoint").string(), "--image",
                            f.image.string(), "--sparse", path("sparse.pfm").string(), "--intrinsics",
                            f.intrinsics.string(), "--out", path("done").string()});
  EXPECT_EQ(r.code, 1);
  EXPECT_FALSE(fs::exists(path("done") / "final.pfm"));
}

TEST_F(CliTest, GradcheckPrintsOneLinePerCheckAndPasses) {
  const Result r = run_cli({"gradcheck", "--seed", "1", "--manifest", path("gc.json").string()});
  EXPECT_EQ(r.code, 0) << r.out;
  const auto manifest = nlohmann::json::parse(read_bytes(path("gc.json")));
  const auto& checks = manifest["results"]["checks"];
  ASSERT_GT(checks.size(), 40u);
  for (const auto& c : checks) {
    EXPECT_NE(r.out.find("PASS " + c["name"].get<std::string>() + " "), std::string::npos) << c["name"];
  }
}

TEST_F(CliTest, GradcheckCatchesCorruptedBackwardRule) {
  const Result r = run_cli({"gradcheck", "--corrupt", "conv2d", "--manifest", path("gc.json").string()});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.out.find("FAIL grad/op/conv2d "), std::string::npos) << r.out;
  // The hook is cleared afterwards.
  EXPECT_EQ(run_cli({"gradcheck", "--manifest", path("gc.json").string()}).code, 0);
}

}  // namespace
}  // namespace decotr::cli
