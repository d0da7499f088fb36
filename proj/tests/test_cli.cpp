#include <gtest/gtest.h>

#include <filesystem>
#include <random>

#include "cli_support.hpp"
#include "support.hpp"
#include "ulsd/ulsd.hpp"

using namespace ulsd;
using namespace ulsd::testing;
namespace fs = std::filesystem;

namespace {

std::string q(const fs::path& p) { return shell_quote(p.string()); }

const fs::path kPinhole = kFixtures / "pinhole";
const fs::path kFisheyeCam = kFixtures / "cameras" / "fisheye.json";
const fs::path kPinholeCam = kFixtures / "cameras" / "pinhole.json";

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fresh_dir(::testing::UnitTest::GetInstance()->current_test_info()->name());
  }
  void TearDown() override { fs::remove_all(dir_); }
  fs::path dir_;
};

}  // namespace

TEST_F(Cli, HelpAndUsageErrors) {
  EXPECT_EQ(run_cli("--help").code, 0);
  EXPECT_EQ(run_cli("").code, 2);
  EXPECT_EQ(run_cli("bogus").code, 2);
  EXPECT_EQ(run_cli("fit --order 9").code, 2);
  EXPECT_EQ(run_cli("eval --pred x").code, 2);
}

TEST_F(Cli, FitStraightPolylineHasZeroError) {
  std::ofstream(dir_ / "line.json") << R"({"points": [[0,0],[1,2],[2,4],[3,6]]})";
  const auto r = run_cli("fit --order 1 -i " + q(dir_ / "line.json") + " -o " + q(dir_ / "fit.json"));
  ASSERT_EQ(r.code, 0) << r.output;
  const auto j = Json::parse(slurp(dir_ / "fit.json"));
  EXPECT_LT(j["report"]["max_error"].get<double>(), 1e-12);
  EXPECT_EQ(j["control_points"].size(), 2u);
}

TEST_F(Cli, FitPointsAreEquipartitionOfControls) {
  std::ofstream(dir_ / "arc.json") << "[[0,0],[10,3],[20,4],[30,3],[40,0]]";
  const auto r = run_cli("fit --order 2 -i " + q(dir_ / "arc.json") + " -o " + q(dir_ / "fit.json"));
  ASSERT_EQ(r.code, 0) << r.output;
  const auto j = Json::parse(slurp(dir_ / "fit.json"));
  Polyline controls, points;
  for (const auto& p : j["control_points"]) controls.push_back({p[0].get<double>(), p[1].get<double>()});
  for (const auto& p : j["points"]) points.push_back({p[0].get<double>(), p[1].get<double>()});
  const auto expected = to_equipartition(BezierSegment(controls));
  ASSERT_EQ(points.size(), 3u);
  for (std::size_t k = 0; k < 3; ++k) EXPECT_NEAR(distance(points[k], expected[k]), 0.0, 1e-9);
  EXPECT_NEAR(points[0].x, 0.0, 1e-9);
  EXPECT_NEAR(points[2].x, 40.0, 1e-9);
}

TEST_F(Cli, FitMalformedJsonExitsTwo) {
  std::ofstream(dir_ / "bad.json") << "[[0,0],[1,";
  const auto r = run_cli("fit -i " + q(dir_ / "bad.json"));
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.output.find("malformed JSON"), std::string::npos);
  EXPECT_EQ(run_cli("fit -i " + q(dir_ / "missing.json")).code, 2);
  std::ofstream(dir_ / "same.json") << "[[1,1],[1,1],[1,1]]";
  EXPECT_EQ(run_cli("fit -i " + q(dir_ / "same.json")).code, 2);
}

TEST_F(Cli, FitSweepCsv) {
  const auto r = run_cli("fit-sweep --segments 50 -o " + q(dir_ / "sweep.csv"));
  ASSERT_EQ(r.code, 0) << r.output;
  const auto csv = slurp(dir_ / "sweep.csv");
  EXPECT_EQ(csv.rfind("order,fisheye_mean,fisheye_max,spherical_mean,spherical_max\n", 0), 0u);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 7);
}

TEST_F(Cli, SynthPinholeIsPassThrough) {
  ASSERT_EQ(run_cli("synth -i " + q(kPinhole) + " --camera " + q(kPinholeCam) + " --order 1 -o " + q(dir_ / "out"))
                .code,
            0);
  for (const auto& [name, in] : read_dataset(kPinhole)) {
    const auto out = read_annotation(dir_ / "out" / (name + ".json"));
    ASSERT_EQ(out.lines.size(), in.lines.size());
    EXPECT_EQ(out.junctions, in.junctions);
    for (std::size_t i = 0; i < in.lines.size(); ++i) {
      for (std::size_t k = 0; k < 2; ++k) EXPECT_NEAR(distance(out.lines[i].points[k], in.lines[i].points[k]), 0, 1e-4);
    }
  }
}

TEST_F(Cli, SynthFisheyeMatchesLibrary) {
  ASSERT_EQ(run_cli("synth -i " + q(kPinhole) + " --camera " + q(kFisheyeCam) + " -o " + q(dir_ / "out")).code, 0);
  const auto cam = read_camera(kFisheyeCam);
  for (const auto& [name, in] : read_dataset(kPinhole)) {
    const auto expected = synth_annotation(in, cam, {2, kDefaultDistortionSamples, {}}).annotation;
    const auto got = read_annotation(dir_ / "out" / (name + ".json"));
    ASSERT_EQ(got.lines.size(), expected.lines.size());
    ASSERT_EQ(got.junctions.size(), in.junctions.size());
    for (std::size_t i = 0; i < got.junctions.size(); ++i) {
      const auto p = fisheye_distort(in.junctions[i], std::get<FisheyeIntrinsics>(cam)).point;
      EXPECT_EQ(got.junctions[i].x, static_cast<double>(static_cast<float>(p.x)));
    }
    for (std::size_t i = 0; i < got.lines.size(); ++i) {
      for (std::size_t k = 0; k <= 2; ++k) {
        EXPECT_EQ(got.lines[i].points[k].y, static_cast<double>(static_cast<float>(expected.lines[i].points[k].y)));
      }
    }
  }
  const auto manifest = Json::parse(slurp(dir_ / "out" / "manifest.json"));
  EXPECT_EQ(manifest["images"].size(), 3u);
  EXPECT_EQ(manifest["camera"]["type"], "fisheye");
}

TEST_F(Cli, SynthMissingCameraExitsTwo) {
  EXPECT_EQ(run_cli("synth -i " + q(kPinhole) + " --camera " + q(dir_ / "nope.json") + " -o " + q(dir_ / "o")).code,
            2);
  EXPECT_EQ(run_cli("synth -i " + q(kPinhole) + " --camera " + q(kFixtures / "cameras" / "spherical.json") + " -o " +
                    q(dir_ / "o"))
                .code,
            2);  // 512 x 512 input is not on the 1024 x 512 panorama
}

TEST_F(Cli, SynthEmptyDirectory) {
  fs::create_directories(dir_ / "empty");
  const auto r = run_cli("synth -i " + q(dir_ / "empty") + " --camera " + q(kFisheyeCam) + " -o " + q(dir_ / "out"));
  ASSERT_EQ(r.code, 0) << r.output;
  EXPECT_TRUE(Json::parse(slurp(dir_ / "out" / "manifest.json"))["images"].empty());
}

TEST_F(Cli, SynthNoiseIsSeeded) {
  const std::string base = "synth -i " + q(kPinhole) + " --camera " + q(kFisheyeCam) + " --noise 0.1 --seed 3 -o ";
  ASSERT_EQ(run_cli(base + q(dir_ / "a")).code, 0);
  ASSERT_EQ(run_cli(base + q(dir_ / "b")).code, 0);
  EXPECT_EQ(tree_digest(dir_ / "a"), tree_digest(dir_ / "b"));
  EXPECT_EQ(run_cli("synth -i " + q(kPinhole) + " --camera " + q(kPinholeCam) + " --noise 0.1 -o " + q(dir_ / "c"))
                .code,
            2);
}

TEST_F(Cli, EncodeDecodeEvalRoundTrip) {
  ASSERT_EQ(run_cli("encode -i " + q(kPinhole) + " --order 1 -o " + q(dir_ / "maps")).code, 0);
  const auto manifest = Json::parse(slurp(dir_ / "maps" / "manifest.json"));
  EXPECT_EQ(manifest["grid"], Json::array({128, 128}));
  const auto t = read_tensor(dir_ / "maps" / "img_000.ultd");
  EXPECT_EQ(t.dims, (std::vector<std::uint64_t>{10, 128, 128}));

  ASSERT_EQ(run_cli("decode -i " + q(dir_ / "maps") + " -o " + q(dir_ / "pred.json")).code, 0);
  const auto r = run_cli("eval -p " + q(dir_ / "pred.json") + " -g " + q(kPinhole) + " -o " + q(dir_ / "ev"));
  ASSERT_EQ(r.code, 0) << r.output;
  const auto report = Json::parse(slurp(dir_ / "ev" / "report.json"));
  EXPECT_NEAR(report["msap"].get<double>(), 1.0, 1e-9);
  EXPECT_NEAR(report["map_j"].get<double>(), 1.0, 1e-9);
  EXPECT_EQ(slurp(dir_ / "ev" / "pr.csv").rfind("threshold,recall,precision\n", 0), 0u);
  EXPECT_NE(slurp(dir_ / "ev" / "pr.svg").find("<svg"), std::string::npos);
}

TEST_F(Cli, EncodeReportsCollisions) {
  fs::create_directories(dir_ / "ds");
  std::ofstream(dir_ / "ds" / "c.json") << R"({"image": {"width": 512, "height": 512},
    "junctions": [[5, 9], [7, 11]],
    "lines": [{"order": 1, "points": [[100, 100], [140, 100]]}, {"order": 1, "points": [[120, 80], [120, 120]]}]})";
  ASSERT_EQ(run_cli("encode -i " + q(dir_ / "ds") + " --order 1 -o " + q(dir_ / "maps")).code, 0);
  const auto m = Json::parse(slurp(dir_ / "maps" / "manifest.json"))["maps"]["c"];
  EXPECT_EQ(m["junction_collisions"], 1);
  EXPECT_EQ(m["line_collisions"], 1);
  EXPECT_EQ(run_cli("encode -i " + q(dir_ / "ds") + " --grid 100x100 -o " + q(dir_ / "m2")).code, 2);
  EXPECT_EQ(run_cli("encode -i " + q(dir_ / "ds") + " --order 2 -o " + q(dir_ / "m3")).code, 2);
}

TEST_F(Cli, EvalEmptyPredictionsAndMismatch) {
  std::ofstream(dir_ / "empty.json")
      << R"({"images": {"img_000": {}, "img_001": {}, "img_002": {}}})";
  ASSERT_EQ(run_cli("eval -p " + q(dir_ / "empty.json") + " -g " + q(kPinhole) + " -o " + q(dir_ / "ev")).code, 0);
  EXPECT_EQ(Json::parse(slurp(dir_ / "ev" / "report.json"))["msap"].get<double>(), 0.0);

  std::ofstream(dir_ / "partial.json") << R"({"images": {"img_000": {}, "other": {}}})";
  const auto r = run_cli("eval -p " + q(dir_ / "partial.json") + " -g " + q(kPinhole) + " -o " + q(dir_ / "ev2"));
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.output.find("img_001"), std::string::npos);
  EXPECT_NE(r.output.find("other"), std::string::npos);
  EXPECT_EQ(run_cli("eval -p " + q(dir_ / "empty.json") + " -g " + q(kPinhole) + " --dataset-type lidar -o " +
                    q(dir_ / "ev3"))
                .code,
            2);
}

TEST_F(Cli, EvalJitteredMatchesBruteForce) {
  std::mt19937_64 rng(91);
  NamedPredictions preds;
  GroundTruthSet gts;
  std::vector<std::string> names;
  for (const auto& [name, ann] : read_dataset(kPinhole)) {
    names.push_back(name);
    ImageGroundTruth g{ann.image, {}, ann.junctions};
    auto& p = preds[name];
    for (const auto& l : ann.lines) {
      g.lines.push_back(l.points);
      p.lines.push_back({jittered(l.points, rng, uniform(rng, 0, 15)), std::round(uniform(rng, 0, 1) * 8) / 8});
    }
    for (const auto& j : ann.junctions) p.junctions.push_back({j + random_point(rng, -4, 4), uniform(rng, 0, 1)});
    gts.push_back(std::move(g));
  }
  write_predictions(dir_ / "pred.json", preds);
  ASSERT_EQ(run_cli("eval -p " + q(dir_ / "pred.json") + " -g " + q(kPinhole) + " -o " + q(dir_ / "ev")).code, 0);
  const auto report = Json::parse(slurp(dir_ / "ev" / "report.json"));

  // Oracle on exactly what the CLI read back.
  const auto reread = read_predictions(dir_ / "pred.json");
  PredictionSet ps;
  for (const auto& n : names) ps.push_back(reread.at(n));
  EXPECT_EQ(report["sap"]["5"].get<double>(), brute_sap(ps, gts, 5));
  EXPECT_EQ(report["sap"]["10"].get<double>(), brute_sap(ps, gts, 10));
  EXPECT_EQ(report["sap"]["15"].get<double>(), brute_sap(ps, gts, 15));
  EXPECT_EQ(report["junction_ap"]["1"].get<double>(), brute_junction_ap(ps, gts, 1));
  EXPECT_GT(report["msap"].get<double>(), 0.0);
  EXPECT_LT(report["msap"].get<double>(), 1.0);
}

TEST_F(Cli, MatchAndSample) {
  ASSERT_EQ(run_cli("encode -i " + q(kPinhole) + " --order 1 -o " + q(dir_ / "maps")).code, 0);
  ASSERT_EQ(run_cli("decode -i " + q(dir_ / "maps") + " -o " + q(dir_ / "pred.json")).code, 0);
  ASSERT_EQ(run_cli("match -p " + q(dir_ / "pred.json") + " -o " + q(dir_ / "m.json")).code, 0);
  const auto m = read_predictions(dir_ / "m.json");
  EXPECT_EQ(m.size(), 3u);
  EXPECT_FALSE(m.at("img_000").lines.empty());

  const std::string cmd = "sample -p " + q(dir_ / "pred.json") + " -g " + q(kPinhole) + " --seed 5 --n-pos 4 -o ";
  ASSERT_EQ(run_cli(cmd + q(dir_ / "s1.json")).code, 0);
  ASSERT_EQ(run_cli(cmd + q(dir_ / "s2.json")).code, 0);
  EXPECT_EQ(slurp(dir_ / "s1.json"), slurp(dir_ / "s2.json"));
  const auto s = Json::parse(slurp(dir_ / "s1.json"));
  EXPECT_EQ(s["images"]["img_000"]["samples"].size(), 4u + 12u);  // 4 sampled + 12 injected
}

TEST_F(Cli, AlignConstantMap) {
  write_tensor(dir_ / "f.ultd", Tensor{{3, 16, 16}, std::vector<float>(3 * 16 * 16, 0.25f)});
  const auto r = run_cli("align -f " + q(dir_ / "f.ultd") + " -l " + q(kPinhole / "img_000.json") +
                         " --np 16 --pool 4 -o " + q(dir_ / "out.ultd"));
  ASSERT_EQ(r.code, 0) << r.output;
  const auto t = read_tensor(dir_ / "out.ultd");
  EXPECT_EQ(t.dims, (std::vector<std::uint64_t>{12, 3 * 4}));
  for (float v : t.data) EXPECT_EQ(v, 0.25f);
  EXPECT_EQ(run_cli("align -f " + q(dir_ / "f.ultd") + " -l " + q(kPinhole / "img_000.json") +
                    " --np 10 --pool 4 -o " + q(dir_ / "bad.ultd"))
                .code,
            2);
}

TEST_F(Cli, ThreadCountDoesNotChangeOutput) {
  const std::string cmd = "synth -i " + q(kPinhole) + " --camera " + q(kFisheyeCam) + " -o ";
  ASSERT_EQ(run_cli(cmd + q(dir_ / "one"), "ULSD_THREADS=1").code, 0);
  ASSERT_EQ(run_cli(cmd + q(dir_ / "many"), "ULSD_THREADS=8").code, 0);
  EXPECT_EQ(tree_digest(dir_ / "one"), tree_digest(dir_ / "many"));
}
