#include <gtest/gtest.h>

#include <bit>
#include <cstring>
#include <filesystem>
#include <random>

#include <unistd.h>

#include "support.hpp"
#include "ulsd/io.hpp"
#include "ulsd/tensor_file.hpp"

using namespace ulsd;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("ulsd_test_" + name + "_" + std::to_string(::getpid()));
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

}  // namespace

TEST(Tensor, HeaderArithmetic) {
  const Tensor t{{2, 2}, {1, 0, 0, 1}};
  const auto bytes = encode_tensor(t);
  ASSERT_EQ(bytes.size(), 26u + 16u);
  EXPECT_EQ(tensor_header_size(2), 26u);
  EXPECT_EQ(std::memcmp(bytes.data(), "ULTD", 4), 0);
  EXPECT_EQ(bytes[4], 1);
  EXPECT_EQ(bytes[5] | bytes[6] | bytes[7], 0);
  EXPECT_EQ(bytes[8], 0);
  EXPECT_EQ(bytes[9], 2);
  EXPECT_EQ(bytes[10], 2);
  EXPECT_EQ(bytes[18], 2);
  // 1.0f little-endian.
  EXPECT_EQ(bytes[26], 0x00);
  EXPECT_EQ(bytes[28], 0x80);
  EXPECT_EQ(bytes[29], 0x3f);
  EXPECT_EQ(decode_tensor(bytes), t);
}

TEST(Tensor, RejectsMalformed) {
  EXPECT_THROW(encode_tensor({{}, {}}), ValidationError);
  EXPECT_THROW(encode_tensor({{2, 2}, {1, 2, 3}}), ValidationError);
  auto good = encode_tensor({{3}, {1, 2, 3}});
  auto bad = good;
  bad[0] = 'X';
  EXPECT_THROW(decode_tensor(bad), ValidationError);
  bad = good;
  bad[4] = 2;
  EXPECT_THROW(decode_tensor(bad), ValidationError);
  bad = good;
  bad[8] = 1;
  EXPECT_THROW(decode_tensor(bad), ValidationError);
  bad = good;
  bad[9] = 0;
  EXPECT_THROW(decode_tensor(bad), ValidationError);
  bad = good;
  bad.pop_back();
  EXPECT_THROW(decode_tensor(bad), ValidationError);
  bad = good;
  bad.push_back(0);
  EXPECT_THROW(decode_tensor(bad), ValidationError);
  EXPECT_THROW(decode_tensor({'U', 'L'}), ValidationError);
  // Dims whose product overflows.
  Tensor huge{{1}, {0}};
  auto hb = encode_tensor(huge);
  for (int i = 0; i < 8; ++i) hb[10 + i] = 0xff;
  EXPECT_THROW(decode_tensor(hb), ValidationError);
}

TEST(Tensor, FileRoundTripIsBitExact) {
  const auto dir = scratch_dir("tensor");
  std::mt19937_64 rng(81);
  Tensor t{{3, 4, 5}, {}};
  for (int i = 0; i < 60; ++i) t.data.push_back(std::bit_cast<float>(static_cast<std::uint32_t>(rng())));
  t.data[0] = -0.0f;
  write_tensor(dir / "t.ultd", t);
  const auto back = read_tensor(dir / "t.ultd");
  ASSERT_EQ(back.dims, t.dims);
  for (std::size_t i = 0; i < t.data.size(); ++i) {
    EXPECT_EQ(std::bit_cast<std::uint32_t>(back.data[i]), std::bit_cast<std::uint32_t>(t.data[i]));
  }
  EXPECT_FALSE(fs::exists(dir / "t.ultd.tmp"));
  EXPECT_THROW(read_tensor(dir / "missing.ultd"), ValidationError);
  fs::remove_all(dir);
}

TEST(Tensor, PlanesConversion) {
  Planes<double> p(2, 3, 4);
  for (std::size_t i = 0; i < p.size(); ++i) p.data()[i] = static_cast<double>(i) * 0.5;
  const auto t = to_tensor(p);
  EXPECT_EQ(t.dims, (std::vector<std::uint64_t>{2, 3, 4}));
  EXPECT_EQ(to_planes<double>(t), p);
  const auto flat = to_planes<float>(Tensor{{3, 4}, std::vector<float>(12, 1.0f)});
  EXPECT_EQ(flat.channels(), 1u);
  EXPECT_THROW(to_planes<float>(Tensor{{12}, std::vector<float>(12, 1.0f)}), ValidationError);
}

TEST(Annotation, JsonRoundTripAtFloatPrecision) {
  std::mt19937_64 rng(82);
  Annotation a{{640, 480}, CameraModel{FisheyeIntrinsics(300, 300, 320, 240, {0.01, 0, 0, 0})}, {}, {}};
  for (int i = 0; i < 10; ++i) {
    a.lines.push_back({ulsd::testing::random_line(rng, 2, 640, 480), i == 3});
    a.junctions.push_back(ulsd::testing::random_point(rng, 0, 480));
  }
  const auto dir = scratch_dir("ann");
  write_annotation(dir / "a.json", a);
  const auto b = read_annotation(dir / "a.json");
  EXPECT_EQ(b.image.width, 640);
  ASSERT_TRUE(b.camera.has_value());
  EXPECT_EQ(camera_type_name(*b.camera), "fisheye");
  ASSERT_EQ(b.lines.size(), a.lines.size());
  for (std::size_t i = 0; i < a.lines.size(); ++i) {
    EXPECT_EQ(b.lines[i].wrapped, a.lines[i].wrapped);
    for (std::size_t k = 0; k < 3; ++k) {
      EXPECT_EQ(b.lines[i].points[k].x, static_cast<double>(static_cast<float>(a.lines[i].points[k].x)));
    }
  }
  // Re-writing what was read is byte-stable.
  write_annotation(dir / "b.json", b);
  EXPECT_EQ(read_text(dir / "a.json"), read_text(dir / "b.json"));
  fs::remove_all(dir);
}

TEST(Annotation, RejectsBadInput) {
  auto parse = [](const std::string& s) { return annotation_from_json(parse_json<FloatJson>(s, "test")); };
  EXPECT_THROW(parse("{"), ValidationError);
  EXPECT_THROW(parse(R"({"lines": []})"), ValidationError);
  EXPECT_THROW(parse(R"({"image": {"width": 0, "height": 10}})"), ValidationError);
  EXPECT_THROW(parse(R"({"image": {"width": 10.5, "height": 10}})"), ValidationError);
  EXPECT_THROW(parse(R"({"image": {"width": 10, "height": 10}, "lines": [{"order": 2, "points": [[0,0],[1,1]]}]})"),
               ValidationError);
  EXPECT_THROW(parse(R"({"image": {"width": 10, "height": 10}, "junctions": [[0]]})"), ValidationError);
  EXPECT_THROW(parse(R"({"image": {"width": 10, "height": 10, "camera": {"type": "orthographic"}}})"),
               ValidationError);
  EXPECT_NO_THROW(parse(R"({"image": {"width": 10, "height": 10}})"));
}

TEST(Camera, JsonRoundTrip) {
  for (const CameraModel& cam : {CameraModel{PinholeCamera{100, 110, 50, 60}},
                                 CameraModel{FisheyeIntrinsics(200, 200, 100, 100, {0.1, -0.01, 0.001, 0})},
                                 CameraModel{EquirectGrid(1024, 512)}}) {
    const auto j = camera_to_json<Json>(cam);
    const auto back = camera_from_json(j);
    EXPECT_EQ(camera_type_name(back), camera_type_name(cam));
    EXPECT_EQ(camera_to_json<Json>(back), j);
  }
}

TEST(Dataset, ManifestAndDirectoryListing) {
  const auto dir = scratch_dir("ds");
  Annotation a{{64, 64}, std::nullopt, {{1, 1}}, {{EquipartitionLine({{1, 1}, {30, 30}}), false}}};
  write_annotation(dir / "b.json", a);
  write_annotation(dir / "a.json", a);
  EXPECT_EQ(dataset_names(dir), (std::vector<std::string>{"a", "b"}));
  write_manifest(dir, {"b"});
  EXPECT_EQ(dataset_names(dir), (std::vector<std::string>{"b"}));
  EXPECT_EQ(read_dataset(dir).size(), 1u);
  EXPECT_THROW(dataset_names(dir / "nope"), ValidationError);
  fs::remove_all(dir);
}

TEST(Predictions, RoundTrip) {
  NamedPredictions p;
  p["x"].lines.push_back({EquipartitionLine({{1.5, 2.5}, {3, 4}}), 0.75});
  p["x"].junctions.push_back({{1.5, 2.5}, 0.5});
  p["y"];
  const auto j = predictions_to_json(p);
  const auto q = predictions_from_json(j);
  ASSERT_EQ(q.size(), 2u);
  EXPECT_EQ(q.at("x").lines[0].points, p["x"].lines[0].points);
  EXPECT_EQ(q.at("x").lines[0].confidence, 0.75);
  EXPECT_EQ(q.at("x").junctions[0].position, (Point2{1.5, 2.5}));
  EXPECT_TRUE(q.at("y").lines.empty());
  EXPECT_THROW(predictions_from_json(FloatJson::parse(R"({"images": []})")), ValidationError);
}

TEST(PackedMaps, RoundTrip) {
  const GridSpec s(64, 64, 16, 16);
  std::mt19937_64 rng(83);
  for (std::size_t order = 1; order <= 6; ++order) {
    std::vector<EquipartitionLine> lines;
    for (int i = 0; i < 5; ++i) {
      auto l = ulsd::testing::random_line(rng, order, 64, 64);
      if (s.contains(line_center(l))) lines.push_back(l);
    }
    const Polyline junctions = ulsd::testing::random_points(rng, 5, 0, 64);
    const auto j = encode_junctions(junctions, s).maps;
    const auto l = encode_lines(lines, s, order).maps;
    const auto t = pack_maps(j, l);
    EXPECT_EQ(t.dims[0], kPackedFixedChannels + 2 * stored_offset_count(order));
    const auto [j2, l2] = unpack_maps(t, order);
    for (std::size_t i = 0; i < j.offsets.size(); ++i) {
      EXPECT_EQ(j2.offsets.data()[i], static_cast<double>(static_cast<float>(j.offsets.data()[i])));
    }
    EXPECT_EQ(l2.eq_offsets.channels(), l.eq_offsets.channels());
    EXPECT_EQ(l2.confidence, l.confidence);
    EXPECT_THROW(unpack_maps(t, order <= 2 ? 3 : 1), ValidationError);
  }
}
