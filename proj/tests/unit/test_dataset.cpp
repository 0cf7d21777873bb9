#include <gtest/gtest.h>

#include <bit>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>

#include "ctxrr/dataset.hpp"
#include "ctxrr/errors.hpp"
#include "test_util.hpp"

namespace ctxrr {
namespace {

namespace fs = std::filesystem;

Dataset tiny(std::size_t dim = 3) {
  Rng rng(1);
  std::vector<Scene> scenes;
  scenes.push_back(testing::make_scene("s0", {1, 2}, dim, rng, "train"));
  scenes.push_back(testing::make_scene("s1", {1, 3, 2}, dim, rng, "train"));
  scenes.push_back(testing::make_scene("s2", {4}, dim, rng, "test"));
  scenes[1].camera_id = "c1";
  scenes[2].instances[0].identity.reset();
  return Dataset(dim, std::move(scenes));
}

void expect_same(const Dataset& a, const Dataset& b) {
  ASSERT_EQ(a.dim, b.dim);
  ASSERT_EQ(a.scenes.size(), b.scenes.size());
  for (std::size_t s = 0; s < a.scenes.size(); ++s) {
    const Scene& x = a.scenes[s];
    const Scene& y = b.scenes[s];
    EXPECT_EQ(x.scene_id, y.scene_id);
    EXPECT_EQ(x.camera_id, y.camera_id);
    EXPECT_EQ(x.split, y.split);
    ASSERT_EQ(x.instances.size(), y.instances.size());
    for (std::size_t i = 0; i < x.instances.size(); ++i) {
      EXPECT_EQ(x.instances[i].instance_id, y.instances[i].instance_id);
      EXPECT_EQ(x.instances[i].box, y.instances[i].box);
      EXPECT_EQ(x.instances[i].identity, y.instances[i].identity);
      EXPECT_EQ(x.instances[i].embedding, y.instances[i].embedding);
    }
  }
}

fs::path temp_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("ctxrr_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

TEST(HexCodec, BitExactRoundTrip) {
  const std::vector<double> v{0.0, -0.0, 1.0, -2.5, 1e-310, std::numeric_limits<double>::max(), 0.1};
  const std::string hex = encode_f64_hex(v);
  EXPECT_EQ(hex.size(), v.size() * 16);
  EXPECT_EQ(hex.substr(32, 16), "000000000000f03f");
  const auto back = decode_f64_hex(hex);
  ASSERT_EQ(back.size(), v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    EXPECT_EQ(std::bit_cast<std::uint64_t>(back[i]), std::bit_cast<std::uint64_t>(v[i]));
  }
  EXPECT_THROW(decode_f64_hex("abc"), DataError);
  EXPECT_THROW(decode_f64_hex("zz00000000000000"), DataError);
}

TEST(DatasetIo, StringRoundTripIsExact) {
  const Dataset ds = tiny();
  const std::string text = dataset_to_string(ds);
  const Dataset back = dataset_from_string(text);
  expect_same(ds, back);
  EXPECT_EQ(dataset_to_string(back), text);
}

TEST(DatasetIo, BlobStorageRoundTrip) {
  const fs::path dir = temp_dir("blob");
  const Dataset ds = tiny();
  save_dataset(ds, dir / "d.jsonl", EmbeddingStorage::blob);
  EXPECT_TRUE(fs::exists(dir / "d.jsonl.emb"));
  EXPECT_EQ(fs::file_size(dir / "d.jsonl.emb"), ds.num_instances() * kNumParts * ds.dim * 8);
  expect_same(ds, load_dataset(dir / "d.jsonl"));
  fs::resize_file(dir / "d.jsonl.emb", 8 * 5);
  EXPECT_THROW(load_dataset(dir / "d.jsonl"), DataError);
  fs::remove_all(dir);
}

TEST(DatasetIo, EmptyDataset) {
  const Dataset ds(4, {});
  const Dataset back = dataset_from_string(dataset_to_string(ds));
  EXPECT_EQ(back.dim, 4u);
  EXPECT_TRUE(back.scenes.empty());
  EXPECT_EQ(back.num_instances(), 0u);
  EXPECT_THROW(dataset_from_string(""), DataError);
}

TEST(DatasetIo, ParseErrorCarriesLineNumber) {
  std::string text = dataset_to_string(tiny());
  const auto second_newline = text.find('\n', text.find('\n') + 1);
  text.insert(second_newline + 1, "{not json\n");
  try {
    dataset_from_string(text);
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos) << e.what();
  }
}

TEST(DatasetIo, NormViolationNamesInstance) {
  std::string text = dataset_to_string(tiny(2));
  // Scale the first stored vector of s1_p1 by 2: replace its leading part with (2, 0).
  const auto at = text.find("\"s1_p1\"");
  ASSERT_NE(at, std::string::npos);
  const auto parts = text.find("\"parts\"", at);
  const auto quote = text.find('"', parts + 8);
  text.replace(quote + 1, 32, encode_f64_hex(std::vector<double>{2.0, 0.0}));
  try {
    dataset_from_string(text);
    FAIL() << "expected ValidationError";
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("s1_p1"), std::string::npos) << e.what();
  }
}

TEST(DatasetIo, DuplicateIdsAreRejected) {
  Dataset ds = tiny();
  ds.scenes[1].instances[0].instance_id = "s0_p0";
  ds.scenes[1].instances[0].scene_id = "s1";
  try {
    ds.reindex();
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("s0_p0"), std::string::npos);
  }
  Dataset scenes = tiny();
  scenes.scenes[2].scene_id = "s0";
  for (auto& inst : scenes.scenes[2].instances) inst.scene_id = "s0";
  EXPECT_THROW(scenes.reindex(), DataError);
}

TEST(DatasetIo, LookupAndSplits) {
  const Dataset ds = tiny();
  ASSERT_NE(ds.find_instance("s1_p2"), nullptr);
  EXPECT_EQ(ds.scene_of(*ds.find_instance("s1_p2")).scene_id, "s1");
  EXPECT_EQ(ds.find_scene("nope"), nullptr);
  EXPECT_EQ(ds.scenes_in_split("train").size(), 2u);
  EXPECT_EQ(ds.scenes_in_split("").size(), 3u);
  const Instance stranger = testing::make_instance("x", "s0", 1, ds.scenes[0].instances[0].embedding);
  EXPECT_THROW(ds.scene_of(stranger), UsageError);
}

TEST(DatasetIo, DataDirectoryFallback) {
  const fs::path dir = temp_dir("datadir");
  save_dataset(tiny(), dir / "env.jsonl");
  ::setenv(std::string(kDataDirEnv).c_str(), dir.c_str(), 1);
  EXPECT_EQ(resolve_data_path("env.jsonl"), dir / "env.jsonl");
  expect_same(tiny(), load_dataset(resolve_data_path("env.jsonl")));
  EXPECT_EQ(resolve_data_path("/abs/x.jsonl"), fs::path("/abs/x.jsonl"));
  ::unsetenv(std::string(kDataDirEnv).c_str());
  EXPECT_EQ(resolve_data_path("env.jsonl"), fs::path("env.jsonl"));
  EXPECT_THROW(load_dataset(dir / "missing.jsonl"), DataError);
  fs::remove_all(dir);
}

TEST(Validate, Counts) {
  const ValidationReport r = validate(tiny());
  EXPECT_EQ(r.num_scenes, 3u);
  EXPECT_EQ(r.num_instances, 6u);
  EXPECT_EQ(r.num_identities, 3u);
  EXPECT_EQ(r.singleton_scenes, 1u);
  EXPECT_EQ(r.unlabeled_instances, 1u);
  EXPECT_EQ(r.positive_pairs, 2u);
  EXPECT_EQ(r.cross_camera_positive_pairs, 2u);
  EXPECT_EQ(r.graph_trainable_pairs, 2u);
  EXPECT_TRUE(r.warnings.empty());
}

TEST(Validate, SingletonScenesWarn) {
  Rng rng(2);
  std::vector<Scene> scenes;
  for (int i = 0; i < 4; ++i) scenes.push_back(testing::make_scene("s" + std::to_string(i), {i % 2}, 3, rng));
  const ValidationReport r = validate(Dataset(3, std::move(scenes)));
  EXPECT_EQ(r.singleton_scenes, 4u);
  EXPECT_EQ(r.positive_pairs, 2u);
  EXPECT_EQ(r.graph_trainable_pairs, 0u);
  ASSERT_EQ(r.warnings.size(), 1u);
  EXPECT_NE(r.warnings[0].find("zero graph-trainable pairs"), std::string::npos);
}

#ifdef CTXRR_EXAMPLE_DATASET
TEST(DatasetIo, DocumentedExampleLoads) {
  const fs::path path = CTXRR_EXAMPLE_DATASET;
  const Dataset ds = load_dataset(path);
  EXPECT_EQ(ds.dim, 2u);
  const ValidationReport r = validate(ds);
  EXPECT_EQ(r.num_scenes, 4u);
  EXPECT_EQ(r.num_instances, 12u);
  EXPECT_EQ(r.positive_pairs, 4u);
  const Instance* first = ds.find_instance("c0_s000_p0");
  ASSERT_NE(first, nullptr);
  const auto whole = first->embedding.part(Part::whole);
  EXPECT_EQ(whole[0], 0.9442568601526694);
  EXPECT_EQ(whole[1], 0.32920963238432466);
  std::ifstream in(path, std::ios::binary);
  const std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  EXPECT_EQ(dataset_to_string(ds), text);
}
#endif

}  // namespace
}  // namespace ctxrr
