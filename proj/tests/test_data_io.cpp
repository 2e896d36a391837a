#include <cstring>
#include <filesystem>
#include <random>
#include <set>

#include <unistd.h>

#include "doctest.h"
#include "marn/binary_io.hpp"
#include "marn/dataset.hpp"
#include "marn/error.hpp"
#include "marn/features.hpp"
#include "marn/synthetic.hpp"
#include "marn/vocabulary.hpp"

using namespace marn;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  fs::path p = fs::temp_directory_path() / ("marn_data_" + std::to_string(::getpid())) / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

VideoFeatures sample_video(std::size_t L = 4, std::size_t N = 2) {
  std::mt19937_64 rng(9);
  std::normal_distribution<double> g;
  VideoFeatures v;
  v.id = "clip_07";
  v.frames = Tensor(Shape{L, 5});
  v.clips = Tensor(Shape{N, 3});
  for (double& x : v.frames.data()) x = static_cast<float>(g(rng));
  for (double& x : v.clips.data()) x = static_cast<float>(g(rng));
  v.category = 2;
  return v;
}

}  // namespace

TEST_CASE("feature file round trip is bit-exact for binary32 values") {
  VideoFeatures v = sample_video();
  CHECK(features::deserialize(features::serialize(v), "mem") == v);
  v.category.reset();
  CHECK(features::deserialize(features::serialize(v), "mem") == v);
  fs::path dir = scratch("roundtrip");
  save_features(dir / "a.marnf", v);
  CHECK(load_features(dir / "a.marnf") == v);
}

TEST_CASE("feature file byte layout") {
  VideoFeatures v = sample_video(1, 1);
  std::vector<char> b = features::serialize(v);
  // magic 4, version 4, id 4+7, category 4, d L c N 16, payload (5 + 3) * 4
  CHECK(b.size() == 4 + 4 + 11 + 4 + 16 + 32);
  CHECK(std::string(b.data(), 4) == "MARN");
  io::ByteReader r(b, "mem");
  r.bytes(4, "magic");
  CHECK(r.u32("version") == 1);
  CHECK(r.string("id") == "clip_07");
  CHECK(r.i32("category") == 2);
  CHECK(r.u32("d") == 5);
  CHECK(r.u32("L") == 1);
  CHECK(r.u32("c") == 3);
  CHECK(r.u32("N") == 1);
  CHECK(r.f32("first") == static_cast<float>(v.frames[0]));
}

TEST_CASE("every truncation raises a corruption error at its offset") {
  std::vector<char> b = features::serialize(sample_video());
  for (std::size_t cut = 4; cut < b.size(); ++cut) {
    std::span<const char> part(b.data(), cut);
    try {
      features::deserialize(part, "cut");
      FAIL("truncated file accepted at " << cut);
    } catch (const CorruptionError& e) {
      CHECK(e.offset() <= cut);
    }
  }
  std::vector<char> extra = b;
  extra.push_back(0);
  CHECK_THROWS_AS(features::deserialize(extra, "extra"), CorruptionError);
}

TEST_CASE("feature format violations") {
  std::vector<char> b = features::serialize(sample_video());
  std::vector<char> bad = b;
  bad[0] = 'X';
  CHECK_THROWS_AS(features::deserialize(bad, "magic"), FormatError);
  bad = b;
  bad[4] = 7;
  CHECK_THROWS_AS(features::deserialize(bad, "version"), FormatError);

  io::ByteWriter w;
  w.bytes("MARN");
  w.u32(1);
  w.string("v");
  w.i32(-1);
  w.u32(2);
  w.u32(0);  // L
  w.u32(2);
  w.u32(1);
  w.f32_run(std::vector<double>{1, 2});
  CHECK_THROWS_AS(features::deserialize(w.buffer(), "empty"), FormatError);

  CHECK_THROWS_WITH_AS(load_features("/nonexistent/v.marnf"), doctest::Contains("/nonexistent/v.marnf"), DataError);
}

TEST_CASE("tokenizer") {
  CHECK(tokenize("A Dog, running!  fast") == std::vector<std::string>{"a", "dog", "running", "fast"});
  CHECK(tokenize("   ").empty());
  CHECK(tokenize("man's hat") == std::vector<std::string>{"man", "s", "hat"});
}

TEST_CASE("vocabulary build is order-independent and frequency sorted") {
  std::vector<std::vector<std::string>> corpus{{"b", "a", "c"}, {"a", "b"}, {"a", "d", "d"}};
  Vocabulary v = Vocabulary::build(corpus, 1);
  CHECK(v.tokens() == std::vector<std::string>{"<pad>", "<bos>", "<eos>", "<unk>", "a", "b", "d", "c"});
  std::vector<std::vector<std::string>> reversed(corpus.rbegin(), corpus.rend());
  CHECK(Vocabulary::build(reversed, 1) == v);
  Vocabulary v2 = Vocabulary::build(corpus, 2);
  CHECK(v2.size() == 4 + 3);
  CHECK_FALSE(v2.find("c"));
  CHECK(v2.id_or_unk("c") == Vocabulary::kUnk);
  CHECK_THROWS_AS(Vocabulary::build(corpus, 0), ConfigError);
}

TEST_CASE("caption encoding") {
  Vocabulary v = Vocabulary::build({{"a", "dog"}}, 1);
  auto ids = encode_caption({"a", "cat", "dog"}, v);
  CHECK(ids.front() == Vocabulary::kBos);
  CHECK(ids.back() == Vocabulary::kEos);
  CHECK(ids[2] == Vocabulary::kUnk);
  CHECK(decode_tokens({1, *v.find("a"), *v.find("dog"), 2}, v) == std::vector<std::string>{"a", "dog"});
  CHECK_THROWS_AS(decode_tokens({1, 99}, v), DataError);
}

TEST_CASE("vocabulary file round trip") {
  fs::path dir = scratch("vocab");
  Vocabulary v = Vocabulary::build({{"x", "y", "y"}}, 1);
  v.save(dir / "vocab.txt");
  CHECK(Vocabulary::load(dir / "vocab.txt") == v);
  CHECK_THROWS_AS(Vocabulary::from_tokens({"<bos>", "<pad>", "<eos>", "<unk>", "a"}), FormatError);
}

TEST_CASE("manifest validation") {
  DatasetManifest m;
  m.videos = {{"v1", "v1.marnf", Split::train}, {"v1", "v2.marnf", Split::val}};
  CHECK_THROWS_AS(m.validate(), DataError);
  m.videos[1].id = "v2";
  m.captions = {{"v3", "a dog"}};
  CHECK_THROWS_WITH_AS(m.validate(), doctest::Contains("v3"), DataError);
  m.captions = {{"v2", "a dog"}};
  CHECK_NOTHROW(m.validate());
  CHECK(parse_split("val") == Split::val);
  CHECK_THROWS_AS(parse_split("dev"), DataError);
}

TEST_CASE("dataset load reports the missing feature file") {
  fs::path dir = scratch("missing");
  SyntheticConfig cfg;
  SyntheticDataset s = generate_synthetic_dataset(cfg);
  write_synthetic_dataset(s, dir);
  CHECK(Dataset::load(dir / "manifest.json").videos.size() == cfg.n_videos);
  fs::remove(dir / "features" / "vid0004.marnf");
  CHECK_THROWS_WITH_AS(Dataset::load(dir / "manifest.json"), doctest::Contains("vid0004.marnf"), DataError);
}

TEST_CASE("manifest round trip") {
  fs::path dir = scratch("manifest");
  SyntheticDataset s = generate_synthetic_dataset(SyntheticConfig{});
  save_manifest(dir / "manifest.json", s.manifest);
  DatasetManifest back = load_manifest(dir / "manifest.json");
  CHECK(manifest_json(back) == manifest_json(s.manifest));
}

TEST_CASE("synthetic generator is deterministic and covers each concept twice") {
  SyntheticConfig cfg;
  SyntheticDataset a = generate_synthetic_dataset(cfg), b = generate_synthetic_dataset(cfg);
  CHECK(a.videos == b.videos);
  CHECK(manifest_json(a.manifest) == manifest_json(b.manifest));
  cfg.seed = 2;
  CHECK_FALSE(generate_synthetic_dataset(cfg).videos == a.videos);

  std::vector<std::set<std::size_t>> protos(cfg.n_concepts);
  for (const auto& segs : a.segments)
    for (const auto& s : segs) protos[s.concept_id].insert(s.prototype);
  for (const auto& p : protos) CHECK(p.size() >= 2);

  for (std::size_t v = 0; v < a.videos.size(); ++v) {
    const auto& segs = a.segments[v];
    std::string expect;
    for (std::size_t i = 0; i < segs.size(); ++i) expect += (i ? " then a " : "a ") + a.concept_words[segs[i].concept_id];
    CHECK(a.manifest.captions[v].text == expect);
    CHECK(a.videos[v].frame_count() == cfg.segments_per_video * cfg.frames_per_segment);
  }
  SyntheticConfig bad;
  bad.n_videos = 5;
  CHECK_THROWS_AS(generate_synthetic_dataset(bad), ConfigError);
}
