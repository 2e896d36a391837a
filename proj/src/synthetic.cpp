#include "marn/synthetic.hpp"

#include <algorithm>
#include <array>
#include <cstdio>
#include <numeric>
#include <random>

#include "marn/error.hpp"

namespace marn {

namespace {

constexpr std::array<const char*, 32> kNouns = {
    "dog",    "cat",   "car",    "man",   "woman", "ball",  "bird",   "horse", "train",  "guitar", "boat",
    "tree",   "child", "phone",  "bike",  "fish",  "piano", "camera", "table", "flower", "truck",  "plane",
    "monkey", "chef",  "dancer", "robot", "wave",  "road",  "kitten", "crowd", "stage",  "window"};

std::vector<double> gaussian_vector(std::size_t n, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> v(n);
  for (double& x : v) x = normal(rng);
  return v;
}

std::string video_id(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "vid%04zu", index);
  return buf;
}

}  // namespace

std::string concept_word(std::size_t concept_id) {
  if (concept_id < kNouns.size()) return kNouns[concept_id];
  return "thing" + std::to_string(concept_id);
}

SyntheticDataset generate_synthetic_dataset(const SyntheticConfig& cfg) {
  if (cfg.n_concepts < 4) throw ConfigError("synthetic data needs at least 4 concepts");
  if (cfg.prototypes_per_concept < 2) throw ConfigError("each concept needs at least 2 prototypes");
  if (cfg.n_videos < cfg.n_concepts)
    throw ConfigError("synthetic data needs n_videos >= n_concepts (" + std::to_string(cfg.n_videos) + " < " +
                      std::to_string(cfg.n_concepts) + ")");
  if (cfg.segments_per_video < 2) throw ConfigError("synthetic videos need at least 2 segments");
  if (cfg.frames_per_segment < 1 || cfg.clips_per_segment < 1) throw ConfigError("segments need frames and clips");
  if (cfg.frame_dim < 1 || cfg.clip_dim < 1) throw ConfigError("feature dimensions must be positive");
  if (cfg.noise_sigma < 0.0) throw ConfigError("noise_sigma must be non-negative");
  if (cfg.temporal_drift < 0.0) throw ConfigError("temporal_drift must be non-negative");
  if (cfg.val_videos + cfg.test_videos >= cfg.n_videos) throw ConfigError("val + test split leaves no training videos");

  std::mt19937_64 rng(cfg.seed);
  SyntheticDataset out;
  for (std::size_t k = 0; k < cfg.n_concepts; ++k) out.concept_words.push_back(concept_word(k));

  out.prototypes2d.resize(cfg.n_concepts);
  out.prototypes3d.resize(cfg.n_concepts);
  for (std::size_t k = 0; k < cfg.n_concepts; ++k)
    for (std::size_t p = 0; p < cfg.prototypes_per_concept; ++p) {
      out.prototypes2d[k].push_back(gaussian_vector(cfg.frame_dim, rng));
      out.prototypes3d[k].push_back(gaussian_vector(cfg.clip_dim, rng));
    }

  const std::vector<double> drift2d = gaussian_vector(cfg.frame_dim, rng);
  const std::vector<double> drift3d = gaussian_vector(cfg.clip_dim, rng);
  auto drift_at = [&](std::size_t i, std::size_t n) {
    return n < 2 ? 0.0 : cfg.temporal_drift * (2.0 * static_cast<double>(i) / static_cast<double>(n - 1) - 1.0);
  };

  // Segment layout.
  std::uniform_int_distribution<std::size_t> pick_concept(0, cfg.n_concepts - 1);
  std::uniform_int_distribution<std::size_t> pick_proto(0, cfg.prototypes_per_concept - 1);
  for (std::size_t v = 0; v < cfg.n_videos; ++v) {
    std::vector<SegmentTruth> segs;
    segs.push_back({v % cfg.n_concepts, (v / cfg.n_concepts) % cfg.prototypes_per_concept});
    for (std::size_t s = 1; s < cfg.segments_per_video; ++s) {
      if (s == 1 && v < cfg.n_concepts) {
        segs.push_back({(v + 1) % cfg.n_concepts, 1});
        continue;
      }
      std::size_t concept_id = pick_concept(rng);
      while (concept_id == segs.back().concept_id) concept_id = pick_concept(rng);
      segs.push_back({concept_id, pick_proto(rng)});
    }
    out.segments.push_back(std::move(segs));
  }

  // Split assignment from a seeded permutation.
  std::vector<std::size_t> order(cfg.n_videos);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<Split> split(cfg.n_videos, Split::train);
  for (std::size_t i = 0; i < cfg.val_videos; ++i) split[order[i]] = Split::val;
  for (std::size_t i = 0; i < cfg.test_videos; ++i) split[order[cfg.val_videos + i]] = Split::test;

  std::normal_distribution<double> noise(0.0, 1.0);
  out.manifest.num_categories = cfg.n_concepts;
  for (std::size_t v = 0; v < cfg.n_videos; ++v) {
    const auto& segs = out.segments[v];
    const std::size_t L = segs.size() * cfg.frames_per_segment;
    const std::size_t N = segs.size() * cfg.clips_per_segment;
    VideoFeatures video;
    video.id = video_id(v);
    video.frames = Tensor(Shape{L, cfg.frame_dim});
    video.clips = Tensor(Shape{N, cfg.clip_dim});
    for (std::size_t s = 0; s < segs.size(); ++s) {
      const auto& p2 = out.prototypes2d[segs[s].concept_id][segs[s].prototype];
      const auto& p3 = out.prototypes3d[segs[s].concept_id][segs[s].prototype];
      for (std::size_t f = 0; f < cfg.frames_per_segment; ++f) {
        const std::size_t l = s * cfg.frames_per_segment + f;
        auto row = video.frames.row(l);
        const double a = drift_at(l, L);
        for (std::size_t j = 0; j < cfg.frame_dim; ++j)
          row[j] = p2[j] + a * drift2d[j] + (cfg.noise_sigma == 0.0 ? 0.0 : cfg.noise_sigma * noise(rng));
      }
      for (std::size_t f = 0; f < cfg.clips_per_segment; ++f) {
        const std::size_t n = s * cfg.clips_per_segment + f;
        auto row = video.clips.row(n);
        const double a = drift_at(n, N);
        for (std::size_t j = 0; j < cfg.clip_dim; ++j)
          row[j] = p3[j] + a * drift3d[j] + (cfg.noise_sigma == 0.0 ? 0.0 : cfg.noise_sigma * noise(rng));
      }
    }
    // Dominant concept: most segments, earliest on ties (segments are equal length).
    std::vector<std::size_t> counts(cfg.n_concepts, 0);
    for (const auto& s : segs) ++counts[s.concept_id];
    std::size_t dominant = segs.front().concept_id;
    for (const auto& s : segs)
      if (counts[s.concept_id] > counts[dominant]) dominant = s.concept_id;
    video.category = static_cast<int>(dominant);

    std::string caption;
    for (std::size_t s = 0; s < segs.size(); ++s) {
      if (s) caption += " then ";
      caption += "a " + out.concept_words[segs[s].concept_id];
    }
    out.manifest.videos.push_back(VideoEntry{video.id, "features/" + video.id + ".marnf", split[v]});
    out.manifest.captions.push_back(CaptionEntry{video.id, caption});
    out.videos.push_back(std::move(video));
  }
  return out;
}

void write_synthetic_dataset(const SyntheticDataset& data, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir / "features");
  for (std::size_t i = 0; i < data.videos.size(); ++i)
    save_features(dir / data.manifest.videos[i].features, data.videos[i]);
  save_manifest(dir / "manifest.json", data.manifest);
}

Dataset to_dataset(const SyntheticDataset& data) {
  Dataset out;
  out.manifest = data.manifest;
  for (const VideoFeatures& v : data.videos) out.videos.emplace(v.id, v);
  out.manifest.validate();
  return out;
}

}  // namespace marn
