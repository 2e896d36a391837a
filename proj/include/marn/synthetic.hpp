#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "marn/dataset.hpp"
#include "marn/features.hpp"

namespace marn {

// Parameters of the concept-segment generator that stands in for CNN feature extraction.
struct SyntheticConfig {
  std::uint64_t seed = 1;
  std::size_t n_videos = 30;
  std::size_t n_concepts = 10;
  std::size_t frame_dim = 16;  // d
  std::size_t clip_dim = 8;    // c
  double noise_sigma = 0.1;
  // Scale of a fixed direction added to frame and clip features, running
  // linearly from -1 (first) to +1 (last), so temporal order is observable.
  double temporal_drift = 1.0;
  std::size_t prototypes_per_concept = 2;
  std::size_t segments_per_video = 2;
  std::size_t frames_per_segment = 3;
  std::size_t clips_per_segment = 1;
  std::size_t val_videos = 3;
  std::size_t test_videos = 3;
};

struct SegmentTruth {
  std::size_t concept_id;
  std::size_t prototype;
};

struct SyntheticDataset {
  DatasetManifest manifest;
  std::vector<VideoFeatures> videos;                // manifest order
  std::vector<std::vector<SegmentTruth>> segments;  // per video, in temporal order
  std::vector<std::string> concept_words;
  // prototypes2d[concept][prototype] is a d-vector, prototypes3d likewise c-dim.
  std::vector<std::vector<std::vector<double>>> prototypes2d;
  std::vector<std::vector<std::vector<double>>> prototypes3d;
};

// Each video is a run of concept segments. Frames are the segment's 2D
// prototype plus the temporal drift plus N(0, sigma^2) noise, clips likewise
// from the 3D prototype, the caption names the concepts in order ("a dog then a car") and
// the category is the dominant concept. Every concept is rendered from
// several prototypes across the corpus, and the first two segments of the
// first n_concepts videos guarantee each concept word shows up under at
// least two different prototypes.
SyntheticDataset generate_synthetic_dataset(const SyntheticConfig& config);

// Writes manifest.json and features/<id>.marnf under dir.
void write_synthetic_dataset(const SyntheticDataset& data, const std::filesystem::path& dir);

// The same data as an in-memory Dataset, without touching the file system.
Dataset to_dataset(const SyntheticDataset& data);

std::string concept_word(std::size_t concept_id);

}  // namespace marn
