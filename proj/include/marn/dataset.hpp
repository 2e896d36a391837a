#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "marn/features.hpp"
#include "marn/vocabulary.hpp"

namespace marn {

enum class Split { train, val, test };

std::string to_string(Split split);
Split parse_split(const std::string& name);

struct VideoEntry {
  std::string id;
  std::string features;  // path, relative to the manifest directory unless absolute
  Split split = Split::train;
};

struct CaptionEntry {
  std::string video_id;
  std::string text;
};

// Tokenized training target: <bos> ... <eos>.
struct CaptionSample {
  std::string video_id;
  std::vector<TokenId> token_ids;
};

// Videos, raw reference captions and the split assignment.
struct DatasetManifest {
  std::vector<VideoEntry> videos;
  std::vector<CaptionEntry> captions;
  std::optional<std::size_t> num_categories;
  std::filesystem::path base_dir;

  // Unique ids, every caption resolvable, every video in exactly one split.
  void validate() const;
  const VideoEntry* find(const std::string& id) const;
  std::vector<std::string> video_ids(Split split) const;
  std::filesystem::path feature_path(const VideoEntry& entry) const;

  // Tokenized captions of the videos in a split, in manifest order.
  std::vector<std::vector<std::string>> tokenized_captions(Split split) const;
  std::vector<CaptionSample> samples(Split split, const Vocabulary& vocab) const;
  // Tokenized references per video id, for metric computation.
  std::map<std::string, std::vector<std::vector<std::string>>> references(Split split) const;
};

// UTF-8 JSON: {"version":1,"num_categories":n?,"videos":[{"id","features","split"}],
//              "captions":[{"video_id","caption"}]}
DatasetManifest load_manifest(const std::filesystem::path& path);
void save_manifest(const std::filesystem::path& path, const DatasetManifest& manifest);
std::string manifest_json(const DatasetManifest& manifest);

// Manifest plus every referenced feature file, held in memory.
struct Dataset {
  DatasetManifest manifest;
  std::map<std::string, VideoFeatures> videos;

  static Dataset load(const std::filesystem::path& manifest_path);
  const VideoFeatures& video(const std::string& id) const;
  std::size_t frame_dim() const;
  std::size_t clip_dim() const;
  // Category count: explicit in the manifest, else 1 + the largest category id, else 0.
  std::size_t category_count() const;
};

}  // namespace marn
