#include "marn/dataset.hpp"

#include <set>

#include "json.hpp"

#include "marn/binary_io.hpp"
#include "marn/error.hpp"

namespace marn {

using nlohmann::json;

std::string to_string(Split split) {
  switch (split) {
    case Split::train:
      return "train";
    case Split::val:
      return "val";
    case Split::test:
      return "test";
  }
  return "?";
}

Split parse_split(const std::string& name) {
  if (name == "train") return Split::train;
  if (name == "val") return Split::val;
  if (name == "test") return Split::test;
  throw DataError("unknown split '" + name + "'");
}

void DatasetManifest::validate() const {
  std::set<std::string> ids;
  for (const auto& v : videos) {
    if (v.id.empty()) throw DataError("manifest: video with empty id");
    if (!ids.insert(v.id).second) throw DataError("manifest: duplicate video id " + v.id);
  }
  for (const auto& c : captions)
    if (!ids.count(c.video_id)) throw DataError("manifest: caption references unknown video " + c.video_id);
}

const VideoEntry* DatasetManifest::find(const std::string& id) const {
  for (const auto& v : videos)
    if (v.id == id) return &v;
  return nullptr;
}

std::vector<std::string> DatasetManifest::video_ids(Split split) const {
  std::vector<std::string> out;
  for (const auto& v : videos)
    if (v.split == split) out.push_back(v.id);
  return out;
}

std::filesystem::path DatasetManifest::feature_path(const VideoEntry& entry) const {
  std::filesystem::path p(entry.features);
  return p.is_absolute() ? p : base_dir / p;
}

std::vector<std::vector<std::string>> DatasetManifest::tokenized_captions(Split split) const {
  std::vector<std::vector<std::string>> out;
  for (const auto& c : captions) {
    const VideoEntry* v = find(c.video_id);
    if (!v) throw DataError("caption references unknown video " + c.video_id);
    if (v->split == split) out.push_back(tokenize(c.text));
  }
  return out;
}

std::vector<CaptionSample> DatasetManifest::samples(Split split, const Vocabulary& vocab) const {
  std::vector<CaptionSample> out;
  for (const auto& c : captions) {
    const VideoEntry* v = find(c.video_id);
    if (!v) throw DataError("caption references unknown video " + c.video_id);
    if (v->split != split) continue;
    auto words = tokenize(c.text);
    if (words.empty()) continue;
    out.push_back(CaptionSample{c.video_id, encode_caption(words, vocab)});
  }
  return out;
}

std::map<std::string, std::vector<std::vector<std::string>>> DatasetManifest::references(Split split) const {
  std::map<std::string, std::vector<std::vector<std::string>>> out;
  for (const auto& c : captions) {
    const VideoEntry* v = find(c.video_id);
    if (!v) throw DataError("caption references unknown video " + c.video_id);
    if (v->split == split) out[c.video_id].push_back(tokenize(c.text));
  }
  return out;
}

std::string manifest_json(const DatasetManifest& manifest) {
  json j;
  j["version"] = 1;
  if (manifest.num_categories) j["num_categories"] = *manifest.num_categories;
  j["videos"] = json::array();
  for (const auto& v : manifest.videos)
    j["videos"].push_back(json{{"id", v.id}, {"features", v.features}, {"split", to_string(v.split)}});
  j["captions"] = json::array();
  for (const auto& c : manifest.captions)
    j["captions"].push_back(json{{"video_id", c.video_id}, {"caption", c.text}});
  return j.dump(2) + "\n";
}

void save_manifest(const std::filesystem::path& path, const DatasetManifest& manifest) {
  io::write_text(path, manifest_json(manifest));
}

DatasetManifest load_manifest(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw DataError("missing manifest " + path.string());
  DatasetManifest m;
  m.base_dir = path.parent_path();
  try {
    const json j = json::parse(io::read_text(path));
    if (j.contains("num_categories")) m.num_categories = j.at("num_categories").get<std::size_t>();
    for (const auto& v : j.at("videos"))
      m.videos.push_back(VideoEntry{v.at("id").get<std::string>(), v.at("features").get<std::string>(),
                                    parse_split(v.at("split").get<std::string>())});
    for (const auto& c : j.at("captions"))
      m.captions.push_back(CaptionEntry{c.at("video_id").get<std::string>(), c.at("caption").get<std::string>()});
  } catch (const json::exception& e) {
    throw FormatError(path.string() + ": malformed manifest: " + e.what());
  }
  m.validate();
  return m;
}

Dataset Dataset::load(const std::filesystem::path& manifest_path) {
  Dataset ds;
  ds.manifest = load_manifest(manifest_path);
  for (const auto& entry : ds.manifest.videos) {
    VideoFeatures v = load_features(ds.manifest.feature_path(entry));
    if (v.id != entry.id)
      throw DataError("feature file " + ds.manifest.feature_path(entry).string() + " holds video '" + v.id +
                      "', manifest expects '" + entry.id + "'");
    ds.videos.emplace(entry.id, std::move(v));
  }
  const std::size_t d = ds.frame_dim(), c = ds.clip_dim();
  for (const auto& [id, v] : ds.videos)
    if (v.frame_dim() != d || v.clip_dim() != c)
      throw DataError("video " + id + " has feature dimensions inconsistent with the rest of the dataset");
  return ds;
}

const VideoFeatures& Dataset::video(const std::string& id) const {
  auto it = videos.find(id);
  if (it == videos.end()) throw DataError("unresolved video reference " + id);
  return it->second;
}

std::size_t Dataset::frame_dim() const {
  if (videos.empty()) throw DataError("dataset has no videos");
  return videos.begin()->second.frame_dim();
}

std::size_t Dataset::clip_dim() const {
  if (videos.empty()) throw DataError("dataset has no videos");
  return videos.begin()->second.clip_dim();
}

std::size_t Dataset::category_count() const {
  if (manifest.num_categories) return *manifest.num_categories;
  int top = -1;
  for (const auto& [id, v] : videos)
    if (v.category) top = std::max(top, *v.category);
  return static_cast<std::size_t>(top + 1);
}

}  // namespace marn
