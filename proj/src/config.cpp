#include "marn/config.hpp"

#include <algorithm>
#include <sstream>

#include "json.hpp"
#include "marn/binary_io.hpp"
#include "marn/error.hpp"

namespace marn {

using json = nlohmann::ordered_json;

namespace {

json train_json(const TrainConfig& t) {
  return json{{"epochs", t.epochs},         {"base_lr", t.base_lr},       {"lr_decay", t.lr_decay},
              {"decay_every", t.decay_every}, {"clip", {t.clip.lo, t.clip.hi}}, {"beta", t.beta},
              {"batch_size", t.batch_size},   {"eval_every", t.eval_every}};
}

// Reads only known keys; anything else is a configuration error.
class Reader {
 public:
  Reader(const json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) throw ConfigError(where_ + " must be an object");
  }

  template <typename T>
  void get(const char* key, T& out) {
    seen_.push_back(key);
    if (!j_.contains(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(where_ + "." + key + ": " + e.what());
    }
  }

  const json* child(const char* key) {
    seen_.push_back(key);
    return j_.contains(key) ? &j_.at(key) : nullptr;
  }

  void finish() const {
    for (const auto& [key, value] : j_.items())
      if (std::find(seen_.begin(), seen_.end(), key) == seen_.end())
        throw ConfigError("unknown configuration key " + where_ + "." + key);
  }

 private:
  const json& j_;
  std::string where_;
  std::vector<std::string> seen_;
};

void read_train(const json& j, const std::string& where, TrainConfig& t) {
  Reader r(j, where);
  r.get("epochs", t.epochs);
  r.get("base_lr", t.base_lr);
  r.get("lr_decay", t.lr_decay);
  r.get("decay_every", t.decay_every);
  std::vector<double> clip{t.clip.lo, t.clip.hi};
  r.get("clip", clip);
  if (clip.size() != 2) throw ConfigError(where + ".clip must hold two numbers");
  t.clip = ClipRange{clip[0], clip[1]};
  r.get("beta", t.beta);
  r.get("batch_size", t.batch_size);
  r.get("eval_every", t.eval_every);
  r.finish();
}

}  // namespace

void RunConfig::resolve() {
  synth.seed = seed;
  basis_train.seed = seed;
  memory_train.seed = seed;
  basis_train.max_len = max_len;
  memory_train.max_len = max_len;
}

void RunConfig::validate() const {
  if (dims.proj_dim == 0 || dims.hidden_dim == 0 || dims.attn_dim == 0 || dims.embed_dim == 0 ||
      memdec_attn_dim == 0)
    throw ConfigError("model dimensions must be positive");
  basis_train.validate();
  memory_train.validate();
  if (k == 0) throw ConfigError("k must be positive");
  if (lambda && !(*lambda >= 0.0 && *lambda <= 1.0)) throw ConfigError("lambda must lie in [0, 1]");
  if (beam_width == 0) throw ConfigError("beam width must be positive");
  if (max_len < 2) throw ConfigError("max_len must be at least 2");
}

std::string RunConfig::to_json() const {
  json j;
  j["seed"] = seed;
  j["data"] = {{"manifest", manifest}, {"min_count", min_count}};
  j["model"] = {{"proj_dim", dims.proj_dim},
                {"hidden_dim", dims.hidden_dim},
                {"attn_dim", dims.attn_dim},
                {"embed_dim", dims.embed_dim},
                {"memdec_attn_dim", memdec_attn_dim}};
  j["train"] = train_json(basis_train);
  j["memory_train"] = train_json(memory_train);
  j["memory"] = {{"k", k}};
  j["fusion"] = {{"lambda", lambda ? json(*lambda) : json()}};
  j["decode"] = {{"beam", beam_width}, {"max_len", max_len}};
  j["synth"] = {{"n_videos", synth.n_videos},
                {"n_concepts", synth.n_concepts},
                {"frame_dim", synth.frame_dim},
                {"clip_dim", synth.clip_dim},
                {"noise_sigma", synth.noise_sigma},
                {"temporal_drift", synth.temporal_drift},
                {"prototypes_per_concept", synth.prototypes_per_concept},
                {"segments_per_video", synth.segments_per_video},
                {"frames_per_segment", synth.frames_per_segment},
                {"clips_per_segment", synth.clips_per_segment},
                {"val_videos", synth.val_videos},
                {"test_videos", synth.test_videos}};
  return j.dump(2) + "\n";
}

RunConfig RunConfig::from_json(const std::string& text, const std::string& source) {
  json j;
  try {
    j = json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(source + ": " + e.what());
  }
  RunConfig c;
  Reader top(j, "config");
  top.get("seed", c.seed);
  if (const json* d = top.child("data")) {
    Reader r(*d, "data");
    r.get("manifest", c.manifest);
    r.get("min_count", c.min_count);
    r.finish();
  }
  if (const json* m = top.child("model")) {
    Reader r(*m, "model");
    r.get("proj_dim", c.dims.proj_dim);
    r.get("hidden_dim", c.dims.hidden_dim);
    r.get("attn_dim", c.dims.attn_dim);
    r.get("embed_dim", c.dims.embed_dim);
    r.get("memdec_attn_dim", c.memdec_attn_dim);
    r.finish();
  }
  if (const json* t = top.child("train")) read_train(*t, "train", c.basis_train);
  if (const json* t = top.child("memory_train")) read_train(*t, "memory_train", c.memory_train);
  if (const json* m = top.child("memory")) {
    Reader r(*m, "memory");
    r.get("k", c.k);
    r.finish();
  }
  if (const json* f = top.child("fusion")) {
    Reader r(*f, "fusion");
    if (const json* l = r.child("lambda"); l && !l->is_null()) {
      if (!l->is_number()) throw ConfigError("fusion.lambda must be a number or null");
      c.lambda = l->get<double>();
    }
    r.finish();
  }
  if (const json* d = top.child("decode")) {
    Reader r(*d, "decode");
    r.get("beam", c.beam_width);
    r.get("max_len", c.max_len);
    r.finish();
  }
  if (const json* s = top.child("synth")) {
    Reader r(*s, "synth");
    r.get("n_videos", c.synth.n_videos);
    r.get("n_concepts", c.synth.n_concepts);
    r.get("frame_dim", c.synth.frame_dim);
    r.get("clip_dim", c.synth.clip_dim);
    r.get("noise_sigma", c.synth.noise_sigma);
    r.get("temporal_drift", c.synth.temporal_drift);
    r.get("prototypes_per_concept", c.synth.prototypes_per_concept);
    r.get("segments_per_video", c.synth.segments_per_video);
    r.get("frames_per_segment", c.synth.frames_per_segment);
    r.get("clips_per_segment", c.synth.clips_per_segment);
    r.get("val_videos", c.synth.val_videos);
    r.get("test_videos", c.synth.test_videos);
    r.finish();
  }
  top.finish();
  return c;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
  return from_json(io::read_text(path), path.string());
}

void parse_dims(const std::string& spec, ModelDims& dims) {
  std::stringstream ss(spec);
  std::vector<std::size_t> values;
  std::string part;
  while (std::getline(ss, part, ',')) {
    std::size_t used = 0;
    unsigned long v = 0;
    try {
      v = std::stoul(part, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != part.size() || v == 0) throw ConfigError("--dims expects m,H,A,d' positive integers");
    values.push_back(v);
  }
  if (values.size() != 4) throw ConfigError("--dims expects exactly four values m,H,A,d'");
  dims.proj_dim = values[0];
  dims.hidden_dim = values[1];
  dims.attn_dim = values[2];
  dims.embed_dim = values[3];
}

}  // namespace marn
