#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include "marn/basis_decoder.hpp"
#include "marn/synthetic.hpp"
#include "marn/training.hpp"

namespace marn {

// Every setting of a run. Loaded from JSON, then overridden by flags, then
// resolved (the top-level seed fans out to the generator and both trainers).
struct RunConfig {
  std::uint64_t seed = 1;
  std::string manifest;        // data.manifest
  std::size_t min_count = 1;   // data.min_count
  ModelDims dims;              // only m, H, A, d' are configured
  std::size_t memdec_attn_dim = 64;
  TrainConfig basis_train;
  TrainConfig memory_train;
  std::size_t k = 3;
  std::optional<double> lambda;  // unset: the validation-tuned value
  std::size_t beam_width = 1;
  std::size_t max_len = 20;
  SyntheticConfig synth;

  void resolve();
  void validate() const;
  std::string to_json() const;
  static RunConfig from_json(const std::string& text, const std::string& source);
  static RunConfig load(const std::filesystem::path& path);
};

// Parses "m,H,A,d'" into dims.
void parse_dims(const std::string& spec, ModelDims& dims);

}  // namespace marn
