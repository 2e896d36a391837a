#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "marn/tensor.hpp"

namespace marn {

// Precomputed visual features of one video: L frame vectors (2D stream,
// dimension d) and N clip vectors (3D stream, dimension c).
struct VideoFeatures {
  std::string id;
  Tensor frames;  // L x d
  Tensor clips;   // N x c
  std::optional<int> category;

  std::size_t frame_count() const { return frames.rows(); }
  std::size_t clip_count() const { return clips.rows(); }
  std::size_t frame_dim() const { return frames.cols(); }
  std::size_t clip_dim() const { return clips.cols(); }

  // Throws DataError when L, N < 1, the arrays are not matrices, or a value is non-finite.
  void validate() const;

  friend bool operator==(const VideoFeatures&, const VideoFeatures&) = default;
};

// MARNF layout (little-endian): "MARN", version u32 = 1, id (u32 length +
// UTF-8), category i32 (-1 when absent), d u32, L u32, c u32, N u32, L*d
// binary32 frame values, N*c binary32 clip values.
namespace features {

inline constexpr std::uint32_t kVersion = 1;

std::vector<char> serialize(const VideoFeatures& video);
VideoFeatures deserialize(std::span<const char> bytes, const std::string& source);

}  // namespace features

void save_features(const std::filesystem::path& path, const VideoFeatures& video);
VideoFeatures load_features(const std::filesystem::path& path);

}  // namespace marn
