#include "marn/features.hpp"

#include "marn/binary_io.hpp"
#include "marn/error.hpp"

namespace marn {

void VideoFeatures::validate() const {
  if (frames.rank() != 2 || clips.rank() != 2)
    throw DataError("video " + id + ": features must be matrices, got " + shape_string(frames.shape()) + " and " +
                    shape_string(clips.shape()));
  if (frames.rows() < 1 || clips.rows() < 1) throw DataError("video " + id + ": needs at least one frame and clip");
  if (!frames.all_finite() || !clips.all_finite()) throw DataError("video " + id + ": non-finite feature value");
}

namespace features {

namespace {
constexpr std::string_view kMagic = "MARN";
}

std::vector<char> serialize(const VideoFeatures& video) {
  video.validate();
  io::ByteWriter w;
  w.bytes(kMagic);
  w.u32(kVersion);
  w.string(video.id);
  w.i32(video.category ? *video.category : -1);
  w.u32(static_cast<std::uint32_t>(video.frame_dim()));
  w.u32(static_cast<std::uint32_t>(video.frame_count()));
  w.u32(static_cast<std::uint32_t>(video.clip_dim()));
  w.u32(static_cast<std::uint32_t>(video.clip_count()));
  w.f32_run(video.frames.data());
  w.f32_run(video.clips.data());
  return w.buffer();
}

VideoFeatures deserialize(std::span<const char> bytes, const std::string& source) {
  io::ByteReader r(bytes, source);
  if (bytes.size() < kMagic.size() || r.bytes(kMagic.size(), "magic") != kMagic)
    throw FormatError(source + ": not a MARNF feature file (bad magic)");
  const auto version = r.u32("version");
  if (version != kVersion) throw FormatError(source + ": unsupported MARNF version " + std::to_string(version));
  VideoFeatures v;
  v.id = r.string("video id");
  const auto category = r.i32("category");
  if (category < -1) throw FormatError(source + ": invalid category " + std::to_string(category));
  if (category >= 0) v.category = category;
  const auto d = r.u32("d");
  const auto L = r.u32("L");
  const auto c = r.u32("c");
  const auto N = r.u32("N");
  if (d == 0 || c == 0) throw FormatError(source + ": feature dimensions must be positive");
  if (L == 0) throw FormatError(source + ": empty 2D feature section (L = 0)");
  if (N == 0) throw FormatError(source + ": empty 3D feature section (N = 0)");
  auto frames = r.f32_run(std::size_t{L} * d, "2D frame payload");
  auto clips = r.f32_run(std::size_t{N} * c, "3D clip payload");
  if (r.remaining() != 0) throw CorruptionError(source + ": trailing bytes after clip payload", r.offset());
  v.frames = Tensor(Shape{L, d}, std::move(frames));
  v.clips = Tensor(Shape{N, c}, std::move(clips));
  return v;
}

}  // namespace features

void save_features(const std::filesystem::path& path, const VideoFeatures& video) {
  io::write_file(path, features::serialize(video));
}

VideoFeatures load_features(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw DataError("missing feature file " + path.string());
  return features::deserialize(io::read_file(path), path.string());
}

}  // namespace marn
