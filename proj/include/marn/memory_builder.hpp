#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "marn/basis_decoder.hpp"
#include "marn/dataset.hpp"
#include "marn/tensor.hpp"

namespace marn {

// Attention rows of the teacher-forced step at which `word` was the target.
struct AttentionRecord {
  TokenId word = 0;
  std::string video_id;
  Tensor weights2d;  // L
  Tensor weights3d;  // N
};

// One teacher-forced pass per training caption; one record per predicted
// token. <pad> and <bos> never produce records.
std::vector<AttentionRecord> collect_attention_records(const BasisModel& model, const Dataset& data,
                                                       const Vocabulary& vocab, Split split = Split::train);

// Projected features of one video: rows f'_l (L x m) and v'_n (N x m).
struct ProjectedVideo {
  Tensor frames;
  Tensor clips;
};

ProjectedVideo project_video(const BasisModel& model, const VideoFeatures& video);

using ProjectedLookup = std::map<std::string, ProjectedVideo>;

// Visual context g_r of one word. For every occurrence, the k largest 2D
// weights (and separately the k largest 3D weights) select frames/clips;
// each stream is the weight-normalized sum of its selections across all
// occurrences and g_r is the sum of the two streams. No records gives zeros.
// k above L or N is cut to the available count with a warning.
Tensor build_visual_context(std::span<const AttentionRecord> records, const ProjectedLookup& projected,
                            std::size_t k, std::size_t proj_dim);

// Occurrence-weighted category histogram of the videos the word appears in,
// normalized to sum to 1. Empty tensor when category_count is 0; zeros when
// no record carries a category.
Tensor build_auxiliary(std::span<const AttentionRecord> records, const Dataset& data, std::size_t category_count);

struct MemoryEntry {
  TokenId word = 0;
  std::uint32_t occurrences = 0;
  Tensor g;  // m
  Tensor e;  // d'
  Tensor u;  // U, empty when U = 0

  friend bool operator==(const MemoryEntry&, const MemoryEntry&) = default;
};

// One entry per vocabulary word, indexed by token id.
struct MemoryBank {
  std::size_t k = 3;
  std::size_t proj_dim = 0;      // m
  std::size_t embed_dim = 0;     // d'
  std::size_t category_dim = 0;  // U
  std::vector<MemoryEntry> entries;
  std::uint64_t basis_digest = 0;

  std::size_t size() const noexcept { return entries.size(); }
  // K x m, K x d', K x U stacks of g, e, u.
  Tensor g_matrix() const;
  Tensor e_matrix() const;
  Tensor u_matrix() const;

  friend bool operator==(const MemoryBank&, const MemoryBank&) = default;
};

MemoryBank assemble_memory(const BasisModel& model, const Dataset& data, const Vocabulary& vocab, std::size_t k,
                           Split split = Split::train);

// MARNM layout (little-endian): "MARNM", version u32, K, m, d', U, k (u32
// each), then per word occurrence_count u32 and the g, e, u binary32 runs,
// then the u64 digest of the basis checkpoint the memory came from.
namespace memory_file {

inline constexpr std::uint32_t kVersion = 1;

std::vector<char> serialize(const MemoryBank& bank);
MemoryBank deserialize(std::span<const char> bytes, const std::string& source);
void save(const std::filesystem::path& path, const MemoryBank& bank);
MemoryBank load(const std::filesystem::path& path);

}  // namespace memory_file
}  // namespace marn
