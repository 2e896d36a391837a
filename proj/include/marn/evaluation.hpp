#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "marn/dataset.hpp"
#include "marn/decoding.hpp"
#include "marn/metrics.hpp"

namespace marn {

struct VideoCaption {
  std::string video_id;
  std::vector<TokenId> tokens;  // as generated, from <bos>
  Sentence words;
  std::vector<Sentence> references;
};

struct EvalReport {
  std::string split;
  bool with_memory = false;
  double lambda = 0.0;
  std::size_t beam_width = 1;
  std::size_t max_len = 20;
  double bleu4 = 0.0;
  double rouge_l = 0.0;
  double cider = 0.0;
  std::vector<VideoCaption> videos;  // manifest order
  std::uint64_t basis_digest = 0;
  std::optional<std::uint64_t> memory_digest;
  std::optional<std::uint64_t> memdec_digest;

  std::string to_json() const;
  // One "id<TAB>caption" line per video.
  std::string to_tsv() const;
};

// Decodes every video of the split and scores the captions against the
// split's references. With a memory decoder the bank must come from `basis`
// (digest check, DataError otherwise).
EvalReport evaluate_corpus(const Dataset& data, const Vocabulary& vocab, Split split, const BasisModel& basis,
                           const MemoryDecoderModel* memory_decoder, const MemoryBank* memory,
                           const DecodeOptions& options);

// Digest of a memory file's serialized bytes.
std::uint64_t memory_digest(const MemoryBank& bank);

}  // namespace marn
