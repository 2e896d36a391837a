#include "marn/decoding.hpp"

#include <algorithm>

#include "marn/error.hpp"

namespace marn {

CaptionGenerator::CaptionGenerator(const BasisModel& basis) : basis_(&basis) {}

CaptionGenerator::CaptionGenerator(const BasisModel& basis, const MemoryDecoderModel& memory_decoder,
                                   const MemoryBank& memory)
    : basis_(&basis), memory_runner_(std::make_unique<MemoryRunner>(memory_decoder, memory)) {
  if (memory.size() != basis.dims().vocab_size)
    throw ShapeError("memory has " + std::to_string(memory.size()) + " entries, vocabulary has " +
                     std::to_string(basis.dims().vocab_size));
}

CaptionGenerator::StepResult CaptionGenerator::advance(BasisRunner& runner, const Tensor& h_prev, TokenId prev,
                                                       const DecodeOptions& options, std::size_t step) {
  BasisRunner::Output out = runner.step(h_prev, prev);
  StepResult result{std::move(out.h), Tensor{}};
  if (memory_runner_) {
    Tensor p_m = memory_runner_->probabilities(out.context, out.e_prev, out.h_prev);
    result.fused = fuse_probabilities(out.probabilities, p_m, FusionConfig{options.lambda});
    if (options.observer) options.observer(StepDistributions{step, &out.probabilities, &p_m, &result.fused});
  } else {
    result.fused = std::move(out.probabilities);
    if (options.observer) options.observer(StepDistributions{step, &result.fused, nullptr, &result.fused});
  }
  return result;
}

std::vector<TokenId> CaptionGenerator::greedy(const VideoFeatures& video, const DecodeOptions& options) {
  if (options.max_len < 2) throw ConfigError("max_len must be at least 2");
  FusionConfig{options.lambda}.validate();
  BasisRunner runner(*basis_, video);
  std::vector<TokenId> tokens{Vocabulary::kBos};
  Tensor h = runner.initial_state();
  while (tokens.size() < options.max_len) {
    StepResult r = advance(runner, h, tokens.back(), options, tokens.size() - 1);
    const auto& p = r.fused.data();
    const auto best = static_cast<TokenId>(std::max_element(p.begin(), p.end()) - p.begin());
    tokens.push_back(best);
    h = std::move(r.h);
    if (best == Vocabulary::kEos) break;
  }
  return tokens;
}

std::vector<TokenId> CaptionGenerator::beam(const VideoFeatures& video, const DecodeOptions& options) {
  if (options.max_len < 2) throw ConfigError("max_len must be at least 2");
  if (options.beam_width < 1) throw ConfigError("beam width must be at least 1");
  FusionConfig{options.lambda}.validate();
  BasisRunner runner(*basis_, video);
  auto step = [&](const Tensor& h, const std::vector<TokenId>& tokens) {
    StepResult r = advance(runner, h, tokens.back(), options, tokens.size() - 1);
    return std::make_pair(std::move(r.h), std::move(r.fused));
  };
  return beam_search(runner.initial_state(), Vocabulary::kBos, Vocabulary::kEos, options.beam_width, options.max_len,
                     step)
      .tokens;
}

std::vector<TokenId> CaptionGenerator::generate(const VideoFeatures& video, const DecodeOptions& options) {
  return options.beam_width <= 1 ? greedy(video, options) : beam(video, options);
}

std::vector<TokenId> greedy_decode(const VideoFeatures& video, const BasisModel& basis,
                                   const MemoryDecoderModel* memory_decoder, const MemoryBank* memory, double lambda,
                                   std::size_t max_len) {
  DecodeOptions options;
  options.lambda = lambda;
  options.max_len = max_len;
  if (memory_decoder && memory) {
    CaptionGenerator gen(basis, *memory_decoder, *memory);
    return gen.greedy(video, options);
  }
  CaptionGenerator gen(basis);
  return gen.greedy(video, options);
}

std::vector<TokenId> beam_decode(const VideoFeatures& video, const BasisModel& basis,
                                 const MemoryDecoderModel* memory_decoder, const MemoryBank* memory, double lambda,
                                 std::size_t beam_width, std::size_t max_len) {
  DecodeOptions options;
  options.lambda = lambda;
  options.max_len = max_len;
  options.beam_width = beam_width;
  if (memory_decoder && memory) {
    CaptionGenerator gen(basis, *memory_decoder, *memory);
    return gen.beam(video, options);
  }
  CaptionGenerator gen(basis);
  return gen.beam(video, options);
}

}  // namespace marn
