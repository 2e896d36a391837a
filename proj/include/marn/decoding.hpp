#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <vector>

#include "marn/basis_decoder.hpp"
#include "marn/error.hpp"
#include "marn/memory_decoder.hpp"

namespace marn {

// Distributions of one generation step, handed to an optional observer.
struct StepDistributions {
  std::size_t step = 0;
  const Tensor* basis = nullptr;   // P_b
  const Tensor* memory = nullptr;  // P_m, null without a memory decoder
  const Tensor* fused = nullptr;   // P
};

using DecodeObserver = std::function<void(const StepDistributions&)>;

struct DecodeOptions {
  double lambda = 0.0;
  std::size_t max_len = 20;    // including <bos>
  std::size_t beam_width = 1;  // 1 selects greedy decoding
  DecodeObserver observer;
};

template <typename State>
struct BeamHypothesis {
  std::vector<TokenId> tokens;
  double log_prob = 0.0;
  State state;
};

template <typename State>
struct BeamResult {
  std::vector<TokenId> tokens;
  double log_prob = 0.0;
};

// Length-unnormalized beam search. step(state, tokens) returns the next state
// and the distribution over the next token. A hypothesis finishes on `eos` or
// at max_len tokens (counting `start`). Candidates are ranked by summed log
// probability; ties keep the earlier hypothesis, then the lower token. The
// search stops once the best finished score is at least the best live one.
template <typename State, typename Step>
BeamResult<State> beam_search(State initial, TokenId start, TokenId eos, std::size_t width, std::size_t max_len,
                              Step&& step) {
  std::vector<BeamHypothesis<State>> live{{{start}, 0.0, std::move(initial)}};
  std::vector<BeamHypothesis<State>> finished;
  struct Candidate {
    double score;
    std::size_t hyp;
    TokenId token;
  };
  while (!live.empty()) {
    std::vector<Candidate> candidates;
    std::vector<State> next_state;
    for (std::size_t i = 0; i < live.size(); ++i) {
      auto [state, p] = step(live[i].state, live[i].tokens);
      for (std::size_t k = 0; k < p.size(); ++k)
        if (p[k] > 0.0) candidates.push_back({live[i].log_prob + std::log(p[k]), i, static_cast<TokenId>(k)});
      next_state.push_back(std::move(state));
    }
    std::stable_sort(candidates.begin(), candidates.end(),
                     [](const Candidate& a, const Candidate& b) { return a.score > b.score; });
    if (candidates.size() > width) candidates.resize(width);

    std::vector<BeamHypothesis<State>> next;
    for (const Candidate& c : candidates) {
      BeamHypothesis<State> h{live[c.hyp].tokens, c.score, next_state[c.hyp]};
      h.tokens.push_back(c.token);
      if (c.token == eos || h.tokens.size() >= max_len)
        finished.push_back(std::move(h));
      else
        next.push_back(std::move(h));
    }
    live = std::move(next);
    // Appending tokens never raises a score, so a leading finished hypothesis cannot be overtaken.
    if (!finished.empty() && !live.empty()) {
      double best = -std::numeric_limits<double>::infinity();
      for (const auto& f : finished) best = std::max(best, f.log_prob);
      if (best >= live.front().log_prob) break;
    }
  }
  if (finished.empty()) throw NumericalError("beam search ended without a finished hypothesis");
  const BeamHypothesis<State>* best = &finished.front();
  for (const auto& f : finished)
    if (f.log_prob > best->log_prob) best = &f;
  return {best->tokens, best->log_prob};
}

// Generates captions from the fused distribution (1 - lambda) P_b + lambda P_m,
// or from P_b alone when no memory decoder is attached. Returned sequences
// start with <bos> and hold at most max_len tokens. Not thread-safe.
class CaptionGenerator {
 public:
  explicit CaptionGenerator(const BasisModel& basis);
  CaptionGenerator(const BasisModel& basis, const MemoryDecoderModel& memory_decoder, const MemoryBank& memory);

  bool has_memory() const noexcept { return memory_runner_ != nullptr; }

  // Argmax of P at every step, lowest index on ties; stops after <eos> or max_len tokens.
  std::vector<TokenId> greedy(const VideoFeatures& video, const DecodeOptions& options);
  // Length-unnormalized beam search over log P. Width 1 reproduces greedy().
  std::vector<TokenId> beam(const VideoFeatures& video, const DecodeOptions& options);
  // greedy() or beam() depending on options.beam_width.
  std::vector<TokenId> generate(const VideoFeatures& video, const DecodeOptions& options);

 private:
  struct StepResult {
    Tensor h;
    Tensor fused;
  };
  StepResult advance(BasisRunner& runner, const Tensor& h_prev, TokenId prev, const DecodeOptions& options,
                     std::size_t step);

  const BasisModel* basis_;
  std::unique_ptr<MemoryRunner> memory_runner_;
};

std::vector<TokenId> greedy_decode(const VideoFeatures& video, const BasisModel& basis,
                                   const MemoryDecoderModel* memory_decoder, const MemoryBank* memory, double lambda,
                                   std::size_t max_len);
std::vector<TokenId> beam_decode(const VideoFeatures& video, const BasisModel& basis,
                                 const MemoryDecoderModel* memory_decoder, const MemoryBank* memory, double lambda,
                                 std::size_t beam_width, std::size_t max_len);

}  // namespace marn
