#pragma once

#include <cstdint>

#include "marn/autodiff.hpp"
#include "marn/memory_builder.hpp"
#include "marn/parameters.hpp"

namespace marn {

struct MemoryDecoderDims {
  std::size_t attn_dim = 64;      // A'
  std::size_t proj_dim = 0;       // m
  std::size_t embed_dim = 0;      // d'
  std::size_t hidden_dim = 0;     // H
  std::size_t category_dim = 0;   // U; 0 drops the W_u term

  friend bool operator==(const MemoryDecoderDims&, const MemoryDecoderDims&) = default;
};

// Relevance scorer over the memory bank. Parameter names: memdec/{v, W_c,
// W_g, W_ep, W_e, W_h, W_u, b}; W_u exists only when U > 0.
class MemoryDecoderModel {
 public:
  static MemoryDecoderModel create(const MemoryDecoderDims& dims, std::uint64_t seed);
  static MemoryDecoderModel from_params(ParameterSet params);

  const MemoryDecoderDims& dims() const noexcept { return dims_; }
  ParameterSet& params() noexcept { return params_; }
  const ParameterSet& params() const noexcept { return params_; }

  // Throws ShapeError when the bank's m, d' or U disagree with this scorer.
  void check_compatible(const MemoryBank& bank) const;

 private:
  MemoryDecoderDims dims_;
  ParameterSet params_;
};

struct MemoryGraph {
  Var v, W_c, W_g, W_ep, W_e, W_h, W_u, b;
  MemoryDecoderDims dims;

  static MemoryGraph bind(Tape& tape, const MemoryDecoderModel& model, bool requires_grad);
  static MemoryGraph from_vars(std::span<const Var> vars, const MemoryDecoderDims& dims);
};

// Word-dependent part of every score, W_g g_i + W_e e_i + W_u u_i, one row per word (K x A').
Var memory_keys(Tape& tape, const MemoryGraph& g, const MemoryBank& bank);

// q_i = v . tanh(W_c c_t + W_g g_i + W'_e e_prev + W_e e_i + W_h h_prev + W_u u_i + b).
// The step-dependent part is formed once and broadcast over the K rows of keys.
Var relevance_scores(const MemoryGraph& g, Var keys, Var context, Var e_prev, Var h_prev);

Tensor relevance_scores(const MemoryDecoderModel& model, const MemoryBank& bank, const Tensor& context,
                        const Tensor& e_prev, const Tensor& h_prev);

// P_m = softmax(q).
Tensor memory_probabilities(const Tensor& scores);

struct FusionConfig {
  double lambda = 0.0;
  void validate() const;
};

// P = (1 - lambda) P_b + lambda P_m. Both inputs must be distributions (sum 1 +- 1e-9).
Tensor fuse_probabilities(const Tensor& basis, const Tensor& memory, const FusionConfig& cfg);

// Scores memory entries step by step; the bank-side keys are formed once.
class MemoryRunner {
 public:
  MemoryRunner(const MemoryDecoderModel& model, const MemoryBank& bank);
  Tensor probabilities(const Tensor& context, const Tensor& e_prev, const Tensor& h_prev);

 private:
  Tape tape_;
  MemoryGraph graph_;
  Var keys_;
  std::size_t mark_ = 0;
};

}  // namespace marn
