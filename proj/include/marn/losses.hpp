#pragma once

#include <span>

#include "marn/autodiff.hpp"
#include "marn/vocabulary.hpp"

namespace marn {

// Negative log likelihood of one caption, summed over steps (natural log).
// probabilities[t] predicts caption[t + 1]. A zero probability at a target is
// clamped to 1e-12 with a warning unless clamp is false.
double caption_nll(std::span<const Tensor> probabilities, std::span<const TokenId> caption, bool clamp = true);

// Same quantity on the tape, from logits through log-softmax.
Var caption_nll(std::span<const Var> logits, std::span<const TokenId> caption);

// Sum over steps of sum_{i >= 2} |a_i - a_{i-1}| on the 2D attention rows
// (one row per step); zero when a row has fewer than 2 entries.
double attention_coherent_loss(const Tensor& attention2d);
Var attention_coherent_loss(Tape& tape, std::span<const Var> weights2d);

// L = L_c + beta * L_a.
double combined_loss(double caption_loss, double attention_loss, double beta);
Var combined_loss(Var caption_loss, Var attention_loss, double beta);

}  // namespace marn
