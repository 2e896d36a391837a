#include "marn/losses.hpp"

#include <cmath>

#include "marn/error.hpp"
#include "marn/log.hpp"

namespace marn {

namespace {

void check_alignment(std::size_t steps, std::span<const TokenId> caption) {
  if (caption.size() < 2 || steps != caption.size() - 1)
    throw ContractViolation("caption of " + std::to_string(caption.size()) + " tokens needs " +
                            std::to_string(caption.size() > 0 ? caption.size() - 1 : 0) + " prediction steps, got " +
                            std::to_string(steps));
}

}  // namespace

double caption_nll(std::span<const Tensor> probabilities, std::span<const TokenId> caption, bool clamp) {
  check_alignment(probabilities.size(), caption);
  double loss = 0.0;
  for (std::size_t t = 0; t < probabilities.size(); ++t) {
    const TokenId target = caption[t + 1];
    if (target >= probabilities[t].size()) throw ShapeError("target token outside the distribution");
    double p = probabilities[t][target];
    if (clamp && p < 1e-12) {
      log::warn("caption_nll: target probability " + std::to_string(p) + " clamped to 1e-12");
      p = 1e-12;
    }
    loss -= std::log(p);
  }
  return loss;
}

Var caption_nll(std::span<const Var> logits, std::span<const TokenId> caption) {
  check_alignment(logits.size(), caption);
  Var total;
  for (std::size_t t = 0; t < logits.size(); ++t) {
    Var term = ad::pick(ad::log_softmax(logits[t]), caption[t + 1]);
    total = total.valid() ? ad::add(total, term) : term;
  }
  return ad::scale(total, -1.0);
}

double attention_coherent_loss(const Tensor& attention2d) {
  if (attention2d.rank() != 2) throw ShapeError("attention map must be a matrix");
  double loss = 0.0;
  for (std::size_t t = 0; t < attention2d.rows(); ++t) {
    const auto row = attention2d.row(t);
    for (std::size_t i = 1; i < row.size(); ++i) loss += std::abs(row[i] - row[i - 1]);
  }
  return loss;
}

Var attention_coherent_loss(Tape& tape, std::span<const Var> weights2d) {
  Var total = tape.constant(Tensor::scalar(0.0));
  for (const Var& a : weights2d) {
    const std::size_t L = a.value().size();
    if (L < 2) continue;
    total = ad::add(total, ad::sum(ad::abs(ad::sub(ad::slice(a, 1, L), ad::slice(a, 0, L - 1)))));
  }
  return total;
}

double combined_loss(double caption_loss, double attention_loss, double beta) {
  if (beta < 0.0) throw ConfigError("beta must be non-negative");
  return caption_loss + beta * attention_loss;
}

Var combined_loss(Var caption_loss, Var attention_loss, double beta) {
  if (beta < 0.0) throw ConfigError("beta must be non-negative");
  return ad::add(caption_loss, ad::scale(attention_loss, beta));
}

}  // namespace marn
