#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "marn/basis_decoder.hpp"
#include "marn/dataset.hpp"
#include "marn/memory_decoder.hpp"
#include "marn/optim.hpp"

namespace marn {

struct TrainConfig {
  std::size_t epochs = 500;
  double base_lr = 1e-3;
  double lr_decay = 0.5;
  std::size_t decay_every = 50;
  ClipRange clip{};
  double beta = 0.1;  // AC-loss weight; ignored by the memory stage
  std::size_t batch_size = 16;
  std::uint64_t seed = 1;
  // Validation is scored every eval_every epochs and always after the last
  // one; 0 scores only the last epoch.
  std::size_t eval_every = 10;
  std::size_t max_len = 20;

  void validate() const;
};

// base_lr * lr_decay^floor((epoch - 1) / decay_every), epochs counted from 1.
double learning_rate_at(const TrainConfig& cfg, std::size_t epoch);

struct EpochRecord {
  std::size_t epoch = 0;
  double learning_rate = 0.0;
  double caption_loss = 0.0;    // mean over captions of the summed NLL
  double attention_loss = 0.0;  // mean over captions of L_a
  double total_loss = 0.0;
  std::size_t steps = 0;        // optimizer steps
  std::size_t tokens = 0;       // predicted tokens
  std::optional<double> validation_cider;
};

struct TrainReport {
  std::string stage;
  std::vector<EpochRecord> epochs;
  std::size_t selected_epoch = 0;
  std::optional<double> selected_cider;
  // Memory stage only: validation CIDEr over the lambda grid and the pick.
  std::vector<std::pair<double, double>> lambda_search;
  std::optional<double> selected_lambda;

  std::string to_json() const;
};

// Loss parts of one caption on the tape.
struct BasisLoss {
  Var total;
  Var caption;
  Var attention;
  std::size_t tokens = 0;
};

BasisLoss basis_caption_loss(Tape& tape, const BasisGraph& g, const VideoFeatures& video,
                             std::span<const TokenId> caption, double beta);

// Everything the memory decoder consumes from a frozen basis for one caption.
struct FrozenSample {
  std::vector<TokenId> caption;
  std::vector<Tensor> h_prev;
  std::vector<Tensor> context;
  std::vector<Tensor> e_prev;
};

FrozenSample freeze_sample(const BasisModel& basis, const VideoFeatures& video, std::span<const TokenId> caption);

// -sum_t log P_m(w_t) with the basis triples entering as constants.
Var memory_caption_loss(Tape& tape, const MemoryGraph& g, Var keys, const FrozenSample& sample);

// Same loss computed through a basis graph on the same tape; the triples are
// detached, so no gradient reaches the basis arrays.
Var memory_caption_loss(Tape& tape, const MemoryGraph& g, Var keys, const BasisGraph& basis,
                        const VideoFeatures& video, std::span<const TokenId> caption);

struct BasisTrainingResult {
  BasisModel best;         // highest validation CIDEr (later epoch on ties)
  BasisModel final_model;  // after the last epoch
  TrainReport report;
};

// Both returned models are rounded through binary32, so they equal what a
// checkpoint round trip yields.
BasisTrainingResult train_basis(const Dataset& data, const Vocabulary& vocab, const ModelDims& dims,
                                const TrainConfig& cfg);

struct MemoryTrainingResult {
  MemoryDecoderModel best;
  MemoryDecoderModel final_model;
  TrainReport report;
  double lambda = 0.0;  // validation-tuned fusion weight
};

// Refuses (DataError) when the bank was not built from `basis`. The epoch is
// selected on validation CIDEr of memory-only decoding (lambda = 1); lambda
// is then chosen from {0, 0.1, ..., 1} on validation CIDEr, smaller on ties.
MemoryTrainingResult train_memory_decoder(const BasisModel& basis, const MemoryBank& bank, const Dataset& data,
                                          const Vocabulary& vocab, std::size_t attn_dim, const TrainConfig& cfg);

// Validation CIDEr for each lambda of the grid.
std::vector<std::pair<double, double>> lambda_sweep(const BasisModel& basis, const MemoryDecoderModel& memdec,
                                                    const MemoryBank& bank, const Dataset& data,
                                                    const Vocabulary& vocab, Split split, std::size_t max_len);

// Lambda of the highest score; the smaller one on ties.
double select_lambda(const std::vector<std::pair<double, double>>& sweep);

}  // namespace marn
