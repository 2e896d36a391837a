#pragma once

#include <cstdint>
#include <vector>

#include "marn/basis_decoder.hpp"
#include "marn/memory_decoder.hpp"
#include "marn/optim.hpp"
#include "marn/training.hpp"

namespace marn {

// Micro model used for gradient checks: m = H = A = A' = d' = 8, K = 12,
// L = 6, N = 2, d = 10, c = 6, U = 3, memory built with k = 2.
struct MicroSetup {
  ModelDims dims;
  BasisModel basis;
  MemoryDecoderModel memdec;
  MemoryBank bank;
  VideoFeatures video;
  std::vector<TokenId> caption;
};

MicroSetup make_micro_setup(std::uint64_t seed);

struct MicroGradCheck {
  GradCheckResult combined;  // L_c + beta L_a over every basis array
  GradCheckResult memory;    // -sum log P_m over every memory-decoder array
  double max_rel_error() const { return std::max(combined.max_rel_error, memory.max_rel_error); }
};

MicroGradCheck micro_grad_check(std::uint64_t seed, double beta = 0.1, double h = 1e-5);

}  // namespace marn
