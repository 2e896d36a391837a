#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "marn/autodiff.hpp"
#include "marn/features.hpp"
#include "marn/parameters.hpp"
#include "marn/vocabulary.hpp"

namespace marn {

struct ModelDims {
  std::size_t frame_dim = 0;    // d
  std::size_t clip_dim = 0;     // c
  std::size_t proj_dim = 64;    // m
  std::size_t hidden_dim = 64;  // H
  std::size_t attn_dim = 64;    // A
  std::size_t embed_dim = 64;   // d'
  std::size_t vocab_size = 0;   // K

  std::size_t gru_input() const { return 2 * proj_dim + embed_dim; }
  void validate() const;
  friend bool operator==(const ModelDims&, const ModelDims&) = default;
};

// Encoder projections plus the attention-based recurrent decoder. Parameter
// names: enc/{M_f,b_f,M_v,b_v}, dec/E, dec/gru_{W,U,b}_{z,r,n},
// dec/att_{w1,b1,w2}, dec/out_{W,b}.
class BasisModel {
 public:
  static BasisModel create(const ModelDims& dims, std::uint64_t seed);
  // Infers the dimensions from the array shapes and checks they agree.
  static BasisModel from_params(ParameterSet params);

  const ModelDims& dims() const noexcept { return dims_; }
  ParameterSet& params() noexcept { return params_; }
  const ParameterSet& params() const noexcept { return params_; }

 private:
  ModelDims dims_;
  ParameterSet params_;
};

// The model's arrays as tape leaves.
struct BasisGraph {
  Var M_f, b_f, M_v, b_v;
  Var E;
  Var W_z, U_z, b_z, W_r, U_r, b_r, W_n, U_n, b_n;
  Var att_w1, att_b1, att_w2;
  Var out_W, out_b;
  // Column blocks of att_w1 acting on h_{t-1} and on a projected feature.
  Var att_wh, att_wf;
  ModelDims dims;

  static BasisGraph bind(Tape& tape, const BasisModel& model, bool requires_grad);
  // Vars in ParameterSet order (as returned by ParameterSet::bind).
  static BasisGraph from_vars(std::span<const Var> vars, const ModelDims& dims);
};

// f'_l = M_f f_l + b_f and v'_n = M_v v_n + b_v, stacked as rows.
struct ProjectedFeatures {
  Var frames;  // L x m
  Var clips;   // N x m
};

ProjectedFeatures project_features(Tape& tape, const BasisGraph& g, const VideoFeatures& video);

// Projected features plus their attention keys att_wf * feature (rows), which
// do not depend on the decoding step.
struct EncodedVideo {
  ProjectedFeatures projected;
  Var keys2d;  // L x A
  Var keys3d;  // N x A
};

EncodedVideo encode_video(Tape& tape, const BasisGraph& g, const VideoFeatures& video);

struct Attention {
  Var weights;  // softmax over the features
  Var context;  // sum_i weights_i * feature_i
};

// score_i = att_w2 . tanh(att_w1 [h_prev; feature_i] + att_b1), weights = softmax(score).
// One set of attention parameters serves both streams.
Attention attend(const BasisGraph& g, Var h_prev, Var features);
Attention attend_with_keys(const BasisGraph& g, Var h_prev, Var features, Var keys);

struct Context {
  Var context;  // [c_2D; c_3D], length 2m
  Var weights2d;
  Var weights3d;
};

Context build_context(const BasisGraph& g, Var h_prev, const EncodedVideo& video);

// Embedding column E[:, token].
Var embed(const BasisGraph& g, TokenId token);

// z = s(W_z x + U_z h + b_z), r = s(W_r x + U_r h + b_r),
// n = tanh(W_n x + U_n (r * h) + b_n), h' = (1 - z) * h + z * n, with x = [c_t; e_prev].
Var gru_step(const BasisGraph& g, Var h_prev, Var context, Var e_prev);

// out_W h + out_b; P_b is its softmax.
Var output_logits(const BasisGraph& g, Var h);

struct DecoderStep {
  Var h_prev;
  Var context;
  Var e_prev;
  Var weights2d;
  Var weights3d;
  Var h;
  Var logits;
};

DecoderStep decoder_step(const BasisGraph& g, const EncodedVideo& video, Var h_prev, TokenId prev_token);

// Steps t = 1..T-1 consume token t-1 and predict token t, from h_0 = 0.
std::vector<DecoderStep> teacher_forced_steps(Tape& tape, const BasisGraph& g, const EncodedVideo& video,
                                              std::span<const TokenId> caption);

// Value-level results of a teacher-forced pass.
struct TeacherForcedResult {
  std::vector<Tensor> probabilities;  // P_b per step
  Tensor attention2d;                 // (T-1) x L
  Tensor attention3d;                 // (T-1) x N
  std::vector<Tensor> h_prev;         // the triples (h_{t-1}, c_t, e_{t-1}) the memory decoder consumes
  std::vector<Tensor> context;
  std::vector<Tensor> e_prev;
};

TeacherForcedResult forward_teacher_forced(const BasisModel& model, const VideoFeatures& video,
                                           std::span<const TokenId> caption);

// Step-at-a-time evaluation for generation; the video is encoded once.
class BasisRunner {
 public:
  BasisRunner(const BasisModel& model, const VideoFeatures& video);

  struct Output {
    Tensor h_prev;
    Tensor context;
    Tensor e_prev;
    Tensor weights2d;
    Tensor weights3d;
    Tensor h;
    Tensor probabilities;
  };

  Output step(const Tensor& h_prev, TokenId prev_token);
  Tensor initial_state() const;

 private:
  Tape tape_;
  BasisGraph graph_;
  EncodedVideo encoded_;
  std::size_t mark_ = 0;
};

}  // namespace marn
