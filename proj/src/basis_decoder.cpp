#include "marn/basis_decoder.hpp"

#include "marn/error.hpp"

namespace marn {

namespace {

const char* const kNames[] = {"enc/M_f",     "enc/b_f",     "enc/M_v",     "enc/b_v",     "dec/E",
                              "dec/gru_W_z", "dec/gru_U_z", "dec/gru_b_z", "dec/gru_W_r", "dec/gru_U_r",
                              "dec/gru_b_r", "dec/gru_W_n", "dec/gru_U_n", "dec/gru_b_n", "dec/att_w1",
                              "dec/att_b1",  "dec/att_w2",  "dec/out_W",   "dec/out_b"};
constexpr std::size_t kParamCount = std::size(kNames);

std::vector<Shape> expected_shapes(const ModelDims& d) {
  const std::size_t m = d.proj_dim, H = d.hidden_dim, A = d.attn_dim, X = d.gru_input();
  return {{m, d.frame_dim}, {m}, {m, d.clip_dim}, {m}, {d.embed_dim, d.vocab_size},
          {H, X},           {H, H}, {H},          {H, X}, {H, H},
          {H},              {H, X}, {H, H},       {H},    {A, H + m},
          {A},              {A},    {d.vocab_size, H}, {d.vocab_size}};
}

}  // namespace

void ModelDims::validate() const {
  if (frame_dim == 0 || clip_dim == 0 || proj_dim == 0 || hidden_dim == 0 || attn_dim == 0 || embed_dim == 0)
    throw ConfigError("model dimensions must all be positive");
  if (vocab_size < Vocabulary::kReserved + 1) throw ConfigError("vocabulary too small for a model");
}

BasisModel BasisModel::create(const ModelDims& dims, std::uint64_t seed) {
  dims.validate();
  std::mt19937_64 rng(seed);
  const auto shapes = expected_shapes(dims);
  BasisModel model;
  model.dims_ = dims;
  const std::size_t X = dims.gru_input(), H = dims.hidden_dim;
  // Fan-in per array: the width of whatever the array multiplies.
  const std::size_t fan_in[kParamCount] = {dims.frame_dim, dims.frame_dim, dims.clip_dim, dims.clip_dim,
                                           dims.vocab_size, X, H, X + H, X, H, X + H, X, H, X + H,
                                           H + dims.proj_dim, H + dims.proj_dim, dims.attn_dim, H, H};
  for (std::size_t i = 0; i < kParamCount; ++i)
    model.params_.add(kNames[i], uniform_init(shapes[i], fan_in[i], rng));
  return model;
}

BasisModel BasisModel::from_params(ParameterSet params) {
  for (const char* name : kNames)
    if (!params.contains(name)) throw DataError(std::string("basis checkpoint lacks parameter ") + name);
  ModelDims d;
  const Tensor& M_f = params["enc/M_f"];
  const Tensor& M_v = params["enc/M_v"];
  const Tensor& E = params["dec/E"];
  const Tensor& U_z = params["dec/gru_U_z"];
  const Tensor& w1 = params["dec/att_w1"];
  if (M_f.rank() != 2 || M_v.rank() != 2 || E.rank() != 2 || U_z.rank() != 2 || w1.rank() != 2)
    throw ShapeError("basis checkpoint arrays have unexpected rank");
  d.proj_dim = M_f.rows();
  d.frame_dim = M_f.cols();
  d.clip_dim = M_v.cols();
  d.embed_dim = E.rows();
  d.vocab_size = E.cols();
  d.hidden_dim = U_z.rows();
  d.attn_dim = w1.rows();
  const auto shapes = expected_shapes(d);
  ParameterSet ordered;
  for (std::size_t i = 0; i < kParamCount; ++i) {
    Tensor& t = params[kNames[i]];
    if (t.shape() != shapes[i])
      throw ShapeError(std::string("basis parameter ") + kNames[i] + " has shape " + shape_string(t.shape()) +
                       ", expected " + shape_string(shapes[i]));
    ordered.add(kNames[i], std::move(t));
  }
  BasisModel model;
  model.dims_ = d;
  model.params_ = std::move(ordered);
  return model;
}

BasisGraph BasisGraph::from_vars(std::span<const Var> v, const ModelDims& dims) {
  if (v.size() != kParamCount) throw ContractViolation("basis graph needs " + std::to_string(kParamCount) + " vars");
  BasisGraph g{v[0],  v[1],  v[2],  v[3],  v[4],  v[5],  v[6],  v[7],  v[8],  v[9], v[10],
               v[11], v[12], v[13], v[14], v[15], v[16], v[17], v[18], Var{}, Var{}, dims};
  g.att_wh = ad::slice_cols(g.att_w1, 0, dims.hidden_dim);
  g.att_wf = ad::slice_cols(g.att_w1, dims.hidden_dim, dims.hidden_dim + dims.proj_dim);
  return g;
}

BasisGraph BasisGraph::bind(Tape& tape, const BasisModel& model, bool requires_grad) {
  const auto vars = model.params().bind(tape, requires_grad);
  return from_vars(vars, model.dims());
}

ProjectedFeatures project_features(Tape& tape, const BasisGraph& g, const VideoFeatures& video) {
  video.validate();
  if (video.frame_dim() != g.dims.frame_dim || video.clip_dim() != g.dims.clip_dim)
    throw ShapeError("video " + video.id + " has feature dims (" + std::to_string(video.frame_dim()) + ", " +
                     std::to_string(video.clip_dim()) + "), model expects (" + std::to_string(g.dims.frame_dim) +
                     ", " + std::to_string(g.dims.clip_dim) + ")");
  Var frames = tape.constant(video.frames);
  Var clips = tape.constant(video.clips);
  return ProjectedFeatures{ad::add_rowvec(ad::matmul(frames, ad::transpose(g.M_f)), g.b_f),
                           ad::add_rowvec(ad::matmul(clips, ad::transpose(g.M_v)), g.b_v)};
}

EncodedVideo encode_video(Tape& tape, const BasisGraph& g, const VideoFeatures& video) {
  ProjectedFeatures p = project_features(tape, g, video);
  Var wf_t = ad::transpose(g.att_wf);
  return EncodedVideo{p, ad::matmul(p.frames, wf_t), ad::matmul(p.clips, wf_t)};
}

Attention attend_with_keys(const BasisGraph& g, Var h_prev, Var features, Var keys) {
  Var query = ad::add(ad::matmul(g.att_wh, h_prev), g.att_b1);
  Var hidden = ad::tanh(ad::add_rowvec(keys, query));
  Var scores = ad::matmul(hidden, g.att_w2);
  Var weights = ad::softmax(scores);
  return Attention{weights, ad::matmul(weights, features)};
}

Attention attend(const BasisGraph& g, Var h_prev, Var features) {
  if (features.value().rank() != 2 || features.value().rows() < 1)
    throw ContractViolation("attend needs at least one feature vector");
  return attend_with_keys(g, h_prev, features, ad::matmul(features, ad::transpose(g.att_wf)));
}

Context build_context(const BasisGraph& g, Var h_prev, const EncodedVideo& video) {
  Attention a2 = attend_with_keys(g, h_prev, video.projected.frames, video.keys2d);
  Attention a3 = attend_with_keys(g, h_prev, video.projected.clips, video.keys3d);
  Var parts[] = {a2.context, a3.context};
  return Context{ad::concat(parts), a2.weights, a3.weights};
}

Var embed(const BasisGraph& g, TokenId token) {
  if (token >= g.dims.vocab_size)
    throw DataError("token " + std::to_string(token) + " outside vocabulary of size " +
                    std::to_string(g.dims.vocab_size));
  return ad::column(g.E, token);
}

Var gru_step(const BasisGraph& g, Var h_prev, Var context, Var e_prev) {
  Var parts[] = {context, e_prev};
  Var x = ad::concat(parts);
  auto gate = [&](Var W, Var U, Var b, Var h) { return ad::add(ad::add(ad::matmul(W, x), ad::matmul(U, h)), b); };
  Var z = ad::sigmoid(gate(g.W_z, g.U_z, g.b_z, h_prev));
  Var r = ad::sigmoid(gate(g.W_r, g.U_r, g.b_r, h_prev));
  Var n = ad::tanh(gate(g.W_n, g.U_n, g.b_n, ad::mul(r, h_prev)));
  // (1 - z) h + z n written as h + z (n - h)
  return ad::add(h_prev, ad::mul(z, ad::sub(n, h_prev)));
}

Var output_logits(const BasisGraph& g, Var h) { return ad::add(ad::matmul(g.out_W, h), g.out_b); }

DecoderStep decoder_step(const BasisGraph& g, const EncodedVideo& video, Var h_prev, TokenId prev_token) {
  Context ctx = build_context(g, h_prev, video);
  Var e_prev = embed(g, prev_token);
  Var h = gru_step(g, h_prev, ctx.context, e_prev);
  return DecoderStep{h_prev, ctx.context, e_prev, ctx.weights2d, ctx.weights3d, h, output_logits(g, h)};
}

std::vector<DecoderStep> teacher_forced_steps(Tape& tape, const BasisGraph& g, const EncodedVideo& video,
                                              std::span<const TokenId> caption) {
  if (caption.size() < 3) throw DataError("caption needs at least 3 tokens (<bos> word <eos>)");
  if (caption.front() != Vocabulary::kBos || caption.back() != Vocabulary::kEos)
    throw DataError("caption must start with <bos> and end with <eos>");
  std::vector<DecoderStep> steps;
  Var h = tape.constant(Tensor(Shape{g.dims.hidden_dim}, 0.0));
  for (std::size_t t = 1; t < caption.size(); ++t) {
    steps.push_back(decoder_step(g, video, h, caption[t - 1]));
    h = steps.back().h;
  }
  return steps;
}

TeacherForcedResult forward_teacher_forced(const BasisModel& model, const VideoFeatures& video,
                                           std::span<const TokenId> caption) {
  Tape tape;
  BasisGraph g = BasisGraph::bind(tape, model, false);
  EncodedVideo enc = encode_video(tape, g, video);
  auto steps = teacher_forced_steps(tape, g, enc, caption);
  TeacherForcedResult out;
  const std::size_t T = steps.size(), L = video.frame_count(), N = video.clip_count();
  out.attention2d = Tensor(Shape{T, L});
  out.attention3d = Tensor(Shape{T, N});
  for (std::size_t t = 0; t < T; ++t) {
    const DecoderStep& s = steps[t];
    out.probabilities.push_back(softmax(s.logits.value()));
    for (std::size_t i = 0; i < L; ++i) out.attention2d.at(t, i) = s.weights2d.value()[i];
    for (std::size_t i = 0; i < N; ++i) out.attention3d.at(t, i) = s.weights3d.value()[i];
    out.h_prev.push_back(s.h_prev.value());
    out.context.push_back(s.context.value());
    out.e_prev.push_back(s.e_prev.value());
  }
  return out;
}

BasisRunner::BasisRunner(const BasisModel& model, const VideoFeatures& video)
    : graph_(BasisGraph::bind(tape_, model, false)), encoded_(encode_video(tape_, graph_, video)) {
  mark_ = tape_.size();
}

Tensor BasisRunner::initial_state() const { return Tensor(Shape{graph_.dims.hidden_dim}, 0.0); }

BasisRunner::Output BasisRunner::step(const Tensor& h_prev, TokenId prev_token) {
  Var h = tape_.constant(h_prev);
  DecoderStep s = decoder_step(graph_, encoded_, h, prev_token);
  Output out{h_prev,
             s.context.value(),
             s.e_prev.value(),
             s.weights2d.value(),
             s.weights3d.value(),
             s.h.value(),
             softmax(s.logits.value())};
  tape_.truncate(mark_);
  return out;
}

}  // namespace marn
