#include <cmath>
#include <random>
#include <vector>

#include "doctest.h"
#include "marn/basis_decoder.hpp"
#include "marn/error.hpp"
#include "marn/parameters.hpp"

using namespace marn;

namespace {

using Vec = std::vector<double>;

ModelDims small_dims() {
  ModelDims d;
  d.frame_dim = 5;
  d.clip_dim = 3;
  d.proj_dim = 4;
  d.hidden_dim = 6;
  d.attn_dim = 3;
  d.embed_dim = 2;
  d.vocab_size = 9;
  return d;
}

VideoFeatures random_video(const ModelDims& d, std::size_t L, std::size_t N, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  VideoFeatures v;
  v.id = "v";
  v.frames = Tensor(Shape{L, d.frame_dim});
  v.clips = Tensor(Shape{N, d.clip_dim});
  for (double& x : v.frames.data()) x = g(rng);
  for (double& x : v.clips.data()) x = g(rng);
  return v;
}

Vec random_vec(std::size_t n, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  Vec v(n);
  for (double& x : v) x = g(rng);
  return v;
}

double sig(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Row r of W times x, summed element by element.
double row_dot(const Tensor& W, std::size_t r, const Vec& x, std::size_t offset = 0) {
  double s = 0;
  for (std::size_t j = 0; j < x.size(); ++j) s += W.at(r, offset + j) * x[j];
  return s;
}

Vec gru_oracle(const ParameterSet& p, const Vec& h, const Vec& x) {
  const std::size_t H = h.size();
  Vec z(H), r(H), rh(H), out(H);
  for (std::size_t i = 0; i < H; ++i) {
    z[i] = sig(row_dot(p["dec/gru_W_z"], i, x) + row_dot(p["dec/gru_U_z"], i, h) + p["dec/gru_b_z"][i]);
    r[i] = sig(row_dot(p["dec/gru_W_r"], i, x) + row_dot(p["dec/gru_U_r"], i, h) + p["dec/gru_b_r"][i]);
  }
  for (std::size_t i = 0; i < H; ++i) rh[i] = r[i] * h[i];
  for (std::size_t i = 0; i < H; ++i) {
    const double n = std::tanh(row_dot(p["dec/gru_W_n"], i, x) + row_dot(p["dec/gru_U_n"], i, rh) + p["dec/gru_b_n"][i]);
    out[i] = (1 - z[i]) * h[i] + z[i] * n;
  }
  return out;
}

// Projects each row with (M, b), scores it against h and returns (weights, context).
std::pair<Vec, Vec> attention_oracle(const ParameterSet& p, const Vec& h, const Tensor& raw, const char* M,
                                     const char* b) {
  const std::size_t m = p[M].rows(), A = p["dec/att_b1"].size(), H = h.size();
  std::vector<Vec> proj(raw.rows(), Vec(m));
  for (std::size_t l = 0; l < raw.rows(); ++l)
    for (std::size_t i = 0; i < m; ++i) {
      double s = p[b][i];
      for (std::size_t j = 0; j < raw.cols(); ++j) s += p[M].at(i, j) * raw.at(l, j);
      proj[l][i] = s;
    }
  Vec score(raw.rows());
  for (std::size_t l = 0; l < raw.rows(); ++l) {
    double s = 0;
    for (std::size_t a = 0; a < A; ++a) {
      double pre = p["dec/att_b1"][a] + row_dot(p["dec/att_w1"], a, h) + row_dot(p["dec/att_w1"], a, proj[l], H);
      s += p["dec/att_w2"][a] * std::tanh(pre);
    }
    score[l] = s;
  }
  double z = 0;
  for (double s : score) z += std::exp(s);
  Vec w(raw.rows()), ctx(m, 0.0);
  for (std::size_t l = 0; l < raw.rows(); ++l) {
    w[l] = std::exp(score[l]) / z;
    for (std::size_t i = 0; i < m; ++i) ctx[i] += w[l] * proj[l][i];
  }
  return {w, ctx};
}

Tensor as_tensor(const Vec& v) { return Tensor::vector(v); }

}  // namespace

TEST_CASE("parameter shapes") {
  ModelDims d = small_dims();
  BasisModel m = BasisModel::create(d, 1);
  CHECK(m.params().size() == 19);
  CHECK(m.params()["dec/gru_W_z"].shape() == Shape{6, 2 * 4 + 2});
  CHECK(m.params()["dec/att_w1"].shape() == Shape{3, 6 + 4});
  CHECK(m.params()["dec/E"].shape() == Shape{2, 9});
  CHECK(m.params()["dec/out_W"].shape() == Shape{9, 6});
  CHECK(BasisModel::from_params(m.params()).dims() == d);
  ParameterSet broken = m.params();
  broken["dec/out_b"] = Tensor(Shape{8});
  CHECK_THROWS_AS(BasisModel::from_params(broken), ShapeError);
}

TEST_CASE("initialization stays inside 1/sqrt(fan_in)") {
  BasisModel m = BasisModel::create(small_dims(), 3);
  const double bound = 1.0 / std::sqrt(2.0 * 4 + 2);
  for (double x : m.params()["dec/gru_W_z"].values()) CHECK(std::fabs(x) <= bound);
  CHECK(BasisModel::create(small_dims(), 3).params() == m.params());
}

TEST_CASE("gru step matches a scalar loop") {
  ModelDims d = small_dims();
  BasisModel model = BasisModel::create(d, 5);
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 5; ++trial) {
    Vec h = random_vec(d.hidden_dim, rng), c = random_vec(2 * d.proj_dim, rng), e = random_vec(d.embed_dim, rng);
    Tape tape;
    BasisGraph g = BasisGraph::bind(tape, model, false);
    Var out = gru_step(g, tape.constant(as_tensor(h)), tape.constant(as_tensor(c)), tape.constant(as_tensor(e)));
    Vec x = c;
    x.insert(x.end(), e.begin(), e.end());
    CHECK(max_abs_diff(out.value(), as_tensor(gru_oracle(model.params(), h, x))) < 1e-12);
  }
}

TEST_CASE("attention matches an explicit score loop") {
  ModelDims d = small_dims();
  BasisModel model = BasisModel::create(d, 7);
  VideoFeatures video = random_video(d, 5, 2, 8);
  std::mt19937_64 rng(9);
  Vec h = random_vec(d.hidden_dim, rng);
  Tape tape;
  BasisGraph g = BasisGraph::bind(tape, model, false);
  EncodedVideo enc = encode_video(tape, g, video);
  Context ctx = build_context(g, tape.constant(as_tensor(h)), enc);
  auto [w2, c2] = attention_oracle(model.params(), h, video.frames, "enc/M_f", "enc/b_f");
  auto [w3, c3] = attention_oracle(model.params(), h, video.clips, "enc/M_v", "enc/b_v");
  CHECK(max_abs_diff(ctx.weights2d.value(), as_tensor(w2)) < 1e-12);
  CHECK(max_abs_diff(ctx.weights3d.value(), as_tensor(w3)) < 1e-12);
  Vec both = c2;
  both.insert(both.end(), c3.begin(), c3.end());
  CHECK(max_abs_diff(ctx.context.value(), as_tensor(both)) < 1e-12);
}

TEST_CASE("attention over a single feature puts all weight on it") {
  ModelDims d = small_dims();
  BasisModel model = BasisModel::create(d, 2);
  VideoFeatures video = random_video(d, 1, 1, 3);
  TeacherForcedResult r = forward_teacher_forced(model, video, std::vector<TokenId>{1, 5, 2});
  for (std::size_t t = 0; t < 2; ++t) {
    CHECK(r.attention2d.at(t, 0) == doctest::Approx(1.0));
    CHECK(r.attention3d.at(t, 0) == doctest::Approx(1.0));
  }
}

TEST_CASE("teacher-forced pass") {
  ModelDims d = small_dims();
  BasisModel model = BasisModel::create(d, 4);
  VideoFeatures video = random_video(d, 6, 3, 5);
  std::vector<TokenId> caption{1, 4, 7, 5, 2};
  TeacherForcedResult r = forward_teacher_forced(model, video, caption);
  CHECK(r.probabilities.size() == 4);
  CHECK(r.attention2d.shape() == Shape{4, 6});
  CHECK(r.attention3d.shape() == Shape{4, 3});
  for (double x : r.h_prev[0].values()) CHECK(x == 0.0);
  for (const Tensor& p : r.probabilities) {
    double s = 0;
    for (double x : p.values()) s += x;
    CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
  }
  for (std::size_t t = 0; t < 4; ++t) {
    double s = 0;
    for (std::size_t l = 0; l < 6; ++l) s += r.attention2d.at(t, l);
    CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
    // e_prev is the embedding column of the consumed token.
    for (std::size_t i = 0; i < d.embed_dim; ++i) CHECK(r.e_prev[t][i] == model.params()["dec/E"].at(i, caption[t]));
  }

  // The step runner reproduces the taped pass.
  BasisRunner runner(model, video);
  Tensor h = runner.initial_state();
  for (std::size_t t = 0; t < 4; ++t) {
    BasisRunner::Output o = runner.step(h, caption[t]);
    CHECK(max_abs_diff(o.probabilities, r.probabilities[t]) < 1e-12);
    h = o.h;
  }
}

TEST_CASE("checkpoint round trip and digest") {
  BasisModel model = BasisModel::create(small_dims(), 11);
  checkpoint::round_to_f32(model.params());
  std::vector<char> bytes = checkpoint::serialize(model.params());
  ParameterSet back = checkpoint::deserialize(bytes, "mem");
  CHECK(back == model.params());
  CHECK(checkpoint::digest(back) == checkpoint::digest(model.params()));
  ParameterSet other = back;
  other["dec/out_b"][0] += 1.0;
  CHECK(checkpoint::digest(other) != checkpoint::digest(back));

  CHECK_THROWS_AS(checkpoint::deserialize(std::span<const char>(bytes.data(), 3), "cut"), DataError);
  for (std::size_t cut : {std::size_t{9}, bytes.size() / 2, bytes.size() - 1})
    CHECK_THROWS_AS(checkpoint::deserialize(std::span<const char>(bytes.data(), cut), "cut"), CorruptionError);
  std::vector<char> bad = bytes;
  bad[1] = 'Z';
  CHECK_THROWS_AS(checkpoint::deserialize(bad, "magic"), FormatError);
}

TEST_CASE("rounding through binary32 is idempotent") {
  BasisModel model = BasisModel::create(small_dims(), 12);
  checkpoint::round_to_f32(model.params());
  ParameterSet once = model.params();
  checkpoint::round_to_f32(model.params());
  CHECK(once == model.params());
  for (double x : once["dec/E"].values()) CHECK(static_cast<double>(static_cast<float>(x)) == x);
}
