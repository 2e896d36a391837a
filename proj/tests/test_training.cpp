#include <cmath>
#include <random>
#include <vector>

#include "doctest.h"
#include "marn/error.hpp"
#include "marn/gradcheck.hpp"
#include "marn/losses.hpp"
#include "marn/synthetic.hpp"
#include "marn/training.hpp"

using namespace marn;

namespace {

struct Tiny {
  Dataset data;
  Vocabulary vocab;
  ModelDims dims;
};

Tiny tiny() {
  SyntheticConfig cfg;
  Tiny t;
  t.data = to_dataset(generate_synthetic_dataset(cfg));
  t.vocab = Vocabulary::build(t.data.manifest.tokenized_captions(Split::train), 1);
  t.dims.frame_dim = cfg.frame_dim;
  t.dims.clip_dim = cfg.clip_dim;
  t.dims.proj_dim = t.dims.hidden_dim = t.dims.attn_dim = t.dims.embed_dim = 8;
  t.dims.vocab_size = t.vocab.size();
  return t;
}

TrainConfig quick(std::size_t epochs) {
  TrainConfig cfg;
  cfg.epochs = epochs;
  cfg.base_lr = 1e-2;
  cfg.eval_every = 0;
  cfg.max_len = 8;
  return cfg;
}

}  // namespace

TEST_CASE("caption nll examples") {
  std::vector<TokenId> caption{1, 5, 2};
  Tensor uniform(Shape{12}, 1.0 / 12);
  std::vector<Tensor> probs{uniform, uniform};
  CHECK(caption_nll(probs, caption) == doctest::Approx(2 * std::log(12.0)));

  Tensor hit5(Shape{12}, 0.0), hit2(Shape{12}, 0.0);
  hit5[5] = 1.0;
  hit2[2] = 1.0;
  std::vector<Tensor> exact{hit5, hit2};
  CHECK(caption_nll(exact, caption) == 0.0);

  std::vector<Tensor> miss{hit2, hit2};
  CHECK(caption_nll(miss, caption) == doctest::Approx(-std::log(1e-12)));
  CHECK(std::isinf(caption_nll(miss, caption, false)));

  std::vector<Tensor> short_probs{uniform};
  CHECK_THROWS_AS(caption_nll(short_probs, caption), ContractViolation);
}

TEST_CASE("taped caption nll equals the summed log softmax") {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> g;
  Tape tape;
  std::vector<Var> logits;
  std::vector<Tensor> probs;
  std::vector<TokenId> caption{1, 4, 6, 3, 2};
  for (int t = 0; t < 4; ++t) {
    Tensor x(Shape{7});
    for (double& v : x.data()) v = g(rng);
    logits.push_back(tape.leaf(x));
    probs.push_back(softmax(x));
  }
  double expect = 0;
  for (int t = 0; t < 4; ++t) expect -= std::log(probs[t][caption[t + 1]]);
  CHECK(caption_nll(logits, caption).value().item() == doctest::Approx(expect).epsilon(1e-12));
  CHECK(caption_nll(probs, caption) == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("attention coherence loss examples") {
  CHECK(attention_coherent_loss(Tensor::matrix(1, 3, {0.2, 0.3, 0.5})) == doctest::Approx(0.3));
  CHECK(attention_coherent_loss(Tensor::matrix(2, 4, {0.25, 0.25, 0.25, 0.25, 0.1, 0.1, 0.1, 0.1})) == 0.0);
  CHECK(attention_coherent_loss(Tensor::matrix(2, 1, {1.0, 1.0})) == 0.0);
  CHECK(attention_coherent_loss(Tensor::matrix(2, 3, {1, 0, 0, 0, 1, 0})) == doctest::Approx(1 + 2));

  Tape tape;
  std::vector<Var> rows{tape.leaf(Tensor::vector({0.2, 0.3, 0.5})), tape.leaf(Tensor::vector({0.6, 0.1, 0.3}))};
  Var la = attention_coherent_loss(tape, rows);
  CHECK(la.value().item() == doctest::Approx(0.3 + 0.5 + 0.2));
  tape.backward(la);
  Tensor g0 = tape.grad(rows[0]);
  CHECK(g0[0] == doctest::Approx(-1.0));
  CHECK(g0[1] == doctest::Approx(0.0));
  CHECK(g0[2] == doctest::Approx(1.0));
}

TEST_CASE("combined loss") {
  CHECK(combined_loss(2.0, 1.0, 0.1) == doctest::Approx(2.1));
  CHECK(combined_loss(2.0, 1.0, 0.0) == 2.0);
  CHECK_THROWS_AS(combined_loss(2.0, 1.0, -0.5), ConfigError);
}

TEST_CASE("training configuration checks") {
  TrainConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  cfg.beta = -1;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = TrainConfig{};
  cfg.batch_size = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  CHECK_THROWS_AS(learning_rate_at(TrainConfig{}, 0), ContractViolation);
}

TEST_CASE("micro gradient check") {
  MicroGradCheck r = micro_grad_check(1);
  CHECK(r.combined.max_rel_error < 1e-4);
  CHECK(r.memory.max_rel_error < 1e-4);
  CHECK(r.combined.coordinates > 0);
}

TEST_CASE("basis training steps, determinism and progress") {
  Tiny t = tiny();
  TrainConfig cfg = quick(6);
  BasisTrainingResult a = train_basis(t.data, t.vocab, t.dims, cfg);
  const std::size_t captions = t.data.manifest.samples(Split::train, t.vocab).size();
  REQUIRE(a.report.epochs.size() == 6);
  for (const EpochRecord& e : a.report.epochs) CHECK(e.steps == (captions + cfg.batch_size - 1) / cfg.batch_size);
  CHECK(a.report.epochs.back().caption_loss < a.report.epochs.front().caption_loss);
  CHECK(a.report.epochs[0].learning_rate == doctest::Approx(1e-2));
  CHECK(a.report.selected_epoch == 6);

  BasisTrainingResult b = train_basis(t.data, t.vocab, t.dims, cfg);
  CHECK(a.final_model.params() == b.final_model.params());
  CHECK(a.report.to_json() == b.report.to_json());

  ParameterSet reloaded = checkpoint::deserialize(checkpoint::serialize(a.best.params()), "mem");
  CHECK(reloaded == a.best.params());

  cfg.batch_size = 5;
  cfg.epochs = 1;
  BasisTrainingResult c = train_basis(t.data, t.vocab, t.dims, cfg);
  CHECK(c.report.epochs[0].steps == (captions + 4) / 5);
}

TEST_CASE("memory loss leaves the basis untouched") {
  MicroSetup s = make_micro_setup(4);
  Tape tape;
  std::vector<Var> basis_vars = s.basis.params().bind(tape, true);
  BasisGraph bg = BasisGraph::from_vars(basis_vars, s.basis.dims());
  MemoryGraph mg = MemoryGraph::bind(tape, s.memdec, true);
  Var keys = memory_keys(tape, mg, s.bank);
  Var loss = memory_caption_loss(tape, mg, keys, bg, s.video, s.caption);
  tape.backward(loss);
  for (Var v : basis_vars) {
    const Tensor g = tape.grad(v);
    for (double x : g.values()) CHECK(x == 0.0);
  }
  const Tensor gv = tape.grad(mg.v);
  CHECK(gv.values() != std::vector<double>(gv.size(), 0.0));

  // Frozen constants give the same loss.
  Tape t2;
  MemoryGraph mg2 = MemoryGraph::bind(t2, s.memdec, true);
  Var frozen = memory_caption_loss(t2, mg2, memory_keys(t2, mg2, s.bank), freeze_sample(s.basis, s.video, s.caption));
  CHECK(frozen.value().item() == doctest::Approx(loss.value().item()).epsilon(1e-12));
}

TEST_CASE("memory training") {
  Tiny t = tiny();
  BasisTrainingResult basis = train_basis(t.data, t.vocab, t.dims, quick(3));
  MemoryBank bank = assemble_memory(basis.best, t.data, t.vocab, 2);
  const ParameterSet before = basis.best.params();
  TrainConfig cfg = quick(4);
  MemoryTrainingResult a = train_memory_decoder(basis.best, bank, t.data, t.vocab, 8, cfg);
  CHECK(basis.best.params() == before);
  CHECK(a.report.epochs.back().caption_loss < a.report.epochs.front().caption_loss);
  CHECK(a.report.lambda_search.size() == 11);
  CHECK(a.lambda >= 0.0);
  CHECK(a.lambda <= 1.0);
  CHECK(a.report.selected_lambda == a.lambda);
  MemoryTrainingResult b = train_memory_decoder(basis.best, bank, t.data, t.vocab, 8, cfg);
  CHECK(a.final_model.params() == b.final_model.params());

  MemoryBank stale = bank;
  stale.basis_digest ^= 1;
  CHECK_THROWS_WITH_AS(train_memory_decoder(basis.best, stale, t.data, t.vocab, 8, cfg),
                       doctest::Contains("refusing"), DataError);
}

TEST_CASE("lambda selection prefers the smaller value on ties") {
  CHECK(select_lambda({{0.0, 1.0}, {0.1, 2.0}, {0.2, 2.0}, {0.3, 1.5}}) == 0.1);
  CHECK(select_lambda({{0.0, 3.0}, {0.5, 3.0}}) == 0.0);
  CHECK_THROWS_AS(select_lambda({}), ContractViolation);
}
