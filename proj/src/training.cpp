#include "marn/training.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "json.hpp"
#include "marn/binary_io.hpp"
#include "marn/error.hpp"
#include "marn/evaluation.hpp"
#include "marn/log.hpp"
#include "marn/losses.hpp"

namespace marn {

void TrainConfig::validate() const {
  if (epochs == 0) throw ConfigError("epochs must be positive");
  if (!(base_lr > 0.0)) throw ConfigError("base_lr must be positive");
  if (!(lr_decay > 0.0)) throw ConfigError("lr_decay must be positive");
  if (decay_every < 1) throw ConfigError("decay_every must be at least 1");
  if (!(clip.lo < clip.hi)) throw ConfigError("clip range is empty");
  if (beta < 0.0) throw ConfigError("beta must be non-negative");
  if (batch_size == 0) throw ConfigError("batch_size must be positive");
  if (max_len < 2) throw ConfigError("max_len must be at least 2");
}

double learning_rate_at(const TrainConfig& cfg, std::size_t epoch) {
  if (epoch == 0) throw ContractViolation("epochs are counted from 1");
  const auto halvings = static_cast<double>((epoch - 1) / cfg.decay_every);
  return cfg.base_lr * std::pow(cfg.lr_decay, halvings);
}

std::string TrainReport::to_json() const {
  nlohmann::ordered_json j;
  j["stage"] = stage;
  j["selection_metric"] = "cider";
  j["selected_epoch"] = selected_epoch;
  j["selected_cider"] = selected_cider ? nlohmann::ordered_json(*selected_cider) : nlohmann::ordered_json();
  auto& list = j["epochs"] = nlohmann::ordered_json::array();
  for (const auto& e : epochs) {
    nlohmann::ordered_json r{{"epoch", e.epoch},
                             {"learning_rate", e.learning_rate},
                             {"caption_loss", e.caption_loss},
                             {"attention_loss", e.attention_loss},
                             {"total_loss", e.total_loss},
                             {"steps", e.steps},
                             {"tokens", e.tokens}};
    if (e.validation_cider) r["validation_cider"] = *e.validation_cider;
    list.push_back(std::move(r));
  }
  if (!lambda_search.empty()) {
    auto& grid = j["lambda_search"] = nlohmann::ordered_json::array();
    for (const auto& [lambda, score] : lambda_search) grid.push_back({{"lambda", lambda}, {"cider", score}});
  }
  if (selected_lambda) j["selected_lambda"] = *selected_lambda;
  return j.dump(2) + "\n";
}

BasisLoss basis_caption_loss(Tape& tape, const BasisGraph& g, const VideoFeatures& video,
                             std::span<const TokenId> caption, double beta) {
  const EncodedVideo enc = encode_video(tape, g, video);
  const auto steps = teacher_forced_steps(tape, g, enc, caption);
  std::vector<Var> logits, weights;
  for (const auto& s : steps) {
    logits.push_back(s.logits);
    weights.push_back(s.weights2d);
  }
  BasisLoss out;
  out.caption = caption_nll(logits, caption);
  out.attention = attention_coherent_loss(tape, weights);
  out.total = combined_loss(out.caption, out.attention, beta);
  out.tokens = steps.size();
  return out;
}

FrozenSample freeze_sample(const BasisModel& basis, const VideoFeatures& video, std::span<const TokenId> caption) {
  TeacherForcedResult r = forward_teacher_forced(basis, video, caption);
  return FrozenSample{std::vector<TokenId>(caption.begin(), caption.end()), std::move(r.h_prev),
                      std::move(r.context), std::move(r.e_prev)};
}

namespace {

Var memory_nll(const MemoryGraph& g, Var keys, std::span<const Var> h_prev, std::span<const Var> context,
               std::span<const Var> e_prev, std::span<const TokenId> caption) {
  if (caption.size() < 2 || h_prev.size() != caption.size() - 1)
    throw ContractViolation("memory loss needs one basis triple per predicted token");
  Var total;
  for (std::size_t t = 0; t < h_prev.size(); ++t) {
    Var q = relevance_scores(g, keys, context[t], e_prev[t], h_prev[t]);
    Var term = ad::pick(ad::log_softmax(q), caption[t + 1]);
    total = total.valid() ? ad::add(total, term) : term;
  }
  return ad::scale(total, -1.0);
}

}  // namespace

Var memory_caption_loss(Tape& tape, const MemoryGraph& g, Var keys, const FrozenSample& sample) {
  std::vector<Var> h, c, e;
  for (std::size_t t = 0; t < sample.h_prev.size(); ++t) {
    h.push_back(tape.constant(sample.h_prev[t]));
    c.push_back(tape.constant(sample.context[t]));
    e.push_back(tape.constant(sample.e_prev[t]));
  }
  return memory_nll(g, keys, h, c, e, sample.caption);
}

Var memory_caption_loss(Tape& tape, const MemoryGraph& g, Var keys, const BasisGraph& basis,
                        const VideoFeatures& video, std::span<const TokenId> caption) {
  const EncodedVideo enc = encode_video(tape, basis, video);
  std::vector<Var> h, c, e;
  for (const auto& s : teacher_forced_steps(tape, basis, enc, caption)) {
    h.push_back(tape.detach(s.h_prev));
    c.push_back(tape.detach(s.context));
    e.push_back(tape.detach(s.e_prev));
  }
  return memory_nll(g, keys, h, c, e, caption);
}

namespace {

struct Sample {
  const VideoFeatures* video;
  std::vector<TokenId> caption;
};

std::vector<Sample> training_samples(const Dataset& data, const Vocabulary& vocab) {
  std::vector<Sample> out;
  for (auto& s : data.manifest.samples(Split::train, vocab))
    out.push_back(Sample{&data.video(s.video_id), std::move(s.token_ids)});
  if (out.empty()) throw DataError("training split has no captions");
  return out;
}

bool can_validate(const Dataset& data) {
  const std::size_t n = data.manifest.video_ids(Split::val).size();
  if (n >= 2) return true;
  log::warn_once("validation split has " + std::to_string(n) +
                 " video(s); CIDEr needs 2, so the last epoch is selected");
  return false;
}

bool is_eval_epoch(const TrainConfig& cfg, std::size_t epoch) {
  return epoch == cfg.epochs || (cfg.eval_every > 0 && epoch % cfg.eval_every == 0);
}

// Raises NumericalError naming the first non-finite array, parameters before gradients.
void check_finite(double loss, const ParameterSet& params, std::span<const Tensor> grads, std::size_t epoch) {
  std::string culprit = params.first_non_finite();
  if (culprit.empty())
    for (std::size_t i = 0; i < grads.size(); ++i)
      if (!grads[i].all_finite()) {
        culprit = "gradient of " + params.entry(i).name;
        break;
      }
  if (culprit.empty() && std::isfinite(loss)) return;
  throw NumericalError("non-finite training state at epoch " + std::to_string(epoch) + " (loss " +
                       std::to_string(loss) + "): first non-finite parameter " +
                       (culprit.empty() ? std::string("none; the loss itself") : culprit));
}

template <typename Model>
Model rounded_copy(const Model& model) {
  ParameterSet p = model.params();
  checkpoint::round_to_f32(p);
  return Model::from_params(std::move(p));
}

// Generic epoch loop. `batch_loss` builds the summed loss of a batch on the
// tape from bound parameter Vars, reporting per-caption sums through the
// accumulator; `validate` scores a rounded model copy.
template <typename Model, typename BatchLoss, typename Validate>
std::pair<Model, Model> run_epochs(Model model, std::size_t sample_count, const TrainConfig& cfg, bool validation,
                                   TrainReport& report, BatchLoss&& batch_loss, Validate&& validate) {
  AdamState adam = AdamState::for_shapes(model.params().shapes(), cfg.base_lr);
  std::mt19937_64 shuffle_rng(cfg.seed ^ 0x5DEECE66DULL);
  std::vector<std::size_t> order(sample_count);
  std::iota(order.begin(), order.end(), 0);

  std::optional<Model> best;
  double best_score = -std::numeric_limits<double>::infinity();
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    adam.learning_rate = learning_rate_at(cfg, epoch);
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    EpochRecord rec;
    rec.epoch = epoch;
    rec.learning_rate = adam.learning_rate;
    for (std::size_t start = 0; start < sample_count; start += cfg.batch_size) {
      const std::size_t stop = std::min(sample_count, start + cfg.batch_size);
      const std::span<const std::size_t> batch(order.data() + start, stop - start);
      Tape tape;
      const std::vector<Var> vars = model.params().bind(tape, true);
      Var sum = batch_loss(tape, vars, batch, rec);
      Var loss = ad::scale(sum, 1.0 / static_cast<double>(batch.size()));
      tape.backward(loss);
      std::vector<Tensor> grads;
      for (const Var& v : vars) grads.push_back(tape.grad(v));
      check_finite(loss.value().item(), model.params(), grads, epoch);
      const auto ptrs = model.params().pointers();
      adam_step(adam, ptrs, grads, cfg.clip);
      check_finite(loss.value().item(), model.params(), {}, epoch);
      ++rec.steps;
    }
    const auto n = static_cast<double>(sample_count);
    rec.caption_loss /= n;
    rec.attention_loss /= n;
    rec.total_loss /= n;
    log::info(report.stage + " epoch " + std::to_string(epoch) + " loss " + std::to_string(rec.total_loss));

    if (validation && is_eval_epoch(cfg, epoch)) {
      Model snapshot = rounded_copy(model);
      const double score = validate(snapshot);
      rec.validation_cider = score;
      if (score >= best_score) {
        best_score = score;
        best = std::move(snapshot);
        report.selected_epoch = epoch;
        report.selected_cider = score;
      }
    }
    report.epochs.push_back(rec);
  }
  Model final_model = rounded_copy(model);
  if (!best) {
    best = final_model;
    report.selected_epoch = cfg.epochs;
  }
  return {std::move(*best), std::move(final_model)};
}

}  // namespace

BasisTrainingResult train_basis(const Dataset& data, const Vocabulary& vocab, const ModelDims& dims,
                                const TrainConfig& cfg) {
  cfg.validate();
  dims.validate();
  if (dims.vocab_size != vocab.size()) throw ShapeError("model vocabulary size disagrees with the vocabulary");
  if (dims.frame_dim != data.frame_dim() || dims.clip_dim != data.clip_dim())
    throw ShapeError("model feature dimensions disagree with the dataset");
  const std::vector<Sample> samples = training_samples(data, vocab);
  const bool validation = can_validate(data);

  TrainReport report;
  report.stage = "basis";
  auto batch_loss = [&](Tape& tape, std::span<const Var> vars, std::span<const std::size_t> batch,
                        EpochRecord& rec) {
    const BasisGraph g = BasisGraph::from_vars(vars, dims);
    Var sum;
    for (std::size_t idx : batch) {
      BasisLoss l = basis_caption_loss(tape, g, *samples[idx].video, samples[idx].caption, cfg.beta);
      rec.caption_loss += l.caption.value().item();
      rec.attention_loss += l.attention.value().item();
      rec.total_loss += l.total.value().item();
      rec.tokens += l.tokens;
      sum = sum.valid() ? ad::add(sum, l.total) : l.total;
    }
    return sum;
  };
  auto validate = [&](const BasisModel& m) {
    DecodeOptions opt;
    opt.max_len = cfg.max_len;
    return evaluate_corpus(data, vocab, Split::val, m, nullptr, nullptr, opt).cider;
  };
  auto [best, final_model] = run_epochs(BasisModel::create(dims, cfg.seed), samples.size(), cfg, validation,
                                        report, batch_loss, validate);
  return BasisTrainingResult{std::move(best), std::move(final_model), std::move(report)};
}

std::vector<std::pair<double, double>> lambda_sweep(const BasisModel& basis, const MemoryDecoderModel& memdec,
                                                    const MemoryBank& bank, const Dataset& data,
                                                    const Vocabulary& vocab, Split split, std::size_t max_len) {
  std::vector<std::pair<double, double>> out;
  for (int i = 0; i <= 10; ++i) {
    DecodeOptions opt;
    opt.lambda = i / 10.0;
    opt.max_len = max_len;
    out.emplace_back(opt.lambda, evaluate_corpus(data, vocab, split, basis, &memdec, &bank, opt).cider);
  }
  return out;
}

double select_lambda(const std::vector<std::pair<double, double>>& sweep) {
  if (sweep.empty()) throw ContractViolation("empty lambda sweep");
  auto best = sweep.front();
  for (const auto& p : sweep)
    if (p.second > best.second || (p.second == best.second && p.first < best.first)) best = p;
  return best.first;
}

MemoryTrainingResult train_memory_decoder(const BasisModel& basis, const MemoryBank& bank, const Dataset& data,
                                          const Vocabulary& vocab, std::size_t attn_dim, const TrainConfig& cfg) {
  cfg.validate();
  const std::uint64_t digest = checkpoint::digest(basis.params());
  if (bank.basis_digest != digest)
    throw DataError("refusing to train: memory was built from basis " + io::hex64(bank.basis_digest) +
                    ", supplied basis is " + io::hex64(digest));
  if (bank.size() != vocab.size()) throw ShapeError("memory size disagrees with the vocabulary");
  if (bank.proj_dim != basis.dims().proj_dim || bank.embed_dim != basis.dims().embed_dim)
    throw ShapeError("memory dimensions disagree with the basis model");

  const std::vector<Sample> raw = training_samples(data, vocab);
  std::vector<FrozenSample> frozen;
  for (const Sample& s : raw) frozen.push_back(freeze_sample(basis, *s.video, s.caption));
  const bool validation = can_validate(data);

  MemoryDecoderDims mdims{attn_dim, bank.proj_dim, bank.embed_dim, basis.dims().hidden_dim, bank.category_dim};
  MemoryDecoderModel init = MemoryDecoderModel::create(mdims, cfg.seed);

  {
    // The basis must receive no gradient through the memory loss.
    Tape tape;
    const auto bvars = basis.params().bind(tape, true);
    const BasisGraph bg = BasisGraph::from_vars(bvars, basis.dims());
    const MemoryGraph mg = MemoryGraph::bind(tape, init, true);
    tape.backward(memory_caption_loss(tape, mg, memory_keys(tape, mg, bank), bg, *raw.front().video,
                                      raw.front().caption));
    for (std::size_t i = 0; i < bvars.size(); ++i)
      if (tape.grad(bvars[i]).values() != Tensor(bvars[i].shape(), 0.0).values())
        throw ContractViolation("basis array " + basis.params().entry(i).name + " received a gradient");
  }

  TrainReport report;
  report.stage = "memory";
  auto batch_loss = [&](Tape& tape, std::span<const Var> vars, std::span<const std::size_t> batch,
                        EpochRecord& rec) {
    const MemoryGraph g = MemoryGraph::from_vars(vars, mdims);
    const Var keys = memory_keys(tape, g, bank);
    Var sum;
    for (std::size_t idx : batch) {
      Var l = memory_caption_loss(tape, g, keys, frozen[idx]);
      rec.caption_loss += l.value().item();
      rec.total_loss += l.value().item();
      rec.tokens += frozen[idx].h_prev.size();
      sum = sum.valid() ? ad::add(sum, l) : l;
    }
    return sum;
  };
  auto validate = [&](const MemoryDecoderModel& m) {
    DecodeOptions opt;
    opt.lambda = 1.0;
    opt.max_len = cfg.max_len;
    return evaluate_corpus(data, vocab, Split::val, basis, &m, &bank, opt).cider;
  };
  auto [best, final_model] = run_epochs(std::move(init), frozen.size(), cfg, validation, report, batch_loss,
                                        validate);

  double lambda = 0.0;
  if (validation) {
    report.lambda_search = lambda_sweep(basis, best, bank, data, vocab, Split::val, cfg.max_len);
    lambda = select_lambda(report.lambda_search);
  }
  report.selected_lambda = lambda;
  return MemoryTrainingResult{std::move(best), std::move(final_model), std::move(report), lambda};
}

}  // namespace marn
