#include "marn/memory_decoder.hpp"

#include <cmath>

#include "marn/error.hpp"

namespace marn {

namespace {

struct Spec {
  const char* name;
  Shape shape;
  std::size_t fan_in;
};

std::vector<Spec> specs(const MemoryDecoderDims& d) {
  const std::size_t A = d.attn_dim;
  std::vector<Spec> out = {
      {"memdec/v", {A}, A},
      {"memdec/W_c", {A, 2 * d.proj_dim}, 2 * d.proj_dim},
      {"memdec/W_g", {A, d.proj_dim}, d.proj_dim},
      {"memdec/W_ep", {A, d.embed_dim}, d.embed_dim},
      {"memdec/W_e", {A, d.embed_dim}, d.embed_dim},
      {"memdec/W_h", {A, d.hidden_dim}, d.hidden_dim},
  };
  if (d.category_dim > 0) out.push_back({"memdec/W_u", {A, d.category_dim}, d.category_dim});
  out.push_back({"memdec/b", {A}, A});
  return out;
}

}  // namespace

MemoryDecoderModel MemoryDecoderModel::create(const MemoryDecoderDims& dims, std::uint64_t seed) {
  if (dims.attn_dim == 0 || dims.proj_dim == 0 || dims.embed_dim == 0 || dims.hidden_dim == 0)
    throw ConfigError("memory decoder dimensions must be positive");
  std::mt19937_64 rng(seed);
  MemoryDecoderModel model;
  model.dims_ = dims;
  for (const Spec& s : specs(dims)) model.params_.add(s.name, uniform_init(s.shape, s.fan_in, rng));
  return model;
}

MemoryDecoderModel MemoryDecoderModel::from_params(ParameterSet params) {
  for (const char* name : {"memdec/v", "memdec/W_c", "memdec/W_g", "memdec/W_ep", "memdec/W_h"})
    if (!params.contains(name)) throw DataError(std::string("memory decoder checkpoint lacks ") + name);
  MemoryDecoderDims d;
  d.attn_dim = params["memdec/v"].size();
  d.proj_dim = params["memdec/W_g"].cols();
  d.embed_dim = params["memdec/W_ep"].cols();
  d.hidden_dim = params["memdec/W_h"].cols();
  d.category_dim = params.contains("memdec/W_u") ? params["memdec/W_u"].cols() : 0;
  ParameterSet ordered;
  for (const Spec& s : specs(d)) {
    if (!params.contains(s.name)) throw DataError(std::string("memory decoder checkpoint lacks ") + s.name);
    Tensor& t = params[s.name];
    if (t.shape() != s.shape)
      throw ShapeError(std::string("memory decoder parameter ") + s.name + " has shape " + shape_string(t.shape()) +
                       ", expected " + shape_string(s.shape));
    ordered.add(s.name, std::move(t));
  }
  if (ordered.size() != params.size()) throw DataError("memory decoder checkpoint has unexpected extra blocks");
  MemoryDecoderModel model;
  model.dims_ = d;
  model.params_ = std::move(ordered);
  return model;
}

void MemoryDecoderModel::check_compatible(const MemoryBank& bank) const {
  if (bank.proj_dim != dims_.proj_dim || bank.embed_dim != dims_.embed_dim || bank.category_dim != dims_.category_dim)
    throw ShapeError("memory bank (m=" + std::to_string(bank.proj_dim) + ", d'=" + std::to_string(bank.embed_dim) +
                     ", U=" + std::to_string(bank.category_dim) + ") does not match the memory decoder (m=" +
                     std::to_string(dims_.proj_dim) + ", d'=" + std::to_string(dims_.embed_dim) +
                     ", U=" + std::to_string(dims_.category_dim) + ")");
}

MemoryGraph MemoryGraph::from_vars(std::span<const Var> vars, const MemoryDecoderDims& dims) {
  const std::size_t expected = dims.category_dim > 0 ? 8 : 7;
  if (vars.size() != expected) throw ContractViolation("memory graph needs " + std::to_string(expected) + " vars");
  MemoryGraph g;
  g.dims = dims;
  g.v = vars[0];
  g.W_c = vars[1];
  g.W_g = vars[2];
  g.W_ep = vars[3];
  g.W_e = vars[4];
  g.W_h = vars[5];
  if (dims.category_dim > 0) g.W_u = vars[6];
  g.b = vars.back();
  return g;
}

MemoryGraph MemoryGraph::bind(Tape& tape, const MemoryDecoderModel& model, bool requires_grad) {
  const auto vars = model.params().bind(tape, requires_grad);
  return from_vars(vars, model.dims());
}

Var memory_keys(Tape& tape, const MemoryGraph& g, const MemoryBank& bank) {
  if (bank.proj_dim != g.dims.proj_dim || bank.embed_dim != g.dims.embed_dim ||
      bank.category_dim != g.dims.category_dim)
    throw ShapeError("memory bank dimensions do not match the memory decoder");
  Var keys = ad::add(ad::matmul(tape.constant(bank.g_matrix()), ad::transpose(g.W_g)),
                     ad::matmul(tape.constant(bank.e_matrix()), ad::transpose(g.W_e)));
  if (g.dims.category_dim > 0)
    keys = ad::add(keys, ad::matmul(tape.constant(bank.u_matrix()), ad::transpose(g.W_u)));
  return keys;
}

Var relevance_scores(const MemoryGraph& g, Var keys, Var context, Var e_prev, Var h_prev) {
  Var step = ad::add(ad::add(ad::matmul(g.W_c, context), ad::matmul(g.W_ep, e_prev)),
                     ad::add(ad::matmul(g.W_h, h_prev), g.b));
  return ad::matmul(ad::tanh(ad::add_rowvec(keys, step)), g.v);
}

Tensor relevance_scores(const MemoryDecoderModel& model, const MemoryBank& bank, const Tensor& context,
                        const Tensor& e_prev, const Tensor& h_prev) {
  model.check_compatible(bank);
  Tape tape;
  MemoryGraph g = MemoryGraph::bind(tape, model, false);
  Var keys = memory_keys(tape, g, bank);
  return relevance_scores(g, keys, tape.constant(context), tape.constant(e_prev), tape.constant(h_prev)).value();
}

Tensor memory_probabilities(const Tensor& scores) { return softmax(scores); }

void FusionConfig::validate() const {
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw ConfigError("fusion lambda must lie in [0, 1]");
}

Tensor fuse_probabilities(const Tensor& basis, const Tensor& memory, const FusionConfig& cfg) {
  cfg.validate();
  if (basis.shape() != memory.shape())
    throw ShapeError("fusion of " + shape_string(basis.shape()) + " and " + shape_string(memory.shape()));
  auto check = [](const Tensor& p, const char* which) {
    double total = 0.0;
    for (double x : p.data()) {
      if (!(x >= 0.0)) throw ContractViolation(std::string(which) + " has a negative or NaN probability");
      total += x;
    }
    if (std::abs(total - 1.0) > 1e-9) throw ContractViolation(std::string(which) + " does not sum to 1");
  };
  check(basis, "P_b");
  check(memory, "P_m");
  Tensor out(basis.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = (1.0 - cfg.lambda) * basis[i] + cfg.lambda * memory[i];
  return out;
}

MemoryRunner::MemoryRunner(const MemoryDecoderModel& model, const MemoryBank& bank)
    : graph_(MemoryGraph::bind(tape_, model, false)) {
  model.check_compatible(bank);
  keys_ = memory_keys(tape_, graph_, bank);
  mark_ = tape_.size();
}

Tensor MemoryRunner::probabilities(const Tensor& context, const Tensor& e_prev, const Tensor& h_prev) {
  Var q = relevance_scores(graph_, keys_, tape_.constant(context), tape_.constant(e_prev), tape_.constant(h_prev));
  Tensor p = softmax(q.value());
  tape_.truncate(mark_);
  return p;
}

}  // namespace marn
