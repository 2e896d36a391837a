#include "marn/autodiff.hpp"

#include <algorithm>
#include <cmath>

#include "marn/error.hpp"

namespace marn {

const Tensor& Var::value() const {
  if (!tape_) throw ContractViolation("use of an unbound Var");
  return tape_->value_of(id_);
}

bool Var::requires_grad() const { return tape_ && tape_->requires_grad(id_); }

Var Tape::leaf(Tensor value, bool requires_grad) {
  nodes_.push_back(Node{std::move(value), Tensor{}, requires_grad, nullptr});
  return Var(this, static_cast<std::uint32_t>(nodes_.size() - 1));
}

Var Tape::detach(Var v) { return constant(v.value()); }

Var Tape::record(Tensor value, std::span<const Var> inputs, Backprop rule) {
  bool needs = false;
  for (const Var& in : inputs) {
    if (in.tape() != this) throw ContractViolation("op mixes Vars from different tapes");
    needs = needs || nodes_[in.id()].requires_grad;
  }
  nodes_.push_back(Node{std::move(value), Tensor{}, needs, needs ? std::move(rule) : Backprop{}});
  return Var(this, static_cast<std::uint32_t>(nodes_.size() - 1));
}

Tensor& Tape::grad_buffer(std::uint32_t id) {
  Node& node = nodes_[id];
  if (node.grad.empty()) node.grad = Tensor(node.value.shape(), 0.0);
  return node.grad;
}

void Tape::backward(Var loss) {
  if (loss.tape() != this) throw ContractViolation("backward: loss was not produced on this tape");
  if (loss.value().size() != 1)
    throw ContractViolation("backward: loss must be a scalar, got shape " + shape_string(loss.shape()));
  for (Node& node : nodes_) node.grad = Tensor{};
  grad_buffer(loss.id()).fill(1.0);
  for (std::uint32_t id = loss.id() + 1; id-- > 0;) {
    Node& node = nodes_[id];
    if (node.rule && !node.grad.empty()) node.rule(*this, id);
  }
}

void Tape::truncate(std::size_t n) {
  if (n < nodes_.size()) nodes_.resize(n);
}

Tensor Tape::grad(Var v) const {
  const Node& node = nodes_.at(v.id());
  if (node.grad.empty()) return Tensor(node.value.shape(), 0.0);
  return node.grad;
}

Tensor softmax(const Tensor& x) {
  if (x.empty()) throw ContractViolation("softmax of an empty vector");
  const double top = *std::max_element(x.data().begin(), x.data().end());
  Tensor out(x.shape());
  double total = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    out[i] = std::exp(x[i] - top);
    total += out[i];
  }
  for (std::size_t i = 0; i < x.size(); ++i) out[i] /= total;
  return out;
}

namespace ad {

namespace {

struct MatView {
  std::size_t rows;
  std::size_t cols;
};

MatView left_view(const Tensor& t) {
  if (t.rank() == 1) return {1, t.size()};
  if (t.rank() == 2) return {t.shape()[0], t.shape()[1]};
  throw ShapeError("matmul operand must be rank 1 or 2, got " + shape_string(t.shape()));
}

MatView right_view(const Tensor& t) {
  if (t.rank() == 1) return {t.size(), 1};
  if (t.rank() == 2) return {t.shape()[0], t.shape()[1]};
  throw ShapeError("matmul operand must be rank 1 or 2, got " + shape_string(t.shape()));
}

void require_same_shape(const char* op, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape())
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_string(a.shape()) + " vs " +
                     shape_string(b.shape()));
}

void require_vector(const char* op, const Tensor& t) {
  if (t.rank() != 1) throw ShapeError(std::string(op) + ": expected a vector, got " + shape_string(t.shape()));
}

void require_matrix(const char* op, const Tensor& t) {
  if (t.rank() != 2) throw ShapeError(std::string(op) + ": expected a matrix, got " + shape_string(t.shape()));
}

// Unary element-wise op whose derivative is expressed through input x and output y.
template <typename Fwd, typename Deriv>
Var elementwise(Var a, Fwd fwd, Deriv deriv) {
  const Tensor& x = a.value();
  Tensor y(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = fwd(x[i]);
  const std::uint32_t in = a.id();
  Var inputs[] = {a};
  return a.tape()->record(std::move(y), inputs, [in, deriv](Tape& tape, std::uint32_t self) {
    const Tensor& xv = tape.value_of(in);
    const Tensor& yv = tape.value_of(self);
    const Tensor& gy = tape.grad_of(self);
    Tensor& gx = tape.grad_buffer(in);
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += gy[i] * deriv(xv[i], yv[i]);
  });
}

}  // namespace

Var matmul(Var a, Var b) {
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  const MatView va = left_view(av);
  const MatView vb = right_view(bv);
  if (va.cols != vb.rows)
    throw ShapeError("matmul: inner dimensions disagree for " + shape_string(av.shape()) + " x " +
                     shape_string(bv.shape()));
  const std::size_t p = va.rows, q = va.cols, r = vb.cols;
  Shape out_shape;
  if (av.rank() == 2) out_shape.push_back(p);
  if (bv.rank() == 2) out_shape.push_back(r);
  Tensor c(out_shape);
  const double* A = av.data().data();
  const double* B = bv.data().data();
  double* C = c.data().data();
  for (std::size_t i = 0; i < p; ++i)
    for (std::size_t k = 0; k < q; ++k) {
      const double aik = A[i * q + k];
      for (std::size_t j = 0; j < r; ++j) C[i * r + j] += aik * B[k * r + j];
    }
  const std::uint32_t ia = a.id(), ib = b.id();
  Var inputs[] = {a, b};
  return a.tape()->record(std::move(c), inputs, [ia, ib, p, q, r](Tape& tape, std::uint32_t self) {
    const double* G = tape.grad_of(self).data().data();
    if (tape.requires_grad(ia)) {
      const double* Bv = tape.value_of(ib).data().data();
      double* GA = tape.grad_buffer(ia).data().data();
      for (std::size_t i = 0; i < p; ++i)
        for (std::size_t k = 0; k < q; ++k) {
          double acc = 0.0;
          for (std::size_t j = 0; j < r; ++j) acc += G[i * r + j] * Bv[k * r + j];
          GA[i * q + k] += acc;
        }
    }
    if (tape.requires_grad(ib)) {
      const double* Av = tape.value_of(ia).data().data();
      double* GB = tape.grad_buffer(ib).data().data();
      for (std::size_t i = 0; i < p; ++i)
        for (std::size_t k = 0; k < q; ++k) {
          const double aik = Av[i * q + k];
          for (std::size_t j = 0; j < r; ++j) GB[k * r + j] += aik * G[i * r + j];
        }
    }
  });
}

Var transpose(Var a) {
  const Tensor& x = a.value();
  require_matrix("transpose", x);
  const std::size_t p = x.shape()[0], q = x.shape()[1];
  Tensor y(Shape{q, p});
  for (std::size_t i = 0; i < p; ++i)
    for (std::size_t j = 0; j < q; ++j) y.at(j, i) = x.at(i, j);
  const std::uint32_t in = a.id();
  Var inputs[] = {a};
  return a.tape()->record(std::move(y), inputs, [in, p, q](Tape& tape, std::uint32_t self) {
    const Tensor& gy = tape.grad_of(self);
    Tensor& gx = tape.grad_buffer(in);
    for (std::size_t i = 0; i < p; ++i)
      for (std::size_t j = 0; j < q; ++j) gx.at(i, j) += gy.at(j, i);
  });
}

Var add(Var a, Var b) {
  require_same_shape("add", a.value(), b.value());
  Tensor y = a.value();
  const Tensor& bv = b.value();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] += bv[i];
  const std::uint32_t ia = a.id(), ib = b.id();
  Var inputs[] = {a, b};
  return a.tape()->record(std::move(y), inputs, [ia, ib](Tape& tape, std::uint32_t self) {
    const Tensor& g = tape.grad_of(self);
    for (std::uint32_t in : {ia, ib}) {
      if (!tape.requires_grad(in)) continue;
      Tensor& gx = tape.grad_buffer(in);
      for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
    }
  });
}

Var sub(Var a, Var b) {
  require_same_shape("sub", a.value(), b.value());
  Tensor y = a.value();
  const Tensor& bv = b.value();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] -= bv[i];
  const std::uint32_t ia = a.id(), ib = b.id();
  Var inputs[] = {a, b};
  return a.tape()->record(std::move(y), inputs, [ia, ib](Tape& tape, std::uint32_t self) {
    const Tensor& g = tape.grad_of(self);
    if (tape.requires_grad(ia)) {
      Tensor& ga = tape.grad_buffer(ia);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
    }
    if (tape.requires_grad(ib)) {
      Tensor& gb = tape.grad_buffer(ib);
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
    }
  });
}

Var mul(Var a, Var b) {
  require_same_shape("mul", a.value(), b.value());
  Tensor y = a.value();
  const Tensor& bv = b.value();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] *= bv[i];
  const std::uint32_t ia = a.id(), ib = b.id();
  Var inputs[] = {a, b};
  return a.tape()->record(std::move(y), inputs, [ia, ib](Tape& tape, std::uint32_t self) {
    const Tensor& g = tape.grad_of(self);
    if (tape.requires_grad(ia)) {
      const Tensor& bv2 = tape.value_of(ib);
      Tensor& ga = tape.grad_buffer(ia);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * bv2[i];
    }
    if (tape.requires_grad(ib)) {
      const Tensor& av2 = tape.value_of(ia);
      Tensor& gb = tape.grad_buffer(ib);
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * av2[i];
    }
  });
}

Var scale(Var a, double factor) {
  Tensor y = a.value();
  for (double& v : y.data()) v *= factor;
  const std::uint32_t in = a.id();
  Var inputs[] = {a};
  return a.tape()->record(std::move(y), inputs, [in, factor](Tape& tape, std::uint32_t self) {
    const Tensor& g = tape.grad_of(self);
    Tensor& gx = tape.grad_buffer(in);
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += factor * g[i];
  });
}

Var add_rowvec(Var m, Var v) {
  const Tensor& mv = m.value();
  const Tensor& vv = v.value();
  require_matrix("add_rowvec", mv);
  require_vector("add_rowvec", vv);
  const std::size_t p = mv.shape()[0], q = mv.shape()[1];
  if (vv.size() != q)
    throw ShapeError("add_rowvec: row length " + std::to_string(q) + " vs vector " + shape_string(vv.shape()));
  Tensor y = mv;
  for (std::size_t i = 0; i < p; ++i)
    for (std::size_t j = 0; j < q; ++j) y.at(i, j) += vv[j];
  const std::uint32_t im = m.id(), iv = v.id();
  Var inputs[] = {m, v};
  return m.tape()->record(std::move(y), inputs, [im, iv, p, q](Tape& tape, std::uint32_t self) {
    const Tensor& g = tape.grad_of(self);
    if (tape.requires_grad(im)) {
      Tensor& gm = tape.grad_buffer(im);
      for (std::size_t i = 0; i < g.size(); ++i) gm[i] += g[i];
    }
    if (tape.requires_grad(iv)) {
      Tensor& gv = tape.grad_buffer(iv);
      for (std::size_t i = 0; i < p; ++i)
        for (std::size_t j = 0; j < q; ++j) gv[j] += g.at(i, j);
    }
  });
}

Var tanh(Var a) {
  return elementwise(a, [](double x) { return std::tanh(x); }, [](double, double y) { return 1.0 - y * y; });
}

Var sigmoid(Var a) {
  return elementwise(
      a, [](double x) { return 1.0 / (1.0 + std::exp(-x)); }, [](double, double y) { return y * (1.0 - y); });
}

Var abs(Var a) {
  return elementwise(
      a, [](double x) { return std::abs(x); },
      [](double x, double) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); });
}

Var log(Var a) {
  return elementwise(a, [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

Var softmax(Var x) {
  require_vector("softmax", x.value());
  Tensor y = marn::softmax(x.value());
  const std::uint32_t in = x.id();
  Var inputs[] = {x};
  return x.tape()->record(std::move(y), inputs, [in](Tape& tape, std::uint32_t self) {
    const Tensor& yv = tape.value_of(self);
    const Tensor& g = tape.grad_of(self);
    double dot = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) dot += g[i] * yv[i];
    Tensor& gx = tape.grad_buffer(in);
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += yv[i] * (g[i] - dot);
  });
}

Var log_softmax(Var x) {
  const Tensor& xv = x.value();
  require_vector("log_softmax", xv);
  if (xv.empty()) throw ContractViolation("log_softmax of an empty vector");
  const double top = *std::max_element(xv.data().begin(), xv.data().end());
  double total = 0.0;
  for (double v : xv.data()) total += std::exp(v - top);
  const double log_z = top + std::log(total);
  Tensor y(xv.shape());
  for (std::size_t i = 0; i < xv.size(); ++i) y[i] = xv[i] - log_z;
  const std::uint32_t in = x.id();
  Var inputs[] = {x};
  return x.tape()->record(std::move(y), inputs, [in](Tape& tape, std::uint32_t self) {
    const Tensor& yv = tape.value_of(self);
    const Tensor& g = tape.grad_of(self);
    double total_g = 0.0;
    for (double v : g.data()) total_g += v;
    Tensor& gx = tape.grad_buffer(in);
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] - std::exp(yv[i]) * total_g;
  });
}

Var sum(Var a) {
  double total = 0.0;
  for (double v : a.value().data()) total += v;
  const std::uint32_t in = a.id();
  Var inputs[] = {a};
  return a.tape()->record(Tensor::scalar(total), inputs, [in](Tape& tape, std::uint32_t self) {
    const double g = tape.grad_of(self)[0];
    Tensor& gx = tape.grad_buffer(in);
    for (double& v : gx.data()) v += g;
  });
}

Var pick(Var x, std::size_t index) {
  const Tensor& xv = x.value();
  require_vector("pick", xv);
  if (index >= xv.size())
    throw ShapeError("pick: index " + std::to_string(index) + " outside " + shape_string(xv.shape()));
  const std::uint32_t in = x.id();
  Var inputs[] = {x};
  return x.tape()->record(Tensor::scalar(xv[index]), inputs, [in, index](Tape& tape, std::uint32_t self) {
    tape.grad_buffer(in)[index] += tape.grad_of(self)[0];
  });
}

Var concat(std::span<const Var> parts) {
  if (parts.empty()) throw ContractViolation("concat of zero parts");
  std::vector<double> values;
  std::vector<std::uint32_t> ids;
  for (const Var& part : parts) {
    require_vector("concat", part.value());
    values.insert(values.end(), part.value().data().begin(), part.value().data().end());
    ids.push_back(part.id());
  }
  Tape* tape = parts.front().tape();
  return tape->record(Tensor::vector(std::move(values)), parts, [ids](Tape& t, std::uint32_t self) {
    const Tensor& g = t.grad_of(self);
    std::size_t offset = 0;
    for (std::uint32_t in : ids) {
      const std::size_t n = t.value_of(in).size();
      if (t.requires_grad(in)) {
        Tensor& gx = t.grad_buffer(in);
        for (std::size_t i = 0; i < n; ++i) gx[i] += g[offset + i];
      }
      offset += n;
    }
  });
}

Var slice(Var x, std::size_t begin, std::size_t end) {
  const Tensor& xv = x.value();
  require_vector("slice", xv);
  if (begin >= end || end > xv.size())
    throw ShapeError("slice [" + std::to_string(begin) + ", " + std::to_string(end) + ") of " +
                     shape_string(xv.shape()));
  Tensor y = Tensor::vector(std::vector<double>(xv.data().begin() + begin, xv.data().begin() + end));
  const std::uint32_t in = x.id();
  Var inputs[] = {x};
  return x.tape()->record(std::move(y), inputs, [in, begin](Tape& tape, std::uint32_t self) {
    const Tensor& g = tape.grad_of(self);
    Tensor& gx = tape.grad_buffer(in);
    for (std::size_t i = 0; i < g.size(); ++i) gx[begin + i] += g[i];
  });
}

Var column(Var m, std::size_t j) {
  const Tensor& mv = m.value();
  require_matrix("column", mv);
  const std::size_t p = mv.shape()[0], q = mv.shape()[1];
  if (j >= q) throw ShapeError("column " + std::to_string(j) + " outside " + shape_string(mv.shape()));
  Tensor y(Shape{p});
  for (std::size_t i = 0; i < p; ++i) y[i] = mv.at(i, j);
  const std::uint32_t in = m.id();
  Var inputs[] = {m};
  return m.tape()->record(std::move(y), inputs, [in, j, p](Tape& tape, std::uint32_t self) {
    const Tensor& g = tape.grad_of(self);
    Tensor& gm = tape.grad_buffer(in);
    for (std::size_t i = 0; i < p; ++i) gm.at(i, j) += g[i];
  });
}

Var slice_cols(Var m, std::size_t begin, std::size_t end) {
  const Tensor& mv = m.value();
  require_matrix("slice_cols", mv);
  const std::size_t p = mv.shape()[0], q = mv.shape()[1];
  if (begin >= end || end > q)
    throw ShapeError("slice_cols [" + std::to_string(begin) + ", " + std::to_string(end) + ") of " +
                     shape_string(mv.shape()));
  const std::size_t w = end - begin;
  Tensor y(Shape{p, w});
  for (std::size_t i = 0; i < p; ++i)
    for (std::size_t j = 0; j < w; ++j) y.at(i, j) = mv.at(i, begin + j);
  const std::uint32_t in = m.id();
  Var inputs[] = {m};
  return m.tape()->record(std::move(y), inputs, [in, begin, p, w](Tape& tape, std::uint32_t self) {
    const Tensor& g = tape.grad_of(self);
    Tensor& gm = tape.grad_buffer(in);
    for (std::size_t i = 0; i < p; ++i)
      for (std::size_t j = 0; j < w; ++j) gm.at(i, begin + j) += g.at(i, j);
  });
}

}  // namespace ad
}  // namespace marn
