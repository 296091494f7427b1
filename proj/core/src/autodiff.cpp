#include "protopop/autodiff.hpp"

#include <algorithm>
#include <cmath>

#include "protopop/error.hpp"

namespace protopop {

Parameter::Parameter(std::string name_, Tensor value_)
    : name(std::move(name_)), value(std::move(value_)), grad(value.rows(), value.cols()) {}

namespace ad {

const Tensor& Var::value() const { return graph_->value(id_); }

double Var::scalar() const {
  const Tensor& v = value();
  if (v.rows() != 1 || v.cols() != 1) throw ShapeError("scalar() on non-scalar node " + v.shape_string());
  return v[0];
}

Var Graph::push(Node node) {
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

Var Graph::constant(Tensor value) {
  if (!value.all_finite()) throw NumericError("non-finite value in graph constant");
  Node node;
  node.op = "constant";
  node.value = std::move(value);
  return push(std::move(node));
}

Var Graph::parameter(Parameter& param) {
  if (!param.value.all_finite()) throw NumericError("non-finite value in parameter " + param.name);
  Node node;
  node.op = "parameter";
  node.value = param.value;
  node.needs_grad = param.requires_grad;
  node.param = &param;
  return push(std::move(node));
}

Var Graph::record(const char* op, Tensor value, std::vector<Var> inputs, Backprop backprop) {
  if (!value.all_finite()) {
    throw NumericError(std::string("non-finite value produced by ") + op);
  }
  Node node;
  node.op = op;
  node.value = std::move(value);
  for (const Var& in : inputs) {
    if (in.graph_ != this) throw ShapeError(std::string(op) + ": input belongs to another graph");
    node.inputs.push_back(in.id_);
    node.needs_grad = node.needs_grad || nodes_[in.id_].needs_grad;
  }
  if (node.needs_grad) node.backprop = std::move(backprop);
  return push(std::move(node));
}

void Graph::accumulate(Var v, const Tensor& delta) {
  Node& node = nodes_[v.id_];
  if (!node.needs_grad) return;
  if (!delta.same_shape(node.value)) {
    throw ShapeError("gradient shape " + delta.shape_string() + " does not match node " +
                     node.op + " " + node.value.shape_string());
  }
  if (!node.has_grad) {
    node.grad = delta;
    node.has_grad = true;
    return;
  }
  auto dst = node.grad.values();
  auto src = delta.values();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

Tensor Graph::gradient(Var v) const {
  const Node& node = nodes_[v.id_];
  if (node.has_grad) return node.grad;
  return Tensor(node.value.rows(), node.value.cols());
}

void Graph::backward(Var loss) {
  if (loss.graph_ != this) throw ShapeError("backward: loss belongs to another graph");
  const Tensor& lv = nodes_[loss.id_].value;
  if (lv.rows() != 1 || lv.cols() != 1) {
    throw ShapeError("backward requires a scalar loss, got " + lv.shape_string());
  }
  for (Node& node : nodes_) {
    node.has_grad = false;
    node.grad = Tensor();
  }
  if (!nodes_[loss.id_].needs_grad) return;
  nodes_[loss.id_].grad = Tensor(1, 1, 1.0);
  nodes_[loss.id_].has_grad = true;

  for (std::size_t i = loss.id_ + 1; i-- > 0;) {
    Node& node = nodes_[i];
    if (!node.has_grad || !node.backprop) continue;
    // The closure may accumulate into other nodes; copy the gradient first.
    const Tensor out_grad = node.grad;
    node.backprop(*this, out_grad);
  }

  for (Node& node : nodes_) {
    if (node.param == nullptr || !node.has_grad) continue;
    if (!node.grad.all_finite()) throw NumericError("non-finite gradient for " + node.param->name);
    Tensor& dst = node.param->grad;
    if (!dst.same_shape(node.grad)) dst = Tensor(node.grad.rows(), node.grad.cols());
    auto d = dst.values();
    auto s = node.grad.values();
    for (std::size_t k = 0; k < d.size(); ++k) d[k] += s[k];
  }
}

namespace {

void require(bool ok, const char* op, const Tensor& a, const Tensor& b) {
  if (!ok) throw ShapeError(std::string(op) + ": incompatible shapes " + a.shape_string() + " and " +
                            b.shape_string());
}

Tensor elementwise(const Tensor& a, const Tensor& b, double (*fn)(double, double)) {
  Tensor out(a.rows(), a.cols());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = fn(a[i], b[i]);
  return out;
}

}  // namespace

Var matmul(Var a, Var b) {
  require(a.cols() == b.rows(), "matmul", a.value(), b.value());
  return a.graph().record("matmul", protopop::matmul(a.value(), b.value()), {a, b},
                          [a, b](Graph& g, const Tensor& dc) {
                            if (g.needs_grad(a)) g.accumulate(a, protopop::matmul(dc, protopop::transpose(b.value())));
                            if (g.needs_grad(b)) g.accumulate(b, protopop::matmul(protopop::transpose(a.value()), dc));
                          });
}

Var transpose(Var a) {
  return a.graph().record("transpose", protopop::transpose(a.value()), {a},
                          [a](Graph& g, const Tensor& dc) { g.accumulate(a, protopop::transpose(dc)); });
}

Var add(Var a, Var b) {
  require(a.value().same_shape(b.value()), "add", a.value(), b.value());
  return a.graph().record("add", elementwise(a.value(), b.value(), [](double x, double y) { return x + y; }),
                          {a, b}, [a, b](Graph& g, const Tensor& dc) {
                            g.accumulate(a, dc);
                            g.accumulate(b, dc);
                          });
}

Var sub(Var a, Var b) {
  require(a.value().same_shape(b.value()), "sub", a.value(), b.value());
  return a.graph().record("sub", elementwise(a.value(), b.value(), [](double x, double y) { return x - y; }),
                          {a, b}, [a, b](Graph& g, const Tensor& dc) {
                            g.accumulate(a, dc);
                            Tensor neg = dc;
                            for (double& v : neg.values()) v = -v;
                            g.accumulate(b, neg);
                          });
}

Var add_row(Var a, Var row) {
  require(row.rows() == 1 && row.cols() == a.cols(), "add_row", a.value(), row.value());
  Tensor out = a.value();
  const Tensor& r = row.value();
  for (std::size_t i = 0; i < out.rows(); ++i)
    for (std::size_t j = 0; j < out.cols(); ++j) out(i, j) += r[j];
  return a.graph().record("add_row", std::move(out), {a, row}, [a, row](Graph& g, const Tensor& dc) {
    g.accumulate(a, dc);
    if (g.needs_grad(row)) {
      Tensor dr(1, dc.cols());
      for (std::size_t i = 0; i < dc.rows(); ++i)
        for (std::size_t j = 0; j < dc.cols(); ++j) dr[j] += dc(i, j);
      g.accumulate(row, dr);
    }
  });
}

Var scale(Var a, double factor) {
  Tensor out = a.value();
  for (double& v : out.values()) v *= factor;
  return a.graph().record("scale", std::move(out), {a}, [a, factor](Graph& g, const Tensor& dc) {
    Tensor da = dc;
    for (double& v : da.values()) v *= factor;
    g.accumulate(a, da);
  });
}

Var mul_scalar(Var a, Var s) {
  if (s.rows() != 1 || s.cols() != 1) throw ShapeError("mul_scalar: scalar operand is " + s.value().shape_string());
  const double sv = s.value()[0];
  Tensor out = a.value();
  for (double& v : out.values()) v *= sv;
  return a.graph().record("mul_scalar", std::move(out), {a, s}, [a, s](Graph& g, const Tensor& dc) {
    const double sv = s.value()[0];
    if (g.needs_grad(a)) {
      Tensor da = dc;
      for (double& v : da.values()) v *= sv;
      g.accumulate(a, da);
    }
    if (g.needs_grad(s)) {
      Tensor ds(1, 1, dot(dc.values(), a.value().values()));
      g.accumulate(s, ds);
    }
  });
}

Var hadamard(Var a, Var b) {
  require(a.value().same_shape(b.value()), "hadamard", a.value(), b.value());
  return a.graph().record("hadamard",
                          elementwise(a.value(), b.value(), [](double x, double y) { return x * y; }),
                          {a, b}, [a, b](Graph& g, const Tensor& dc) {
                            if (g.needs_grad(a)) g.accumulate(a, elementwise(dc, b.value(), [](double x, double y) { return x * y; }));
                            if (g.needs_grad(b)) g.accumulate(b, elementwise(dc, a.value(), [](double x, double y) { return x * y; }));
                          });
}

Var exp(Var a) {
  Tensor out = a.value();
  for (double& v : out.values()) v = std::exp(v);
  Tensor saved = out;
  return a.graph().record("exp", std::move(out), {a}, [a, saved = std::move(saved)](Graph& g, const Tensor& dc) {
    g.accumulate(a, elementwise(dc, saved, [](double x, double y) { return x * y; }));
  });
}

Var sum(Var a) {
  double s = 0.0;
  for (double v : a.value().values()) s += v;
  return a.graph().record("sum", Tensor(1, 1, s), {a}, [a](Graph& g, const Tensor& dc) {
    g.accumulate(a, Tensor(a.rows(), a.cols(), dc[0]));
  });
}

Var row_sum(Var a) {
  const Tensor& av = a.value();
  Tensor out(av.rows(), 1);
  for (std::size_t i = 0; i < av.rows(); ++i)
    for (double v : av.row(i)) out(i, 0) += v;
  return a.graph().record("row_sum", std::move(out), {a}, [a](Graph& g, const Tensor& dc) {
    Tensor da(a.rows(), a.cols());
    for (std::size_t i = 0; i < da.rows(); ++i)
      for (std::size_t j = 0; j < da.cols(); ++j) da(i, j) = dc(i, 0);
    g.accumulate(a, da);
  });
}

Var col_sum(Var a) {
  const Tensor& av = a.value();
  Tensor out(1, av.cols());
  for (std::size_t i = 0; i < av.rows(); ++i)
    for (std::size_t j = 0; j < av.cols(); ++j) out[j] += av(i, j);
  return a.graph().record("col_sum", std::move(out), {a}, [a](Graph& g, const Tensor& dc) {
    Tensor da(a.rows(), a.cols());
    for (std::size_t i = 0; i < da.rows(); ++i)
      for (std::size_t j = 0; j < da.cols(); ++j) da(i, j) = dc[j];
    g.accumulate(a, da);
  });
}

Var concat_rows(const std::vector<Var>& parts) {
  if (parts.empty()) throw ShapeError("concat_rows of zero parts");
  const std::size_t cols = parts.front().cols();
  std::size_t rows = 0;
  for (const Var& p : parts) {
    require(p.cols() == cols, "concat_rows", parts.front().value(), p.value());
    rows += p.rows();
  }
  Tensor out(rows, cols);
  std::size_t r = 0;
  for (const Var& p : parts) {
    std::copy(p.value().values().begin(), p.value().values().end(), out.row(r).begin());
    r += p.rows();
  }
  return parts.front().graph().record("concat_rows", std::move(out), parts, [parts](Graph& g, const Tensor& dc) {
    std::size_t offset = 0;
    for (const Var& p : parts) {
      if (g.needs_grad(p)) {
        Tensor dp(p.rows(), p.cols());
        std::copy_n(dc.row(offset).begin(), dp.size(), dp.values().begin());
        g.accumulate(p, dp);
      }
      offset += p.rows();
    }
  });
}

Var concat_cols(const std::vector<Var>& parts) {
  if (parts.empty()) throw ShapeError("concat_cols of zero parts");
  const std::size_t rows = parts.front().rows();
  std::size_t cols = 0;
  for (const Var& p : parts) {
    require(p.rows() == rows, "concat_cols", parts.front().value(), p.value());
    cols += p.cols();
  }
  Tensor out(rows, cols);
  std::size_t c0 = 0;
  for (const Var& p : parts) {
    const Tensor& pv = p.value();
    for (std::size_t i = 0; i < rows; ++i)
      for (std::size_t j = 0; j < pv.cols(); ++j) out(i, c0 + j) = pv(i, j);
    c0 += pv.cols();
  }
  return parts.front().graph().record("concat_cols", std::move(out), parts, [parts](Graph& g, const Tensor& dc) {
    std::size_t c0 = 0;
    for (const Var& p : parts) {
      if (g.needs_grad(p)) {
        Tensor dp(p.rows(), p.cols());
        for (std::size_t i = 0; i < dp.rows(); ++i)
          for (std::size_t j = 0; j < dp.cols(); ++j) dp(i, j) = dc(i, c0 + j);
        g.accumulate(p, dp);
      }
      c0 += p.cols();
    }
  });
}

Var slice_rows(Var a, std::size_t begin, std::size_t count) {
  if (begin + count > a.rows() || count == 0) {
    throw ShapeError("slice_rows [" + std::to_string(begin) + ", +" + std::to_string(count) +
                     ") out of range for " + a.value().shape_string());
  }
  const Tensor& av = a.value();
  Tensor out(count, av.cols());
  std::copy_n(av.row(begin).begin(), out.size(), out.values().begin());
  return a.graph().record("slice_rows", std::move(out), {a}, [a, begin](Graph& g, const Tensor& dc) {
    Tensor da(a.rows(), a.cols());
    std::copy(dc.values().begin(), dc.values().end(), da.row(begin).begin());
    g.accumulate(a, da);
  });
}

Var slice_cols(Var a, std::size_t begin, std::size_t count) {
  if (begin + count > a.cols() || count == 0) {
    throw ShapeError("slice_cols [" + std::to_string(begin) + ", +" + std::to_string(count) +
                     ") out of range for " + a.value().shape_string());
  }
  const Tensor& av = a.value();
  Tensor out(av.rows(), count);
  for (std::size_t i = 0; i < av.rows(); ++i)
    for (std::size_t j = 0; j < count; ++j) out(i, j) = av(i, begin + j);
  return a.graph().record("slice_cols", std::move(out), {a}, [a, begin](Graph& g, const Tensor& dc) {
    Tensor da(a.rows(), a.cols());
    for (std::size_t i = 0; i < dc.rows(); ++i)
      for (std::size_t j = 0; j < dc.cols(); ++j) da(i, begin + j) = dc(i, j);
    g.accumulate(a, da);
  });
}

Var softmax_rows(Var a, double tau) {
  if (!(tau > 0.0)) throw NumericError("softmax temperature must be positive");
  const Tensor& av = a.value();
  Tensor out(av.rows(), av.cols());
  for (std::size_t i = 0; i < av.rows(); ++i) {
    auto p = softmax(av.row(i), tau);
    std::copy(p.begin(), p.end(), out.row(i).begin());
  }
  Graph& graph = a.graph();
  Tensor probs = out;
  return graph.record("softmax_rows", std::move(out), {a},
                      [a, tau, probs = std::move(probs)](Graph& g, const Tensor& dc) {
                        Tensor da(probs.rows(), probs.cols());
                        for (std::size_t i = 0; i < probs.rows(); ++i) {
                          const double inner = dot(dc.row(i), probs.row(i));
                          for (std::size_t j = 0; j < probs.cols(); ++j)
                            da(i, j) = probs(i, j) * (dc(i, j) - inner) / tau;
                        }
                        g.accumulate(a, da);
                      });
}

Var cosine_rows(Var a, Var b) {
  require(a.cols() == b.cols(), "cosine_rows", a.value(), b.value());
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  std::vector<double> na(av.rows()), nb(bv.rows());
  for (std::size_t i = 0; i < av.rows(); ++i) na[i] = l2_norm(av.row(i));
  for (std::size_t j = 0; j < bv.rows(); ++j) nb[j] = l2_norm(bv.row(j));
  for (double n : na)
    if (n == 0.0) throw NumericError("cosine_rows: zero-norm row in left operand");
  for (double n : nb)
    if (n == 0.0) throw NumericError("cosine_rows: zero-norm row in right operand");
  Tensor out(av.rows(), bv.rows());
  for (std::size_t i = 0; i < av.rows(); ++i)
    for (std::size_t j = 0; j < bv.rows(); ++j) out(i, j) = dot(av.row(i), bv.row(j)) / (na[i] * nb[j]);
  Tensor cos = out;
  return a.graph().record(
      "cosine_rows", std::move(out), {a, b},
      [a, b, na = std::move(na), nb = std::move(nb), cos = std::move(cos)](Graph& g, const Tensor& dc) {
        const Tensor& av = a.value();
        const Tensor& bv = b.value();
        const std::size_t d = av.cols();
        if (g.needs_grad(a)) {
          Tensor da(av.rows(), d);
          for (std::size_t i = 0; i < av.rows(); ++i) {
            double radial = 0.0;
            for (std::size_t j = 0; j < bv.rows(); ++j) {
              const double w = dc(i, j) / (na[i] * nb[j]);
              radial += dc(i, j) * cos(i, j);
              for (std::size_t k = 0; k < d; ++k) da(i, k) += w * bv(j, k);
            }
            const double r = radial / (na[i] * na[i]);
            for (std::size_t k = 0; k < d; ++k) da(i, k) -= r * av(i, k);
          }
          g.accumulate(a, da);
        }
        if (g.needs_grad(b)) {
          Tensor db(bv.rows(), d);
          for (std::size_t j = 0; j < bv.rows(); ++j) {
            double radial = 0.0;
            for (std::size_t i = 0; i < av.rows(); ++i) {
              const double w = dc(i, j) / (na[i] * nb[j]);
              radial += dc(i, j) * cos(i, j);
              for (std::size_t k = 0; k < d; ++k) db(j, k) += w * av(i, k);
            }
            const double r = radial / (nb[j] * nb[j]);
            for (std::size_t k = 0; k < d; ++k) db(j, k) -= r * bv(j, k);
          }
          g.accumulate(b, db);
        }
      });
}

Var cross_entropy(Var logits, std::size_t label) {
  const Tensor& z = logits.value();
  if (z.rows() != 1) throw ShapeError("cross_entropy expects a 1 x K row, got " + z.shape_string());
  if (label >= z.cols()) {
    throw DataError("cross_entropy label " + std::to_string(label) + " out of range for " +
                    std::to_string(z.cols()) + " classes");
  }
  auto probs = softmax(z.values(), 1.0);
  const double peak = *std::max_element(z.values().begin(), z.values().end());
  double total = 0.0;
  for (double v : z.values()) total += std::exp(v - peak);
  const double loss = -(z[label] - peak - std::log(total));
  return logits.graph().record("cross_entropy", Tensor(1, 1, loss), {logits},
                               [logits, label, probs = std::move(probs)](Graph& g, const Tensor& dc) {
                                 Tensor dz(1, probs.size());
                                 for (std::size_t k = 0; k < probs.size(); ++k)
                                   dz[k] = dc[0] * (probs[k] - (k == label ? 1.0 : 0.0));
                                 g.accumulate(logits, dz);
                               });
}

}  // namespace ad
}  // namespace protopop
