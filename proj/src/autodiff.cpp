#include "vqa/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "vqa/errors.hpp"
#include "vqa/kernels.hpp"

namespace vqa::ad {

const Tensor& Var::value() const { return graph->value(*this); }

// ---------------------------------------------------------------------------
// Graph

Var Graph::constant(Tensor value) {
  Node node;
  node.value = std::move(value);
  node.op = "constant";
  nodes_.push_back(std::move(node));
  return Var{this, nodes_.size() - 1};
}

Var Graph::parameter(std::string_view name) {
  for (const Leaf& leaf : leaves_) {
    if (leaf.name == name) return Var{this, leaf.index};
  }
  if (params_ == nullptr) throw ContractError("graph has no parameter store; asked for " + std::string(name));
  Node node;
  node.value = params_->get(name);
  node.requires_grad = true;
  node.op = "parameter";
  nodes_.push_back(std::move(node));
  leaves_.push_back(Leaf{std::string(name), nodes_.size() - 1});
  return Var{this, nodes_.size() - 1};
}

Var Graph::variable(std::string name, Tensor value) {
  for (const Leaf& leaf : leaves_) {
    if (leaf.name == name) throw ContractError("variable defined twice: " + name);
  }
  Node node;
  node.value = std::move(value);
  node.requires_grad = true;
  node.op = "variable";
  nodes_.push_back(std::move(node));
  leaves_.push_back(Leaf{std::move(name), nodes_.size() - 1});
  return Var{this, nodes_.size() - 1};
}

Var Graph::record(const char* op, Tensor value, std::vector<Var> inputs, BackwardFn backward) {
  Node node;
  node.op = op;
  for (const Var& in : inputs) {
    if (in.graph != this) throw ContractError(std::string(op) + ": input belongs to another graph");
    node.requires_grad = node.requires_grad || nodes_[in.index].requires_grad;
  }
#ifndef NDEBUG
  if (!value.all_finite()) {
    const bool inputs_finite = std::all_of(inputs.begin(), inputs.end(),
                                           [this](const Var& in) { return nodes_[in.index].value.all_finite(); });
    if (inputs_finite) throw NumericError(std::string(op) + " produced a non-finite value from finite inputs");
  }
#endif
  node.value = std::move(value);
  if (node.requires_grad) node.backward = std::move(backward);
  nodes_.push_back(std::move(node));
  return Var{this, nodes_.size() - 1};
}

Tensor Graph::grad(Var v) const {
  const Node& node = nodes_[v.index];
  return node.has_grad ? node.grad : Tensor::zeros_like(node.value);
}

Tensor& Graph::grad_buffer(std::size_t index) {
  Node& node = nodes_[index];
  if (!node.has_grad) {
    node.grad = Tensor::zeros_like(node.value);
    node.has_grad = true;
  }
  return node.grad;
}

void Graph::accumulate(Var target, const Tensor& delta) { accumulate(target, delta.data()); }

void Graph::accumulate(Var target, std::span<const double> delta) {
  if (!nodes_[target.index].requires_grad) return;
  Tensor& buffer = grad_buffer(target.index);
  if (buffer.size() != delta.size()) {
    throw ShapeError("gradient of size " + std::to_string(delta.size()) + " for node of shape " +
                     to_string(buffer.shape()));
  }
  auto out = buffer.data();
  for (std::size_t i = 0; i < delta.size(); ++i) out[i] += delta[i];
}

void Graph::backward(Var loss) {
  if (loss.graph != this) throw ContractError("backward: loss belongs to another graph");
  if (nodes_[loss.index].value.size() != 1) {
    throw ContractError("backward needs a scalar loss, got shape " + to_string(nodes_[loss.index].value.shape()));
  }
  if (backward_done_) throw ContractError("backward already ran on this graph");
  backward_done_ = true;
  if (!nodes_[loss.index].requires_grad) return;
  grad_buffer(loss.index)[0] = 1.0;
  for (std::size_t i = loss.index + 1; i-- > 0;) {
    Node& node = nodes_[i];
    if (!node.has_grad || !node.backward) continue;
    if (corruption_ && corruption_->first == node.op) {
      Tensor scaled = node.grad;
      for (double& g : scaled.data()) g *= corruption_->second;
      node.backward(*this, scaled, node.value);
    } else {
      node.backward(*this, node.grad, node.value);
    }
  }
}

Gradients Graph::parameter_gradients() const {
  Gradients out;
  if (params_ != nullptr) {
    for (const std::string& name : params_->names()) out.emplace(name, Tensor::zeros_like(params_->get(name)));
  }
  for (const Leaf& leaf : leaves_) {
    const Node& node = nodes_[leaf.index];
    out.insert_or_assign(leaf.name, node.has_grad ? node.grad : Tensor::zeros_like(node.value));
  }
  return out;
}

bool Graph::uses_op(std::string_view op) const {
  return std::any_of(nodes_.begin(), nodes_.end(), [op](const Node& n) { return op == n.op; });
}

void Graph::corrupt_backward(std::string op, double factor) { corruption_ = std::make_pair(std::move(op), factor); }

// ---------------------------------------------------------------------------
// Helpers

namespace {

void require_same_shape(const char* op, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape " + to_string(a.shape()) + " vs " + to_string(b.shape()));
  }
}

void require_rank(const char* op, const Tensor& t, std::size_t rank) {
  if (t.rank() != rank) {
    throw ShapeError(std::string(op) + ": expected rank " + std::to_string(rank) + ", got shape " +
                     to_string(t.shape()));
  }
}

Graph& graph_of(Var v) {
  if (v.graph == nullptr) throw ContractError("operation on a detached Var");
  return *v.graph;
}

template <typename Forward, typename Derivative>
Var elementwise(const char* op, Var x, Forward forward, Derivative derivative) {
  const Tensor& in = x.value();
  Tensor out(in.shape());
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = forward(in[i]);
  return graph_of(x).record(op, std::move(out), {x},
                            [x, derivative](Graph& g, const Tensor& up, const Tensor& y) {
                              const Tensor& in = g.value(x);
                              Tensor dx(in.shape());
                              for (std::size_t i = 0; i < in.size(); ++i) dx[i] = up[i] * derivative(in[i], y[i]);
                              g.accumulate(x, dx);
                            });
}

double stable_sigmoid(double v) {
  if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
  const double e = std::exp(v);
  return e / (1.0 + e);
}

}  // namespace

std::string_view to_string(Activation a) {
  switch (a) {
    case Activation::kIdentity:
      return "identity";
    case Activation::kRelu:
      return "relu";
    case Activation::kLeakyRelu:
      return "leaky_relu";
    case Activation::kTanh:
      return "tanh";
    case Activation::kSigmoid:
      return "sigmoid";
  }
  return "identity";
}

Activation parse_activation(std::string_view name) {
  if (name == "identity" || name == "linear") return Activation::kIdentity;
  if (name == "relu") return Activation::kRelu;
  if (name == "leaky_relu") return Activation::kLeakyRelu;
  if (name == "tanh") return Activation::kTanh;
  if (name == "sigmoid") return Activation::kSigmoid;
  throw ConfigError("unknown activation '" + std::string(name) + "'");
}

double checked_slope(double slope) {
  if (!(slope >= 0.0 && slope < 1.0)) throw ConfigError("leaky_relu slope must lie in [0,1), got " + std::to_string(slope));
  return slope;
}

double checked_dropout_rate(double rate) {
  if (!(rate >= 0.0 && rate < 1.0)) throw ConfigError("dropout rate must lie in [0,1), got " + std::to_string(rate));
  return rate;
}

// ---------------------------------------------------------------------------
// Dense algebra

Var matmul(Var a, Var b) {
  const Tensor& ta = a.value();
  const Tensor& tb = b.value();
  if (ta.rank() != 2 || tb.rank() != 2 || ta.shape()[1] != tb.shape()[0]) {
    throw ShapeError("matmul: cannot multiply " + to_string(ta.shape()) + " by " + to_string(tb.shape()));
  }
  const std::size_t m = ta.shape()[0], k = ta.shape()[1], n = tb.shape()[1];
  Tensor out(Shape{m, n});
  kernels::gemm_nn(ta.data(), tb.data(), out.data(), {m, n, k});
  return graph_of(a).record("matmul", std::move(out), {a, b}, [a, b, m, n, k](Graph& g, const Tensor& up, const Tensor&) {
    if (g.requires_grad(a)) {
      Tensor da(Shape{m, k});
      kernels::gemm_nt(up.data(), g.value(b).data(), da.data(), {m, k, n});
      g.accumulate(a, da);
    }
    if (g.requires_grad(b)) {
      Tensor db(Shape{k, n});
      kernels::gemm_tn(g.value(a).data(), up.data(), db.data(), {k, n, m});
      g.accumulate(b, db);
    }
  });
}

Var linear(Var x, Var weight, Var bias) {
  const Tensor& tx = x.value();
  const Tensor& tw = weight.value();
  const Tensor& tb = bias.value();
  if (tx.rank() != 2 || tw.rank() != 2 || tx.shape()[1] != tw.shape()[1] || tb.size() != tw.shape()[0]) {
    throw ShapeError("linear: input " + to_string(tx.shape()) + ", weight " + to_string(tw.shape()) + ", bias " +
                     to_string(tb.shape()));
  }
  const std::size_t batch = tx.shape()[0], in = tx.shape()[1], out_dim = tw.shape()[0];
  Tensor out(Shape{batch, out_dim});
  kernels::gemm_nt(tx.data(), tw.data(), out.data(), {batch, out_dim, in});
  for (std::size_t r = 0; r < batch; ++r) {
    for (std::size_t c = 0; c < out_dim; ++c) out[r * out_dim + c] += tb[c];
  }
  return graph_of(x).record(
      "linear", std::move(out), {x, weight, bias}, [x, weight, bias, batch, in, out_dim](Graph& g, const Tensor& up, const Tensor&) {
        if (g.requires_grad(x)) {
          Tensor dx(Shape{batch, in});
          kernels::gemm_nn(up.data(), g.value(weight).data(), dx.data(), {batch, in, out_dim});
          g.accumulate(x, dx);
        }
        if (g.requires_grad(weight)) {
          Tensor dw(Shape{out_dim, in});
          kernels::gemm_tn(up.data(), g.value(x).data(), dw.data(), {out_dim, in, batch});
          g.accumulate(weight, dw);
        }
        if (g.requires_grad(bias)) {
          Tensor db(g.value(bias).shape());
          for (std::size_t r = 0; r < batch; ++r) {
            for (std::size_t c = 0; c < out_dim; ++c) db[c] += up[r * out_dim + c];
          }
          g.accumulate(bias, db);
        }
      });
}

Var add(Var a, Var b) {
  require_same_shape("add", a.value(), b.value());
  Tensor out = a.value();
  const Tensor& tb = b.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += tb[i];
  return graph_of(a).record("add", std::move(out), {a, b}, [a, b](Graph& g, const Tensor& up, const Tensor&) {
    g.accumulate(a, up);
    g.accumulate(b, up);
  });
}

Var sub(Var a, Var b) {
  require_same_shape("sub", a.value(), b.value());
  Tensor out = a.value();
  const Tensor& tb = b.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= tb[i];
  return graph_of(a).record("sub", std::move(out), {a, b}, [a, b](Graph& g, const Tensor& up, const Tensor&) {
    g.accumulate(a, up);
    if (g.requires_grad(b)) {
      Tensor neg = up;
      for (double& v : neg.data()) v = -v;
      g.accumulate(b, neg);
    }
  });
}

Var mul(Var a, Var b) {
  require_same_shape("mul", a.value(), b.value());
  Tensor out = a.value();
  const Tensor& tb = b.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= tb[i];
  return graph_of(a).record("mul", std::move(out), {a, b}, [a, b](Graph& g, const Tensor& up, const Tensor&) {
    if (g.requires_grad(a)) {
      Tensor da = g.value(b);
      for (std::size_t i = 0; i < da.size(); ++i) da[i] *= up[i];
      g.accumulate(a, da);
    }
    if (g.requires_grad(b)) {
      Tensor db = g.value(a);
      for (std::size_t i = 0; i < db.size(); ++i) db[i] *= up[i];
      g.accumulate(b, db);
    }
  });
}

Var scale(Var a, double factor) {
  Tensor out = a.value();
  for (double& v : out.data()) v *= factor;
  return graph_of(a).record("scale", std::move(out), {a}, [a, factor](Graph& g, const Tensor& up, const Tensor&) {
    Tensor da = up;
    for (double& v : da.data()) v *= factor;
    g.accumulate(a, da);
  });
}

Var sum(Var a) {
  double total = 0.0;
  for (double v : a.value().data()) total += v;
  return graph_of(a).record("sum", Tensor::scalar(total), {a}, [a](Graph& g, const Tensor& up, const Tensor&) {
    g.accumulate(a, Tensor(g.value(a).shape(), up[0]));
  });
}

Var reshape(Var a, Shape shape) {
  Tensor out = a.value().reshaped(std::move(shape));
  return graph_of(a).record("reshape", std::move(out), {a},
                            [a](Graph& g, const Tensor& up, const Tensor&) { g.accumulate(a, up.data()); });
}

Var add_all(std::span<const Var> terms) {
  if (terms.empty()) throw ContractError("add_all: no terms");
  Tensor out = terms[0].value();
  for (std::size_t t = 1; t < terms.size(); ++t) {
    require_same_shape("add_all", out, terms[t].value());
    const Tensor& term = terms[t].value();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += term[i];
  }
  std::vector<Var> inputs(terms.begin(), terms.end());
  return graph_of(terms[0]).record("add_all", std::move(out), inputs, [inputs](Graph& g, const Tensor& up, const Tensor&) {
    for (const Var& v : inputs) g.accumulate(v, up);
  });
}

// ---------------------------------------------------------------------------
// Elementwise kernels

Var sigmoid(Var x) {
  return elementwise(
      "sigmoid", x, stable_sigmoid, [](double, double y) { return y * (1.0 - y); });
}

Var tanh(Var x) {
  return elementwise(
      "tanh", x, [](double v) { return std::tanh(v); }, [](double, double y) { return 1.0 - y * y; });
}

Var relu(Var x) {
  return elementwise(
      "relu", x, [](double v) { return v > 0.0 ? v : 0.0; }, [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

Var leaky_relu(Var x, double slope) {
  checked_slope(slope);
  return elementwise(
      "leaky_relu", x, [slope](double v) { return v >= 0.0 ? v : slope * v; },
      [slope](double v, double) { return v >= 0.0 ? 1.0 : slope; });
}

Var activate(Var x, Activation kind, double leaky_slope) {
  switch (kind) {
    case Activation::kIdentity:
      return x;
    case Activation::kRelu:
      return relu(x);
    case Activation::kLeakyRelu:
      return leaky_relu(x, leaky_slope);
    case Activation::kTanh:
      return tanh(x);
    case Activation::kSigmoid:
      return sigmoid(x);
  }
  return x;
}

Var softmax(Var x) {
  const Tensor& in = x.value();
  if (in.empty()) throw ShapeError("softmax of an empty tensor");
  for (double v : in.data()) {
    if (std::isnan(v)) throw NumericError("softmax input contains NaN");
  }
  const std::size_t cols = in.cols();
  const std::size_t rows = in.size() / cols;
  Tensor out(in.shape());
  kernels::softmax_rows(in.data(), out.data(), rows, cols);
  return graph_of(x).record("softmax", std::move(out), {x}, [x, rows, cols](Graph& g, const Tensor& up, const Tensor& y) {
    Tensor dx(y.shape());
    for (std::size_t r = 0; r < rows; ++r) {
      double dot = 0.0;
      for (std::size_t j = 0; j < cols; ++j) dot += up[r * cols + j] * y[r * cols + j];
      for (std::size_t j = 0; j < cols; ++j) dx[r * cols + j] = y[r * cols + j] * (up[r * cols + j] - dot);
    }
    g.accumulate(x, dx);
  });
}

Var weight_norm(Var direction, Var gain) {
  const Tensor& v = direction.value();
  const Tensor& gn = gain.value();
  require_rank("weight_norm", v, 2);
  const std::size_t rows = v.shape()[0], cols = v.shape()[1];
  if (gn.size() != rows) {
    throw ShapeError("weight_norm: direction " + to_string(v.shape()) + " vs gain " + to_string(gn.shape()));
  }
  std::vector<double> norms(rows);
  Tensor out(v.shape());
  for (std::size_t r = 0; r < rows; ++r) {
    double sq = 0.0;
    for (std::size_t c = 0; c < cols; ++c) sq += v[r * cols + c] * v[r * cols + c];
    norms[r] = std::sqrt(sq);
    if (!(norms[r] > 1e-12)) {
      throw DegenerateParameterError("weight_norm: direction row " + std::to_string(r) + " has norm " +
                                     std::to_string(norms[r]));
    }
    const double factor = gn[r] / norms[r];
    for (std::size_t c = 0; c < cols; ++c) out[r * cols + c] = factor * v[r * cols + c];
  }
  return graph_of(direction).record(
      "weight_norm", std::move(out), {direction, gain},
      [direction, gain, norms, rows, cols](Graph& g, const Tensor& up, const Tensor&) {
        const Tensor& v = g.value(direction);
        const Tensor& gn = g.value(gain);
        Tensor dv(v.shape());
        Tensor dg(gn.shape());
        for (std::size_t r = 0; r < rows; ++r) {
          const double n = norms[r];
          double proj = 0.0;
          for (std::size_t c = 0; c < cols; ++c) proj += up[r * cols + c] * v[r * cols + c];
          dg[r] = proj / n;
          const double a = gn[r] / n;
          const double b = proj / (n * n);
          for (std::size_t c = 0; c < cols; ++c) dv[r * cols + c] = a * (up[r * cols + c] - b * v[r * cols + c]);
        }
        g.accumulate(direction, dv);
        g.accumulate(gain, dg);
      });
}

Var dropout(Var x, double rate, bool training, std::mt19937_64& rng) {
  checked_dropout_rate(rate);
  if (!training || rate == 0.0) return x;
  const Tensor& in = x.value();
  Tensor mask(in.shape());
  std::bernoulli_distribution drop(rate);
  const double keep_scale = 1.0 / (1.0 - rate);
  for (double& m : mask.data()) m = drop(rng) ? 0.0 : keep_scale;
  Tensor out = in;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= mask[i];
  return graph_of(x).record("dropout", std::move(out), {x}, [x, mask = std::move(mask)](Graph& g, const Tensor& up, const Tensor&) {
    Tensor dx = up;
    for (std::size_t i = 0; i < dx.size(); ++i) dx[i] *= mask[i];
    g.accumulate(x, dx);
  });
}

// ---------------------------------------------------------------------------
// Gather / scatter / pooling

Var embedding(Var table, std::span<const std::size_t> indices) {
  const Tensor& t = table.value();
  require_rank("embedding", t, 2);
  const std::size_t vocab = t.shape()[0], width = t.shape()[1];
  Tensor out(Shape{indices.size(), width});
  for (std::size_t r = 0; r < indices.size(); ++r) {
    if (indices[r] >= vocab) {
      throw DataError("token index " + std::to_string(indices[r]) + " outside vocabulary of size " +
                      std::to_string(vocab));
    }
    std::copy_n(t.data().begin() + indices[r] * width, width, out.data().begin() + r * width);
  }
  std::vector<std::size_t> rows(indices.begin(), indices.end());
  return graph_of(table).record("embedding", std::move(out), {table},
                                [table, rows = std::move(rows), width](Graph& g, const Tensor& up, const Tensor&) {
                                  Tensor dt = Tensor::zeros_like(g.value(table));
                                  for (std::size_t r = 0; r < rows.size(); ++r) {
                                    for (std::size_t c = 0; c < width; ++c) dt[rows[r] * width + c] += up[r * width + c];
                                  }
                                  g.accumulate(table, dt);
                                });
}

Var select_rows(const std::vector<bool>& keep, Var when_true, Var when_false) {
  const Tensor& a = when_true.value();
  const Tensor& b = when_false.value();
  require_same_shape("select_rows", a, b);
  require_rank("select_rows", a, 2);
  const std::size_t rows = a.shape()[0], cols = a.shape()[1];
  if (keep.size() != rows) throw ShapeError("select_rows: mask length does not match " + to_string(a.shape()));
  Tensor out(a.shape());
  for (std::size_t r = 0; r < rows; ++r) {
    const Tensor& src = keep[r] ? a : b;
    std::copy_n(src.data().begin() + r * cols, cols, out.data().begin() + r * cols);
  }
  std::vector<bool> mask = keep;
  return graph_of(when_true).record(
      "select_rows", std::move(out), {when_true, when_false},
      [when_true, when_false, mask = std::move(mask), cols](Graph& g, const Tensor& up, const Tensor&) {
        Tensor da(up.shape());
        Tensor db(up.shape());
        for (std::size_t r = 0; r < mask.size(); ++r) {
          Tensor& dst = mask[r] ? da : db;
          std::copy_n(up.data().begin() + r * cols, cols, dst.data().begin() + r * cols);
        }
        g.accumulate(when_true, da);
        g.accumulate(when_false, db);
      });
}

Var repeat_rows(Var x, std::size_t times) {
  const Tensor& in = x.value();
  require_rank("repeat_rows", in, 2);
  const std::size_t rows = in.shape()[0], cols = in.shape()[1];
  Tensor out(Shape{rows * times, cols});
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t t = 0; t < times; ++t) {
      std::copy_n(in.data().begin() + r * cols, cols, out.data().begin() + (r * times + t) * cols);
    }
  }
  return graph_of(x).record("repeat_rows", std::move(out), {x}, [x, rows, cols, times](Graph& g, const Tensor& up, const Tensor&) {
    Tensor dx(Shape{rows, cols});
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t t = 0; t < times; ++t) {
        for (std::size_t c = 0; c < cols; ++c) dx[r * cols + c] += up[(r * times + t) * cols + c];
      }
    }
    g.accumulate(x, dx);
  });
}

Var pool(Var features, Var weights) {
  const Tensor& f = features.value();
  const Tensor& w = weights.value();
  require_rank("pool", f, 2);
  require_rank("pool", w, 2);
  const std::size_t batch = w.shape()[0], regions = w.shape()[1], width = f.shape()[1];
  if (f.shape()[0] != batch * regions) {
    throw ShapeError("pool: features " + to_string(f.shape()) + " vs weights " + to_string(w.shape()));
  }
  Tensor out(Shape{batch, width});
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t k = 0; k < regions; ++k) {
      const double a = w[b * regions + k];
      const double* row = f.data().data() + (b * regions + k) * width;
      for (std::size_t c = 0; c < width; ++c) out[b * width + c] += a * row[c];
    }
  }
  return graph_of(features).record(
      "pool", std::move(out), {features, weights},
      [features, weights, batch, regions, width](Graph& g, const Tensor& up, const Tensor&) {
        const Tensor& f = g.value(features);
        const Tensor& w = g.value(weights);
        if (g.requires_grad(features)) {
          Tensor df(f.shape());
          for (std::size_t b = 0; b < batch; ++b) {
            for (std::size_t k = 0; k < regions; ++k) {
              const double a = w[b * regions + k];
              for (std::size_t c = 0; c < width; ++c) df[(b * regions + k) * width + c] = a * up[b * width + c];
            }
          }
          g.accumulate(features, df);
        }
        if (g.requires_grad(weights)) {
          Tensor dw(w.shape());
          for (std::size_t b = 0; b < batch; ++b) {
            for (std::size_t k = 0; k < regions; ++k) {
              double acc = 0.0;
              for (std::size_t c = 0; c < width; ++c) acc += f[(b * regions + k) * width + c] * up[b * width + c];
              dw[b * regions + k] = acc;
            }
          }
          g.accumulate(weights, dw);
        }
      });
}

// ---------------------------------------------------------------------------
// Loss

Var binary_cross_entropy(Var probabilities, Var targets, double eps) {
  const Tensor& p = probabilities.value();
  const Tensor& y = targets.value();
  require_same_shape("binary_cross_entropy", p, y);
  for (double v : y.data()) {
    if (!(v >= 0.0 && v <= 1.0)) throw DataError("target score " + std::to_string(v) + " outside [0,1]");
  }
  const std::size_t batch = p.rows();
  if (batch == 0) throw ContractError("binary_cross_entropy on an empty batch");
  double total = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double pc = std::clamp(p[i], eps, 1.0 - eps);
    total -= y[i] * std::log(pc) + (1.0 - y[i]) * std::log(1.0 - pc);
  }
  return graph_of(probabilities).record(
      "binary_cross_entropy", Tensor::scalar(total / static_cast<double>(batch)), {probabilities, targets},
      [probabilities, targets, eps, batch](Graph& g, const Tensor& up, const Tensor&) {
        const Tensor& p = g.value(probabilities);
        const Tensor& y = g.value(targets);
        Tensor dp(p.shape());
        const double factor = up[0] / static_cast<double>(batch);
        for (std::size_t i = 0; i < p.size(); ++i) {
          if (p[i] <= eps || p[i] >= 1.0 - eps) continue;
          dp[i] = factor * (-(y[i] / p[i]) + (1.0 - y[i]) / (1.0 - p[i]));
        }
        g.accumulate(probabilities, dp);
      });
}

}  // namespace vqa::ad
