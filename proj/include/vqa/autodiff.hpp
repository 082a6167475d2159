#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "vqa/params.hpp"
#include "vqa/tensor.hpp"

namespace vqa::ad {

class Graph;

// Handle to a node of a Graph. Cheap to copy; valid while the graph lives.
struct Var {
  Graph* graph = nullptr;
  std::size_t index = 0;

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
};

// Reverse-mode tape. Nodes are appended in creation order, which is a
// topological order; backward() walks them in exact reverse.
class Graph {
 public:
  // Receives the node's accumulated output gradient and its forward value.
  using BackwardFn = std::function<void(Graph&, const Tensor& upstream, const Tensor& output)>;

  explicit Graph(const ParamStore* params = nullptr) : params_(params) {}
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  Var constant(Tensor value);
  // Trainable leaf bound to a ParamStore entry; created once per name.
  Var parameter(std::string_view name);
  // Trainable leaf not backed by a store (tests, ad-hoc functions).
  Var variable(std::string name, Tensor value);

  Var record(const char* op, Tensor value, std::vector<Var> inputs, BackwardFn backward);

  const Tensor& value(Var v) const { return nodes_[v.index].value; }
  // Zero tensor when nothing flowed into the node.
  Tensor grad(Var v) const;
  bool requires_grad(Var v) const { return nodes_[v.index].requires_grad; }

  void backward(Var loss);
  // One entry per ParamStore parameter plus every variable(); unreached
  // leaves get zeros.
  Gradients parameter_gradients() const;

  // Adds `delta` into the gradient buffer of `target` if it needs one.
  void accumulate(Var target, const Tensor& delta);
  void accumulate(Var target, std::span<const double> delta);

  std::size_t size() const noexcept { return nodes_.size(); }
  // Whether any recorded node came from the named op.
  bool uses_op(std::string_view op) const;

  // Test hook: scales the upstream gradient seen by every backward rule of
  // the named op. Used to prove the gradient checker notices broken rules.
  void corrupt_backward(std::string op, double factor);

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    bool has_grad = false;
    bool requires_grad = false;
    const char* op = "";
    BackwardFn backward;
  };
  struct Leaf {
    std::string name;
    std::size_t index;
  };

  Tensor& grad_buffer(std::size_t index);

  const ParamStore* params_;
  std::vector<Node> nodes_;
  std::vector<Leaf> leaves_;
  bool backward_done_ = false;
  std::optional<std::pair<std::string, double>> corruption_;
};

enum class Activation { kIdentity, kRelu, kLeakyRelu, kTanh, kSigmoid };

using vqa::to_string;
std::string_view to_string(Activation a);
Activation parse_activation(std::string_view name);

// Dense algebra.
Var matmul(Var a, Var b);
// x[B x In] * W[Out x In]^T + bias[Out]
Var linear(Var x, Var weight, Var bias);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double factor);
Var sum(Var a);
Var reshape(Var a, Shape shape);

// Elementwise kernels.
Var sigmoid(Var x);
Var tanh(Var x);
Var relu(Var x);
Var leaky_relu(Var x, double slope);
Var activate(Var x, Activation kind, double leaky_slope);

// Softmax over the last axis (each row of a matrix, or the whole vector).
Var softmax(Var x);

// Effective weight rows gain_i * direction_i / ||direction_i||.
Var weight_norm(Var direction, Var gain);

// Inverted dropout. Evaluation mode returns `x` itself.
Var dropout(Var x, double rate, bool training, std::mt19937_64& rng);

// Rows of table[V x D] picked by index -> [B x D].
Var embedding(Var table, std::span<const std::size_t> indices);
// Row r comes from `when_true` if keep[r], else from `when_false`.
Var select_rows(const std::vector<bool>& keep, Var when_true, Var when_false);
// x[B x P] -> [B*times x P], each row repeated `times` times consecutively.
Var repeat_rows(Var x, std::size_t times);
// Weighted sum of row blocks: features[B*K x D], weights[B x K] -> [B x D].
Var pool(Var features, Var weights);
// Elementwise sum of equally-shaped terms.
Var add_all(std::span<const Var> terms);

// Mean-over-batch, sum-over-columns binary cross entropy of probabilities
// against targets in [0,1]; probabilities are clamped to [eps, 1-eps].
Var binary_cross_entropy(Var probabilities, Var targets, double eps = 1e-12);

double checked_slope(double slope);
double checked_dropout_rate(double rate);

}  // namespace vqa::ad
