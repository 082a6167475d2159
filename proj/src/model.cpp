#include "vqa/model.hpp"

#include <algorithm>

#include "vqa/errors.hpp"
#include "vqa/layers.hpp"

namespace vqa {

std::string_view to_string(DropoutPlacement p) {
  return p == DropoutPlacement::kBeforeActivation ? "before_activation" : "after_activation";
}

DropoutPlacement parse_dropout_placement(std::string_view name) {
  if (name == "before_activation") return DropoutPlacement::kBeforeActivation;
  if (name == "after_activation") return DropoutPlacement::kAfterActivation;
  throw ConfigError("unknown dropout placement '" + std::string(name) + "'");
}

void ModelConfig::validate() const {
  for (auto [value, name] : {std::pair{embed_dim, "embed_dim"}, std::pair{hidden, "hidden"},
                             std::pair{feature_dim, "feature_dim"}, std::pair{regions, "regions"},
                             std::pair{num_answers, "num_answers"}, std::pair{max_question_length, "max_question_length"}}) {
    if (value < 1) throw ConfigError(std::string("model.") + name + " must be at least 1");
  }
  attention.validate();
  ad::checked_dropout_rate(dropout_fusion);
  ad::checked_dropout_rate(dropout_classifier);
  ad::checked_slope(leaky_slope);
}

ModelParams init_model(const ModelConfig& config, const EmbeddingTable& table, std::uint64_t seed) {
  config.validate();
  if (table.width() != config.embed_dim) {
    throw ConfigError("word vectors have width " + std::to_string(table.width()) + ", config says embed_dim " +
                      std::to_string(config.embed_dim));
  }
  std::mt19937_64 rng(seed);
  ModelParams params;
  params.store.add(std::string(kEmbeddingParam), table.vectors);
  params.embedding_trainable = table.trainable;
  params.embedding_trainable[kPadIndex] = false;
  if (config.finetune_embeddings) {
    std::fill(params.embedding_trainable.begin() + 1, params.embedding_trainable.end(), true);
  }

  const std::size_t d = config.embed_dim, h = config.hidden;
  for (const char* name : {"w_z", "w_r", "w_h"}) params.store.add(std::string("gru.") + name, nn::glorot_uniform(h, d, rng));
  for (const char* name : {"u_z", "u_r", "u_h"}) params.store.add(std::string("gru.") + name, nn::glorot_uniform(h, h, rng));
  for (const char* name : {"b_z", "b_r", "b_h"}) params.store.add(std::string("gru.") + name, Tensor(Shape{h}));

  init_attention(params.store, config.attention, config.feature_dim, h, config.weight_norm, rng);

  const std::size_t fusion = config.resolved_fusion_width(), cls = config.resolved_classifier_width();
  nn::init_linear(params.store, "fuse.v", config.feature_dim, fusion, config.weight_norm, rng);
  nn::init_linear(params.store, "fuse.q", h, fusion, config.weight_norm, rng);
  nn::init_linear(params.store, "cls.l1", fusion, cls, config.weight_norm, rng);
  nn::init_linear(params.store, "cls.l2", cls, config.num_answers, config.weight_norm, rng);
  return params;
}

ad::Var joint_embed(const ModelConfig& config, ad::Var pooled, ad::Var question, Mode mode, std::mt19937_64* rng) {
  ad::Graph& g = *pooled.graph;
  const ActivationSpec act = config.activation_spec();
  const ad::Var image = ad::activate(nn::apply(nn::bind_linear(g, "fuse.v", config.weight_norm), pooled), act.kind,
                                     act.leaky_slope);
  const ad::Var query = ad::activate(nn::apply(nn::bind_linear(g, "fuse.q", config.weight_norm), question), act.kind,
                                     act.leaky_slope);
  const ad::Var joint = ad::mul(image, query);
  if (mode == Mode::kTrain && config.dropout_fusion > 0.0) {
    if (rng == nullptr) throw ContractError("training-mode dropout needs a generator");
    return ad::dropout(joint, config.dropout_fusion, true, *rng);
  }
  return joint;
}

ad::Var classify(const ModelConfig& config, ad::Var joint, Mode mode, std::mt19937_64* rng) {
  ad::Graph& g = *joint.graph;
  const ActivationSpec act = config.activation_spec();
  const bool drop = mode == Mode::kTrain && config.dropout_classifier > 0.0;
  if (drop && rng == nullptr) throw ContractError("training-mode dropout needs a generator");
  ad::Var hidden = nn::apply(nn::bind_linear(g, "cls.l1", config.weight_norm), joint);
  if (config.dropout_placement == DropoutPlacement::kBeforeActivation) {
    if (drop) hidden = ad::dropout(hidden, config.dropout_classifier, true, *rng);
    hidden = ad::activate(hidden, act.kind, act.leaky_slope);
  } else {
    hidden = ad::activate(hidden, act.kind, act.leaky_slope);
    if (drop) hidden = ad::dropout(hidden, config.dropout_classifier, true, *rng);
  }
  return ad::sigmoid(nn::apply(nn::bind_linear(g, "cls.l2", config.weight_norm), hidden));
}

ModelVars build_model(ad::Graph& graph, const ModelConfig& config, const ModelInput& input, Mode mode,
                      std::mt19937_64* rng) {
  const std::size_t batch = input.batch_size();
  if (batch == 0) throw ContractError("forward on an empty batch");
  if (input.features.shape() != Shape{batch * config.regions, config.feature_dim}) {
    throw ShapeError("features " + to_string(input.features.shape()) + " do not match batch of " +
                     std::to_string(batch) + " with K=" + std::to_string(config.regions) + ", Dv=" +
                     std::to_string(config.feature_dim));
  }
  ModelVars out;
  const GruVars gru = bind_gru(graph, "gru");
  out.question = encode_questions(gru, graph.parameter(kEmbeddingParam), input.questions);

  const ad::Var features = graph.constant(input.features);
  const std::vector<HeadVars> heads = bind_attention(graph, config.attention, config.weight_norm);
  out.attention = attend(config.attention, heads, features, out.question, config.regions, config.activation_spec());

  out.joint = joint_embed(config, out.attention.pooled, out.question, mode, rng);
  out.probabilities = classify(config, out.joint, mode, rng);
  if (!input.targets.empty()) {
    if (input.targets.shape() != Shape{batch, config.num_answers}) {
      throw ShapeError("targets " + to_string(input.targets.shape()) + " vs [" + std::to_string(batch) + "x" +
                       std::to_string(config.num_answers) + "]");
    }
    out.loss = ad::binary_cross_entropy(out.probabilities, graph.constant(input.targets));
  }
  return out;
}

ForwardResult forward(const ModelConfig& config, const ParamStore& params, const ModelInput& input, Mode mode,
                      std::mt19937_64* rng) {
  ad::Graph graph(&params);
  const ModelVars vars = build_model(graph, config, input, mode, rng);
  ForwardResult result;
  result.probabilities = vars.probabilities.value();
  const std::size_t answers = result.probabilities.cols();
  for (std::size_t b = 0; b < input.batch_size(); ++b) {
    result.predicted.push_back(argmax(result.probabilities.data().subspan(b * answers, answers)));
  }
  if (vars.loss) result.loss = vars.loss->value().item();
  for (const ad::Var& w : vars.attention.weights) result.head_weights.push_back(w.value());
  result.combined = vars.attention.combined.value();
  return result;
}

void mask_frozen_gradients(Gradients& grads, const ModelParams& params) {
  auto it = grads.find(kEmbeddingParam);
  if (it == grads.end()) return;
  Tensor& grad = it->second;
  const std::size_t width = grad.cols();
  for (std::size_t r = 0; r < params.embedding_trainable.size(); ++r) {
    if (params.embedding_trainable[r]) continue;
    std::fill_n(grad.data().begin() + r * width, width, 0.0);
  }
}

Tensor joint_embed(const ModelConfig& config, const ParamStore& params, const Tensor& pooled, const Tensor& question) {
  ad::Graph g(&params);
  const ad::Var out = joint_embed(config, g.constant(pooled.reshaped({1, pooled.size()})),
                                  g.constant(question.reshaped({1, question.size()})), Mode::kEval, nullptr);
  return out.value().reshaped({out.value().size()});
}

Tensor classify(const ModelConfig& config, const ParamStore& params, const Tensor& joint) {
  ad::Graph g(&params);
  const ad::Var out = classify(config, g.constant(joint.reshaped({1, joint.size()})), Mode::kEval, nullptr);
  return out.value().reshaped({out.value().size()});
}

std::size_t argmax(std::span<const double> values) {
  if (values.empty()) throw ContractError("argmax of an empty range");
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i] > values[best]) best = i;
  }
  return best;
}

double bce_loss(const Tensor& probabilities, const Tensor& targets) {
  ad::Graph g;
  return ad::binary_cross_entropy(g.constant(probabilities), g.constant(targets)).value().item();
}

double vqa_accuracy(const Tensor& probabilities, const Tensor& targets) {
  if (probabilities.shape() != targets.shape()) {
    throw ShapeError("vqa_accuracy: " + to_string(probabilities.shape()) + " vs " + to_string(targets.shape()));
  }
  const std::size_t rows = probabilities.rows(), cols = probabilities.cols();
  if (rows == 0 || probabilities.empty()) throw ContractError("vqa_accuracy on an empty batch");
  double total = 0.0;
  for (std::size_t r = 0; r < rows; ++r) {
    total += targets[r * cols + argmax(probabilities.data().subspan(r * cols, cols))];
  }
  return total / static_cast<double>(rows);
}

}  // namespace vqa
