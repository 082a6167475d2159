#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <vector>

#include "vqa/attention.hpp"
#include "vqa/autodiff.hpp"
#include "vqa/encoders.hpp"
#include "vqa/params.hpp"

namespace vqa {

enum class DropoutPlacement { kBeforeActivation, kAfterActivation };

std::string_view to_string(DropoutPlacement p);
DropoutPlacement parse_dropout_placement(std::string_view name);

struct ModelConfig {
  std::size_t embed_dim = 16;
  std::size_t hidden = 64;
  std::size_t feature_dim = 16;
  std::size_t regions = 6;
  std::size_t num_answers = 8;
  std::size_t max_question_length = kDefaultMaxQuestionLength;
  AttentionConfig attention;
  std::size_t fusion_width = 0;      // 0 means 2 x hidden
  std::size_t classifier_width = 0;  // 0 means 2 x hidden
  double dropout_fusion = 0.0;
  double dropout_classifier = 0.2;
  DropoutPlacement dropout_placement = DropoutPlacement::kBeforeActivation;
  ad::Activation activation = ad::Activation::kLeakyRelu;
  double leaky_slope = 0.1;
  bool weight_norm = true;
  bool finetune_embeddings = false;

  void validate() const;
  std::size_t resolved_fusion_width() const { return fusion_width ? fusion_width : 2 * hidden; }
  std::size_t resolved_classifier_width() const { return classifier_width ? classifier_width : 2 * hidden; }
  ActivationSpec activation_spec() const { return {activation, leaky_slope}; }

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

enum class Mode { kTrain, kEval };

// All trainable tensors plus which embedding rows may move.
struct ModelParams {
  ParamStore store;
  std::vector<bool> embedding_trainable;
};

inline constexpr std::string_view kEmbeddingParam = "embedding.table";

// Seed-deterministic initialization; the embedding table is copied in.
ModelParams init_model(const ModelConfig& config, const EmbeddingTable& table, std::uint64_t seed);

// One minibatch in model layout.
struct ModelInput {
  std::vector<const PaddedQuestion*> questions;
  Tensor features;  // [B*K x Dv], K consecutive rows per example
  Tensor targets;   // [B x A]; may be empty when only predicting
  std::size_t batch_size() const { return questions.size(); }
};

struct ModelVars {
  ad::Var question;  // q-hat [B x H]
  AttentionVars attention;
  ad::Var joint;          // [B x F]
  ad::Var probabilities;  // [B x A]
  std::optional<ad::Var> loss;
};

// Builds encode -> attend -> joint embedding -> classifier -> BCE on `graph`,
// whose parameter store must hold the model's parameters. `rng` is only
// drawn from in training mode.
ModelVars build_model(ad::Graph& graph, const ModelConfig& config, const ModelInput& input, Mode mode,
                      std::mt19937_64* rng);

// act(f_v(v)) * act(f_q(q)), dropout in training mode.
ad::Var joint_embed(const ModelConfig& config, ad::Var pooled, ad::Var question, Mode mode, std::mt19937_64* rng);
// sigmoid(L2(act(dropout(L1(h))))) by default.
ad::Var classify(const ModelConfig& config, ad::Var joint, Mode mode, std::mt19937_64* rng);

struct ForwardResult {
  Tensor probabilities;                // [B x A]
  std::vector<std::size_t> predicted;  // argmax per row, ties to lowest index
  std::optional<double> loss;
  std::vector<Tensor> head_weights;    // per head [B x K]
  Tensor combined;                     // [B x K]
};

ForwardResult forward(const ModelConfig& config, const ParamStore& params, const ModelInput& input, Mode mode,
                      std::mt19937_64* rng = nullptr);

// Zeroes gradients of embedding rows that are frozen.
void mask_frozen_gradients(Gradients& grads, const ModelParams& params);

// Single-example evaluation-mode wrappers.
Tensor joint_embed(const ModelConfig& config, const ParamStore& params, const Tensor& pooled, const Tensor& question);
Tensor classify(const ModelConfig& config, const ParamStore& params, const Tensor& joint);

// Index of the largest value; ties resolve to the lowest index.
std::size_t argmax(std::span<const double> values);

// (1/B) sum_b sum_a -[y log p + (1-y) log(1-p)], p clamped to [1e-12, 1-1e-12].
double bce_loss(const Tensor& probabilities, const Tensor& targets);
// Mean over rows of the target score at each row's argmax prediction.
double vqa_accuracy(const Tensor& probabilities, const Tensor& targets);

}  // namespace vqa
