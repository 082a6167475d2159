#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "vqa/autodiff.hpp"
#include "vqa/layers.hpp"

namespace vqa {

enum class Normalization { kSoftmax, kSigmoid };

std::string_view to_string(Normalization n);
Normalization parse_normalization(std::string_view name);

// Parametric top-down attention family. heads = 1 is A3, heads = 2 is A3x2;
// sigmoid normalization gives the "S" variants.
struct AttentionConfig {
  std::size_t heads = 1;
  Normalization normalization = Normalization::kSoftmax;
  std::size_t width = 0;  // f_a/f_b/f_c output width; 0 means 2 x question width
  bool use_fc = true;
  // Divide the head sum by the head count. Off keeps alpha = sum of heads.
  bool renormalize = false;

  void validate() const;
  std::size_t resolved_width(std::size_t question_width) const { return width ? width : 2 * question_width; }

  friend bool operator==(const AttentionConfig&, const AttentionConfig&) = default;
};

// A3, A3S, A3x2, A3x3, A3Sx2.
AttentionConfig attention_preset(std::string_view name);

// One head's weights in plain form: f_a on image rows, f_b on the question,
// optional f_c after fusion, and the scalar score layer (weight [1 x P]).
struct AttentionHeadParams {
  nn::LinearParams fa;
  nn::LinearParams fb;
  std::optional<nn::LinearParams> fc;
  nn::LinearParams score;
};

struct HeadVars {
  nn::LinearVars fa;
  nn::LinearVars fb;
  std::optional<nn::LinearVars> fc;
  nn::LinearVars score;
};

struct ActivationSpec {
  ad::Activation kind = ad::Activation::kLeakyRelu;
  double leaky_slope = 0.1;
};

// Softmax cancels a constant score offset, so softmax heads carry no score
// bias parameter; sigmoid heads do.
bool has_score_bias(const AttentionConfig& config);

// Per-head parameter prefix, e.g. "att.h0".
std::string head_prefix(std::size_t head);
void init_attention(ParamStore& store, const AttentionConfig& config, std::size_t feature_width,
                    std::size_t question_width, bool weight_norm, std::mt19937_64& rng);
std::vector<HeadVars> bind_attention(ad::Graph& graph, const AttentionConfig& config, bool weight_norm);
HeadVars constant_head(ad::Graph& graph, const AttentionHeadParams& params);

// Graph-level pieces over a batch. features: [B*K x Dv], question: [B x H].
// Returns scores [B x K] with a_i = w . f_c(f_a(v_i) * f_b(q)) + b.
ad::Var head_scores(const HeadVars& head, ad::Var features, ad::Var question, std::size_t regions,
                    const ActivationSpec& act);
ad::Var normalize(ad::Var scores, Normalization kind);
ad::Var combine_heads(const std::vector<ad::Var>& per_head, bool renormalize = false);

struct AttentionVars {
  std::vector<ad::Var> scores;   // per head, [B x K]
  std::vector<ad::Var> weights;  // per head, [B x K]
  ad::Var combined;              // alpha, [B x K]
  ad::Var pooled;                // [B x Dv]
};

AttentionVars attend(const AttentionConfig& config, const std::vector<HeadVars>& heads, ad::Var features,
                     ad::Var question, std::size_t regions, const ActivationSpec& act);

// Single-example results. Rows of `scores`/`weights` are heads.
struct AttentionOutput {
  Tensor scores;    // [heads x K]
  Tensor weights;   // [heads x K]
  Tensor combined;  // [K]
  Tensor pooled;    // [Dv]
};

Tensor head_scores(const Tensor& features, const Tensor& question, const AttentionHeadParams& head,
                   const ActivationSpec& act = {});
Tensor normalize(const Tensor& scores, Normalization kind);
Tensor combine_heads(const Tensor& per_head_weights, bool renormalize = false);
Tensor pool(const Tensor& features, const Tensor& alpha);
AttentionOutput attend(const AttentionConfig& config, const std::vector<AttentionHeadParams>& heads,
                       const Tensor& features, const Tensor& question, const ActivationSpec& act = {});

}  // namespace vqa
