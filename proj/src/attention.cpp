#include "vqa/attention.hpp"

#include "vqa/errors.hpp"

namespace vqa {

std::string_view to_string(Normalization n) { return n == Normalization::kSoftmax ? "softmax" : "sigmoid"; }

Normalization parse_normalization(std::string_view name) {
  if (name == "softmax") return Normalization::kSoftmax;
  if (name == "sigmoid") return Normalization::kSigmoid;
  throw ConfigError("unknown attention normalization '" + std::string(name) + "'");
}

void AttentionConfig::validate() const {
  if (heads < 1) throw ConfigError("attention needs at least one head");
}

AttentionConfig attention_preset(std::string_view name) {
  AttentionConfig c;
  if (name == "A3") return c;
  if (name == "A3S") {
    c.normalization = Normalization::kSigmoid;
    return c;
  }
  if (name == "A3x2" || name == "A3x3") {
    c.heads = name == "A3x2" ? 2 : 3;
    return c;
  }
  if (name == "A3Sx2") {
    c.heads = 2;
    c.normalization = Normalization::kSigmoid;
    return c;
  }
  throw ConfigError("unknown attention preset '" + std::string(name) + "'");
}

bool has_score_bias(const AttentionConfig& config) { return config.normalization != Normalization::kSoftmax; }

std::string head_prefix(std::size_t head) { return "att.h" + std::to_string(head); }

void init_attention(ParamStore& store, const AttentionConfig& config, std::size_t feature_width,
                    std::size_t question_width, bool weight_norm, std::mt19937_64& rng) {
  config.validate();
  const std::size_t width = config.resolved_width(question_width);
  for (std::size_t h = 0; h < config.heads; ++h) {
    const std::string prefix = head_prefix(h);
    nn::init_linear(store, prefix + ".fa", feature_width, width, weight_norm, rng);
    nn::init_linear(store, prefix + ".fb", question_width, width, weight_norm, rng);
    if (config.use_fc) nn::init_linear(store, prefix + ".fc", width, width, weight_norm, rng);
    nn::init_linear(store, prefix + ".score", width, 1, weight_norm, rng, has_score_bias(config));
  }
}

std::vector<HeadVars> bind_attention(ad::Graph& graph, const AttentionConfig& config, bool weight_norm) {
  std::vector<HeadVars> heads;
  for (std::size_t h = 0; h < config.heads; ++h) {
    const std::string prefix = head_prefix(h);
    HeadVars head{nn::bind_linear(graph, prefix + ".fa", weight_norm), nn::bind_linear(graph, prefix + ".fb", weight_norm),
                  std::nullopt, {}};
    if (config.use_fc) head.fc = nn::bind_linear(graph, prefix + ".fc", weight_norm);
    head.score = nn::bind_linear(graph, prefix + ".score", weight_norm, has_score_bias(config));
    heads.push_back(head);
  }
  return heads;
}

HeadVars constant_head(ad::Graph& graph, const AttentionHeadParams& params) {
  HeadVars head{nn::constant_linear(graph, params.fa), nn::constant_linear(graph, params.fb), std::nullopt,
                nn::constant_linear(graph, params.score)};
  if (params.fc) head.fc = nn::constant_linear(graph, *params.fc);
  return head;
}

ad::Var head_scores(const HeadVars& head, ad::Var features, ad::Var question, std::size_t regions,
                    const ActivationSpec& act) {
  if (regions == 0) throw ContractError("attention over zero image regions");
  const ad::Var image = ad::activate(nn::apply(head.fa, features), act.kind, act.leaky_slope);
  const ad::Var query = ad::activate(nn::apply(head.fb, question), act.kind, act.leaky_slope);
  ad::Var fused = ad::mul(image, ad::repeat_rows(query, regions));
  if (head.fc) fused = ad::activate(nn::apply(*head.fc, fused), act.kind, act.leaky_slope);
  const ad::Var scores = nn::apply(head.score, fused);
  const std::size_t batch = question.shape().at(0);
  return ad::reshape(scores, Shape{batch, regions});
}

ad::Var normalize(ad::Var scores, Normalization kind) {
  return kind == Normalization::kSoftmax ? ad::softmax(scores) : ad::sigmoid(scores);
}

ad::Var combine_heads(const std::vector<ad::Var>& per_head, bool renormalize) {
  const ad::Var total = ad::add_all(per_head);
  if (!renormalize || per_head.size() == 1) return total;
  return ad::scale(total, 1.0 / static_cast<double>(per_head.size()));
}

AttentionVars attend(const AttentionConfig& config, const std::vector<HeadVars>& heads, ad::Var features,
                     ad::Var question, std::size_t regions, const ActivationSpec& act) {
  if (heads.empty()) throw ConfigError("attention needs at least one head");
  AttentionVars out;
  for (const HeadVars& head : heads) {
    out.scores.push_back(head_scores(head, features, question, regions, act));
    out.weights.push_back(normalize(out.scores.back(), config.normalization));
  }
  out.combined = combine_heads(out.weights, config.renormalize);
  out.pooled = ad::pool(features, out.combined);
  return out;
}

// ---------------------------------------------------------------------------
// Single-example wrappers

namespace {

void require_features(const Tensor& features) {
  if (features.rank() != 2) throw ShapeError("image features must be [K x Dv], got " + to_string(features.shape()));
  if (features.shape()[0] == 0) throw ContractError("attention over zero image regions");
}

ad::Var as_row(ad::Graph& g, const Tensor& v) { return g.constant(v.reshaped({1, v.size()})); }

}  // namespace

Tensor head_scores(const Tensor& features, const Tensor& question, const AttentionHeadParams& head,
                   const ActivationSpec& act) {
  require_features(features);
  ad::Graph g;
  const std::size_t k = features.shape()[0];
  const ad::Var out = head_scores(constant_head(g, head), g.constant(features), as_row(g, question), k, act);
  return out.value().reshaped({k});
}

Tensor normalize(const Tensor& scores, Normalization kind) {
  ad::Graph g;
  return normalize(g.constant(scores), kind).value();
}

Tensor combine_heads(const Tensor& per_head_weights, bool renormalize) {
  if (per_head_weights.rank() != 2) {
    throw ShapeError("combine_heads expects [heads x K], got " + to_string(per_head_weights.shape()));
  }
  ad::Graph g;
  const std::size_t heads = per_head_weights.shape()[0], k = per_head_weights.shape()[1];
  std::vector<ad::Var> rows;
  for (std::size_t h = 0; h < heads; ++h) {
    std::vector<double> row(per_head_weights.data().begin() + h * k, per_head_weights.data().begin() + (h + 1) * k);
    rows.push_back(g.constant(Tensor(Shape{1, k}, std::move(row))));
  }
  return combine_heads(rows, renormalize).value().reshaped({k});
}

Tensor pool(const Tensor& features, const Tensor& alpha) {
  require_features(features);
  if (alpha.size() != features.shape()[0]) {
    throw ShapeError("pool: features " + to_string(features.shape()) + " vs weights " + to_string(alpha.shape()));
  }
  ad::Graph g;
  const ad::Var out = ad::pool(g.constant(features), as_row(g, alpha));
  return out.value().reshaped({features.shape()[1]});
}

AttentionOutput attend(const AttentionConfig& config, const std::vector<AttentionHeadParams>& heads,
                       const Tensor& features, const Tensor& question, const ActivationSpec& act) {
  require_features(features);
  if (heads.size() != config.heads) throw ConfigError("attention config and parameters disagree on head count");
  ad::Graph g;
  std::vector<HeadVars> vars;
  for (const AttentionHeadParams& h : heads) vars.push_back(constant_head(g, h));
  const std::size_t k = features.shape()[0];
  const AttentionVars result = attend(config, vars, g.constant(features), as_row(g, question), k, act);

  AttentionOutput out{Tensor(Shape{heads.size(), k}), Tensor(Shape{heads.size(), k}), result.combined.value().reshaped({k}),
                      result.pooled.value().reshaped({features.shape()[1]})};
  for (std::size_t h = 0; h < heads.size(); ++h) {
    for (std::size_t i = 0; i < k; ++i) {
      out.scores.at(h, i) = result.scores[h].value()[i];
      out.weights.at(h, i) = result.weights[h].value()[i];
    }
  }
  return out;
}

}  // namespace vqa
