#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "vqa/autodiff.hpp"
#include "vqa/tensor.hpp"

namespace vqa {

inline constexpr std::size_t kPadIndex = 0;
inline constexpr std::size_t kUnkIndex = 1;
inline constexpr std::size_t kDefaultMaxQuestionLength = 14;

// Token -> index map with PAD at 0 and UNK at 1.
class Vocabulary {
 public:
  Vocabulary();

  // Returns the existing index when the token is already present.
  std::size_t add(std::string_view token);
  // Unknown tokens map to kUnkIndex.
  std::size_t index_of(std::string_view token) const;
  bool contains(std::string_view token) const;
  const std::string& token(std::size_t index) const { return tokens_.at(index); }
  std::size_t size() const noexcept { return tokens_.size(); }

  static constexpr std::string_view kPadToken = "<pad>";
  static constexpr std::string_view kUnkToken = "<unk>";

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, std::size_t> index_;
};

// Word vectors [V x D]. Row 0 (PAD) stays zero and is never trainable.
struct EmbeddingTable {
  Tensor vectors;
  std::vector<bool> trainable;

  std::size_t vocab_size() const { return vectors.shape().at(0); }
  std::size_t width() const { return vectors.shape().at(1); }
};

struct LoadedWordVectors {
  Vocabulary vocabulary;
  EmbeddingTable table;
};

// Lowercase, split on whitespace, strip leading/trailing ASCII punctuation,
// drop empty tokens.
std::vector<std::string> tokenize(std::string_view text);

struct PaddedQuestion {
  std::vector<std::size_t> indices;  // exactly max_len entries
  std::size_t length = 0;            // min(token count, max_len)
};

PaddedQuestion pad_trim(const Vocabulary& vocab, const std::vector<std::string>& tokens,
                        std::size_t max_len = kDefaultMaxQuestionLength);

// Plain-text vectors: "token v1 ... vD" per line, no header. Known tokens are
// frozen unless `finetune`; UNK starts at zero and is trainable.
LoadedWordVectors load_word_vectors(const std::filesystem::path& path, bool finetune = false);
void write_word_vectors(const std::filesystem::path& path, const Vocabulary& vocab, const Tensor& vectors);

// Standard single-layer GRU weights. W_* are [H x D], U_* are [H x H].
struct GruParams {
  Tensor w_z, w_r, w_h;
  Tensor u_z, u_r, u_h;
  Tensor b_z, b_r, b_h;

  std::size_t input_width() const { return w_z.shape().at(1); }
  std::size_t hidden_width() const { return w_z.shape().at(0); }
  void validate() const;
  static GruParams zeros(std::size_t input_width, std::size_t hidden_width);
};

struct GruVars {
  ad::Var w_z, w_r, w_h;
  ad::Var u_z, u_r, u_h;
  ad::Var b_z, b_r, b_h;
};

// Binds "<prefix>.w_z" ... "<prefix>.b_h" from the graph's parameter store.
GruVars bind_gru(ad::Graph& graph, std::string_view prefix);
GruVars constant_gru(ad::Graph& graph, const GruParams& params);

// Batched cell on rows: x[B x D], h[B x H] -> [B x H].
//   z = sigmoid(W_z x + U_z h + b_z)
//   r = sigmoid(W_r x + U_r h + b_r)
//   c = tanh(W_h x + U_h (r * h) + b_h)
//   h' = (1 - z) * h + z * c
ad::Var gru_step(const GruVars& p, ad::Var x, ad::Var h);

// Runs the cell over the first `length` tokens of every question from h0 = 0
// and returns the state at that length, [B x H]. Positions past a question's
// length never enter the recurrence.
ad::Var encode_questions(const GruVars& p, ad::Var table, const std::vector<const PaddedQuestion*>& questions);

// Single-example conveniences over the graph code above.
Tensor gru_cell(const Tensor& x, const Tensor& h, const GruParams& params);
Tensor encode_question(const PaddedQuestion& question, const EmbeddingTable& table, const GruParams& params);

}  // namespace vqa
