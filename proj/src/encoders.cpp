#include "vqa/encoders.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "vqa/errors.hpp"
#include "vqa/log.hpp"

namespace vqa {

// ---------------------------------------------------------------------------
// Vocabulary

Vocabulary::Vocabulary() {
  add(kPadToken);
  add(kUnkToken);
}

std::size_t Vocabulary::add(std::string_view token) {
  auto it = index_.find(std::string(token));
  if (it != index_.end()) return it->second;
  tokens_.emplace_back(token);
  index_.emplace(tokens_.back(), tokens_.size() - 1);
  return tokens_.size() - 1;
}

std::size_t Vocabulary::index_of(std::string_view token) const {
  auto it = index_.find(std::string(token));
  return it == index_.end() ? kUnkIndex : it->second;
}

bool Vocabulary::contains(std::string_view token) const { return index_.contains(std::string(token)); }

// ---------------------------------------------------------------------------
// Tokenization

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::size_t pos = 0;
  auto is_space = [](char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; };
  auto is_punct = [](char c) {
    const auto u = static_cast<unsigned char>(c);
    return u < 128 && std::ispunct(u) != 0;
  };
  while (pos < text.size()) {
    while (pos < text.size() && is_space(text[pos])) ++pos;
    std::size_t end = pos;
    while (end < text.size() && !is_space(text[end])) ++end;
    std::size_t first = pos, last = end;
    while (first < last && is_punct(text[first])) ++first;
    while (last > first && is_punct(text[last - 1])) --last;
    if (first < last) {
      std::string token(text.substr(first, last - first));
      for (char& c : token) {
        if (static_cast<unsigned char>(c) < 128) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
      }
      tokens.push_back(std::move(token));
    }
    pos = end;
  }
  return tokens;
}

PaddedQuestion pad_trim(const Vocabulary& vocab, const std::vector<std::string>& tokens, std::size_t max_len) {
  if (max_len == 0) throw ConfigError("pad_trim: max_len must be at least 1");
  PaddedQuestion out;
  out.length = std::min(tokens.size(), max_len);
  out.indices.assign(max_len, kPadIndex);
  for (std::size_t i = 0; i < out.length; ++i) out.indices[i] = vocab.index_of(tokens[i]);
  return out;
}

// ---------------------------------------------------------------------------
// Word-vector files

LoadedWordVectors load_word_vectors(const std::filesystem::path& path, bool finetune) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open word vectors " + path.string());

  Vocabulary vocab;
  std::vector<std::vector<double>> rows;
  std::size_t width = 0;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::istringstream fields(line);
    std::string token;
    if (!(fields >> token)) continue;
    std::vector<double> values;
    std::string field;
    while (fields >> field) {
      double v = 0.0;
      const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
      if (ec != std::errc() || ptr != field.data() + field.size()) {
        throw FormatError(FormatFault::kBadNumber, path.string() + ":" + std::to_string(line_no) +
                                                       ": cannot parse number '" + field + "'");
      }
      values.push_back(v);
    }
    if (values.empty()) {
      throw FormatError(FormatFault::kInconsistentWidth,
                        path.string() + ":" + std::to_string(line_no) + ": token without a vector");
    }
    if (width == 0) width = values.size();
    if (values.size() != width) {
      throw FormatError(FormatFault::kInconsistentWidth, path.string() + ":" + std::to_string(line_no) + ": expected " +
                                                             std::to_string(width) + " values, found " +
                                                             std::to_string(values.size()));
    }
    if (token == Vocabulary::kPadToken || token == Vocabulary::kUnkToken) {
      warn(path.string() + ":" + std::to_string(line_no) + ": reserved token " + token + " ignored");
      continue;
    }
    if (vocab.contains(token)) {
      warn(path.string() + ":" + std::to_string(line_no) + ": duplicate token '" + token + "', last occurrence wins");
      rows[vocab.index_of(token) - 2] = std::move(values);
      continue;
    }
    vocab.add(token);
    rows.push_back(std::move(values));
  }
  if (width == 0) throw FormatError(FormatFault::kMalformedRecord, "word vector file " + path.string() + " is empty");

  LoadedWordVectors out{std::move(vocab), {}};
  const std::size_t v = out.vocabulary.size();
  out.table.vectors = Tensor(Shape{v, width});
  for (std::size_t r = 0; r < rows.size(); ++r) {
    std::copy(rows[r].begin(), rows[r].end(), out.table.vectors.data().begin() + (r + 2) * width);
  }
  out.table.trainable.assign(v, finetune);
  out.table.trainable[kPadIndex] = false;
  out.table.trainable[kUnkIndex] = true;
  return out;
}

void write_word_vectors(const std::filesystem::path& path, const Vocabulary& vocab, const Tensor& vectors) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write word vectors " + path.string());
  const std::size_t width = vectors.cols();
  char buffer[64];
  for (std::size_t i = 2; i < vocab.size(); ++i) {
    out << vocab.token(i);
    for (std::size_t c = 0; c < width; ++c) {
      std::snprintf(buffer, sizeof buffer, " %.17g", vectors.at(i, c));
      out << buffer;
    }
    out << '\n';
  }
}

// ---------------------------------------------------------------------------
// GRU

void GruParams::validate() const {
  const std::size_t h = w_z.shape().at(0), d = w_z.shape().at(1);
  const Shape in{h, d}, rec{h, h}, bias{h};
  for (const Tensor* t : {&w_z, &w_r, &w_h}) {
    if (t->shape() != in) throw ShapeError("GRU input weight " + to_string(t->shape()) + " vs " + to_string(in));
  }
  for (const Tensor* t : {&u_z, &u_r, &u_h}) {
    if (t->shape() != rec) throw ShapeError("GRU recurrent weight " + to_string(t->shape()) + " vs " + to_string(rec));
  }
  for (const Tensor* t : {&b_z, &b_r, &b_h}) {
    if (t->shape() != bias) throw ShapeError("GRU bias " + to_string(t->shape()) + " vs " + to_string(bias));
  }
}

GruParams GruParams::zeros(std::size_t input_width, std::size_t hidden_width) {
  const Shape in{hidden_width, input_width}, rec{hidden_width, hidden_width}, bias{hidden_width};
  return GruParams{Tensor(in), Tensor(in), Tensor(in), Tensor(rec), Tensor(rec), Tensor(rec),
                   Tensor(bias), Tensor(bias), Tensor(bias)};
}

GruVars bind_gru(ad::Graph& graph, std::string_view prefix) {
  auto p = [&](const char* suffix) { return graph.parameter(std::string(prefix) + "." + suffix); };
  return GruVars{p("w_z"), p("w_r"), p("w_h"), p("u_z"), p("u_r"), p("u_h"), p("b_z"), p("b_r"), p("b_h")};
}

GruVars constant_gru(ad::Graph& graph, const GruParams& params) {
  params.validate();
  return GruVars{graph.constant(params.w_z), graph.constant(params.w_r), graph.constant(params.w_h),
                 graph.constant(params.u_z), graph.constant(params.u_r), graph.constant(params.u_h),
                 graph.constant(params.b_z), graph.constant(params.b_r), graph.constant(params.b_h)};
}

ad::Var gru_step(const GruVars& p, ad::Var x, ad::Var h) {
  ad::Graph& g = *x.graph;
  const std::size_t hidden = p.w_z.shape().at(0);
  const ad::Var no_bias = g.constant(Tensor(Shape{hidden}));
  const ad::Var z = ad::sigmoid(ad::add(ad::linear(x, p.w_z, p.b_z), ad::linear(h, p.u_z, no_bias)));
  const ad::Var r = ad::sigmoid(ad::add(ad::linear(x, p.w_r, p.b_r), ad::linear(h, p.u_r, no_bias)));
  const ad::Var candidate =
      ad::tanh(ad::add(ad::linear(x, p.w_h, p.b_h), ad::linear(ad::mul(r, h), p.u_h, no_bias)));
  return ad::add(h, ad::mul(z, ad::sub(candidate, h)));
}

ad::Var encode_questions(const GruVars& p, ad::Var table, const std::vector<const PaddedQuestion*>& questions) {
  ad::Graph& g = *table.graph;
  const std::size_t batch = questions.size();
  const std::size_t hidden = p.w_z.shape().at(0);
  std::size_t steps = 0;
  for (const PaddedQuestion* q : questions) {
    if (q->length > q->indices.size()) throw ContractError("question length exceeds its padded size");
    steps = std::max(steps, q->length);
  }
  ad::Var h = g.constant(Tensor(Shape{batch, hidden}));
  std::vector<std::size_t> column(batch);
  std::vector<bool> keep(batch);
  for (std::size_t t = 0; t < steps; ++t) {
    bool all_active = true;
    for (std::size_t b = 0; b < batch; ++b) {
      keep[b] = t < questions[b]->length;
      all_active = all_active && keep[b];
      column[b] = keep[b] ? questions[b]->indices[t] : kPadIndex;
    }
    const ad::Var x = ad::embedding(table, column);
    const ad::Var next = gru_step(p, x, h);
    h = all_active ? next : ad::select_rows(keep, next, h);
  }
  return h;
}

Tensor gru_cell(const Tensor& x, const Tensor& h, const GruParams& params) {
  ad::Graph g;
  const GruVars p = constant_gru(g, params);
  if (x.size() != params.input_width() || h.size() != params.hidden_width()) {
    throw ShapeError("gru_cell: x " + to_string(x.shape()) + ", h " + to_string(h.shape()) + " for D=" +
                     std::to_string(params.input_width()) + ", H=" + std::to_string(params.hidden_width()));
  }
  const ad::Var out = gru_step(p, g.constant(x.reshaped({1, x.size()})), g.constant(h.reshaped({1, h.size()})));
  return out.value().reshaped({h.size()});
}

Tensor encode_question(const PaddedQuestion& question, const EmbeddingTable& table, const GruParams& params) {
  ad::Graph g;
  const GruVars p = constant_gru(g, params);
  const ad::Var out = encode_questions(p, g.constant(table.vectors), {&question});
  return out.value().reshaped({params.hidden_width()});
}

}  // namespace vqa
