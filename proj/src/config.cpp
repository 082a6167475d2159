#include "vqa/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "vqa/binary_io.hpp"
#include "vqa/errors.hpp"

namespace vqa {

using json = nlohmann::json;

std::size_t SearchSpace::total_runs() const {
  std::size_t total = 0;
  for (const SearchAxis& axis : axes) total += axis.values.size();
  return total;
}

SearchSpace default_search_space() {
  return SearchSpace{{
      {"model.weight_norm", {true, false}},
      {"model.activation", {"relu", "leaky_relu", "tanh"}},
      {"model.dropout_classifier", {0.0, 0.2, 0.3, 0.5}},
      {"model.hidden", {32, 64, 128}},
      {"optimizer.lr", {1e-3, 2e-3, 5e-3}},
  }};
}

TrainConfig tiny_gradcheck_config() {
  TrainConfig c;
  c.model.embed_dim = 4;
  c.model.hidden = 6;
  c.model.feature_dim = 5;
  c.model.regions = 4;
  c.model.num_answers = 3;
  c.model.max_question_length = 5;
  c.model.attention = attention_preset("A3x2");
  // Central differences are meaningless across a kink; keep the check smooth.
  c.model.activation = ad::Activation::kTanh;
  return c;
}

void TrainConfig::validate() const {
  model.validate();
  if (epochs < 1) throw ConfigError("epochs must be at least 1");
  if (batch_size < 1) throw ConfigError("batch_size must be at least 1");
  if (!(optimizer.lr >= 0.0)) throw ConfigError("optimizer.lr must be non-negative");
  if (!(optimizer.beta1 >= 0.0 && optimizer.beta1 < 1.0)) throw ConfigError("optimizer.beta1 must lie in [0,1)");
  if (!(optimizer.beta2 >= 0.0 && optimizer.beta2 < 1.0)) throw ConfigError("optimizer.beta2 must lie in [0,1)");
  for (const SearchAxis& axis : search.axes) {
    if (axis.values.empty()) throw ConfigError("search axis " + axis.field + " has no candidates");
    if (!has_field(*this, axis.field)) throw ConfigError("search axis names unknown field " + axis.field);
  }
  if (gradcheck.batch < 1 || gradcheck.vocab < 3) throw ConfigError("gradcheck needs batch >= 1 and vocab >= 3");
  if (!(gradcheck.eps > 0.0)) throw ConfigError("gradcheck.eps must be positive");
}

bool operator==(const TrainConfig& a, const TrainConfig& b) { return to_json(a) == to_json(b); }

// ---------------------------------------------------------------------------
// JSON mapping

namespace {

// Reads fields from one JSON object and rejects keys nobody asked for.
class Fields {
 public:
  Fields(const json& object, std::string path) : object_(object), path_(std::move(path)) {
    if (!object_.is_object()) throw ConfigError("config section '" + path_ + "' must be an object");
  }

  ~Fields() noexcept(false) {
    if (std::uncaught_exceptions() > 0) return;
    for (const auto& [key, value] : object_.items()) {
      if (!seen_.contains(key)) throw ConfigError("unknown config key '" + qualified(key) + "'");
    }
  }

  const json* find(const char* key) {
    seen_.insert(key);
    auto it = object_.find(key);
    return it == object_.end() ? nullptr : &*it;
  }

  void read(const char* key, std::size_t& out) {
    if (const json* v = find(key)) {
      if (!v->is_number_unsigned() && !(v->is_number_integer() && v->get<long long>() >= 0)) type_error(key, "a non-negative integer");
      out = v->get<std::size_t>();
    }
  }
  void read(const char* key, std::uint64_t& out, int) {
    if (const json* v = find(key)) {
      if (!v->is_number_unsigned() && !(v->is_number_integer() && v->get<long long>() >= 0)) type_error(key, "a non-negative integer");
      out = v->get<std::uint64_t>();
    }
  }
  void read(const char* key, double& out) {
    if (const json* v = find(key)) {
      if (!v->is_number()) type_error(key, "a number");
      out = v->get<double>();
    }
  }
  void read(const char* key, bool& out) {
    if (const json* v = find(key)) {
      if (!v->is_boolean()) type_error(key, "a boolean");
      out = v->get<bool>();
    }
  }
  void read(const char* key, std::string& out) {
    if (const json* v = find(key)) {
      if (!v->is_string()) type_error(key, "a string");
      out = v->get<std::string>();
    }
  }

  std::string qualified(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

 private:
  [[noreturn]] void type_error(const char* key, const char* expected) const {
    throw ConfigError("config key '" + qualified(key) + "' must be " + expected);
  }

  const json& object_;
  std::string path_;
  std::set<std::string> seen_;
};

json attention_json(const AttentionConfig& a) {
  return {{"heads", a.heads},
          {"normalization", std::string(to_string(a.normalization))},
          {"width", a.width},
          {"use_fc", a.use_fc},
          {"renormalize", a.renormalize}};
}

json model_json(const ModelConfig& m) {
  return {{"embed_dim", m.embed_dim},
          {"hidden", m.hidden},
          {"feature_dim", m.feature_dim},
          {"regions", m.regions},
          {"num_answers", m.num_answers},
          {"max_question_length", m.max_question_length},
          {"attention", attention_json(m.attention)},
          {"fusion_width", m.fusion_width},
          {"classifier_width", m.classifier_width},
          {"dropout_fusion", m.dropout_fusion},
          {"dropout_classifier", m.dropout_classifier},
          {"dropout_placement", std::string(to_string(m.dropout_placement))},
          {"activation", std::string(ad::to_string(m.activation))},
          {"leaky_slope", m.leaky_slope},
          {"weight_norm", m.weight_norm},
          {"finetune_embeddings", m.finetune_embeddings}};
}

void read_attention(const json& j, AttentionConfig& a) {
  Fields f(j, "model.attention");
  f.read("heads", a.heads);
  std::string normalization(to_string(a.normalization));
  f.read("normalization", normalization);
  a.normalization = parse_normalization(normalization);
  f.read("width", a.width);
  f.read("use_fc", a.use_fc);
  f.read("renormalize", a.renormalize);
}

void read_model(const json& j, ModelConfig& m) {
  Fields f(j, "model");
  f.read("embed_dim", m.embed_dim);
  f.read("hidden", m.hidden);
  f.read("feature_dim", m.feature_dim);
  f.read("regions", m.regions);
  f.read("num_answers", m.num_answers);
  f.read("max_question_length", m.max_question_length);
  if (const json* a = f.find("attention")) read_attention(*a, m.attention);
  f.read("fusion_width", m.fusion_width);
  f.read("classifier_width", m.classifier_width);
  f.read("dropout_fusion", m.dropout_fusion);
  f.read("dropout_classifier", m.dropout_classifier);
  std::string placement(to_string(m.dropout_placement));
  f.read("dropout_placement", placement);
  m.dropout_placement = parse_dropout_placement(placement);
  std::string activation(ad::to_string(m.activation));
  f.read("activation", activation);
  m.activation = ad::parse_activation(activation);
  f.read("leaky_slope", m.leaky_slope);
  f.read("weight_norm", m.weight_norm);
  f.read("finetune_embeddings", m.finetune_embeddings);
}

}  // namespace

json to_json(const TrainConfig& c) {
  json axes = json::array();
  for (const SearchAxis& axis : c.search.axes) axes.push_back({{"field", axis.field}, {"values", axis.values}});
  return {
      {"model", model_json(c.model)},
      {"optimizer", {{"lr", c.optimizer.lr}, {"beta1", c.optimizer.beta1}, {"beta2", c.optimizer.beta2}}},
      {"epochs", c.epochs},
      {"batch_size", c.batch_size},
      {"patience", c.patience},
      {"seed", c.seed},
      {"paths",
       {{"train", c.paths.train},
        {"val", c.paths.val},
        {"features", c.paths.features},
        {"feature_index", c.paths.feature_index},
        {"vectors", c.paths.vectors},
        {"answers", c.paths.answers},
        {"out_dir", c.paths.out_dir}}},
      {"synthetic",
       {{"task", std::string(to_string(c.synthetic.task))},
        {"seed", c.synthetic.seed},
        {"n", c.synthetic.n},
        {"regions", c.synthetic.regions},
        {"feature_width", c.synthetic.feature_width},
        {"classes", c.synthetic.classes},
        {"embed_dim", c.synthetic.embed_dim}}},
      {"search", {{"axes", axes}, {"budget", c.search_budget}}},
      {"gradcheck",
       {{"seeds", c.gradcheck.seeds},
        {"batch", c.gradcheck.batch},
        {"vocab", c.gradcheck.vocab},
        {"eps", c.gradcheck.eps},
        {"tolerance", c.gradcheck.tolerance}}},
  };
}

TrainConfig config_from_json(const json& j) {
  TrainConfig c;
  {
    Fields top(j, "");
    if (const json* m = top.find("model")) read_model(*m, c.model);
    if (const json* o = top.find("optimizer")) {
      Fields f(*o, "optimizer");
      f.read("lr", c.optimizer.lr);
      f.read("beta1", c.optimizer.beta1);
      f.read("beta2", c.optimizer.beta2);
    }
    top.read("epochs", c.epochs);
    top.read("batch_size", c.batch_size);
    top.read("patience", c.patience);
    top.read("seed", c.seed, 0);
    if (const json* p = top.find("paths")) {
      Fields f(*p, "paths");
      f.read("train", c.paths.train);
      f.read("val", c.paths.val);
      f.read("features", c.paths.features);
      f.read("feature_index", c.paths.feature_index);
      f.read("vectors", c.paths.vectors);
      f.read("answers", c.paths.answers);
      f.read("out_dir", c.paths.out_dir);
    }
    if (const json* s = top.find("synthetic")) {
      Fields f(*s, "synthetic");
      std::string task(to_string(c.synthetic.task));
      f.read("task", task);
      c.synthetic.task = parse_synthetic_task(task);
      f.read("seed", c.synthetic.seed, 0);
      f.read("n", c.synthetic.n);
      f.read("regions", c.synthetic.regions);
      f.read("feature_width", c.synthetic.feature_width);
      f.read("classes", c.synthetic.classes);
      f.read("embed_dim", c.synthetic.embed_dim);
    }
    if (const json* s = top.find("search")) {
      Fields f(*s, "search");
      if (const json* axes = f.find("axes")) {
        if (!axes->is_array()) throw ConfigError("search.axes must be an array");
        c.search.axes.clear();
        for (const json& a : *axes) {
          Fields af(a, "search.axes[]");
          SearchAxis axis;
          af.read("field", axis.field);
          if (const json* values = af.find("values")) {
            if (!values->is_array()) throw ConfigError("search axis values must be an array");
            axis.values.assign(values->begin(), values->end());
          }
          c.search.axes.push_back(std::move(axis));
        }
      }
      f.read("budget", c.search_budget);
    }
    if (const json* g = top.find("gradcheck")) {
      Fields f(*g, "gradcheck");
      f.read("seeds", c.gradcheck.seeds);
      f.read("batch", c.gradcheck.batch);
      f.read("vocab", c.gradcheck.vocab);
      f.read("eps", c.gradcheck.eps);
      f.read("tolerance", c.gradcheck.tolerance);
    }
  }
  c.validate();
  return c;
}

std::string dump_config(const TrainConfig& config) { return to_json(config).dump(2) + "\n"; }

TrainConfig parse_config(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  return config_from_json(j);
}

TrainConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_config(buffer.str());
}

void save_config(const std::filesystem::path& path, const TrainConfig& config) { io::write_file(path, dump_config(config)); }

namespace {

json::json_pointer pointer_for(const std::string& field) {
  std::string ptr = "/" + field;
  for (char& c : ptr) {
    if (c == '.') c = '/';
  }
  return json::json_pointer(ptr);
}

}  // namespace

bool has_field(const TrainConfig& config, const std::string& field) {
  if (field.empty()) return false;
  const json j = to_json(config);
  const auto ptr = pointer_for(field);
  return j.contains(ptr) && !j.at(ptr).is_object();
}

TrainConfig with_field(const TrainConfig& config, const std::string& field, const json& value) {
  if (!has_field(config, field)) throw ConfigError("unknown config field '" + field + "'");
  json j = to_json(config);
  j[pointer_for(field)] = value;
  return config_from_json(j);
}

}  // namespace vqa
