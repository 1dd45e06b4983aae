#include "sdoh/surrogate.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "sdoh/error.hpp"

namespace sdoh {

std::vector<std::string> surrogate_classes(const EventTypeSpec& type) {
  std::vector<std::string> classes = type.salient().labels;
  classes.emplace_back(kMultipleClass);
  classes.emplace_back(kAbsentClass);
  return classes;
}

std::string derive_sample_label(std::span<const Event> events, const EventTypeSpec& type,
                                std::vector<std::string>* warnings) {
  const Event* only = nullptr;
  std::size_t count = 0;
  for (const auto& e : events) {
    if (e.trigger.event_type != type.name) continue;
    ++count;
    only = &e;
  }
  if (count == 0) return std::string(kAbsentClass);
  if (count >= 2) return std::string(kMultipleClass);
  if (const auto* arg = only->find_labeled(type.salient_arg)) return arg->subtype;
  if (warnings) warnings->push_back(type.name + " event without " + type.salient_arg + " labeled as absent");
  return std::string(kAbsentClass);
}

LabelTable derive_labels(const AnnotationSet& annotations, std::span<const Sample> samples,
                         const EventSchema& schema, std::vector<std::string>* warnings) {
  LabelTable out;
  static const std::vector<Event> none;
  for (const auto& s : samples) {
    auto it = annotations.find(s.id);
    const auto& events = it == annotations.end() ? none : it->second;
    auto& row = out[s.id];
    for (const auto& type : schema.event_types()) {
      std::vector<std::string> local;
      row[type.name] = derive_sample_label(events, type, warnings ? &local : nullptr);
      if (warnings)
        for (auto& w : local) warnings->push_back(s.id + ": " + w);
    }
  }
  return out;
}

nlohmann::json labels_to_json(const LabelTable& labels) { return labels; }

LabelTable labels_from_json(const nlohmann::json& j) {
  try {
    return j.get<LabelTable>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("malformed labels file: ") + e.what());
  }
}

nlohmann::json profiles_to_json(std::span<const ProbProfile> profiles, const EventSchema& schema) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& p : profiles) {
    nlohmann::json dists = nlohmann::json::object();
    for (std::size_t k = 0; k < schema.size(); ++k) dists[schema.event_types()[k].name] = p.distributions.at(k);
    out.push_back({{"id", p.sample_id}, {"distributions", std::move(dists)}});
  }
  return out;
}

std::vector<ProbProfile> profiles_from_json(const nlohmann::json& j, const EventSchema& schema) {
  std::vector<ProbProfile> out;
  try {
    for (const auto& row : j) {
      ProbProfile p;
      p.sample_id = row.at("id").get<std::string>();
      for (const auto& type : schema.event_types()) {
        auto d = row.at("distributions").at(type.name).get<std::vector<double>>();
        double total = 0.0;
        for (double v : d) {
          if (!(v >= 0.0) || !std::isfinite(v)) throw Error("profile " + p.sample_id + ": invalid probability");
          total += v;
        }
        if (d.empty() || std::abs(total - 1.0) > 1e-6)
          throw Error("profile " + p.sample_id + "/" + type.name + " does not sum to 1");
        p.distributions.push_back(std::move(d));
      }
      out.push_back(std::move(p));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("malformed profiles file: ") + e.what());
  }
  return out;
}

Matrix encode_tokens(const Sample& sample, const EmbeddingTable& embeddings, bool skip_oov, std::size_t token_begin,
                     std::size_t token_end) {
  token_end = std::min(token_end, sample.tokens.size());
  std::vector<const std::vector<double>*> rows;
  for (std::size_t t = token_begin; t < token_end; ++t) {
    const auto* e = embeddings.find(sample.tokens[t].text);
    if (e || !skip_oov) rows.push_back(e);
  }
  Matrix m(rows.size(), embeddings.dim());
  for (std::size_t r = 0; r < rows.size(); ++r)
    if (rows[r]) std::copy(rows[r]->begin(), rows[r]->end(), m.row(r).begin());
  return m;
}

SurrogateModel::SurrogateModel(EventSchema schema, std::size_t dim) : schema_(std::move(schema)), dim_(dim) {
  if (dim_ == 0) throw Error("surrogate: embedding dimension must be positive");
  for (const auto& type : schema_.event_types()) {
    classes_.push_back(surrogate_classes(type));
    const std::size_t c = classes_.back().size();
    Head h;
    h.query = params_.add(type.name + ".attn", 1, dim_);
    h.weight = params_.add(type.name + ".W", c, dim_);
    h.bias = params_.add(type.name + ".b", c, 1, Init::zero);
    heads_.push_back(h);
  }
}

std::vector<std::vector<double>> SurrogateModel::forward(const Matrix& values) const {
  std::vector<std::vector<double>> out;
  out.reserve(heads_.size());
  for (std::size_t k = 0; k < heads_.size(); ++k) {
    const std::size_t c = classes_[k].size();
    if (values.rows() == 0) {
      out.emplace_back(c, 1.0 / static_cast<double>(c));
      continue;
    }
    const auto& h = heads_[k];
    const auto att = attention_pool(values, params_[h.query].value.row(0));
    std::vector<double> logits(params_[h.bias].value.data().begin(), params_[h.bias].value.data().end());
    matvec(params_[h.weight].value, att.context, logits, true);
    out.push_back(softmax(logits));
  }
  return out;
}

ProbProfile SurrogateModel::profile(const Sample& sample, const EmbeddingTable& embeddings) const {
  return {sample.id, forward(encode_tokens(sample, embeddings, true))};
}

double SurrogateModel::loss(const SurrogateExample& example, bool with_grad) {
  if (example.gold.size() != heads_.size()) throw Error("surrogate: example has wrong label count");
  const Matrix& V = example.values;
  double total = 0.0;
  for (std::size_t k = 0; k < heads_.size(); ++k) {
    const std::size_t c = classes_[k].size();
    if (V.rows() == 0) {
      total += std::log(static_cast<double>(c));
      continue;
    }
    auto& h = heads_[k];
    const auto att = attention_pool(V, params_[h.query].value.row(0));
    std::vector<double> logits(params_[h.bias].value.data().begin(), params_[h.bias].value.data().end());
    matvec(params_[h.weight].value, att.context, logits, true);
    auto p = softmax(logits);
    total += cross_entropy(p, example.gold[k]);
    if (!with_grad) continue;

    p[example.gold[k]] -= 1.0;  // dL/dlogits
    outer_add(params_[h.weight].grad, p, att.context);
    for (std::size_t i = 0; i < c; ++i) params_[h.bias].grad(i, 0) += p[i];
    std::vector<double> dcontext(dim_, 0.0);
    matvec_transposed_add(params_[h.weight].value, p, dcontext);
    attention_pool_backward(V, att, dcontext, params_[h.query].grad.row(0));
  }
  return total;
}

SurrogateExample SurrogateModel::make_example(const Sample& sample, const EmbeddingTable& embeddings,
                                              const SampleLabels& labels) const {
  SurrogateExample ex;
  ex.values = encode_tokens(sample, embeddings, true);
  for (std::size_t k = 0; k < heads_.size(); ++k) {
    const auto& type = schema_.event_types()[k].name;
    auto it = labels.find(type);
    if (it == labels.end()) throw Error("sample " + sample.id + " has no surrogate label for " + type);
    const auto& cls = classes_[k];
    const auto pos = std::find(cls.begin(), cls.end(), it->second);
    if (pos == cls.end()) throw SchemaError("sample " + sample.id + ": unknown class '" + it->second + "' for " + type);
    ex.gold.push_back(static_cast<std::size_t>(pos - cls.begin()));
  }
  return ex;
}

nlohmann::json SurrogateModel::to_json() const {
  return {{"kind", "surrogate"}, {"dim", dim_}, {"schema", schema_.to_json()}, {"params", params_.to_json()}};
}

SurrogateModel SurrogateModel::from_json(const nlohmann::json& j) {
  try {
    if (j.at("kind").get<std::string>() != "surrogate") throw Error("checkpoint is not a surrogate model");
    SurrogateModel m(EventSchema::from_json(j.at("schema")), j.at("dim").get<std::size_t>());
    m.params_.load_json(j.at("params"));
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("malformed surrogate checkpoint: ") + e.what());
  }
}

SurrogateTrainConfig surrogate_config_from_json(const nlohmann::json& j) {
  SurrogateTrainConfig c;
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.momentum = j.value("momentum", c.momentum);
  c.epochs = j.value("epochs", c.epochs);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.seed = j.value("seed", c.seed);
  if (c.batch_size == 0 || !(c.learning_rate >= 0.0)) throw Error("invalid surrogate training config");
  return c;
}

nlohmann::json surrogate_config_to_json(const SurrogateTrainConfig& c) {
  return {{"learning_rate", c.learning_rate}, {"momentum", c.momentum}, {"epochs", c.epochs},
          {"batch_size", c.batch_size}, {"seed", c.seed}};
}

SurrogateModel train_surrogate(const EventSchema& schema, std::size_t dim, std::span<const SurrogateExample> examples,
                               const SurrogateTrainConfig& config, std::vector<double>* epoch_losses) {
  if (examples.empty()) throw Error("train_surrogate: empty training set");
  SurrogateModel model(schema, dim);
  model.params().initialize(config.seed);

  auto mean_loss = [&] {
    double total = 0.0;
    for (const auto& ex : examples) total += model.loss(ex, false);
    return total / static_cast<double>(examples.size());
  };
  if (epoch_losses) epoch_losses->assign(1, mean_loss());

  std::mt19937_64 rng(config.seed ^ 0x9e3779b97f4a7c15ULL);
  std::vector<std::size_t> order(examples.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const SgdConfig step{config.learning_rate / static_cast<double>(config.batch_size), config.momentum};

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    std::size_t in_batch = 0;
    for (auto i : order) {
      if (examples[i].values.rows() == 0) continue;
      model.loss(examples[i], true);
      if (++in_batch == config.batch_size) {
        sgd_step(model.params(), step);
        in_batch = 0;
      }
    }
    if (in_batch > 0) sgd_step(model.params(), step);
    if (epoch_losses) epoch_losses->push_back(mean_loss());
  }
  return model;
}

SurrogateModel train_surrogate(const EventSchema& schema, std::span<const Sample> samples, const LabelTable& labels,
                               const EmbeddingTable& embeddings, const SurrogateTrainConfig& config) {
  const SurrogateModel shape(schema, embeddings.dim());
  std::vector<SurrogateExample> examples;
  examples.reserve(samples.size());
  for (const auto& s : samples) {
    auto it = labels.find(s.id);
    if (it == labels.end()) throw Error("no surrogate labels for sample " + s.id);
    examples.push_back(shape.make_example(s, embeddings, it->second));
  }
  return train_surrogate(schema, embeddings.dim(), examples, config);
}

std::vector<ProbProfile> predict_profiles(const SurrogateModel& model, std::span<const Sample> samples,
                                          const EmbeddingTable& embeddings) {
  std::vector<ProbProfile> out(samples.size());
  const auto n = static_cast<std::ptrdiff_t>(samples.size());
#pragma omp parallel for schedule(dynamic, 8)
  for (std::ptrdiff_t i = 0; i < n; ++i) out[i] = model.profile(samples[i], embeddings);
  return out;
}

SampleLabels predicted_labels(const SurrogateModel& model, const ProbProfile& profile) {
  SampleLabels out;
  for (std::size_t k = 0; k < model.schema().size(); ++k)
    out[model.schema().event_types()[k].name] = model.classes(k)[argmax(profile.distributions.at(k))];
  return out;
}

double entropy(std::span<const double> distribution) {
  double h = 0.0;
  for (double p : distribution)
    if (p > 0.0) h -= p * std::log(p);
  return h;
}

UncertaintyMode parse_uncertainty_mode(std::string_view s) {
  if (s == "sum") return UncertaintyMode::sum;
  if (s == "loop") return UncertaintyMode::loop;
  throw Error("unknown uncertainty mode '" + std::string(s) + "'");
}

std::string to_string(UncertaintyMode m) { return m == UncertaintyMode::sum ? "sum" : "loop"; }

double sample_uncertainty(const ProbProfile& profile, UncertaintyMode mode, std::size_t slot) {
  const auto& d = profile.distributions;
  if (d.empty()) throw Error("profile " + profile.sample_id + " has no distributions");
  if (mode == UncertaintyMode::loop) return entropy(d[slot % d.size()]);
  double total = 0.0;
  for (const auto& p : d) total += entropy(p);
  return total;
}

}  // namespace sdoh
