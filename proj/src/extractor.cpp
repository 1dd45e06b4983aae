#include "sdoh/extractor.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <random>

#include "sdoh/error.hpp"
#include "sdoh/surrogate.hpp"

namespace sdoh {

ExtractorModel::ExtractorModel(EventSchema schema, std::size_t dim) : schema_(std::move(schema)), dim_(dim) {
  if (dim_ == 0) throw Error("extractor: embedding dimension must be positive");
  const std::size_t m = schema_.size();
  for (const auto& type : schema_.event_types()) {
    TriggerHead h;
    h.query = params_.add(type.name + ".trigger.attn", 1, dim_);
    h.weight = params_.add(type.name + ".trigger.W", 2, dim_);
    h.bias = params_.add(type.name + ".trigger.b", 2, 1, Init::zero);
    triggers_.push_back(h);
  }
  for (std::size_t k = 0; k < m; ++k) {
    const auto& type = schema_.event_types()[k];
    for (const auto& arg : type.labeled_args) {
      const std::string prefix = type.name + "." + arg.name;
      LabeledHead h;
      h.query = params_.add(prefix + ".attn", 1, dim_);
      h.weight = params_.add(prefix + ".W", arg.labels.size(), 2 * m + dim_);
      h.bias = params_.add(prefix + ".b", arg.labels.size(), 1, Init::zero);
      labeled_.push_back(h);
      labeled_info_.push_back({k, type.name, arg.name, arg.labels});
      ps_size_ += arg.labels.size();
    }
  }
  for (const auto& type : schema_.event_types()) {
    CrfHead h;
    h.structure = CrfStructure::bio(type.span_args.size());
    h.names = bio_label_names(type.span_args);
    const std::size_t y = h.structure.labels;
    h.token_weight = params_.add(type.name + ".crf.U", y, dim_);
    h.prob_weight = params_.add(type.name + ".crf.P", y, std::max<std::size_t>(ps_size_, 1));
    h.bias = params_.add(type.name + ".crf.b", y, 1, Init::zero);
    h.transitions = params_.add(type.name + ".crf.T", y, y, Init::zero);
    h.start = params_.add(type.name + ".crf.start", y, 1, Init::zero);
    crf_.push_back(std::move(h));
  }
}

std::vector<ExtractorModel::TriggerForward> ExtractorModel::trigger_forward(const Matrix& values) const {
  if (values.rows() == 0) throw Error("extractor: empty sentence");
  std::vector<TriggerForward> out;
  out.reserve(triggers_.size());
  for (const auto& h : triggers_) {
    TriggerForward f;
    f.attention = attention_pool(values, params_[h.query].value.row(0));
    std::vector<double> logits(params_[h.bias].value.data().begin(), params_[h.bias].value.data().end());
    matvec(params_[h.weight].value, f.attention.context, logits, true);
    f.p = softmax(logits);
    out.push_back(std::move(f));
  }
  return out;
}

std::vector<double> ExtractorModel::flatten_trigger_probs(std::span<const TriggerForward> triggers) const {
  std::vector<double> pt;
  pt.reserve(2 * triggers.size());
  for (const auto& t : triggers) pt.insert(pt.end(), t.p.begin(), t.p.end());
  return pt;
}

std::vector<ExtractorModel::LabeledForward> ExtractorModel::labeled_arg_forward(
    const Matrix& values, std::span<const double> trigger_probs) const {
  if (trigger_probs.size() != 2 * triggers_.size()) throw Error("extractor: trigger probability width mismatch");
  std::vector<LabeledForward> out;
  out.reserve(labeled_.size());
  for (const auto& h : labeled_) {
    LabeledForward f;
    f.attention = attention_pool(values, params_[h.query].value.row(0));
    f.features.assign(trigger_probs.begin(), trigger_probs.end());
    f.features.insert(f.features.end(), f.attention.context.begin(), f.attention.context.end());
    std::vector<double> logits(params_[h.bias].value.data().begin(), params_[h.bias].value.data().end());
    matvec(params_[h.weight].value, f.features, logits, true);
    f.p = softmax(logits);
    out.push_back(std::move(f));
  }
  return out;
}

Matrix ExtractorModel::crf_emissions(std::size_t event_index, const Matrix& values,
                                     std::span<const double> labeled_probs) const {
  const auto& h = crf_[event_index];
  const std::size_t y = h.structure.labels;
  std::vector<double> shared(params_[h.bias].value.data().begin(), params_[h.bias].value.data().end());
  if (ps_size_ > 0) matvec(params_[h.prob_weight].value, labeled_probs, shared, true);
  Matrix e(values.rows(), y);
  for (std::size_t i = 0; i < values.rows(); ++i) {
    auto row = e.row(i);
    matvec(params_[h.token_weight].value, values.row(i), row);
    for (std::size_t l = 0; l < y; ++l) row[l] += shared[l];
  }
  return e;
}

CrfParams ExtractorModel::crf_params(std::size_t event_index) const {
  const auto& h = crf_[event_index];
  return {params_[h.transitions].value, params_[h.start].value.data()};
}

SentencePrediction ExtractorModel::predict(const Matrix& values) const {
  SentencePrediction out;
  const auto tf = trigger_forward(values);
  for (const auto& t : tf) out.triggers.push_back({t.p[1], t.attention.argmax});
  const auto pt = flatten_trigger_probs(tf);
  const auto lf = labeled_arg_forward(values, pt);
  std::vector<double> ps;
  ps.reserve(ps_size_);
  for (const auto& l : lf) {
    out.labeled.push_back({l.p, l.attention.argmax});
    ps.insert(ps.end(), l.p.begin(), l.p.end());
  }
  for (std::size_t k = 0; k < crf_.size(); ++k)
    out.tags.push_back(crf_viterbi(crf_[k].structure, crf_params(k), crf_emissions(k, values, ps)));
  return out;
}

double ExtractorModel::loss(const Matrix& V, const SentenceGold& gold, bool with_grad) {
  const std::size_t m = triggers_.size();
  if (gold.present.size() != m || gold.labeled.size() != labeled_.size() || gold.tags.size() != m)
    throw Error("extractor: gold does not match model heads");

  const auto tf = trigger_forward(V);
  const auto pt = flatten_trigger_probs(tf);
  const auto lf = labeled_arg_forward(V, pt);
  std::vector<double> ps;
  ps.reserve(ps_size_);
  for (const auto& l : lf) ps.insert(ps.end(), l.p.begin(), l.p.end());

  double total = 0.0;
  std::vector<double> dps(ps_size_, 0.0);
  std::vector<double> dpt(2 * m, 0.0);

  for (std::size_t k = 0; k < m; ++k) {
    auto& h = crf_[k];
    const Matrix e = crf_emissions(k, V, ps);
    auto g = crf_nll_and_grad(h.structure, crf_params(k), e, gold.tags[k]);
    total += g.loss;
    if (!with_grad) continue;
    std::vector<double> colsum(h.structure.labels, 0.0);
    for (std::size_t i = 0; i < V.rows(); ++i) {
      outer_add(params_[h.token_weight].grad, g.d_emissions.row(i), V.row(i));
      for (std::size_t l = 0; l < colsum.size(); ++l) colsum[l] += g.d_emissions(i, l);
    }
    if (ps_size_ > 0) {
      outer_add(params_[h.prob_weight].grad, colsum, ps);
      matvec_transposed_add(params_[h.prob_weight].value, colsum, dps);
    }
    for (std::size_t l = 0; l < colsum.size(); ++l) {
      params_[h.bias].grad(l, 0) += colsum[l];
      params_[h.start].grad(l, 0) += g.d_start[l];
    }
    auto dt = params_[h.transitions].grad.data();
    for (std::size_t i = 0; i < dt.size(); ++i) dt[i] += g.d_transitions.data()[i];
  }

  std::size_t offset = 0;
  for (std::size_t hi = 0; hi < labeled_.size(); ++hi) {
    const auto& f = lf[hi];
    const std::size_t L = f.p.size();
    const auto& target = gold.labeled[hi];
    if (target) total += cross_entropy(f.p, *target);
    if (with_grad) {
      auto& h = labeled_[hi];
      auto dlogits = softmax_backward(f.p, std::span<const double>(dps).subspan(offset, L));
      if (target) {
        for (std::size_t i = 0; i < L; ++i) dlogits[i] += f.p[i];
        dlogits[*target] -= 1.0;
      }
      outer_add(params_[h.weight].grad, dlogits, f.features);
      for (std::size_t i = 0; i < L; ++i) params_[h.bias].grad(i, 0) += dlogits[i];
      std::vector<double> dfeat(f.features.size(), 0.0);
      matvec_transposed_add(params_[h.weight].value, dlogits, dfeat);
      for (std::size_t i = 0; i < 2 * m; ++i) dpt[i] += dfeat[i];
      attention_pool_backward(V, f.attention, std::span<const double>(dfeat).subspan(2 * m),
                              params_[h.query].grad.row(0));
    }
    offset += L;
  }

  for (std::size_t k = 0; k < m; ++k) {
    const auto& f = tf[k];
    const std::size_t target = gold.present[k] ? 1 : 0;
    total += cross_entropy(f.p, target);
    if (!with_grad) continue;
    auto& h = triggers_[k];
    auto dlogits = softmax_backward(f.p, std::span<const double>(dpt).subspan(2 * k, 2));
    dlogits[0] += f.p[0];
    dlogits[1] += f.p[1];
    dlogits[target] -= 1.0;
    outer_add(params_[h.weight].grad, dlogits, f.attention.context);
    params_[h.bias].grad(0, 0) += dlogits[0];
    params_[h.bias].grad(1, 0) += dlogits[1];
    std::vector<double> dcontext(dim_, 0.0);
    matvec_transposed_add(params_[h.weight].value, dlogits, dcontext);
    attention_pool_backward(V, f.attention, dcontext, params_[h.query].grad.row(0));
  }
  return total;
}

std::vector<Event> ExtractorModel::predict_sample(const Sample& sample, const EmbeddingTable& embeddings) const {
  std::vector<Event> events;
  for (const auto& sb : sample.sentences) {
    const Matrix V = encode_tokens(sample, embeddings, false, sb.begin, sb.end);
    for (auto& e : assemble_events(predict(V), *this, sb.begin)) events.push_back(std::move(e));
  }
  return events;
}

nlohmann::json ExtractorModel::to_json() const {
  return {{"kind", "extractor"}, {"dim", dim_}, {"schema", schema_.to_json()}, {"params", params_.to_json()}};
}

ExtractorModel ExtractorModel::from_json(const nlohmann::json& j) {
  try {
    if (j.at("kind").get<std::string>() != "extractor") throw Error("checkpoint is not an extractor model");
    ExtractorModel m(EventSchema::from_json(j.at("schema")), j.at("dim").get<std::size_t>());
    m.params_.load_json(j.at("params"));
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("malformed extractor checkpoint: ") + e.what());
  }
}

SentenceGold derive_sentence_gold(const ExtractorModel& model, const Sample& sample, std::size_t sentence,
                                  std::span<const Event> events) {
  const auto& schema = model.schema();
  const SentenceBound sb = sample.sentences.at(sentence);
  const std::size_t n = sb.end - sb.begin;

  std::vector<std::vector<const Event*>> by_type(schema.size());
  for (const auto& e : events) {
    if (e.trigger.span.begin < sb.begin || e.trigger.span.begin >= sb.end) continue;
    by_type[schema.index_of(e.trigger.event_type)].push_back(&e);
  }
  for (auto& list : by_type)
    std::stable_sort(list.begin(), list.end(),
                     [](const Event* a, const Event* b) { return a->trigger.span.begin < b->trigger.span.begin; });

  SentenceGold gold;
  for (const auto& list : by_type) gold.present.push_back(list.empty() ? 0 : 1);

  for (const auto& info : model.labeled_heads()) {
    std::optional<std::size_t> target;
    const auto& list = by_type[info.event_index];
    if (!list.empty())
      if (const auto* arg = list.front()->find_labeled(info.arg_type)) {
        const auto pos = std::find(info.labels.begin(), info.labels.end(), arg->subtype);
        if (pos == info.labels.end())
          throw SchemaError(sample.id + ": unknown subtype '" + arg->subtype + "' for " + info.event_type + "/" +
                            info.arg_type);
        target = static_cast<std::size_t>(pos - info.labels.begin());
      }
    gold.labeled.push_back(target);
  }

  for (std::size_t k = 0; k < schema.size(); ++k) {
    const auto& type = schema.event_types()[k];
    std::vector<std::size_t> tags(n, 0);
    for (const Event* e : by_type[k])
      for (const auto& arg : e->span_args) {
        const std::size_t b = std::max(arg.span.begin, sb.begin);
        const std::size_t en = std::min(arg.span.end, sb.end);
        if (b >= en) continue;
        const auto a = static_cast<std::size_t>(std::find(type.span_args.begin(), type.span_args.end(), arg.arg_type) -
                                                type.span_args.begin());
        if (a == type.span_args.size())
          throw SchemaError(sample.id + ": unknown span-only argument " + arg.arg_type);
        for (std::size_t t = b; t < en; ++t) {
          if (tags[t - sb.begin] != 0)
            throw Error(sample.id + ": overlapping " + type.name + " span-only arguments at token " +
                        std::to_string(t) + " (overlapping spans cannot be tagged)");
          tags[t - sb.begin] = t == b ? bio_begin(a) : bio_inside(a);
        }
      }
    gold.tags.push_back(std::move(tags));
  }
  return gold;
}

std::vector<Event> assemble_events(const SentencePrediction& pred, const ExtractorModel& model,
                                   std::size_t token_offset) {
  const auto& schema = model.schema();
  std::vector<Event> out;
  for (std::size_t k = 0; k < schema.size(); ++k) {
    if (!(pred.triggers.at(k).p_present > kDetectionThreshold)) continue;
    const auto& type = schema.event_types()[k];
    Event ev;
    const std::size_t t = token_offset + pred.triggers[k].token;
    ev.trigger = {type.name, {t, t + 1}};
    for (std::size_t h = 0; h < model.labeled_heads().size(); ++h) {
      const auto& info = model.labeled_heads()[h];
      if (info.event_index != k) continue;
      const auto& l = pred.labeled.at(h);
      const std::size_t at = token_offset + l.token;
      ev.labeled_args.push_back({info.arg_type, {at, at + 1}, info.labels[argmax(l.distribution)]});
    }
    const auto& tags = pred.tags.at(k);
    for (std::size_t i = 0; i < tags.size();) {
      if (tags[i] == 0) {
        ++i;
        continue;
      }
      const std::size_t a = (tags[i] - 1) / 2;
      std::size_t j = i + 1;
      while (j < tags.size() && tags[j] == bio_inside(a)) ++j;
      ev.span_args.push_back({type.span_args[a], {token_offset + i, token_offset + j}});
      i = j;
    }
    out.push_back(std::move(ev));
  }
  return out;
}

ExtractorTrainConfig extractor_config_from_json(const nlohmann::json& j) {
  ExtractorTrainConfig c;
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.momentum = j.value("momentum", c.momentum);
  c.epochs = j.value("epochs", c.epochs);
  c.seed = j.value("seed", c.seed);
  if (!(c.learning_rate >= 0.0)) throw Error("invalid extractor training config");
  return c;
}

nlohmann::json extractor_config_to_json(const ExtractorTrainConfig& c) {
  return {{"learning_rate", c.learning_rate}, {"momentum", c.momentum}, {"epochs", c.epochs}, {"seed", c.seed}};
}

ExtractorModel train_extractor(const EventSchema& schema, std::span<const Sample> samples,
                               const AnnotationSet& gold, const EmbeddingTable& embeddings,
                               const ExtractorTrainConfig& config, std::vector<double>* epoch_losses) {
  ExtractorModel model(schema, embeddings.dim());
  struct Item {
    Matrix values;
    SentenceGold gold;
  };
  std::vector<Item> items;
  static const std::vector<Event> none;
  for (const auto& s : samples) {
    auto it = gold.find(s.id);
    const auto& events = it == gold.end() ? none : it->second;
    for (std::size_t i = 0; i < s.sentences.size(); ++i) {
      const auto& sb = s.sentences[i];
      items.push_back({encode_tokens(s, embeddings, false, sb.begin, sb.end), derive_sentence_gold(model, s, i, events)});
    }
  }
  if (items.empty()) throw Error("train_extractor: empty training set");

  model.params().initialize(config.seed);
  auto mean_loss = [&] {
    double total = 0.0;
    for (const auto& it : items) total += model.loss(it.values, it.gold, false);
    return total / static_cast<double>(items.size());
  };
  if (epoch_losses) epoch_losses->assign(1, mean_loss());

  std::mt19937_64 rng(config.seed ^ 0x5851f42d4c957f2dULL);
  std::vector<std::size_t> order(items.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const SgdConfig step{config.learning_rate, config.momentum};
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (auto i : order) {
      model.loss(items[i].values, items[i].gold, true);
      sgd_step(model.params(), step);
    }
    if (epoch_losses) epoch_losses->push_back(mean_loss());
  }
  return model;
}

AnnotationSet predict_events(const ExtractorModel& model, std::span<const Sample> samples,
                             const EmbeddingTable& embeddings) {
  std::vector<std::vector<Event>> per(samples.size());
  const auto n = static_cast<std::ptrdiff_t>(samples.size());
#pragma omp parallel for schedule(dynamic, 8)
  for (std::ptrdiff_t i = 0; i < n; ++i) per[i] = model.predict_sample(samples[i], embeddings);
  AnnotationSet out;
  for (std::size_t i = 0; i < samples.size(); ++i) out[samples[i].id] = std::move(per[i]);
  return out;
}

}  // namespace sdoh
