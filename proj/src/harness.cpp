#include "sdoh/harness.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <random>
#include <set>
#include <sstream>
#include <unordered_map>

#include "sdoh/error.hpp"

namespace sdoh {

namespace {

std::mt19937_64 make_rng(std::uint64_t seed, std::uint32_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), stream};
  return std::mt19937_64(seq);
}

std::size_t uniform_index(std::mt19937_64& rng, std::size_t n) {
  return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
}

std::size_t uniform_between(std::mt19937_64& rng, std::size_t lo, std::size_t hi) {
  return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

bool coin(std::mt19937_64& rng, double p) { return std::uniform_real_distribution<double>(0.0, 1.0)(rng) < p; }

const std::string& pick(std::mt19937_64& rng, const std::vector<std::string>& words) {
  return words[uniform_index(rng, words.size())];
}

void check_cue(const std::string& word) {
  auto alnum = [](unsigned char c) { return std::isalnum(c) != 0; };
  if (word.empty() || !alnum(word.front()) || !alnum(word.back()))
    throw Error("cue word '" + word + "' must start and end with a letter or digit");
  for (unsigned char c : word)
    if (std::isspace(c) || std::isupper(c)) throw Error("cue word '" + word + "' must be one lowercase token");
}

std::string filler_word(std::size_t i) { return "w" + std::to_string(i); }

std::string sample_id(std::size_t i) {
  std::string n = std::to_string(i);
  return "syn" + std::string(n.size() < 6 ? 6 - n.size() : 0, '0') + n;
}

struct PlannedArg {
  std::string arg_type;
  std::string subtype;  // empty for span-only
  std::string word;
};

struct PlannedSentence {
  std::vector<std::string> words;
  std::string event_type;  // empty for background sentences
  std::size_t trigger = 0;
  std::vector<std::pair<PlannedArg, std::size_t>> args;  // argument and word position
};

nlohmann::json prf_to_json(const Prf& p) { return {{"precision", p.precision}, {"recall", p.recall}, {"f1", p.f1}}; }

nlohmann::json ratio_to_json(double r) {
  if (std::isinf(r)) return "inf";
  return r;
}

}  // namespace

void SyntheticSpec::validate() const {
  if (samples == 0) throw Error("synthetic spec needs at least one sample");
  if (dim == 0) throw Error("synthetic spec needs a positive embedding dimension");
  if (filler_vocabulary == 0) throw Error("synthetic spec needs filler words");
  if (filler_min > filler_max) throw Error("filler_min exceeds filler_max");
  if (background_min > background_max) throw Error("background_min exceeds background_max");
  for (const auto& w : ambiguous_cues) check_cue(w);
  for (const auto& [name, _] : types)
    if (!schema.find(name)) throw Error("synthetic spec names unknown event type " + name);
  for (const auto& type : schema.event_types()) {
    auto it = types.find(type.name);
    if (it == types.end()) throw Error("synthetic spec lacks event type " + type.name);
    const auto& st = it->second;
    if (st.trigger_cues.empty()) throw Error(type.name + ": no trigger cue words");
    for (const auto& w : st.trigger_cues) check_cue(w);
    for (const auto& w : st.ambiguous_cues) check_cue(w);
    const auto classes = surrogate_classes(type);
    if (st.classes.size() != classes.size()) throw Error(type.name + ": classes must match the surrogate classes");
    double total = 0.0;
    for (const auto& cls : classes) {
      auto c = st.classes.find(cls);
      if (c == st.classes.end()) throw Error(type.name + ": missing class " + cls);
      if (!(c->second.prevalence >= 0.0)) throw Error(type.name + "/" + cls + ": negative prevalence");
      if (!(c->second.cue_noise >= 0.0 && c->second.cue_noise <= 1.0))
        throw Error(type.name + "/" + cls + ": cue noise outside [0, 1]");
      if (c->second.cue_noise > 0.0 && ambiguous_cues.empty() && st.ambiguous_cues.empty())
        throw Error(type.name + "/" + cls + ": cue noise needs ambiguous cue words");
      total += c->second.prevalence;
      for (const auto& w : c->second.cues) check_cue(w);
    }
    if (std::fabs(total - 1.0) > 1e-9) throw Error(type.name + ": class prevalences must sum to 1");
    for (const auto& label : type.salient().labels)
      if (st.classes.at(label).cues.empty()) throw Error(type.name + "/" + label + ": no cue words");
    for (const auto& arg : type.labeled_args) {
      if (arg.name == type.salient_arg) continue;
      auto a = st.other_labeled_cues.find(arg.name);
      if (a == st.other_labeled_cues.end()) throw Error(type.name + ": no cue words for argument " + arg.name);
      for (const auto& label : arg.labels) {
        auto l = a->second.find(label);
        if (l == a->second.end() || l->second.empty())
          throw Error(type.name + "/" + arg.name + "/" + label + ": no cue words");
        for (const auto& w : l->second) check_cue(w);
      }
    }
    for (const auto& sa : st.span_args) {
      if (!type.has_span_arg(sa.arg_type)) throw Error(type.name + ": unknown span argument " + sa.arg_type);
      if (sa.cues.empty()) throw Error(type.name + "/" + sa.arg_type + ": no cue words");
      if (!(sa.rate >= 0.0 && sa.rate <= 1.0)) throw Error(type.name + "/" + sa.arg_type + ": rate outside [0, 1]");
      for (const auto& w : sa.cues) check_cue(w);
    }
  }
}

SyntheticSpec default_synthetic_spec(const EventSchema& schema, double absent_rate, double multiple_rate,
                                     double cue_noise) {
  SyntheticSpec spec;
  spec.schema = schema;
  for (const auto& type : schema.event_types()) {
    const std::string t = lowercase(type.name);
    SyntheticEventType st;
    st.trigger_cues = {t, t + "_hx"};
    st.ambiguous_cues = {t + "_unclear", t + "_reportedly"};
    const auto& labels = type.salient().labels;
    const double each = (1.0 - absent_rate - multiple_rate) / static_cast<double>(labels.size());
    for (const auto& label : labels)
      st.classes[label] = SyntheticClass{each, {t + "_" + label, t + "_" + label + "_alt"}, cue_noise, false};
    st.classes[std::string(kMultipleClass)] = SyntheticClass{multiple_rate, {}, cue_noise, false};
    st.classes[std::string(kAbsentClass)] = SyntheticClass{absent_rate, {}, 0.0, false};
    for (const auto& arg : type.labeled_args) {
      if (arg.name == type.salient_arg) continue;
      for (const auto& label : arg.labels) st.other_labeled_cues[arg.name][label] = {t + "_" + lowercase(arg.name) + "_" + label};
    }
    if (!type.span_args.empty()) {
      const auto& arg = type.span_args.front();
      st.span_args.push_back({arg, {t + "_" + lowercase(arg)}, 0.3});
    }
    spec.types[type.name] = std::move(st);
  }
  return spec;
}

SyntheticSpec rare_class_spec(const EventSchema& schema, double rare_prevalence, double rare_noise,
                              double common_noise, double absent_rate, double multiple_rate) {
  SyntheticSpec spec = default_synthetic_spec(schema, absent_rate, multiple_rate, common_noise);
  for (const auto& type : schema.event_types()) {
    const auto& labels = type.salient().labels;
    auto& st = spec.types.at(type.name);
    const double rest = labels.size() > 1
                            ? (1.0 - absent_rate - multiple_rate - rare_prevalence) / static_cast<double>(labels.size() - 1)
                            : 0.0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      auto& c = st.classes.at(labels[i]);
      if (i + 1 == labels.size()) {
        c.prevalence = labels.size() > 1 ? rare_prevalence : 1.0 - absent_rate - multiple_rate;
        c.cue_noise = rare_noise;
        c.rare = true;
      } else {
        c.prevalence = rest;
      }
    }
  }
  return spec;
}

nlohmann::json synthetic_spec_to_json(const SyntheticSpec& spec) {
  nlohmann::json types = nlohmann::json::object();
  for (const auto& [name, st] : spec.types) {
    nlohmann::json classes = nlohmann::json::object();
    for (const auto& [cls, c] : st.classes)
      classes[cls] = {{"prevalence", c.prevalence}, {"cues", c.cues}, {"cue_noise", c.cue_noise}, {"rare", c.rare}};
    nlohmann::json spans = nlohmann::json::array();
    for (const auto& sa : st.span_args) spans.push_back({{"arg", sa.arg_type}, {"cues", sa.cues}, {"rate", sa.rate}});
    types[name] = {{"trigger_cues", st.trigger_cues},
                   {"classes", classes},
                   {"other_labeled_cues", st.other_labeled_cues},
                   {"span_args", spans},
                   {"ambiguous_cues", st.ambiguous_cues}};
  }
  return {{"schema", spec.schema.to_json()},
          {"types", types},
          {"ambiguous_cues", spec.ambiguous_cues},
          {"filler_vocabulary", spec.filler_vocabulary},
          {"samples", spec.samples},
          {"filler_min", spec.filler_min},
          {"filler_max", spec.filler_max},
          {"background_min", spec.background_min},
          {"background_max", spec.background_max},
          {"dim", spec.dim},
          {"seed", spec.seed}};
}

SyntheticSpec synthetic_spec_from_json(const nlohmann::json& j) {
  try {
    const EventSchema schema = j.contains("schema") ? EventSchema::from_json(j.at("schema")) : EventSchema::defaults();
    SyntheticSpec spec;
    if (j.contains("types")) {
      spec.schema = schema;
      for (const auto& [name, t] : j.at("types").items()) {
        SyntheticEventType st;
        st.trigger_cues = t.at("trigger_cues").get<std::vector<std::string>>();
        for (const auto& [cls, c] : t.at("classes").items())
          st.classes[cls] = SyntheticClass{c.at("prevalence").get<double>(),
                                           c.value("cues", std::vector<std::string>{}), c.value("cue_noise", 0.0),
                                           c.value("rare", false)};
        st.other_labeled_cues =
            t.value("other_labeled_cues", std::map<std::string, std::map<std::string, std::vector<std::string>>>{});
        for (const auto& sa : t.value("span_args", nlohmann::json::array()))
          st.span_args.push_back(
              {sa.at("arg").get<std::string>(), sa.at("cues").get<std::vector<std::string>>(), sa.at("rate").get<double>()});
        st.ambiguous_cues = t.value("ambiguous_cues", std::vector<std::string>{});
        spec.types[name] = std::move(st);
      }
      spec.ambiguous_cues = j.value("ambiguous_cues", std::vector<std::string>{});
    } else if (j.contains("rare_prevalence")) {
      spec = rare_class_spec(schema, j.at("rare_prevalence").get<double>(), j.value("rare_noise", 0.8),
                             j.value("common_noise", 0.18), j.value("absent_rate", 0.4), j.value("multiple_rate", 0.05));
    } else {
      spec = default_synthetic_spec(schema, j.value("absent_rate", 0.4), j.value("multiple_rate", 0.05),
                                    j.value("cue_noise", 0.0));
    }
    spec.filler_vocabulary = j.value("filler_vocabulary", spec.filler_vocabulary);
    spec.samples = j.value("samples", spec.samples);
    spec.filler_min = j.value("filler_min", spec.filler_min);
    spec.filler_max = j.value("filler_max", spec.filler_max);
    spec.background_min = j.value("background_min", spec.background_min);
    spec.background_max = j.value("background_max", spec.background_max);
    spec.dim = j.value("dim", spec.dim);
    spec.seed = j.value("seed", spec.seed);
    spec.validate();
    return spec;
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("malformed synthetic spec: ") + e.what());
  }
}

SyntheticCorpus generate_corpus(const SyntheticSpec& spec) {
  spec.validate();
  SyntheticCorpus corpus;
  corpus.schema = spec.schema;
  auto rng = make_rng(spec.seed, 1);

  for (std::size_t s = 0; s < spec.samples; ++s) {
    std::vector<PlannedSentence> sentences;
    auto fillers = [&](std::size_t n) {
      std::vector<std::string> w;
      for (std::size_t i = 0; i < n; ++i) w.push_back(filler_word(uniform_index(rng, spec.filler_vocabulary)));
      return w;
    };

    for (const auto& type : spec.schema.event_types()) {
      const auto& st = spec.types.at(type.name);
      const auto classes = surrogate_classes(type);
      std::vector<double> weights;
      for (const auto& c : classes) weights.push_back(st.classes.at(c).prevalence);
      std::discrete_distribution<std::size_t> draw(weights.begin(), weights.end());
      const std::string& cls = classes[draw(rng)];
      if (cls == kAbsentClass) continue;

      const auto& labels = type.salient().labels;
      std::vector<std::string> event_labels;
      if (cls == kMultipleClass) {
        for (int k = 0; k < 2; ++k) event_labels.push_back(labels[uniform_index(rng, labels.size())]);
      } else {
        event_labels.push_back(cls);
      }
      const double multiple_noise = st.classes.at(std::string(kMultipleClass)).cue_noise;
      const auto& ambiguous = st.ambiguous_cues.empty() ? spec.ambiguous_cues : st.ambiguous_cues;

      for (const auto& label : event_labels) {
        const auto& c = st.classes.at(label);
        const double noise = cls == kMultipleClass ? std::max(multiple_noise, c.cue_noise) : c.cue_noise;
        std::vector<PlannedArg> args;
        args.push_back({type.salient_arg, label, coin(rng, noise) ? pick(rng, ambiguous) : pick(rng, c.cues)});
        for (const auto& arg : type.labeled_args) {
          if (arg.name == type.salient_arg) continue;
          const auto& sub = arg.labels[uniform_index(rng, arg.labels.size())];
          args.push_back({arg.name, sub, pick(rng, st.other_labeled_cues.at(arg.name).at(sub))});
        }
        for (const auto& sa : st.span_args)
          if (coin(rng, sa.rate)) args.push_back({sa.arg_type, "", pick(rng, sa.cues)});
        std::shuffle(args.begin(), args.end(), rng);

        const std::size_t n_fill = uniform_between(rng, spec.filler_min, spec.filler_max);
        const std::size_t before = uniform_between(rng, 0, n_fill);
        PlannedSentence ps;
        ps.event_type = type.name;
        ps.words = fillers(before);
        ps.trigger = ps.words.size();
        ps.words.push_back(pick(rng, st.trigger_cues));
        for (auto& a : args) {
          ps.args.emplace_back(a, ps.words.size());
          ps.words.push_back(a.word);
        }
        for (auto& w : fillers(n_fill - before)) ps.words.push_back(std::move(w));
        ps.words.push_back(".");
        sentences.push_back(std::move(ps));
      }
    }
    const std::size_t n_background = uniform_between(rng, spec.background_min, spec.background_max);
    for (std::size_t b = 0; b < n_background; ++b) {
      PlannedSentence ps;
      ps.words = fillers(uniform_between(rng, std::max<std::size_t>(spec.filler_min, 1), std::max<std::size_t>(spec.filler_max, 1)));
      ps.words.push_back(".");
      sentences.push_back(std::move(ps));
    }
    std::shuffle(sentences.begin(), sentences.end(), rng);

    std::string text;
    std::size_t n_words = 0;
    for (const auto& ps : sentences)
      for (const auto& w : ps.words) {
        if (!text.empty()) text += ' ';
        text += w;
        ++n_words;
      }
    const std::string id = sample_id(s);
    Sample sample = make_sample(id, "synthetic", "Social History", text);
    if (sample.tokens.size() != n_words) throw Error("synthetic sample " + id + " did not tokenize word by word");

    auto& events = corpus.gold[id];
    std::size_t offset = 0;
    for (const auto& ps : sentences) {
      if (!ps.event_type.empty()) {
        Event e;
        e.trigger = {ps.event_type, {offset + ps.trigger, offset + ps.trigger + 1}};
        for (const auto& [a, pos] : ps.args) {
          const TokenSpan span{offset + pos, offset + pos + 1};
          if (a.subtype.empty())
            e.span_args.push_back({a.arg_type, span});
          else
            e.labeled_args.push_back({a.arg_type, span, a.subtype});
        }
        events.push_back(std::move(e));
      }
      offset += ps.words.size();
    }
    for (const auto& type : spec.schema.event_types()) {
      std::vector<Event> of_type;
      for (const auto& e : events)
        if (e.trigger.event_type == type.name) of_type.push_back(e);
      corpus.labels[id][type.name] = derive_sample_label(of_type, type);
    }
    corpus.samples.push_back(std::move(sample));
  }

  std::set<std::string> vocab{"."};
  for (std::size_t i = 0; i < spec.filler_vocabulary; ++i) vocab.insert(filler_word(i));
  for (const auto& w : spec.ambiguous_cues) vocab.insert(w);
  for (const auto& [_, st] : spec.types) {
    vocab.insert(st.trigger_cues.begin(), st.trigger_cues.end());
    vocab.insert(st.ambiguous_cues.begin(), st.ambiguous_cues.end());
    for (const auto& [__, c] : st.classes) vocab.insert(c.cues.begin(), c.cues.end());
    for (const auto& [__, by_label] : st.other_labeled_cues)
      for (const auto& [___, cues] : by_label) vocab.insert(cues.begin(), cues.end());
    for (const auto& sa : st.span_args) vocab.insert(sa.cues.begin(), sa.cues.end());
  }
  corpus.vocabulary.assign(vocab.begin(), vocab.end());
  corpus.embeddings = EmbeddingTable(spec.dim);
  auto erng = make_rng(spec.seed, 2);
  std::normal_distribution<double> gauss(0.0, 1.0 / std::sqrt(static_cast<double>(spec.dim)));
  for (const auto& w : corpus.vocabulary) {
    std::vector<double> v(spec.dim);
    for (auto& x : v) x = gauss(erng);
    corpus.embeddings.add(w, std::move(v));
  }
  return corpus;
}

std::string to_string(Strategy s) { return s == Strategy::active ? "active" : "random"; }

void CycleConfig::validate(std::size_t corpus_size) const {
  if (eval_size == 0) throw Error("cycle needs a non-empty evaluation split");
  if (seed_size == 0) throw Error("cycle needs a non-empty seed set");
  if (batch_size == 0) throw Error("cycle batch size must be positive");
  if (eval_size + seed_size > corpus_size) throw Error("evaluation split and seed set exceed the corpus");
  selection.validate();
}

nlohmann::json cycle_config_to_json(const CycleConfig& c) {
  nlohmann::json j{{"eval_size", c.eval_size},
                   {"seed_size", c.seed_size},
                   {"rounds", c.rounds},
                   {"batch_size", c.batch_size},
                   {"selection", selection_config_to_json(c.selection)},
                   {"surrogate", surrogate_config_to_json(c.surrogate)},
                   {"tf_mode", to_string(c.tf_mode)},
                   {"seed", c.seed}};
  if (c.extractor) j["extractor"] = extractor_config_to_json(*c.extractor);
  return j;
}

CycleConfig cycle_config_from_json(const nlohmann::json& j) {
  try {
    CycleConfig c;
    c.eval_size = j.value("eval_size", c.eval_size);
    c.seed_size = j.value("seed_size", c.seed_size);
    c.rounds = j.value("rounds", c.rounds);
    c.batch_size = j.value("batch_size", c.batch_size);
    if (j.contains("selection")) c.selection = selection_config_from_json(j.at("selection"));
    if (j.contains("surrogate")) c.surrogate = surrogate_config_from_json(j.at("surrogate"));
    c.tf_mode = parse_tf_mode(j.value("tf_mode", std::string("raw")));
    if (j.contains("extractor")) c.extractor = extractor_config_from_json(j.at("extractor"));
    c.seed = j.value("seed", c.seed);
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("malformed cycle config: ") + e.what());
  }
}

std::vector<std::string> RunMetrics::selected_ids() const {
  std::vector<std::string> ids;
  for (const auto& r : rounds) ids.insert(ids.end(), r.selected.begin(), r.selected.end());
  return ids;
}

Prf surrogate_f1(const LabelTable& gold, const LabelTable& predicted, std::span<const std::string> ids) {
  Tally t;
  for (const auto& id : ids) {
    auto g = gold.find(id);
    if (g == gold.end()) throw Error("no gold labels for sample " + id);
    auto p = predicted.find(id);
    for (const auto& [type, gold_class] : g->second) {
      std::string pred_class(kAbsentClass);
      if (p != predicted.end()) {
        auto pc = p->second.find(type);
        if (pc != p->second.end()) pred_class = pc->second;
      }
      if (gold_class == pred_class) {
        if (gold_class != kAbsentClass) ++t.tp;
        continue;
      }
      if (gold_class != kAbsentClass) ++t.fn;
      if (pred_class != kAbsentClass) ++t.fp;
    }
  }
  return prf(t);
}

RunMetrics run_cycle(const SyntheticCorpus& corpus, const CycleConfig& config, Strategy strategy) {
  const std::size_t n = corpus.samples.size();
  config.validate(n);

  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < n; ++i) index[corpus.samples[i].id] = i;
  auto gather = [&](const std::vector<std::string>& ids) {
    std::vector<Sample> out;
    out.reserve(ids.size());
    for (const auto& id : ids) out.push_back(corpus.samples[index.at(id)]);
    return out;
  };

  std::vector<std::string> order;
  for (const auto& s : corpus.samples) order.push_back(s.id);
  auto split_rng = make_rng(config.seed, 11);
  std::shuffle(order.begin(), order.end(), split_rng);

  RunMetrics m;
  m.strategy = strategy;
  m.eval_ids.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(config.eval_size));
  m.seed_ids.assign(order.begin() + static_cast<std::ptrdiff_t>(config.eval_size),
                    order.begin() + static_cast<std::ptrdiff_t>(config.eval_size + config.seed_size));
  std::vector<std::string> pool(order.begin() + static_cast<std::ptrdiff_t>(config.eval_size + config.seed_size),
                                order.end());
  std::vector<std::string> labeled = m.seed_ids;
  const std::vector<Sample> eval_samples = gather(m.eval_ids);

  const auto tfidf = fit_tfidf(corpus.samples, config.tf_mode);
  const auto vectors = sample_vectors(corpus.samples, corpus.embeddings, tfidf);
  auto query_rng = make_rng(config.seed, strategy == Strategy::active ? 21 : 22);

  for (std::size_t round = 0; round <= config.rounds; ++round) {
    RoundMetrics rm;
    rm.round = round;
    rm.labeled = labeled.size();

    const auto train = gather(labeled);
    const auto model = train_surrogate(corpus.schema, train, corpus.labels, corpus.embeddings, config.surrogate);
    LabelTable predicted;
    for (const auto& p : predict_profiles(model, eval_samples, corpus.embeddings))
      predicted[p.sample_id] = predicted_labels(model, p);
    rm.surrogate = surrogate_f1(corpus.labels, predicted, m.eval_ids);

    if (config.extractor) {
      const auto extractor = train_extractor(corpus.schema, train, corpus.gold, corpus.embeddings, *config.extractor);
      const auto pred = predict_events(extractor, eval_samples, corpus.embeddings);
      AnnotationSet gold_eval;
      for (const auto& id : m.eval_ids) gold_eval[id] = corpus.gold.at(id);
      rm.extractor_triggers = prf(score_triggers(gold_eval, pred).micro());
      rm.extractor_labeled = prf(score_labeled_args(gold_eval, pred).micro());
    }

    if (round < config.rounds) {
      const std::size_t take = std::min(config.batch_size, pool.size());
      rm.truncated = take < config.batch_size;
      if (take > 0) {
        if (strategy == Strategy::active) {
          const auto pool_samples = gather(pool);
          const auto profiles = predict_profiles(model, pool_samples, corpus.embeddings);
          SelectionInputs inputs(profiles, vectors);
          SelectionConfig sc = config.selection;
          sc.batch_size = take;
          rm.selected = greedy_select(pool, inputs, sc).ids;
        } else {
          rm.selected = random_select(pool, take, query_rng());
        }
        const std::set<std::string> chosen(rm.selected.begin(), rm.selected.end());
        std::erase_if(pool, [&](const std::string& id) { return chosen.count(id) != 0; });
        labeled.insert(labeled.end(), rm.selected.begin(), rm.selected.end());
      }
    }
    m.rounds.push_back(std::move(rm));
  }
  return m;
}

std::vector<EnrichmentRow> enrichment(std::span<const SampleLabels> selected, std::span<const SampleLabels> baseline) {
  if (selected.empty() || baseline.empty()) throw Error("enrichment needs non-empty label sets");
  std::map<std::pair<std::string, std::string>, std::pair<double, double>> counts;
  for (const auto& labels : selected)
    for (const auto& [type, cls] : labels)
      if (cls != kAbsentClass) counts[{type, cls}].first += 1.0;
  for (const auto& labels : baseline)
    for (const auto& [type, cls] : labels)
      if (cls != kAbsentClass) counts[{type, cls}].second += 1.0;
  std::vector<EnrichmentRow> rows;
  for (const auto& [key, c] : counts) {
    EnrichmentRow r;
    r.event_type = key.first;
    r.label = key.second;
    r.selected_rate = c.first / static_cast<double>(selected.size());
    r.baseline_rate = c.second / static_cast<double>(baseline.size());
    r.ratio = r.baseline_rate == 0.0 ? std::numeric_limits<double>::infinity() : r.selected_rate / r.baseline_rate;
    rows.push_back(std::move(r));
  }
  return rows;
}

std::string enrichment_to_csv(std::span<const EnrichmentRow> rows) {
  std::ostringstream out;
  out.precision(17);
  out << "event_type,label,selected_rate,baseline_rate,ratio\n";
  for (const auto& r : rows) {
    out << r.event_type << ',' << r.label << ',' << r.selected_rate << ',' << r.baseline_rate << ',';
    if (std::isinf(r.ratio))
      out << "inf";
    else
      out << r.ratio;
    out << '\n';
  }
  return out.str();
}

double rare_label_rate(std::span<const SampleLabels> labels, const SyntheticSpec& spec) {
  if (labels.empty()) return 0.0;
  double count = 0.0;
  for (const auto& sl : labels)
    for (const auto& [type, cls] : sl) {
      auto t = spec.types.find(type);
      if (t == spec.types.end()) continue;
      auto c = t->second.classes.find(cls);
      if (c != t->second.classes.end() && c->second.rare) count += 1.0;
    }
  return count / static_cast<double>(labels.size());
}

SimulationResult simulate(const SyntheticSpec& spec, const CycleConfig& config) {
  const auto corpus = generate_corpus(spec);
  SimulationResult r;
  r.active = run_cycle(corpus, config, Strategy::active);
  r.random = run_cycle(corpus, config, Strategy::random);
  auto labels_of = [&](const std::vector<std::string>& ids) {
    std::vector<SampleLabels> out;
    for (const auto& id : ids) out.push_back(corpus.labels.at(id));
    return out;
  };
  const auto active_labels = labels_of(r.active.selected_ids());
  const auto random_labels = labels_of(r.random.selected_ids());
  if (!active_labels.empty() && !random_labels.empty()) r.enrichment = enrichment(active_labels, random_labels);
  r.rare_rate_active = rare_label_rate(active_labels, spec);
  r.rare_rate_random = rare_label_rate(random_labels, spec);
  return r;
}

nlohmann::json run_metrics_to_json(const RunMetrics& m) {
  nlohmann::json rounds = nlohmann::json::array();
  for (const auto& r : m.rounds) {
    nlohmann::json j{{"round", r.round},
                     {"labeled", r.labeled},
                     {"selected", r.selected},
                     {"truncated", r.truncated},
                     {"surrogate", prf_to_json(r.surrogate)}};
    if (r.extractor_triggers) j["extractor_triggers"] = prf_to_json(*r.extractor_triggers);
    if (r.extractor_labeled) j["extractor_labeled"] = prf_to_json(*r.extractor_labeled);
    rounds.push_back(std::move(j));
  }
  return {{"strategy", to_string(m.strategy)}, {"eval_ids", m.eval_ids}, {"seed_ids", m.seed_ids}, {"rounds", rounds}};
}

nlohmann::json simulation_to_json(const SimulationResult& r) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& e : r.enrichment)
    rows.push_back({{"event_type", e.event_type},
                    {"label", e.label},
                    {"selected_rate", e.selected_rate},
                    {"baseline_rate", e.baseline_rate},
                    {"ratio", ratio_to_json(e.ratio)}});
  const double rare_ratio = r.rare_rate_random == 0.0 ? std::numeric_limits<double>::infinity()
                                                      : r.rare_rate_active / r.rare_rate_random;
  return {{"active", run_metrics_to_json(r.active)},
          {"random", run_metrics_to_json(r.random)},
          {"enrichment", rows},
          {"rare_rate_active", r.rare_rate_active},
          {"rare_rate_random", r.rare_rate_random},
          {"rare_ratio", ratio_to_json(rare_ratio)}};
}

}  // namespace sdoh
