#include "sdoh/scoring.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>
#include <tuple>

#include "sdoh/error.hpp"

namespace sdoh {

namespace {

double safe_div(double num, double den) { return den == 0.0 ? 0.0 : num / den; }

const std::vector<Event>& events_of(const AnnotationSet& set, const std::string& id) {
  static const std::vector<Event> empty;
  auto it = set.find(id);
  return it == set.end() ? empty : it->second;
}

std::set<std::string> sample_ids(const AnnotationSet& a, const AnnotationSet& b) {
  std::set<std::string> ids;
  for (const auto& [id, _] : a) ids.insert(id);
  for (const auto& [id, _] : b) ids.insert(id);
  return ids;
}

// Per-sample alignment over every event type present on either side.
struct SampleAlignment {
  std::vector<AlignedPair> pairs;
  std::vector<bool> gold_matched;
  std::vector<bool> pred_matched;
};

SampleAlignment align_sample(const std::vector<Event>& gold, const std::vector<Event>& pred) {
  SampleAlignment out;
  out.gold_matched.assign(gold.size(), false);
  out.pred_matched.assign(pred.size(), false);
  std::set<std::string> types;
  for (const auto& e : gold) types.insert(e.trigger.event_type);
  for (const auto& e : pred) types.insert(e.trigger.event_type);
  for (const auto& type : types) {
    for (auto& p : align_triggers(gold, pred, type)) {
      out.gold_matched[p.gold_index] = true;
      out.pred_matched[p.pred_index] = true;
      out.pairs.push_back(std::move(p));
    }
  }
  return out;
}

template <typename Fn>
void for_each_sample(const AnnotationSet& gold, const AnnotationSet& pred, Fn&& fn) {
  for (const auto& id : sample_ids(gold, pred)) {
    const auto& g = events_of(gold, id);
    const auto& p = events_of(pred, id);
    fn(g, p, align_sample(g, p));
  }
}

std::map<std::string, std::set<std::size_t>> span_tokens_by_type(const Event& e) {
  std::map<std::string, std::set<std::size_t>> out;
  for (const auto& a : e.span_args)
    for (std::size_t t = a.span.begin; t < a.span.end; ++t) out[a.arg_type].insert(t);
  return out;
}

std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

}  // namespace

Prf prf(const Tally& t) {
  Prf out;
  out.precision = safe_div(static_cast<double>(t.tp), static_cast<double>(t.tp + t.fp));
  out.recall = safe_div(static_cast<double>(t.tp), static_cast<double>(t.tp + t.fn));
  out.f1 = safe_div(2.0 * out.precision * out.recall, out.precision + out.recall);
  return out;
}

std::string ScoreKey::str() const {
  std::string s = event_type;
  if (!arg_type.empty()) s += "/" + arg_type;
  if (!subtype.empty()) s += "/" + subtype;
  return s;
}

Tally ScoreReport::micro() const {
  Tally total;
  for (const auto& [_, t] : per_key) total += t;
  return total;
}

ScoreReport& ScoreReport::operator+=(const ScoreReport& o) {
  for (const auto& [k, t] : o.per_key) per_key[k] += t;
  return *this;
}

ScoreReport micro_average(std::span<const ScoreReport> reports) {
  ScoreReport out;
  for (const auto& r : reports) out += r;
  return out;
}

std::vector<AlignedPair> align_triggers(std::span<const Event> gold, std::span<const Event> pred,
                                        std::string_view event_type) {
  struct Candidate {
    double distance;
    std::size_t gold_start, pred_start, gi, pi;
  };
  std::vector<Candidate> cands;
  for (std::size_t gi = 0; gi < gold.size(); ++gi) {
    if (gold[gi].trigger.event_type != event_type) continue;
    for (std::size_t pi = 0; pi < pred.size(); ++pi) {
      if (pred[pi].trigger.event_type != event_type) continue;
      const auto& gs = gold[gi].trigger.span;
      const auto& ps = pred[pi].trigger.span;
      cands.push_back({std::abs(gs.center() - ps.center()), gs.begin, ps.begin, gi, pi});
    }
  }
  std::sort(cands.begin(), cands.end(), [](const Candidate& a, const Candidate& b) {
    return std::tie(a.distance, a.gold_start, a.pred_start, a.gi, a.pi) <
           std::tie(b.distance, b.gold_start, b.pred_start, b.gi, b.pi);
  });

  std::vector<bool> g_used(gold.size(), false), p_used(pred.size(), false);
  std::vector<AlignedPair> out;
  for (const auto& c : cands) {
    if (g_used[c.gi] || p_used[c.pi]) continue;
    g_used[c.gi] = p_used[c.pi] = true;
    out.push_back({c.gi, c.pi, std::string(event_type), c.distance});
  }
  return out;
}

ScoreReport score_triggers(const AnnotationSet& gold, const AnnotationSet& pred) {
  ScoreReport report;
  for_each_sample(gold, pred, [&](const auto& g, const auto& p, const SampleAlignment& al) {
    for (const auto& pair : al.pairs) report.per_key[{pair.event_type, "", ""}].tp += 1;
    for (std::size_t i = 0; i < g.size(); ++i)
      if (!al.gold_matched[i]) report.per_key[{g[i].trigger.event_type, "", ""}].fn += 1;
    for (std::size_t i = 0; i < p.size(); ++i)
      if (!al.pred_matched[i]) report.per_key[{p[i].trigger.event_type, "", ""}].fp += 1;
  });
  return report;
}

ScoreReport score_labeled_args(const AnnotationSet& gold, const AnnotationSet& pred) {
  ScoreReport report;
  auto key = [](const Event& e, const LabeledArgument& a) {
    return ScoreKey{e.trigger.event_type, a.arg_type, a.subtype};
  };
  for_each_sample(gold, pred, [&](const auto& g, const auto& p, const SampleAlignment& al) {
    for (const auto& pair : al.pairs) {
      const Event& ge = g[pair.gold_index];
      const Event& pe = p[pair.pred_index];
      for (const auto& ga : ge.labeled_args) {
        const auto* pa = pe.find_labeled(ga.arg_type);
        if (pa && pa->subtype == ga.subtype) {
          report.per_key[key(ge, ga)].tp += 1;
        } else {
          report.per_key[key(ge, ga)].fn += 1;
          if (pa) report.per_key[key(pe, *pa)].fp += 1;
        }
      }
      for (const auto& pa : pe.labeled_args)
        if (!ge.find_labeled(pa.arg_type)) report.per_key[key(pe, pa)].fp += 1;
    }
    for (std::size_t i = 0; i < g.size(); ++i)
      if (!al.gold_matched[i])
        for (const auto& a : g[i].labeled_args) report.per_key[key(g[i], a)].fn += 1;
    for (std::size_t i = 0; i < p.size(); ++i)
      if (!al.pred_matched[i])
        for (const auto& a : p[i].labeled_args) report.per_key[key(p[i], a)].fp += 1;
  });
  return report;
}

ScoreReport score_span_args(const AnnotationSet& gold, const AnnotationSet& pred) {
  ScoreReport report;
  for_each_sample(gold, pred, [&](const auto& g, const auto& p, const SampleAlignment& al) {
    for (const auto& pair : al.pairs) {
      const auto gs = span_tokens_by_type(g[pair.gold_index]);
      const auto ps = span_tokens_by_type(p[pair.pred_index]);
      std::set<std::string> arg_types;
      for (const auto& [a, _] : gs) arg_types.insert(a);
      for (const auto& [a, _] : ps) arg_types.insert(a);
      for (const auto& a : arg_types) {
        static const std::set<std::size_t> none;
        const auto& G = gs.count(a) ? gs.at(a) : none;
        const auto& P = ps.count(a) ? ps.at(a) : none;
        Tally& t = report.per_key[{pair.event_type, a, ""}];
        for (auto tok : P) (G.count(tok) ? t.tp : t.fp) += 1;
        for (auto tok : G)
          if (!P.count(tok)) t.fn += 1;
      }
    }
    for (std::size_t i = 0; i < g.size(); ++i)
      if (!al.gold_matched[i])
        for (const auto& [a, toks] : span_tokens_by_type(g[i]))
          report.per_key[{g[i].trigger.event_type, a, ""}].fn += static_cast<std::int64_t>(toks.size());
    for (std::size_t i = 0; i < p.size(); ++i)
      if (!al.pred_matched[i])
        for (const auto& [a, toks] : span_tokens_by_type(p[i]))
          report.per_key[{p[i].trigger.event_type, a, ""}].fp += static_cast<std::int64_t>(toks.size());
  });
  return report;
}

KappaReport kappa_from_counts(std::int64_t n00, std::int64_t n01, std::int64_t n10, std::int64_t n11) {
  KappaReport k;
  k.n00 = n00;
  k.n01 = n01;
  k.n10 = n10;
  k.n11 = n11;
  const double n = static_cast<double>(n00 + n01 + n10 + n11);
  if (n <= 0.0) throw Error("kappa undefined: no qualifying sentences");
  k.p_o = static_cast<double>(n00 + n11) / n;
  const double a1 = static_cast<double>(n10 + n11) / n;
  const double b1 = static_cast<double>(n01 + n11) / n;
  k.p_e = a1 * b1 + (1.0 - a1) * (1.0 - b1);
  // p_e == 1 only when both annotators are constant and identical, so p_o == 1.
  k.kappa = k.p_e < 1.0 ? (k.p_o - k.p_e) / (1.0 - k.p_e) : 1.0;
  k.coverage_fraction = 1.0;
  return k;
}

KappaReport cohens_kappa(const AnnotationSet& a, const AnnotationSet& b, std::span<const Sample> samples,
                         std::string_view event_type) {
  std::int64_t counts[2][2] = {{0, 0}, {0, 0}};
  std::size_t total = 0, included = 0;
  for (const auto& s : samples) {
    std::vector<int> na(s.sentences.size(), 0), nb(s.sentences.size(), 0);
    auto tally = [&](const AnnotationSet& set, std::vector<int>& n) {
      for (const auto& e : events_of(set, s.id)) {
        if (e.trigger.event_type != event_type) continue;
        const std::size_t sent = s.sentence_of(e.trigger.span.begin);
        if (sent >= n.size()) throw RangeError("trigger outside sentence bounds in " + s.id);
        ++n[sent];
      }
    };
    tally(a, na);
    tally(b, nb);
    for (std::size_t i = 0; i < s.sentences.size(); ++i) {
      ++total;
      if (na[i] >= 2 || nb[i] >= 2) continue;
      ++included;
      ++counts[na[i]][nb[i]];
    }
  }
  if (included == 0)
    throw Error("kappa undefined for " + std::string(event_type) + ": no qualifying sentences");
  KappaReport k = kappa_from_counts(counts[0][0], counts[0][1], counts[1][0], counts[1][1]);
  k.event_type = std::string(event_type);
  k.coverage_fraction = static_cast<double>(included) / static_cast<double>(total);
  return k;
}

nlohmann::json report_to_json(const ScoreReport& report) {
  nlohmann::json keys = nlohmann::json::array();
  for (const auto& [k, t] : report.per_key) {
    const Prf m = prf(t);
    nlohmann::json row = {{"event_type", k.event_type}, {"tp", t.tp}, {"fp", t.fp}, {"fn", t.fn},
                          {"precision", m.precision}, {"recall", m.recall}, {"f1", m.f1}};
    if (!k.arg_type.empty()) row["arg_type"] = k.arg_type;
    if (!k.subtype.empty()) row["subtype"] = k.subtype;
    keys.push_back(std::move(row));
  }
  const Tally t = report.micro();
  const Prf m = prf(t);
  return {{"keys", std::move(keys)},
          {"micro", {{"tp", t.tp}, {"fp", t.fp}, {"fn", t.fn}, {"precision", m.precision},
                     {"recall", m.recall}, {"f1", m.f1}}}};
}

nlohmann::json kappa_to_json(const KappaReport& k) {
  return {{"event_type", k.event_type}, {"n00", k.n00}, {"n01", k.n01}, {"n10", k.n10},
          {"n11", k.n11}, {"p_o", k.p_o}, {"p_e", k.p_e}, {"kappa", k.kappa},
          {"coverage_fraction", k.coverage_fraction}};
}

std::string report_to_csv(const std::string& level, const ScoreReport& report, bool header) {
  std::ostringstream out;
  out.precision(17);
  if (header) out << "level,event_type,arg_type,subtype,tp,fp,fn,precision,recall,f1\n";
  auto row = [&](const ScoreKey& k, const Tally& t) {
    const Prf m = prf(t);
    out << level << ',' << csv_escape(k.event_type) << ',' << csv_escape(k.arg_type) << ','
        << csv_escape(k.subtype) << ',' << t.tp << ',' << t.fp << ',' << t.fn << ',' << m.precision << ','
        << m.recall << ',' << m.f1 << '\n';
  };
  for (const auto& [k, t] : report.per_key) row(k, t);
  row({"*micro*", "", ""}, report.micro());
  return out.str();
}

}  // namespace sdoh
