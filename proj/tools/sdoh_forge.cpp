#include <omp.h>

#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"
#include "sdoh/error.hpp"
#include "sdoh/extractor.hpp"
#include "sdoh/harness.hpp"
#include "sdoh/io.hpp"
#include "sdoh/scoring.hpp"
#include "sdoh/select.hpp"
#include "sdoh/surrogate.hpp"
#include "sdoh/vectors.hpp"

#ifndef SDOH_VERSION
#define SDOH_VERSION "0.0.0"
#endif

namespace fs = std::filesystem;
using nlohmann::json;
using namespace sdoh;

namespace {

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Context {
  RunManifest manifest;
  json config = json::object();
  std::optional<std::uint64_t> seed;
  std::string out;

  void input(const std::string& path) {
    if (path.empty()) return;
    for (auto& [k, v] : input_digests(path)) manifest.input_digests[k] = v;
  }

  std::uint64_t effective_seed(std::uint64_t from_config) {
    const std::uint64_t s = seed.value_or(from_config);
    manifest.seed = s;
    return s;
  }

  void emit(const std::string& text) const {
    if (out.empty())
      std::cout << text;
    else
      write_file(out, text);
  }
};

void report_warnings(const std::vector<std::string>& warnings) {
  for (const auto& w : warnings) std::cerr << "warning: " << w << "\n";
}

EventSchema load_schema(const std::string& path) { return path.empty() ? EventSchema::defaults() : EventSchema::load(path); }

// Events from {id}.ann in `dir` for each sample; missing files mean no events.
AnnotationSet load_predictions(const fs::path& dir, std::span<const Sample> samples, const EventSchema& schema,
                               std::vector<std::string>& warnings) {
  if (!fs::is_directory(dir)) throw Error("not a directory: " + dir.string());
  AnnotationSet out;
  for (const auto& s : samples) {
    auto& events = out[s.id];
    const fs::path ann = dir / (s.id + ".ann");
    if (!fs::exists(ann)) continue;
    std::vector<std::string> w;
    try {
      events = parse_standoff(read_file(ann), s, schema, &w);
    } catch (const Error& e) {
      throw Error(ann.string() + ": " + e.what());
    }
    for (auto& x : w) warnings.push_back(ann.filename().string() + ": " + x);
  }
  return out;
}

std::set<std::string> parse_aliases(const std::string& csv) {
  if (csv.empty()) return default_social_history_aliases();
  std::set<std::string> out;
  std::stringstream ss(csv);
  for (std::string item; std::getline(ss, item, ',');) {
    std::string norm;
    for (char c : item)
      if (!std::isspace(static_cast<unsigned char>(c)) || (!norm.empty() && norm.back() != ' '))
        norm.push_back(std::isspace(static_cast<unsigned char>(c)) ? ' '
                                                                    : static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    while (!norm.empty() && norm.back() == ' ') norm.pop_back();
    if (!norm.empty()) out.insert(norm);
  }
  return out;
}

void configure_threads() {
  const char* env = std::getenv("SDOH_FORGE_THREADS");
  if (!env || !*env) return;
  char* end = nullptr;
  const long n = std::strtol(env, &end, 10);
  if (*end != '\0' || n < 0) throw UsageError(std::string("SDOH_FORGE_THREADS must be a non-negative integer, got ") + env);
  if (n > 0) omp_set_num_threads(static_cast<int>(n));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Social history event extraction, scoring and active learning toolkit", "sdoh-forge"};
  app.set_version_flag("--version", SDOH_VERSION);
  app.require_subcommand(1);

  Context ctx;
  ctx.manifest.tool_version = SDOH_VERSION;
  std::string manifest_path = "sdoh-forge-manifest.json";
  std::uint64_t seed_flag = 0;
  app.add_option("--manifest", manifest_path, "Run manifest path");
  auto* seed_opt = app.add_option("--seed", seed_flag, "Seed for every random stream");

  std::function<void()> run;
  auto add = [&](const std::string& name, const std::string& desc) {
    auto* sub = app.add_subcommand(name, desc);
    sub->add_option("--out", ctx.out, "Output file (stdout when omitted)");
    return sub;
  };

  // extract-sections
  std::string notes_dir, aliases, sections_out;
  auto* ex = add("extract-sections", "Split notes into social history samples");
  ex->add_option("dir", notes_dir, "Directory of .txt notes")->required()->check(CLI::ExistingDirectory);
  ex->add_option("--aliases", aliases, "Comma-separated section headings to keep");
  ex->add_option("--out-dir", sections_out, "Write one {id}.txt per sample here");
  ex->callback([&] {
    run = [&] {
      ctx.input(notes_dir);
      ctx.config = {{"aliases", aliases}};
      const auto keep = parse_aliases(aliases);
      const std::string source = fs::absolute(notes_dir).lexically_normal().filename().string();
      std::vector<Sample> samples;
      for (const auto& f : list_files(notes_dir, ".txt")) {
        auto got = samples_from_document(f.stem().string(), read_file(f), keep, source);
        for (auto& s : got) samples.push_back(std::move(s));
      }
      json rows = json::array();
      for (const auto& s : samples)
        rows.push_back({{"id", s.id},
                        {"source", s.source},
                        {"heading", s.heading},
                        {"tokens", s.tokens.size()},
                        {"sentences", s.sentences.size()},
                        {"text", s.text}});
      if (!sections_out.empty())
        for (const auto& s : samples) write_file(fs::path(sections_out) / (s.id + ".txt"), s.text);
      ctx.emit(json_text(rows));
    };
  });

  // score
  std::string gold_dir, pred_dir, schema_path;
  bool csv = false;
  auto* sc = add("score", "Score predicted annotations against gold");
  sc->add_option("--gold", gold_dir, "Gold corpus directory")->required()->check(CLI::ExistingDirectory);
  sc->add_option("--pred", pred_dir, "Predicted .ann directory")->required()->check(CLI::ExistingDirectory);
  sc->add_option("--schema", schema_path, "Event schema JSON")->required()->check(CLI::ExistingFile);
  sc->add_flag("--csv", csv, "Flat CSV rows instead of JSON");
  sc->callback([&] {
    run = [&] {
      ctx.input(gold_dir);
      ctx.input(pred_dir);
      ctx.input(schema_path);
      ctx.config = {{"csv", csv}};
      const auto schema = load_schema(schema_path);
      auto gold = load_corpus_dir(gold_dir, schema);
      auto pred = load_predictions(pred_dir, gold.samples, schema, gold.warnings);
      report_warnings(gold.warnings);
      const auto triggers = score_triggers(gold.annotations, pred);
      const auto labeled = score_labeled_args(gold.annotations, pred);
      const auto spans = score_span_args(gold.annotations, pred);
      if (csv) {
        ctx.emit(report_to_csv("trigger", triggers, true) + report_to_csv("labeled", labeled, false) +
                 report_to_csv("span", spans, false));
        return;
      }
      const std::vector<ScoreReport> all = {triggers, labeled, spans};
      const auto overall = micro_average(all).micro_prf();
      ctx.emit(json_text({{"triggers", report_to_json(triggers)},
                          {"labeled_args", report_to_json(labeled)},
                          {"span_args", report_to_json(spans)},
                          {"overall", {{"precision", overall.precision}, {"recall", overall.recall}, {"f1", overall.f1}}}}));
    };
  });

  // agreement
  std::string a_dir, b_dir;
  auto* ag = add("agreement", "Sentence-level trigger agreement between two annotators");
  ag->add_option("--a", a_dir, "Annotator A corpus directory")->required()->check(CLI::ExistingDirectory);
  ag->add_option("--b", b_dir, "Annotator B .ann directory")->required()->check(CLI::ExistingDirectory);
  ag->add_option("--schema", schema_path, "Event schema JSON")->required()->check(CLI::ExistingFile);
  ag->callback([&] {
    run = [&] {
      ctx.input(a_dir);
      ctx.input(b_dir);
      ctx.input(schema_path);
      const auto schema = load_schema(schema_path);
      auto a = load_corpus_dir(a_dir, schema);
      auto b = load_predictions(b_dir, a.samples, schema, a.warnings);
      report_warnings(a.warnings);
      json rows = json::array();
      for (const auto& type : schema.event_types()) rows.push_back(kappa_to_json(cohens_kappa(a.annotations, b, a.samples, type.name)));
      ctx.emit(json_text({{"kappa", rows}}));
    };
  });

  // vectorize
  std::string emb_path, corpus_dir, tf = "raw";
  auto* ve = add("vectorize", "TF-IDF weighted embedding vector per sample");
  ve->add_option("--embeddings", emb_path, "Embedding text file")->required()->check(CLI::ExistingFile);
  ve->add_option("--corpus", corpus_dir, "Corpus directory")->required()->check(CLI::ExistingDirectory);
  ve->add_option("--tf", tf, "Term frequency mode")->check(CLI::IsMember({"raw", "lognorm"}));
  ve->callback([&] {
    run = [&] {
      ctx.input(emb_path);
      ctx.input(corpus_dir);
      ctx.config = {{"tf", tf}};
      const auto emb = load_embeddings(emb_path);
      const auto corpus = load_corpus_dir(corpus_dir, EventSchema::defaults());
      const auto vectors = sample_vectors(corpus.samples, emb, fit_tfidf(corpus.samples, parse_tf_mode(tf)));
      ctx.emit(json_text(vectors_to_json(vectors)));
    };
  });

  // train-surrogate / train-extractor
  std::string config_path;
  auto training = [&](const std::string& name, const std::string& desc, bool extractor) {
    auto* t = add(name, desc);
    t->add_option("--corpus", corpus_dir, "Annotated corpus directory")->required()->check(CLI::ExistingDirectory);
    t->add_option("--embeddings", emb_path, "Embedding text file")->required()->check(CLI::ExistingFile);
    t->add_option("--schema", schema_path, "Event schema JSON")->check(CLI::ExistingFile);
    t->add_option("--config", config_path, "Training config JSON")->check(CLI::ExistingFile);
    t->callback([&, extractor] {
      run = [&, extractor] {
        ctx.input(corpus_dir);
        ctx.input(emb_path);
        ctx.input(schema_path);
        ctx.input(config_path);
        const json raw = config_path.empty() ? json::object() : read_json(config_path);
        const auto schema = load_schema(schema_path);
        const auto emb = load_embeddings(emb_path);
        auto corpus = load_corpus_dir(corpus_dir, schema);
        if (extractor) {
          auto cfg = extractor_config_from_json(raw);
          cfg.seed = ctx.effective_seed(cfg.seed);
          ctx.config = extractor_config_to_json(cfg);
          report_warnings(corpus.warnings);
          const auto model = train_extractor(schema, corpus.samples, corpus.annotations, emb, cfg);
          ctx.emit(json_text(model.to_json()));
        } else {
          auto cfg = surrogate_config_from_json(raw);
          cfg.seed = ctx.effective_seed(cfg.seed);
          ctx.config = surrogate_config_to_json(cfg);
          const auto labels = derive_labels(corpus.annotations, corpus.samples, schema, &corpus.warnings);
          report_warnings(corpus.warnings);
          const auto model = train_surrogate(schema, corpus.samples, labels, emb, cfg);
          ctx.emit(json_text(model.to_json()));
        }
      };
    });
  };
  training("train-surrogate", "Train the sample-level surrogate classifier", false);
  training("train-extractor", "Train the sentence-level event extractor", true);

  // predict
  std::string model_path, pred_out;
  auto* pr = add("predict", "Surrogate probability profiles or extractor events");
  pr->add_option("--model", model_path, "Model checkpoint JSON")->required()->check(CLI::ExistingFile);
  pr->add_option("--corpus", corpus_dir, "Corpus directory")->required()->check(CLI::ExistingDirectory);
  pr->add_option("--embeddings", emb_path, "Embedding text file")->required()->check(CLI::ExistingFile);
  pr->add_option("--out-dir", pred_out, "Extractor only: write {id}.ann files here");
  pr->callback([&] {
    run = [&] {
      ctx.input(model_path);
      ctx.input(corpus_dir);
      ctx.input(emb_path);
      const json j = read_json(model_path);
      const auto emb = load_embeddings(emb_path);
      const std::string kind = j.value("kind", "");
      if (kind == "surrogate") {
        const auto model = SurrogateModel::from_json(j);
        const auto corpus = load_corpus_dir(corpus_dir, model.schema());
        ctx.emit(json_text(profiles_to_json(predict_profiles(model, corpus.samples, emb), model.schema())));
      } else if (kind == "extractor") {
        if (pred_out.empty()) throw UsageError("predict with an extractor model needs --out-dir");
        const auto model = ExtractorModel::from_json(j);
        const auto corpus = load_corpus_dir(corpus_dir, model.schema());
        const auto events = predict_events(model, corpus.samples, emb);
        for (const auto& s : corpus.samples) write_file(fs::path(pred_out) / (s.id + ".ann"), serialize_standoff(events.at(s.id), s));
        std::size_t n = 0;
        for (const auto& [_, ev] : events) n += ev.size();
        ctx.emit(json_text({{"samples", corpus.samples.size()}, {"events", n}, {"out_dir", pred_out}}));
      } else {
        throw Error(model_path + ": unknown model kind '" + kind + "'");
      }
    };
  });

  // select
  std::string profiles_path, vectors_path, pool_path, mode = "sum", sim = "maximum";
  double alpha = 0.1;
  std::size_t n = 50;
  bool rescore = false;
  auto* se = add("select", "Greedy batch selection");
  se->add_option("--profiles", profiles_path, "Probability profiles JSON")->required()->check(CLI::ExistingFile);
  se->add_option("--vectors", vectors_path, "Sample vectors JSON")->required()->check(CLI::ExistingFile);
  se->add_option("--pool", pool_path, "Candidate ids, one per line (all profiled samples when omitted)")
      ->check(CLI::ExistingFile);
  se->add_option("--schema", schema_path, "Event schema JSON")->check(CLI::ExistingFile);
  se->add_option("--mode", mode, "Uncertainty mode")->check(CLI::IsMember({"sum", "loop"}));
  se->add_option("--sim", sim, "Similarity mode")->check(CLI::IsMember({"average", "maximum"}));
  se->add_option("--alpha", alpha, "Diversity exponent");
  se->add_option("--n", n, "Batch size");
  se->add_flag("--rescore", rescore, "Report full-batch similarity for every member");
  se->callback([&] {
    run = [&] {
      ctx.input(profiles_path);
      ctx.input(vectors_path);
      ctx.input(pool_path);
      ctx.input(schema_path);
      SelectionConfig cfg;
      cfg.uncertainty = parse_uncertainty_mode(mode);
      cfg.similarity = parse_similarity_mode(sim);
      cfg.alpha = alpha;
      cfg.batch_size = n;
      cfg.rescore_final_batch = rescore;
      ctx.config = selection_config_to_json(cfg);
      cfg.validate();
      const auto schema = load_schema(schema_path);
      const auto profiles = profiles_from_json(read_json(profiles_path), schema);
      const auto vectors = vectors_from_json(read_json(vectors_path));
      std::vector<std::string> pool;
      if (pool_path.empty()) {
        for (const auto& p : profiles) pool.push_back(p.sample_id);
      } else {
        std::istringstream in(read_file(pool_path));
        for (std::string line; std::getline(in, line);)
          if (!line.empty()) pool.push_back(line);
      }
      const SelectionInputs inputs(profiles, vectors);
      ctx.emit(batch_to_csv(greedy_select(pool, inputs, cfg)));
    };
  });

  // simulate
  std::string spec_path, cycle_path, sim_out;
  auto* si = add("simulate", "Active versus random annotation cycles on a synthetic corpus");
  si->add_option("--spec", spec_path, "Synthetic corpus spec JSON")->required()->check(CLI::ExistingFile);
  si->add_option("--cycle", cycle_path, "Cycle config JSON")->required()->check(CLI::ExistingFile);
  si->add_option("--out-dir", sim_out, "Also write metrics.json and enrichment.csv here");
  si->callback([&] {
    run = [&] {
      ctx.input(spec_path);
      ctx.input(cycle_path);
      auto spec = synthetic_spec_from_json(read_json(spec_path));
      auto cycle = cycle_config_from_json(read_json(cycle_path));
      const std::uint64_t seed = ctx.effective_seed(cycle.seed);
      if (ctx.seed) spec.seed = seed;
      cycle.seed = seed;
      ctx.config = {{"spec", synthetic_spec_to_json(spec)}, {"cycle", cycle_config_to_json(cycle)}};
      const auto result = simulate(spec, cycle);
      const std::string metrics = json_text(simulation_to_json(result));
      if (!sim_out.empty()) {
        write_file(fs::path(sim_out) / "metrics.json", metrics);
        write_file(fs::path(sim_out) / "enrichment.csv", enrichment_to_csv(result.enrichment));
      }
      ctx.emit(metrics);
    };
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    std::cerr << app.help();
    return 1;
  }
  if (seed_opt->count() > 0) ctx.seed = seed_flag;
  ctx.manifest.subcommand = app.get_subcommands().front()->get_name();
  ctx.manifest.started = utc_timestamp();

  int code = 0;
  try {
    configure_threads();
    ctx.manifest.seed = ctx.seed.value_or(0);
    run();
    ctx.manifest.status = "ok";
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    ctx.manifest.status = "failed";
    ctx.manifest.error = e.what();
    code = 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    ctx.manifest.status = "failed";
    ctx.manifest.error = e.what();
    code = 2;
  }
  ctx.manifest.config_digest = sha256_hex(json_text(ctx.config));
  ctx.manifest.finished = utc_timestamp();
  try {
    write_file(manifest_path, json_text(ctx.manifest.to_json()));
  } catch (const std::exception& e) {
    std::cerr << "error: cannot write manifest: " << e.what() << "\n";
    if (code == 0) code = 2;
  }
  return code;
}
