#pragma once

#include <cstddef>
#include <filesystem>
#include <istream>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "json.hpp"
#include "sdoh/corpus.hpp"

namespace sdoh {

class EmbeddingTable {
 public:
  EmbeddingTable() = default;
  explicit EmbeddingTable(std::size_t dim) : dim_(dim) {}

  std::size_t dim() const { return dim_; }
  std::size_t size() const { return rows_.size(); }

  // Throws Error on arity mismatch, duplicate token or non-finite value.
  void add(std::string token, std::vector<double> values);
  // Lowercases `token` before the lookup. nullptr when out of vocabulary.
  const std::vector<double>* find(std::string_view token) const;

 private:
  std::size_t dim_ = 0;
  std::unordered_map<std::string, std::vector<double>> rows_;
};

// "<vocab_size> <dim>" header, then "<token> v1 ... v_dim" per line.
EmbeddingTable read_embeddings(std::istream& in);
EmbeddingTable load_embeddings(const std::filesystem::path& path);
void write_embeddings(std::ostream& out, const EmbeddingTable& table,
                      std::span<const std::string> vocabulary);

std::string lowercase(std::string_view s);

enum class TfMode { raw, lognorm };

TfMode parse_tf_mode(std::string_view s);
std::string to_string(TfMode m);

struct SourceIdf {
  std::size_t documents = 0;
  std::map<std::string, std::size_t> df;
};

// Per-source document frequencies. idf(t) = ln((1 + N) / (1 + df(t))) + 1.
class TfidfModel {
 public:
  TfMode tf_mode = TfMode::raw;
  std::map<std::string, SourceIdf> sources;

  bool has_source(const std::string& source) const { return sources.count(source) != 0; }
  double idf(const std::string& source, const std::string& token) const;
  // Lowercased token -> tf * idf for one sample. Throws Error for an unfitted
  // source.
  std::map<std::string, double> weights(const Sample& sample) const;

  nlohmann::json to_json() const;
  static TfidfModel from_json(const nlohmann::json& j);
};

TfidfModel fit_tfidf(std::span<const Sample> samples, TfMode tf_mode = TfMode::raw);

struct SampleVector {
  std::string sample_id;
  std::vector<double> values;
  double norm = 0.0;
};

// TF-IDF weighted mean of in-vocabulary token embeddings; zero vector when no
// token is in vocabulary.
SampleVector sample_vector(const Sample& sample, const EmbeddingTable& embeddings, const TfidfModel& tfidf);

// All samples, in input order. Runs in parallel over samples.
std::vector<SampleVector> sample_vectors(std::span<const Sample> samples, const EmbeddingTable& embeddings,
                                         const TfidfModel& tfidf);

double dot(std::span<const double> u, std::span<const double> v);
double euclidean_norm(std::span<const double> v);

// 0 when either vector is zero. Throws Error on dimension mismatch.
double cosine(std::span<const double> u, std::span<const double> v);
double cosine(const SampleVector& u, const SampleVector& v);

nlohmann::json vectors_to_json(std::span<const SampleVector> vectors);
std::vector<SampleVector> vectors_from_json(const nlohmann::json& j);

}  // namespace sdoh
