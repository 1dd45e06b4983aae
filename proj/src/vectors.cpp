#include "sdoh/vectors.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "sdoh/error.hpp"

namespace sdoh {

std::string lowercase(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

void EmbeddingTable::add(std::string token, std::vector<double> values) {
  if (values.size() != dim_)
    throw Error("embedding for '" + token + "' has " + std::to_string(values.size()) + " values, expected " +
                std::to_string(dim_));
  for (double v : values)
    if (!std::isfinite(v)) throw Error("non-finite embedding value for '" + token + "'");
  if (!rows_.emplace(token, std::move(values)).second) throw Error("duplicate embedding token '" + token + "'");
}

const std::vector<double>* EmbeddingTable::find(std::string_view token) const {
  auto it = rows_.find(lowercase(token));
  return it == rows_.end() ? nullptr : &it->second;
}

EmbeddingTable read_embeddings(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw Error("embedding file: missing header");
  std::istringstream header(line);
  std::size_t vocab = 0, dim = 0;
  std::string extra;
  if (!(header >> vocab >> dim) || (header >> extra) || dim == 0)
    throw Error("embedding file: header must be '<vocab_size> <dim>' with dim > 0");

  EmbeddingTable table(dim);
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    ++row;
    std::istringstream fields(line);
    std::string token;
    fields >> token;
    std::vector<double> values;
    std::string num;
    while (fields >> num) {
      double v = 0.0;
      auto [p, ec] = std::from_chars(num.data(), num.data() + num.size(), v);
      if (ec != std::errc() || p != num.data() + num.size())
        throw Error("embedding file row " + std::to_string(row) + ": bad number '" + num + "'");
      values.push_back(v);
    }
    if (values.size() != dim)
      throw Error("embedding file row " + std::to_string(row) + ": expected " + std::to_string(dim) +
                  " values, got " + std::to_string(values.size()));
    table.add(std::move(token), std::move(values));
  }
  if (row != vocab)
    throw Error("embedding file: header declares " + std::to_string(vocab) + " rows, found " + std::to_string(row));
  return table;
}

EmbeddingTable load_embeddings(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open embeddings " + path.string());
  return read_embeddings(in);
}

void write_embeddings(std::ostream& out, const EmbeddingTable& table, std::span<const std::string> vocabulary) {
  out << vocabulary.size() << ' ' << table.dim() << '\n';
  char buf[64];
  for (const auto& w : vocabulary) {
    const auto* v = table.find(w);
    if (!v) throw Error("write_embeddings: '" + w + "' not in table");
    out << w;
    for (double x : *v) {
      auto [p, ec] = std::to_chars(buf, buf + sizeof buf, x);
      out << ' ' << std::string_view(buf, static_cast<std::size_t>(p - buf));
    }
    out << '\n';
  }
}

double TfidfModel::idf(const std::string& source, const std::string& token) const {
  auto it = sources.find(source);
  if (it == sources.end()) throw Error("TF-IDF not fitted for source '" + source + "'");
  auto df = it->second.df.find(token);
  const double d = df == it->second.df.end() ? 0.0 : static_cast<double>(df->second);
  const double n = static_cast<double>(it->second.documents);
  return std::log((1.0 + n) / (1.0 + d)) + 1.0;
}

std::map<std::string, double> TfidfModel::weights(const Sample& sample) const {
  std::map<std::string, double> counts;
  for (const auto& t : sample.tokens) counts[lowercase(t.text)] += 1.0;
  for (auto& [tok, w] : counts) {
    const double tf = tf_mode == TfMode::raw ? w : 1.0 + std::log(w);
    w = tf * idf(sample.source, tok);
  }
  return counts;
}

TfMode parse_tf_mode(std::string_view s) {
  if (s == "raw") return TfMode::raw;
  if (s == "lognorm") return TfMode::lognorm;
  throw Error("unknown tf_mode '" + std::string(s) + "'");
}

std::string to_string(TfMode m) { return m == TfMode::raw ? "raw" : "lognorm"; }

nlohmann::json TfidfModel::to_json() const {
  nlohmann::json j;
  j["tf_mode"] = to_string(tf_mode);
  j["sources"] = nlohmann::json::object();
  for (const auto& [name, s] : sources) j["sources"][name] = {{"documents", s.documents}, {"df", s.df}};
  return j;
}

TfidfModel TfidfModel::from_json(const nlohmann::json& j) {
  try {
    TfidfModel m;
    m.tf_mode = parse_tf_mode(j.at("tf_mode").get<std::string>());
    for (const auto& [name, s] : j.at("sources").items()) {
      SourceIdf idf;
      idf.documents = s.at("documents").get<std::size_t>();
      idf.df = s.at("df").get<std::map<std::string, std::size_t>>();
      m.sources.emplace(name, std::move(idf));
    }
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("malformed TF-IDF model: ") + e.what());
  }
}

TfidfModel fit_tfidf(std::span<const Sample> samples, TfMode tf_mode) {
  TfidfModel m;
  m.tf_mode = tf_mode;
  for (const auto& s : samples) {
    auto& src = m.sources[s.source];
    ++src.documents;
    std::vector<std::string> seen;
    seen.reserve(s.tokens.size());
    for (const auto& t : s.tokens) seen.push_back(lowercase(t.text));
    std::sort(seen.begin(), seen.end());
    seen.erase(std::unique(seen.begin(), seen.end()), seen.end());
    for (auto& t : seen) ++src.df[t];
  }
  return m;
}

SampleVector sample_vector(const Sample& sample, const EmbeddingTable& embeddings, const TfidfModel& tfidf) {
  SampleVector out;
  out.sample_id = sample.id;
  out.values.assign(embeddings.dim(), 0.0);
  double total = 0.0;
  for (const auto& [tok, w] : tfidf.weights(sample)) {
    const auto* e = embeddings.find(tok);
    if (!e) continue;
    total += w;
    for (std::size_t i = 0; i < out.values.size(); ++i) out.values[i] += w * (*e)[i];
  }
  if (total > 0.0)
    for (auto& v : out.values) v /= total;
  out.norm = euclidean_norm(out.values);
  return out;
}

std::vector<SampleVector> sample_vectors(std::span<const Sample> samples, const EmbeddingTable& embeddings,
                                         const TfidfModel& tfidf) {
  std::vector<SampleVector> out(samples.size());
  const auto n = static_cast<std::ptrdiff_t>(samples.size());
#pragma omp parallel for schedule(dynamic, 16)
  for (std::ptrdiff_t i = 0; i < n; ++i) out[i] = sample_vector(samples[i], embeddings, tfidf);
  return out;
}

double dot(std::span<const double> u, std::span<const double> v) {
  const double* a = u.data();
  const double* b = v.data();
  const std::size_t n = u.size();
  double s = 0.0;
#pragma omp simd reduction(+ : s)
  for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

double euclidean_norm(std::span<const double> v) { return std::sqrt(dot(v, v)); }

double cosine(std::span<const double> u, std::span<const double> v) {
  if (u.size() != v.size())
    throw Error("cosine: dimension mismatch " + std::to_string(u.size()) + " vs " + std::to_string(v.size()));
  const double nu = euclidean_norm(u), nv = euclidean_norm(v);
  if (nu == 0.0 || nv == 0.0) return 0.0;
  return std::clamp(dot(u, v) / (nu * nv), -1.0, 1.0);
}

double cosine(const SampleVector& u, const SampleVector& v) {
  if (u.values.size() != v.values.size())
    throw Error("cosine: dimension mismatch between " + u.sample_id + " and " + v.sample_id);
  if (u.norm == 0.0 || v.norm == 0.0) return 0.0;
  return std::clamp(dot(u.values, v.values) / (u.norm * v.norm), -1.0, 1.0);
}

nlohmann::json vectors_to_json(std::span<const SampleVector> vectors) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& v : vectors) out.push_back({{"id", v.sample_id}, {"vector", v.values}});
  return out;
}

std::vector<SampleVector> vectors_from_json(const nlohmann::json& j) {
  std::vector<SampleVector> out;
  try {
    for (const auto& row : j) {
      SampleVector v;
      v.sample_id = row.at("id").get<std::string>();
      v.values = row.at("vector").get<std::vector<double>>();
      v.norm = euclidean_norm(v.values);
      out.push_back(std::move(v));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("malformed vectors file: ") + e.what());
  }
  return out;
}

}  // namespace sdoh
