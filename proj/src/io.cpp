#include "sdoh/io.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <array>
#include <chrono>
#include <ctime>
#include <fstream>
#include <memory>
#include <sstream>

#include "sdoh/error.hpp"

namespace sdoh {

namespace fs = std::filesystem;

std::string sha256_hex(std::string_view data) {
  std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
  unsigned int len = 0;
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), &EVP_MD_CTX_free);
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1 ||
      EVP_DigestUpdate(ctx.get(), data.data(), data.size()) != 1 ||
      EVP_DigestFinal_ex(ctx.get(), md.data(), &len) != 1)
    throw Error("sha256 digest failed");
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(kHex[md[i] >> 4]);
    out.push_back(kHex[md[i] & 0xf]);
  }
  return out;
}

std::string file_sha256(const fs::path& path) { return sha256_hex(read_file(path)); }

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& path, std::string_view content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) throw Error("write failed for " + path.string());
}

nlohmann::json read_json(const fs::path& path) {
  try {
    return nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(path.string() + ": " + e.what());
  }
}

std::string json_text(const nlohmann::json& j) { return j.dump(2) + "\n"; }

std::vector<fs::path> list_files(const fs::path& dir, std::string_view extension) {
  if (!fs::is_directory(dir)) throw Error("not a directory: " + dir.string());
  std::vector<fs::path> out;
  for (const auto& entry : fs::directory_iterator(dir))
    if (entry.is_regular_file() && entry.path().extension() == extension) out.push_back(entry.path());
  std::sort(out.begin(), out.end());
  return out;
}

AnnotatedCorpus load_corpus_dir(const fs::path& dir, const EventSchema& schema) {
  AnnotatedCorpus c;
  const std::string source = fs::absolute(dir).lexically_normal().filename().string();
  for (const auto& txt : list_files(dir, ".txt")) {
    const std::string id = txt.stem().string();
    Sample s = make_sample(id, source.empty() ? "corpus" : source, "", read_file(txt));
    auto& events = c.annotations[id];
    fs::path ann = txt;
    ann.replace_extension(".ann");
    if (fs::exists(ann)) {
      std::vector<std::string> warnings;
      try {
        events = parse_standoff(read_file(ann), s, schema, &warnings);
      } catch (const Error& e) {
        throw Error(ann.string() + ": " + e.what());
      }
      for (auto& w : warnings) c.warnings.push_back(ann.filename().string() + ": " + w);
    }
    c.samples.push_back(std::move(s));
  }
  return c;
}

void write_corpus_dir(const fs::path& dir, std::span<const Sample> samples, const AnnotationSet& annotations) {
  fs::create_directories(dir);
  for (const auto& s : samples) {
    write_file(dir / (s.id + ".txt"), s.text);
    auto it = annotations.find(s.id);
    write_file(dir / (s.id + ".ann"), it == annotations.end() ? "" : serialize_standoff(it->second, s));
  }
}

std::map<std::string, std::string> input_digests(const fs::path& path) {
  std::map<std::string, std::string> out;
  if (fs::is_regular_file(path)) {
    out[path.string()] = file_sha256(path);
  } else if (fs::is_directory(path)) {
    for (const auto& entry : fs::recursive_directory_iterator(path))
      if (entry.is_regular_file()) out[entry.path().string()] = file_sha256(entry.path());
  } else {
    throw Error("no such input: " + path.string());
  }
  return out;
}

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

nlohmann::json RunManifest::to_json() const {
  nlohmann::json j{{"subcommand", subcommand},
                   {"config_digest", config_digest},
                   {"input_digests", input_digests},
                   {"seed", seed},
                   {"generator", generator},
                   {"tool_version", tool_version},
                   {"started", started},
                   {"finished", finished},
                   {"status", status}};
  if (!error.empty()) j["error"] = error;
  return j;
}

}  // namespace sdoh
