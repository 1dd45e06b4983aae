#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "sdoh/corpus.hpp"
#include "sdoh/schema.hpp"
#include "sdoh/standoff.hpp"

namespace sdoh {

std::string sha256_hex(std::string_view data);
std::string file_sha256(const std::filesystem::path& path);

std::string read_file(const std::filesystem::path& path);
// Creates parent directories as needed.
void write_file(const std::filesystem::path& path, std::string_view content);
nlohmann::json read_json(const std::filesystem::path& path);
// Two-space indented with a trailing newline.
std::string json_text(const nlohmann::json& j);

// Files directly inside `dir` with the given extension, sorted by name.
std::vector<std::filesystem::path> list_files(const std::filesystem::path& dir, std::string_view extension);

struct AnnotatedCorpus {
  std::vector<Sample> samples;  // sorted by id
  AnnotationSet annotations;     // one entry per sample, empty without an .ann file
  std::vector<std::string> warnings;
};

// Every {id}.txt in `dir` becomes sample `id` whose source is the directory
// name; a sibling {id}.ann supplies its events.
AnnotatedCorpus load_corpus_dir(const std::filesystem::path& dir, const EventSchema& schema);
void write_corpus_dir(const std::filesystem::path& dir, std::span<const Sample> samples,
                      const AnnotationSet& annotations);

// Content digest of every regular file under `path`, keyed by path.
std::map<std::string, std::string> input_digests(const std::filesystem::path& path);

std::string utc_timestamp();

struct RunManifest {
  std::string subcommand;
  std::string config_digest;
  std::map<std::string, std::string> input_digests;
  std::uint64_t seed = 0;
  std::string generator = "mt19937_64";
  std::string tool_version;
  std::string started;
  std::string finished;
  std::string status = "running";
  std::string error;

  nlohmann::json to_json() const;
};

}  // namespace sdoh
