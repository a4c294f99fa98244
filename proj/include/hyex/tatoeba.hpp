#pragma once

// Builds a tag benchmark and its corpus from Tatoeba export files.
//
// Inputs are the tab-separated exports: sentences (`id lang text [user added
// modified]`), links (`id translation_id`) and tags (`sentence_id tag_name`).
// `\N` denotes null.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "hyex/core.hpp"

namespace hyex::tatoeba {

struct RawSentence {
  ExerciseId sentence_id = 0;
  std::string lang;
  std::string text;

  friend bool operator==(const RawSentence&, const RawSentence&) = default;
};

struct Link {
  ExerciseId from = 0;
  ExerciseId to = 0;
};

struct TagLink {
  ExerciseId sentence_id = 0;
  std::string tag;
};

struct ParseStats {
  std::size_t lines = 0;
  std::size_t parsed = 0;
  std::size_t malformed = 0;
};

/// Hard-fail ratio for malformed lines.
inline constexpr double kMaxMalformedFraction = 0.10;

/// Streaming parsers. Malformed lines are skipped and counted; ParseError is
/// raised only when more than 10% of non-empty lines are malformed.
ParseStats parse_sentences(const std::filesystem::path& path, const std::function<void(RawSentence)>& sink);
ParseStats parse_links(const std::filesystem::path& path, const std::function<void(Link)>& sink);
ParseStats parse_tags(const std::filesystem::path& path, const std::function<void(TagLink)>& sink);

/// Parses one sentences-export line; nullopt when malformed.
std::optional<RawSentence> parse_sentence_line(const std::string& line);

inline constexpr std::size_t kDefaultMinTagCount = 21;  // strictly more than 20

struct BuildConfig {
  std::string l1 = "eng";
  std::string l2 = "eng";
  std::size_t min_tag_count = kDefaultMinTagCount;
  std::map<std::string, std::string> tag_alias_map;
  std::set<std::string> tag_blocklist;
  std::set<std::string> profanity_list;
  std::map<std::string, std::string> tag_translation_map;

  bool bilingual() const { return l1 != l2; }
  void validate() const;
};

/// Maps may be given inline or as `<key>_file` paths relative to the config.
BuildConfig load_build_config(const std::filesystem::path& path);

struct StageCount {
  std::string stage;
  std::size_t sentences = 0;
  std::size_t tags = 0;
};

struct BuildReport {
  ParseStats sentences_parse;
  ParseStats links_parse;
  ParseStats tags_parse;
  std::vector<StageCount> stages;
  std::vector<std::string> untranslated_tags;
};

struct BuildInputs {
  std::vector<RawSentence> sentences;
  std::vector<Link> links;
  std::vector<TagLink> tags;
};

struct BuildOutput {
  Corpus corpus;
  TagBenchmark bench;
  BuildReport report;
};

/// Runs the filter pipeline in order: language, translation join, profanity,
/// alias merge, blocklist, tag translation, minimum count, emit. Throws
/// EmptyBenchmark when no tag survives.
BuildOutput build_benchmark(const BuildInputs& inputs, const BuildConfig& config);

/// Parses the three export files and builds.
BuildOutput build_benchmark(const std::filesystem::path& sentences, const std::filesystem::path& links,
                            const std::filesystem::path& tags, const BuildConfig& config);

/// Writes corpus.jsonl, tagbench.jsonl and build_report.json into `dir`.
void write_build(const BuildOutput& output, const std::filesystem::path& dir);

std::string summarize_build(const BuildReport& report);
std::string report_to_json(const BuildReport& report);

}  // namespace hyex::tatoeba
