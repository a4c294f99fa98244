#include "hyex/tatoeba.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include <spdlog/spdlog.h>

#include "hyex/embed.hpp"
#include "hyex/error.hpp"
#include "jsonl.hpp"

namespace hyex::tatoeba {

using detail::json;

namespace {

std::vector<std::string_view> split_tabs(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const auto tab = line.find('\t', start);
    if (tab == std::string_view::npos) {
      fields.push_back(line.substr(start));
      return fields;
    }
    fields.push_back(line.substr(start, tab - start));
    start = tab + 1;
  }
}

std::optional<ExerciseId> parse_id(std::string_view s) {
  ExerciseId id = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), id);
  if (ec != std::errc() || ptr != s.data() + s.size() || id < 0) return std::nullopt;
  return id;
}

template <typename Parse>
ParseStats parse_file(const std::filesystem::path& path, Parse&& parse_line) {
  auto in = detail::open_input(path);
  ParseStats stats;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    ++stats.lines;
    if (parse_line(line)) {
      ++stats.parsed;
    } else {
      ++stats.malformed;
    }
  }
  if (stats.malformed > 0) {
    spdlog::warn("{}: skipped {} malformed of {} lines", path.string(), stats.malformed, stats.lines);
  }
  if (static_cast<double>(stats.malformed) > kMaxMalformedFraction * static_cast<double>(stats.lines)) {
    throw Error(ErrorCode::ParseError, path.string() + ": " + std::to_string(stats.malformed) + " of " +
                                           std::to_string(stats.lines) + " lines malformed");
  }
  return stats;
}

}  // namespace

std::optional<RawSentence> parse_sentence_line(const std::string& line) {
  const auto fields = split_tabs(line);
  if (fields.size() < 3) return std::nullopt;
  const auto id = parse_id(fields[0]);
  if (!id || fields[1].size() != 3 || fields[2].empty() || fields[2] == "\\N") return std::nullopt;
  return RawSentence{*id, std::string(fields[1]), std::string(fields[2])};
}

ParseStats parse_sentences(const std::filesystem::path& path, const std::function<void(RawSentence)>& sink) {
  return parse_file(path, [&](const std::string& line) {
    auto s = parse_sentence_line(line);
    if (!s) return false;
    sink(std::move(*s));
    return true;
  });
}

ParseStats parse_links(const std::filesystem::path& path, const std::function<void(Link)>& sink) {
  return parse_file(path, [&](const std::string& line) {
    const auto fields = split_tabs(line);
    if (fields.size() < 2) return false;
    const auto from = parse_id(fields[0]);
    const auto to = parse_id(fields[1]);
    if (!from || !to) return false;
    sink(Link{*from, *to});
    return true;
  });
}

ParseStats parse_tags(const std::filesystem::path& path, const std::function<void(TagLink)>& sink) {
  return parse_file(path, [&](const std::string& line) {
    const auto fields = split_tabs(line);
    if (fields.size() < 2) return false;
    const auto id = parse_id(fields[0]);
    if (!id || is_blank(fields[1]) || fields[1] == "\\N") return false;
    sink(TagLink{*id, std::string(fields[1])});
    return true;
  });
}

void BuildConfig::validate() const {
  if (min_tag_count < 1) throw Error(ErrorCode::InvalidArgument, "min_tag_count must be >= 1");
  if (l1.size() != 3 || l2.size() != 3) throw Error(ErrorCode::InvalidArgument, "language codes have 3 letters");
}

namespace {

std::set<std::string> read_word_list(const std::filesystem::path& path) {
  auto in = detail::open_input(path);
  std::set<std::string> words;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!is_blank(line)) words.insert(line);
  }
  return words;
}

json read_json_file(const std::filesystem::path& path) {
  auto in = detail::open_input(path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::ParseError, path.string() + ": " + e.what());
  }
}

}  // namespace

BuildConfig load_build_config(const std::filesystem::path& path) {
  const json doc = read_json_file(path);
  const auto base = path.parent_path();
  BuildConfig c;
  try {
    c.l1 = doc.value("l1", c.l1);
    c.l2 = doc.value("l2", c.l2);
    c.min_tag_count = doc.value("min_tag_count", c.min_tag_count);

    auto map_field = [&](const char* key, std::map<std::string, std::string>& out) {
      if (doc.contains(key)) out = doc.at(key).get<std::map<std::string, std::string>>();
      const std::string file_key = std::string(key) + "_file";
      if (doc.contains(file_key)) {
        const auto extra = read_json_file(base / doc.at(file_key).get<std::string>());
        for (const auto& [k, v] : extra.get<std::map<std::string, std::string>>()) out[k] = v;
      }
    };
    auto set_field = [&](const char* key, std::set<std::string>& out) {
      if (doc.contains(key)) out = doc.at(key).get<std::set<std::string>>();
      const std::string file_key = std::string(key) + "_file";
      if (doc.contains(file_key)) {
        const auto extra = read_word_list(base / doc.at(file_key).get<std::string>());
        out.insert(extra.begin(), extra.end());
      }
    };
    map_field("tag_alias_map", c.tag_alias_map);
    map_field("tag_translation_map", c.tag_translation_map);
    set_field("tag_blocklist", c.tag_blocklist);
    set_field("profanity_list", c.profanity_list);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ParseError, path.string() + ": " + e.what());
  }
  c.validate();
  return c;
}

namespace {

class ProfanityFilter {
 public:
  explicit ProfanityFilter(const std::set<std::string>& terms) {
    for (const auto& term : terms) {
      auto tokens = tokenize(term);
      if (!tokens.empty()) terms_.push_back(std::move(tokens));
    }
  }

  bool matches(std::string_view text) const {
    if (terms_.empty()) return false;
    const auto tokens = tokenize(text);
    for (const auto& term : terms_) {
      if (std::search(tokens.begin(), tokens.end(), term.begin(), term.end()) != tokens.end()) return true;
    }
    return false;
  }

 private:
  std::vector<std::vector<std::string>> terms_;
};

struct Paired {
  std::string l1_text;
  std::string l2_text;
};

using TagMembers = std::map<std::string, std::set<ExerciseId>>;

std::size_t count_tags(const TagMembers& tags) {
  return static_cast<std::size_t>(std::count_if(tags.begin(), tags.end(), [](const auto& kv) { return !kv.second.empty(); }));
}

}  // namespace

BuildOutput build_benchmark(const BuildInputs& inputs, const BuildConfig& config) {
  config.validate();
  BuildOutput out;
  BuildReport& report = out.report;

  // Tag membership restricted to a sentence set.
  auto members_for = [&](const std::map<ExerciseId, Paired>& sentences) {
    TagMembers tags;
    for (const TagLink& t : inputs.tags) {
      if (sentences.count(t.sentence_id)) tags[t.tag].insert(t.sentence_id);
    }
    return tags;
  };

  // (1) language
  std::map<ExerciseId, Paired> kept;
  std::unordered_map<ExerciseId, const RawSentence*> l1_sentences;
  for (const RawSentence& s : inputs.sentences) {
    if (s.lang == config.l2) kept.emplace(s.sentence_id, Paired{s.text, s.text});
    if (s.lang == config.l1) l1_sentences.emplace(s.sentence_id, &s);
  }
  TagMembers tags = members_for(kept);
  report.stages.push_back({"language", kept.size(), count_tags(tags)});

  // (2) translation join, lowest l1 id wins
  if (config.bilingual()) {
    std::unordered_map<ExerciseId, ExerciseId> best;
    auto consider = [&](ExerciseId l2_id, ExerciseId l1_id) {
      if (!kept.count(l2_id) || !l1_sentences.count(l1_id)) return;
      auto [it, inserted] = best.emplace(l2_id, l1_id);
      if (!inserted && l1_id < it->second) it->second = l1_id;
    };
    for (const Link& link : inputs.links) {
      consider(link.from, link.to);
      consider(link.to, link.from);
    }
    for (auto it = kept.begin(); it != kept.end();) {
      auto found = best.find(it->first);
      if (found == best.end()) {
        it = kept.erase(it);
      } else {
        it->second.l1_text = l1_sentences.at(found->second)->text;
        ++it;
      }
    }
  }
  tags = members_for(kept);
  report.stages.push_back({"translation_join", kept.size(), count_tags(tags)});

  // (3) profanity in either text or in the tag name
  const ProfanityFilter profanity(config.profanity_list);
  for (auto it = kept.begin(); it != kept.end();) {
    it = profanity.matches(it->second.l2_text) || profanity.matches(it->second.l1_text) ? kept.erase(it) : std::next(it);
  }
  tags = members_for(kept);
  std::erase_if(tags, [&](const auto& kv) { return profanity.matches(kv.first); });
  report.stages.push_back({"profanity", kept.size(), count_tags(tags)});

  // (4) alias merge
  TagMembers merged;
  for (auto& [tag, ids] : tags) {
    auto alias = config.tag_alias_map.find(tag);
    const std::string& canonical = alias == config.tag_alias_map.end() ? tag : alias->second;
    merged[canonical].insert(ids.begin(), ids.end());
  }
  tags = std::move(merged);
  report.stages.push_back({"alias_merge", kept.size(), count_tags(tags)});

  // (5) blocklist
  std::erase_if(tags, [&](const auto& kv) { return config.tag_blocklist.count(kv.first) != 0; });
  report.stages.push_back({"blocklist", kept.size(), count_tags(tags)});

  // (6) tag text rendering
  std::map<std::string, std::string> tag_text;
  for (const auto& [tag, ids] : tags) {
    auto tr = config.tag_translation_map.find(tag);
    if (tr == config.tag_translation_map.end()) {
      tag_text[tag] = tag;
      report.untranslated_tags.push_back(tag);
    } else {
      tag_text[tag] = tr->second;
    }
  }
  report.stages.push_back({"tag_translation", kept.size(), count_tags(tags)});

  // (7) minimum tag size
  std::erase_if(tags, [&](const auto& kv) { return kv.second.size() < config.min_tag_count; });
  std::set<ExerciseId> referenced;
  for (const auto& [tag, ids] : tags) referenced.insert(ids.begin(), ids.end());
  report.stages.push_back({"min_tag_count", referenced.size(), count_tags(tags)});

  if (tags.empty()) throw Error(ErrorCode::EmptyBenchmark, "no tag has " + std::to_string(config.min_tag_count) + " sentences");

  // (8) emit; tags ordered by canonical name
  std::vector<Exercise> exercises;
  exercises.reserve(referenced.size());
  const std::string course = config.l1 + "-" + config.l2;
  for (ExerciseId id : referenced) {
    const Paired& p = kept.at(id);
    exercises.push_back(Exercise{id, p.l1_text, p.l2_text, course});
  }
  out.corpus = Corpus(std::move(exercises));
  std::size_t index = 0;
  for (const auto& [tag, ids] : tags) {
    char tag_id[32];
    std::snprintf(tag_id, sizeof tag_id, "t%03zu", ++index);
    out.bench.tags.push_back(TagEntry{tag_id, tag_text.at(tag), std::vector<ExerciseId>(ids.begin(), ids.end())});
  }
  report.stages.push_back({"emit", out.corpus.size(), out.bench.tags.size()});
  return out;
}

BuildOutput build_benchmark(const std::filesystem::path& sentences, const std::filesystem::path& links,
                            const std::filesystem::path& tags, const BuildConfig& config) {
  BuildInputs inputs;
  const auto s_stats = parse_sentences(sentences, [&](RawSentence s) { inputs.sentences.push_back(std::move(s)); });
  const auto l_stats = parse_links(links, [&](Link l) { inputs.links.push_back(l); });
  const auto t_stats = parse_tags(tags, [&](TagLink t) { inputs.tags.push_back(std::move(t)); });
  BuildOutput out = build_benchmark(inputs, config);
  out.report.sentences_parse = s_stats;
  out.report.links_parse = l_stats;
  out.report.tags_parse = t_stats;
  return out;
}

namespace {

json stats_json(const ParseStats& s) {
  return json{{"lines", s.lines}, {"parsed", s.parsed}, {"malformed", s.malformed}};
}

}  // namespace

std::string report_to_json(const BuildReport& report) {
  json stages = json::array();
  for (const StageCount& s : report.stages) {
    stages.push_back({{"stage", s.stage}, {"sentences", s.sentences}, {"tags", s.tags}});
  }
  const json doc = {{"parse",
                     {{"sentences", stats_json(report.sentences_parse)},
                      {"links", stats_json(report.links_parse)},
                      {"tags", stats_json(report.tags_parse)}}},
                    {"stages", stages},
                    {"untranslated_tags", report.untranslated_tags}};
  return doc.dump(2);
}

std::string summarize_build(const BuildReport& report) {
  std::ostringstream out;
  out << "stage               sentences      tags\n";
  for (const StageCount& s : report.stages) {
    char line[96];
    std::snprintf(line, sizeof line, "%-18s %10zu %9zu\n", s.stage.c_str(), s.sentences, s.tags);
    out << line;
  }
  out << "untranslated tags: " << report.untranslated_tags.size() << '\n';
  for (const auto& tag : report.untranslated_tags) out << "  " << tag << '\n';
  return out.str();
}

void write_build(const BuildOutput& output, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  save_corpus(output.corpus, dir / "corpus.jsonl");
  save_tag_benchmark(output.bench, dir / "tagbench.jsonl");
  auto out = detail::open_output(dir / "build_report.json");
  out << report_to_json(output.report) << '\n';
}

}  // namespace hyex::tatoeba
