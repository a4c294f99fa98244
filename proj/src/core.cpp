#include "hyex/core.hpp"

#include <algorithm>
#include <cctype>
#include <set>
#include <unordered_set>
#include <utility>

#include <spdlog/spdlog.h>

#include "hyex/error.hpp"
#include "jsonl.hpp"

namespace hyex {

namespace detail {

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::FileMissing, path.string());
  return in;
}

std::ofstream open_output(const std::filesystem::path& path, bool append) {
  std::ofstream out(path, append ? std::ios::app : std::ios::trunc);
  if (!out) throw Error(ErrorCode::InvalidArgument, "cannot write " + path.string());
  return out;
}

void for_each_jsonl(const std::filesystem::path& path,
                    const std::function<void(const json&, std::size_t)>& fn) {
  auto in = open_input(path);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (is_blank(line)) continue;
    json obj;
    try {
      obj = json::parse(line);
    } catch (const json::parse_error& e) {
      throw Error(ErrorCode::ParseError,
                  path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
    if (!obj.is_object()) {
      throw Error(ErrorCode::ParseError,
                  path.string() + ":" + std::to_string(line_no) + ": expected a JSON object");
    }
    fn(obj, line_no);
  }
}

}  // namespace detail

using detail::field;
using detail::json;

std::string_view to_string(Side side) { return side == Side::L1 ? "l1" : "l2"; }

Side parse_side(std::string_view text) {
  std::string lower(text);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (lower == "l1") return Side::L1;
  if (lower == "l2") return Side::L2;
  throw Error(ErrorCode::InvalidArgument, "side must be l1 or l2, got '" + std::string(text) + "'");
}

bool is_blank(std::string_view text) {
  return std::all_of(text.begin(), text.end(),
                     [](unsigned char c) { return std::isspace(c) != 0; });
}

Corpus::Corpus(std::vector<Exercise> exercises) : exercises_(std::move(exercises)) {
  by_id_.reserve(exercises_.size());
  for (std::size_t i = 0; i < exercises_.size(); ++i) {
    const Exercise& ex = exercises_[i];
    if (ex.id < 0) throw Error(ErrorCode::InvalidArgument, "negative exercise id " + std::to_string(ex.id));
    if (is_blank(ex.l1_text) || is_blank(ex.l2_text)) {
      throw Error(ErrorCode::EmptyText, "exercise " + std::to_string(ex.id));
    }
    if (!by_id_.emplace(ex.id, i).second) {
      throw Error(ErrorCode::DuplicateId, std::to_string(ex.id));
    }
  }
}

const Exercise& Corpus::at(ExerciseId id) const {
  auto it = by_id_.find(id);
  if (it == by_id_.end()) throw Error(ErrorCode::UnknownExercise, std::to_string(id));
  return exercises_[it->second];
}

Corpus load_corpus(const std::filesystem::path& path) {
  std::vector<Exercise> exercises;
  std::unordered_set<ExerciseId> seen;
  detail::for_each_jsonl(path, [&](const json& obj, std::size_t line) {
    Exercise ex;
    ex.id = field<ExerciseId>(obj, "id", path, line);
    ex.l1_text = field<std::string>(obj, "l1", path, line);
    ex.l2_text = field<std::string>(obj, "l2", path, line);
    if (auto it = obj.find("course"); it != obj.end() && !it->is_null()) {
      ex.course = field<std::string>(obj, "course", path, line);
    }
    if (!seen.insert(ex.id).second) {
      throw Error(ErrorCode::DuplicateId,
                  std::to_string(ex.id) + " (" + path.string() + ":" + std::to_string(line) + ")");
    }
    if (is_blank(ex.l1_text) || is_blank(ex.l2_text)) {
      throw Error(ErrorCode::EmptyText,
                  "exercise " + std::to_string(ex.id) + " (" + path.string() + ":" +
                      std::to_string(line) + ")");
    }
    exercises.push_back(std::move(ex));
  });
  spdlog::debug("loaded {} exercises from {}", exercises.size(), path.string());
  return Corpus(std::move(exercises));
}

void save_corpus(const Corpus& corpus, const std::filesystem::path& path) {
  auto out = detail::open_output(path);
  for (const Exercise& ex : corpus) {
    json obj = {{"id", ex.id}, {"l1", ex.l1_text}, {"l2", ex.l2_text}};
    if (ex.course) obj["course"] = *ex.course;
    out << obj.dump() << '\n';
  }
}

std::vector<Query> JudgmentSet::queries() const {
  std::vector<Query> out;
  std::unordered_set<std::string> seen;
  for (const Judgment& j : records) {
    if (seen.insert(j.query_id).second) out.push_back(Query{j.query_id, j.query_text, "l1"});
  }
  return out;
}

void validate(const JudgmentSet& judgments, const Corpus* corpus) {
  std::set<std::pair<std::string, ExerciseId>> pairs;
  for (const Judgment& j : judgments.records) {
    if (j.label != 0 && j.label != 1) {
      throw Error(ErrorCode::ParseError, "label must be 0 or 1 for query " + j.query_id);
    }
    if (!pairs.emplace(j.query_id, j.exercise_id).second) {
      throw Error(ErrorCode::DuplicatePair, j.query_id + "/" + std::to_string(j.exercise_id));
    }
    if (corpus && !corpus->contains(j.exercise_id)) {
      throw Error(ErrorCode::UnknownExercise, std::to_string(j.exercise_id));
    }
  }
}

void validate(const TagBenchmark& bench, const Corpus* corpus) {
  std::unordered_set<std::string> ids;
  for (const TagEntry& tag : bench.tags) {
    if (!ids.insert(tag.tag_id).second) throw Error(ErrorCode::DuplicateId, "tag " + tag.tag_id);
    if (tag.relevant_ids.empty()) {
      throw Error(ErrorCode::InvalidArgument, "tag " + tag.tag_id + " has no relevant ids");
    }
    if (corpus) {
      for (ExerciseId id : tag.relevant_ids) {
        if (!corpus->contains(id)) throw Error(ErrorCode::UnknownExercise, std::to_string(id));
      }
    }
  }
}

JudgmentSet load_judgments(const std::filesystem::path& path, const Corpus* corpus) {
  JudgmentSet set;
  detail::for_each_jsonl(path, [&](const json& obj, std::size_t line) {
    Judgment j;
    j.query_id = field<std::string>(obj, "query_id", path, line);
    j.query_text = field<std::string>(obj, "query_text", path, line);
    j.exercise_id = field<ExerciseId>(obj, "exercise_id", path, line);
    j.label = field<int>(obj, "label", path, line);
    set.records.push_back(std::move(j));
  });
  if (set.records.empty()) spdlog::warn("judgment file {} is empty", path.string());
  validate(set, corpus);
  return set;
}

void save_judgments(const JudgmentSet& judgments, const std::filesystem::path& path) {
  auto out = detail::open_output(path);
  for (const Judgment& j : judgments.records) {
    out << json{{"query_id", j.query_id},
                {"query_text", j.query_text},
                {"exercise_id", j.exercise_id},
                {"label", j.label}}
               .dump()
        << '\n';
  }
}

TagBenchmark load_tag_benchmark(const std::filesystem::path& path, const Corpus* corpus) {
  TagBenchmark bench;
  detail::for_each_jsonl(path, [&](const json& obj, std::size_t line) {
    TagEntry tag;
    tag.tag_id = field<std::string>(obj, "tag_id", path, line);
    tag.tag_text = field<std::string>(obj, "tag_text", path, line);
    tag.relevant_ids = field<std::vector<ExerciseId>>(obj, "relevant_ids", path, line);
    std::sort(tag.relevant_ids.begin(), tag.relevant_ids.end());
    tag.relevant_ids.erase(std::unique(tag.relevant_ids.begin(), tag.relevant_ids.end()),
                           tag.relevant_ids.end());
    bench.tags.push_back(std::move(tag));
  });
  if (bench.tags.empty()) spdlog::warn("tag benchmark file {} is empty", path.string());
  validate(bench, corpus);
  return bench;
}

void save_tag_benchmark(const TagBenchmark& bench, const std::filesystem::path& path) {
  auto out = detail::open_output(path);
  for (const TagEntry& tag : bench.tags) {
    out << json{{"tag_id", tag.tag_id}, {"tag_text", tag.tag_text}, {"relevant_ids", tag.relevant_ids}}
               .dump()
        << '\n';
  }
}

}  // namespace hyex
