#include "hyex/core.hpp"

#include <chrono>
#include <random>

#include <gtest/gtest.h>

#include "test_util.hpp"

namespace hyex {
namespace {

using testing::TempDir;
using testing::write_file;

TEST(Corpus, LoadsValidFileInOrder) {
  TempDir dir;
  write_file(dir / "c.jsonl",
             R"({"id": 12, "l1": "El gato duerme.", "l2": "The cat sleeps.", "course": "es-en"})" "\n"
             R"({"id": 3, "l1": "Hola.", "l2": "Hello."})" "\n"
             "\n"
             R"({"id": 7, "l1": "Sí.", "l2": "Yes.", "course": null})" "\n");
  const Corpus corpus = load_corpus(dir / "c.jsonl");
  ASSERT_EQ(corpus.size(), 3u);
  EXPECT_EQ(corpus[0].id, 12);
  EXPECT_EQ(corpus[1].id, 3);
  EXPECT_EQ(corpus[2].id, 7);
  EXPECT_EQ(corpus[0].course, "es-en");
  EXPECT_FALSE(corpus[1].course.has_value());
  EXPECT_EQ(corpus.at(3).text(Side::L2), "Hello.");
  EXPECT_EQ(corpus.at(12).text(Side::L1), "El gato duerme.");
}

TEST(Corpus, RejectsDuplicateId) {
  TempDir dir;
  write_file(dir / "c.jsonl", R"({"id": 7, "l1": "a", "l2": "b"})" "\n" R"({"id": 7, "l1": "c", "l2": "d"})" "\n");
  try {
    load_corpus(dir / "c.jsonl");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::DuplicateId);
    EXPECT_NE(e.detail().find("7"), std::string::npos);
  }
}

TEST(Corpus, RejectsWhitespaceOnlyText) {
  TempDir dir;
  write_file(dir / "c.jsonl", R"({"id": 1, "l1": "ok", "l2": "  \t "})" "\n");
  EXPECT_HYEX_ERROR(load_corpus(dir / "c.jsonl"), ErrorCode::EmptyText);
}

TEST(Corpus, ParseErrorNamesLine) {
  TempDir dir;
  write_file(dir / "c.jsonl", R"({"id": 1, "l1": "a", "l2": "b"})" "\n" "{not json\n");
  try {
    load_corpus(dir / "c.jsonl");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ParseError);
    EXPECT_NE(e.detail().find(":2:"), std::string::npos) << e.detail();
  }
  write_file(dir / "d.jsonl", R"({"id": 1, "l2": "b"})" "\n");
  EXPECT_HYEX_ERROR(load_corpus(dir / "d.jsonl"), ErrorCode::ParseError);
}

TEST(Corpus, MissingFile) {
  EXPECT_HYEX_ERROR(load_corpus("/nonexistent/corpus.jsonl"), ErrorCode::FileMissing);
}

TEST(Corpus, RoundTripAndStableOrder) {
  std::mt19937_64 rng(5);
  std::vector<Exercise> exercises;
  for (int i = 0; i < 200; ++i) {
    Exercise ex{static_cast<ExerciseId>(rng() % 1000000), "uno \"dos\" " + std::to_string(i), "ñandú\t" + std::to_string(i),
                std::nullopt};
    if (i % 3 == 0) ex.course = "es-en";
    exercises.push_back(ex);
  }
  std::sort(exercises.begin(), exercises.end(), [](auto& a, auto& b) { return a.id < b.id; });
  exercises.erase(std::unique(exercises.begin(), exercises.end(), [](auto& a, auto& b) { return a.id == b.id; }),
                  exercises.end());
  std::shuffle(exercises.begin(), exercises.end(), rng);
  const Corpus original(exercises);

  TempDir dir;
  save_corpus(original, dir / "c.jsonl");
  const Corpus first = load_corpus(dir / "c.jsonl");
  const Corpus second = load_corpus(dir / "c.jsonl");
  EXPECT_EQ(first, original);
  EXPECT_EQ(first, second);
}

TEST(Corpus, FortyThousandLines) {
  TempDir dir;
  {
    std::ofstream out(dir / "big.jsonl");
    for (int i = 0; i < 40000; ++i) {
      out << R"({"id": )" << i << R"(, "l1": "frase número )" << i << R"(", "l2": "sentence number )" << i
          << R"(", "course": "es-en"})" << '\n';
    }
  }
  const auto start = std::chrono::steady_clock::now();
  const Corpus corpus = load_corpus(dir / "big.jsonl");
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  EXPECT_EQ(corpus.size(), 40000u);
  RecordProperty("load_seconds", std::to_string(secs));
}

TEST(Judgments, LoadsAndCountsPairs) {
  TempDir dir;
  std::vector<Exercise> exercises;
  for (int i = 0; i < 915; ++i) exercises.push_back({i, "l1 " + std::to_string(i), "l2 " + std::to_string(i), {}});
  const Corpus corpus(exercises);
  JudgmentSet set;
  int next = 0;
  for (int q = 0; q < 61; ++q) {
    for (int e = 0; e < 15; ++e) {
      set.records.push_back({"q" + std::to_string(q), "input " + std::to_string(q), next++, (q + e) % 2});
    }
  }
  save_judgments(set, dir / "j.jsonl");
  const JudgmentSet loaded = load_judgments(dir / "j.jsonl", &corpus);
  EXPECT_EQ(loaded.records.size(), 915u);
  EXPECT_EQ(loaded.queries().size(), 61u);
  EXPECT_EQ(loaded.records, set.records);
}

TEST(Judgments, EmptyFileGivesEmptySet) {
  TempDir dir;
  write_file(dir / "j.jsonl", "");
  EXPECT_TRUE(load_judgments(dir / "j.jsonl").records.empty());
}

TEST(Judgments, RejectsDuplicatePairAndUnknownExercise) {
  TempDir dir;
  write_file(dir / "dup.jsonl",
             R"({"query_id": "q01", "query_text": "past tense", "exercise_id": 12, "label": 1})" "\n"
             R"({"query_id": "q01", "query_text": "past tense", "exercise_id": 12, "label": 0})" "\n");
  EXPECT_HYEX_ERROR(load_judgments(dir / "dup.jsonl"), ErrorCode::DuplicatePair);

  write_file(dir / "unk.jsonl", R"({"query_id": "q01", "query_text": "x", "exercise_id": 99, "label": 1})" "\n");
  const Corpus corpus({{12, "a", "b", {}}});
  EXPECT_HYEX_ERROR(load_judgments(dir / "unk.jsonl", &corpus), ErrorCode::UnknownExercise);
  EXPECT_NO_THROW(load_judgments(dir / "unk.jsonl"));

  write_file(dir / "label.jsonl", R"({"query_id": "q01", "query_text": "x", "exercise_id": 12, "label": 2})" "\n");
  EXPECT_HYEX_ERROR(load_judgments(dir / "label.jsonl"), ErrorCode::ParseError);
}

TEST(TagBench, OneTagWithTwentyFiveIds) {
  TempDir dir;
  std::vector<Exercise> exercises;
  std::string ids;
  for (int i = 0; i < 25; ++i) {
    exercises.push_back({100 + i, "a", "b", {}});
    ids += (i ? "," : "") + std::to_string(100 + i);
  }
  const Corpus corpus(exercises);
  write_file(dir / "t.jsonl", R"({"tag_id": "t03", "tag_text": "animals", "relevant_ids": [)" + ids + "]}\n");
  const TagBenchmark bench = load_tag_benchmark(dir / "t.jsonl", &corpus);
  ASSERT_EQ(bench.tags.size(), 1u);
  EXPECT_EQ(bench.tags[0].tag_id, "t03");
  EXPECT_EQ(bench.tags[0].relevant_ids.size(), 25u);
}

TEST(TagBench, RejectsEmptyRelevantSetAndDuplicateTag) {
  TempDir dir;
  write_file(dir / "e.jsonl", R"({"tag_id": "t1", "tag_text": "x", "relevant_ids": []})" "\n");
  EXPECT_HYEX_ERROR(load_tag_benchmark(dir / "e.jsonl"), ErrorCode::InvalidArgument);
  write_file(dir / "d.jsonl", R"({"tag_id": "t1", "tag_text": "x", "relevant_ids": [1]})" "\n"
                              R"({"tag_id": "t1", "tag_text": "y", "relevant_ids": [2]})" "\n");
  EXPECT_HYEX_ERROR(load_tag_benchmark(dir / "d.jsonl"), ErrorCode::DuplicateId);
}

TEST(Side, ParsesBothSpellings) {
  EXPECT_EQ(parse_side("l1"), Side::L1);
  EXPECT_EQ(parse_side("L2"), Side::L2);
  EXPECT_HYEX_ERROR(parse_side("l3"), ErrorCode::InvalidArgument);
}

}  // namespace
}  // namespace hyex
