#pragma once

// Hypothetical-exercise synthesis: zero-shot prompt assembly, response
// parsing, and generator providers (rule-based mock, OpenAI-compatible chat).

#include <chrono>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "hyex/core.hpp"

namespace hyex {

inline constexpr int kDefaultCandidateCount = 10;

struct GenConfig {
  int k_h = kDefaultCandidateCount;
  Side side = Side::L2;
  std::string l1_name = "English";
  std::string l2_name = "Spanish";
  std::string distribution_description =
      "Short, self-contained translation exercises for language learners: everyday sentences "
      "between 3 and 15 words, covering common vocabulary and grammar.";
  std::string model = "gpt-4";
  double temperature = 0.7;
  int max_retries = 2;

  /// Throws InvalidArgument when k_h < 1, temperature < 0 or the description is blank.
  void validate() const;
  const std::string& language_name(Side s) const { return s == Side::L1 ? l1_name : l2_name; }
};

struct Prompt {
  std::string system_text;
  std::string user_text;

  friend bool operator==(const Prompt&, const Prompt&) = default;
};

/// Pure function of its arguments. Contains no example exercises.
Prompt build_prompt(const GenConfig& config, const Query& input);

struct CandidateSet {
  Query input;
  Side side = Side::L2;
  std::vector<std::string> candidates;
};

/// Reads exactly `k_h` candidates from model output. A JSON array of at least
/// k_h non-blank strings is taken first (leading k_h kept); otherwise each
/// non-blank line is stripped of list markers (`-`, `*`, `1.`, `1)`) and
/// surrounding quotes. Throws GenerationParseError if neither route yields k_h.
std::vector<std::string> parse_candidates(const std::string& content, int k_h);

class Generator {
 public:
  virtual ~Generator() = default;
  /// Exactly config.k_h candidates or an exception.
  virtual CandidateSet generate(const GenConfig& config, const Query& input) = 0;
};

struct MockRule {
  std::string pattern;
  std::optional<Side> side;  // unset: fires for either side
  std::vector<std::string> pool;
};

/// JSONL `{"pattern", "side", "pool"}`.
std::vector<MockRule> load_mock_rules(const std::filesystem::path& path);
void save_mock_rules(const std::vector<MockRule>& rules, const std::filesystem::path& path);

/// First rule (for `side`) whose pattern is a case-insensitive substring of the
/// input fires; its pool is emitted in order, cycling when shorter than k_h.
CandidateSet mock_generate(const std::vector<MockRule>& rules, const Query& input, int k_h, Side side);

class MockGenerator final : public Generator {
 public:
  explicit MockGenerator(std::vector<MockRule> rules) : rules_(std::move(rules)) {}
  CandidateSet generate(const GenConfig& config, const Query& input) override;

 private:
  std::vector<MockRule> rules_;
};

struct ChatGeneratorOptions {
  std::string base_url;
  std::chrono::milliseconds timeout{60000};
  std::chrono::milliseconds backoff_base{1000};
  /// Defaults to $HYEX_LLM_TOKEN when unset.
  std::optional<std::string> bearer_token;
};

/// OpenAI-compatible `POST {base_url}/v1/chat/completions`; one completion
/// yields all k_h candidates. Transport failures and unparseable content are
/// retried up to config.max_retries times.
class ChatGenerator final : public Generator {
 public:
  explicit ChatGenerator(ChatGeneratorOptions options);
  CandidateSet generate(const GenConfig& config, const Query& input) override;

 private:
  ChatGeneratorOptions options_;
};

/// Validates config, delegates to the provider and re-checks the count.
CandidateSet generate_candidates(const GenConfig& config, const Query& input, Generator& provider);

}  // namespace hyex
