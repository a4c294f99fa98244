#include "hyex/generate.hpp"

#include <algorithm>
#include <cctype>
#include <sstream>

#include <spdlog/spdlog.h>

#include "hyex/error.hpp"
#include "http.hpp"
#include "jsonl.hpp"

namespace hyex {

using detail::json;

void GenConfig::validate() const {
  if (k_h < 1) throw Error(ErrorCode::InvalidArgument, "k_h must be >= 1");
  if (!(temperature >= 0.0)) throw Error(ErrorCode::InvalidArgument, "temperature must be >= 0");
  if (max_retries < 0) throw Error(ErrorCode::InvalidArgument, "max_retries must be >= 0");
  if (is_blank(distribution_description)) {
    throw Error(ErrorCode::InvalidArgument, "distribution_description must not be empty");
  }
}

Prompt build_prompt(const GenConfig& config, const Query& input) {
  const std::string& target = config.language_name(config.side);
  const std::string count = std::to_string(config.k_h);

  Prompt prompt;
  prompt.system_text =
      "You write translation exercises for a language course that teaches " + config.l2_name +
      " to speakers of " + config.l1_name + ". Every exercise is a single sentence paired with its " +
      "translation. The course's exercise pool looks like this:\n" + config.distribution_description +
      "\nNew exercises must be indistinguishable in style, length and difficulty from that pool.";
  prompt.user_text =
      "A learner asked for practice with the following request (quoted verbatim between the "
      "markers):\n<<<\n" + input.text + "\n>>>\nWrite " + count + " new exercise sentences in " +
      target + " that this learner would find relevant. Do not explain anything. Reply with a JSON "
      "array of exactly " + count + " strings, one sentence per string.";
  return prompt;
}

namespace {

std::string trim(std::string_view s) {
  auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  auto last = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(first, last - first + 1));
}

std::string ascii_lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

// Drops a leading ```lang fence and trailing ``` if present.
std::string strip_code_fence(const std::string& content) {
  std::string s = trim(content);
  if (s.rfind("```", 0) != 0) return s;
  auto nl = s.find('\n');
  s = nl == std::string::npos ? std::string() : s.substr(nl + 1);
  auto end = s.rfind("```");
  if (end != std::string::npos) s = s.substr(0, end);
  return trim(s);
}

std::string strip_list_marker(std::string line) {
  line = trim(line);
  if (!line.empty() && (line[0] == '-' || line[0] == '*' || line[0] == '+')) {
    return trim(line.substr(1));
  }
  std::size_t digits = 0;
  while (digits < line.size() && std::isdigit(static_cast<unsigned char>(line[digits]))) ++digits;
  if (digits > 0 && digits < line.size() && (line[digits] == '.' || line[digits] == ')')) {
    return trim(line.substr(digits + 1));
  }
  return line;
}

std::string strip_quotes(std::string s) {
  if (!s.empty() && s.back() == ',') s.pop_back();
  s = trim(s);
  if (s.size() >= 2 && s.front() == '"' && s.back() == '"') s = s.substr(1, s.size() - 2);
  return trim(s);
}

}  // namespace

std::vector<std::string> parse_candidates(const std::string& content, int k_h) {
  if (k_h < 1) throw Error(ErrorCode::InvalidArgument, "k_h must be >= 1");
  const auto want = static_cast<std::size_t>(k_h);
  const std::string body = strip_code_fence(content);

  try {
    const json parsed = json::parse(body);
    if (parsed.is_array()) {
      std::vector<std::string> out;
      bool all_strings = true;
      for (const auto& item : parsed) {
        if (!item.is_string()) {
          all_strings = false;
          break;
        }
        const std::string s = trim(item.get<std::string>());
        if (!s.empty()) out.push_back(s);
      }
      if (all_strings && out.size() >= want) {
        out.resize(want);
        return out;
      }
    }
  } catch (const json::exception&) {
    // fall through to line parsing
  }

  std::vector<std::string> lines;
  std::istringstream in(body);
  std::string line;
  while (std::getline(in, line)) {
    const std::string t = trim(line);
    if (t.empty() || t == "[" || t == "]" || t.rfind("```", 0) == 0) continue;
    std::string item = strip_quotes(strip_list_marker(t));
    if (!item.empty()) lines.push_back(std::move(item));
  }
  if (lines.size() < want) {
    throw Error(ErrorCode::GenerationParseError, "expected " + std::to_string(want) +
                                                     " candidates, recovered " + std::to_string(lines.size()));
  }
  lines.resize(want);
  return lines;
}

std::vector<MockRule> load_mock_rules(const std::filesystem::path& path) {
  std::vector<MockRule> rules;
  detail::for_each_jsonl(path, [&](const json& obj, std::size_t line) {
    MockRule rule;
    rule.pattern = detail::field<std::string>(obj, "pattern", path, line);
    if (auto it = obj.find("side"); it != obj.end() && !it->is_null()) {
      rule.side = parse_side(it->get<std::string>());
    }
    rule.pool = detail::field<std::vector<std::string>>(obj, "pool", path, line);
    if (rule.pool.empty() || std::any_of(rule.pool.begin(), rule.pool.end(), [](const auto& s) { return is_blank(s); })) {
      throw Error(ErrorCode::ParseError, path.string() + ":" + std::to_string(line) + ": pool must hold non-blank sentences");
    }
    if (is_blank(rule.pattern)) {
      throw Error(ErrorCode::ParseError, path.string() + ":" + std::to_string(line) + ": blank pattern");
    }
    rules.push_back(std::move(rule));
  });
  return rules;
}

void save_mock_rules(const std::vector<MockRule>& rules, const std::filesystem::path& path) {
  auto out = detail::open_output(path);
  for (const MockRule& rule : rules) {
    out << json{{"pattern", rule.pattern},
                {"side", rule.side ? json(std::string(to_string(*rule.side))) : json(nullptr)},
                {"pool", rule.pool}}
               .dump()
        << '\n';
  }
}

CandidateSet mock_generate(const std::vector<MockRule>& rules, const Query& input, int k_h, Side side) {
  if (k_h < 1) throw Error(ErrorCode::InvalidArgument, "k_h must be >= 1");
  const std::string haystack = ascii_lower(input.text);
  for (const MockRule& rule : rules) {
    if (rule.side && *rule.side != side) continue;
    if (rule.pool.empty()) continue;
    if (haystack.find(ascii_lower(rule.pattern)) == std::string::npos) continue;
    CandidateSet out{input, side, {}};
    out.candidates.reserve(static_cast<std::size_t>(k_h));
    for (int i = 0; i < k_h; ++i) out.candidates.push_back(rule.pool[static_cast<std::size_t>(i) % rule.pool.size()]);
    return out;
  }
  throw Error(ErrorCode::NoRuleMatched, "'" + input.text + "'");
}

CandidateSet MockGenerator::generate(const GenConfig& config, const Query& input) {
  return mock_generate(rules_, input, config.k_h, config.side);
}

ChatGenerator::ChatGenerator(ChatGeneratorOptions options) : options_(std::move(options)) {
  detail::parse_base_url(options_.base_url);
  if (!options_.bearer_token) options_.bearer_token = detail::env_token("HYEX_LLM_TOKEN");
}

CandidateSet ChatGenerator::generate(const GenConfig& config, const Query& input) {
  const Prompt prompt = build_prompt(config, input);
  const json request = {{"model", config.model},
                        {"messages", json::array({{{"role", "system"}, {"content", prompt.system_text}},
                                                  {{"role", "user"}, {"content", prompt.user_text}}})},
                        {"temperature", config.temperature}};
  detail::RetryPolicy policy;
  policy.max_retries = config.max_retries;
  policy.timeout = options_.timeout;
  policy.backoff_base = options_.backoff_base;

  std::string last_error;
  for (int attempt = 0; attempt <= config.max_retries; ++attempt) {
    const json response = detail::post_json(options_.base_url, "/v1/chat/completions", request,
                                            options_.bearer_token, policy);
    std::string content;
    try {
      content = response.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const json::exception& e) {
      throw Error(ErrorCode::ProviderUnavailable, "malformed chat completion: " + std::string(e.what()));
    }
    try {
      return CandidateSet{input, config.side, parse_candidates(content, config.k_h)};
    } catch (const Error& e) {
      last_error = e.detail();
      spdlog::warn("generation attempt {} unparseable: {}", attempt + 1, last_error);
    }
  }
  throw Error(ErrorCode::GenerationParseError, last_error);
}

CandidateSet generate_candidates(const GenConfig& config, const Query& input, Generator& provider) {
  config.validate();
  if (is_blank(input.text)) throw Error(ErrorCode::EmptyText, "query " + input.id);
  CandidateSet set = provider.generate(config, input);
  if (set.candidates.size() != static_cast<std::size_t>(config.k_h) ||
      std::any_of(set.candidates.begin(), set.candidates.end(), [](const auto& c) { return is_blank(c); })) {
    throw Error(ErrorCode::GenerationParseError,
                "provider returned " + std::to_string(set.candidates.size()) + " candidates, expected " +
                    std::to_string(config.k_h));
  }
  return set;
}

}  // namespace hyex
