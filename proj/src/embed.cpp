#include "hyex/embed.hpp"

#include <cmath>
#include <deque>
#include <future>
#include <string>
#include <utility>

#include "hyex/error.hpp"
#include "http.hpp"
#include "jsonl.hpp"

namespace hyex {

using detail::json;

EmbeddingStore::EmbeddingStore(EmbeddingSpec spec) : spec_(std::move(spec)) {
  if (spec_.dim < 2) throw Error(ErrorCode::InvalidArgument, "embedding dim must be >= 2");
}

void EmbeddingStore::add(ExerciseId id, Vector vector) {
  if (sealed_) throw Error(ErrorCode::InvalidArgument, "store is sealed");
  if (vector.size() != spec_.dim) {
    throw Error(ErrorCode::DimensionMismatch, "id " + std::to_string(id) + ": got " +
                                                  std::to_string(vector.size()) + ", expected " +
                                                  std::to_string(spec_.dim));
  }
  for (double x : vector) {
    if (!std::isfinite(x)) throw Error(ErrorCode::NonFinite, "id " + std::to_string(id));
  }
  if (!position_.emplace(id, ids_.size()).second) {
    throw Error(ErrorCode::DuplicateId, "id " + std::to_string(id) + " already in store");
  }
  ids_.push_back(id);
  vectors_.push_back(std::move(vector));
}

const Vector& EmbeddingStore::at(ExerciseId id) const {
  auto it = position_.find(id);
  if (it == position_.end()) throw Error(ErrorCode::UnknownExercise, std::to_string(id));
  return vectors_[it->second];
}

EmbeddingStore EmbeddingStore::with_vectors(EmbeddingSpec spec, std::vector<Vector> vectors) const {
  if (vectors.size() != ids_.size()) {
    throw Error(ErrorCode::DimMismatch, "vector count differs from id count");
  }
  EmbeddingStore out(std::move(spec));
  for (std::size_t i = 0; i < ids_.size(); ++i) out.add(ids_[i], std::move(vectors[i]));
  out.seal();
  return out;
}

namespace {

json spec_to_json(const EmbeddingSpec& spec) {
  return json{{"dim", spec.dim},
              {"provider", spec.provider},
              {"side", std::string(to_string(spec.side))},
              {"projection_id", spec.projection_id ? json(*spec.projection_id) : json(nullptr)}};
}

EmbeddingSpec spec_from_json(const json& meta, const std::filesystem::path& path) {
  EmbeddingSpec spec;
  spec.dim = detail::field<std::size_t>(meta, "dim", path, 1);
  spec.provider = detail::field<std::string>(meta, "provider", path, 1);
  spec.side = parse_side(detail::field<std::string>(meta, "side", path, 1));
  if (auto it = meta.find("projection_id"); it != meta.end() && !it->is_null()) {
    spec.projection_id = it->get<std::string>();
  }
  return spec;
}

}  // namespace

EmbeddingSpec read_store_spec(const std::filesystem::path& path) {
  auto in = detail::open_input(path);
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCode::ParseError, path.string() + ": empty store file");
  json obj;
  try {
    obj = json::parse(line);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::ParseError, path.string() + ":1: " + e.what());
  }
  if (!obj.is_object() || !obj.contains("meta")) {
    throw Error(ErrorCode::ParseError, path.string() + ":1: first line must be {\"meta\": ...}");
  }
  return spec_from_json(obj["meta"], path);
}

void save_store(const EmbeddingStore& store, const std::filesystem::path& path, bool append) {
  const bool extend = append && std::filesystem::exists(path);
  if (extend) {
    const EmbeddingSpec existing = read_store_spec(path);
    if (!(existing == store.spec())) {
      throw Error(ErrorCode::SpecMismatch,
                  path.string() + " holds dim " + std::to_string(existing.dim) + "/" +
                      existing.provider + "/" + std::string(to_string(existing.side)) +
                      ", store has dim " + std::to_string(store.dim()) + "/" + store.spec().provider +
                      "/" + std::string(to_string(store.spec().side)));
    }
  }
  auto out = detail::open_output(path, extend);
  if (!extend) out << json{{"meta", spec_to_json(store.spec())}}.dump() << '\n';
  for (std::size_t i = 0; i < store.size(); ++i) {
    // nlohmann emits the shortest decimal that round-trips each double.
    out << json{{"id", store.ids()[i]}, {"vector", store.vectors()[i]}}.dump() << '\n';
  }
}

EmbeddingStore load_store(const std::filesystem::path& path) {
  std::optional<EmbeddingStore> store;
  detail::for_each_jsonl(path, [&](const json& obj, std::size_t line) {
    if (!store) {
      if (!obj.contains("meta")) {
        throw Error(ErrorCode::ParseError, path.string() + ":" + std::to_string(line) + ": missing meta line");
      }
      store.emplace(spec_from_json(obj["meta"], path));
      return;
    }
    store->add(detail::field<ExerciseId>(obj, "id", path, line),
               detail::field<Vector>(obj, "vector", path, line));
  });
  if (!store) throw Error(ErrorCode::ParseError, path.string() + ": empty store file");
  store->seal();
  return std::move(*store);
}

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t hash = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    hash ^= c;
    hash *= 0x100000001b3ULL;
  }
  return hash;
}

namespace {

// Decodes one UTF-8 sequence at `pos`; returns {codepoint, length}. Invalid
// bytes decode as themselves with length 1.
std::pair<char32_t, std::size_t> decode_utf8(std::string_view s, std::size_t pos) {
  const auto b0 = static_cast<unsigned char>(s[pos]);
  auto cont = [&](std::size_t k) -> int {
    if (pos + k >= s.size()) return -1;
    const auto b = static_cast<unsigned char>(s[pos + k]);
    return (b & 0xC0) == 0x80 ? (b & 0x3F) : -1;
  };
  if (b0 < 0x80) return {b0, 1};
  if ((b0 & 0xE0) == 0xC0) {
    const int c1 = cont(1);
    if (c1 >= 0) return {static_cast<char32_t>(((b0 & 0x1F) << 6) | c1), 2};
  } else if ((b0 & 0xF0) == 0xE0) {
    const int c1 = cont(1), c2 = cont(2);
    if (c1 >= 0 && c2 >= 0) return {static_cast<char32_t>(((b0 & 0x0F) << 12) | (c1 << 6) | c2), 3};
  } else if ((b0 & 0xF8) == 0xF0) {
    const int c1 = cont(1), c2 = cont(2), c3 = cont(3);
    if (c1 >= 0 && c2 >= 0 && c3 >= 0) {
      return {static_cast<char32_t>(((b0 & 0x07) << 18) | (c1 << 12) | (c2 << 6) | c3), 4};
    }
  }
  return {b0, 1};
}

// No Unicode tables here: Latin-1 symbols, general punctuation and CJK
// punctuation separate tokens, every other non-ASCII codepoint is a letter.
bool is_word_codepoint(char32_t cp) {
  if (cp < 0x80) {
    return (cp >= '0' && cp <= '9') || (cp >= 'a' && cp <= 'z') || (cp >= 'A' && cp <= 'Z');
  }
  if (cp < 0xC0 || cp == 0xD7 || cp == 0xF7) return false;
  if (cp >= 0x2000 && cp <= 0x206F) return false;
  if (cp >= 0x3000 && cp <= 0x303F) return false;
  if (cp >= 0xFF00 && cp <= 0xFF0F) return false;
  return true;
}

void append_lower(std::string& out, std::string_view s, std::size_t pos, std::size_t len, char32_t cp) {
  if (cp < 0x80) {
    out.push_back(static_cast<char>(cp >= 'A' && cp <= 'Z' ? cp + 32 : cp));
  } else if (len == 2 && cp >= 0xC0 && cp <= 0xDE && cp != 0xD7) {
    const char32_t lower = cp + 0x20;
    out.push_back(static_cast<char>(0xC0 | (lower >> 6)));
    out.push_back(static_cast<char>(0x80 | (lower & 0x3F)));
  } else {
    out.append(s.substr(pos, len));
  }
}

}  // namespace

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string current;
  for (std::size_t pos = 0; pos < text.size();) {
    const auto [cp, len] = decode_utf8(text, pos);
    if (is_word_codepoint(cp)) {
      append_lower(current, text, pos, len, cp);
    } else if (!current.empty()) {
      tokens.push_back(std::move(current));
      current.clear();
    }
    pos += len;
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

Vector mock_embed(std::string_view text, std::size_t dim) {
  if (dim < 2) throw Error(ErrorCode::InvalidArgument, "mock_embed dim must be >= 2");
  const auto tokens = tokenize(text);
  if (tokens.empty()) throw Error(ErrorCode::NoTokens, "'" + std::string(text) + "'");
  Vector v(dim, 0.0);
  for (const auto& token : tokens) v[fnv1a64(token) % dim] += 1.0;
  double norm_sq = 0.0;
  for (double x : v) norm_sq += x * x;
  const double norm = std::sqrt(norm_sq);
  for (double& x : v) x /= norm;
  return v;
}

MockEmbedder::MockEmbedder(std::size_t dim) : dim_(dim) {
  if (dim < 2) throw Error(ErrorCode::InvalidArgument, "mock embedder dim must be >= 2");
}

std::vector<Vector> MockEmbedder::embed(std::span<const std::string> texts, Side) {
  std::vector<Vector> out;
  out.reserve(texts.size());
  for (const auto& t : texts) out.push_back(mock_embed(t, dim_));
  return out;
}

HttpEmbedder::HttpEmbedder(HttpEmbedderOptions options)
    : options_(std::move(options)), dim_(options_.expected_dim) {
  detail::parse_base_url(options_.base_url);
  if (options_.batch_size == 0 || options_.max_in_flight == 0) {
    throw Error(ErrorCode::InvalidArgument, "batch_size and max_in_flight must be positive");
  }
  if (!options_.bearer_token) options_.bearer_token = detail::env_token("HYEX_EMBED_TOKEN");
}

std::vector<Vector> HttpEmbedder::embed_one_batch(std::span<const std::string> texts, Side side) const {
  const json body = {{"texts", std::vector<std::string>(texts.begin(), texts.end())},
                     {"side", std::string(to_string(side))}};
  detail::RetryPolicy policy;
  policy.max_retries = options_.max_retries;
  policy.timeout = options_.timeout;
  policy.backoff_base = options_.backoff_base;
  const json response = detail::post_json(options_.base_url, "/embed", body, options_.bearer_token, policy);
  try {
    auto vectors = response.at("vectors").get<std::vector<Vector>>();
    if (auto it = response.find("dim"); it != response.end()) {
      const auto reported = it->get<std::size_t>();
      for (const auto& v : vectors) {
        if (v.size() != reported) {
          throw Error(ErrorCode::DimensionMismatch,
                      "service reported dim " + std::to_string(reported) + " but sent a vector of " +
                          std::to_string(v.size()));
        }
      }
    }
    return vectors;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ProviderUnavailable, "malformed /embed response: " + std::string(e.what()));
  }
}

std::vector<Vector> HttpEmbedder::embed(std::span<const std::string> texts, Side side) {
  const std::size_t n_batches = (texts.size() + options_.batch_size - 1) / options_.batch_size;
  std::vector<std::vector<Vector>> per_batch(n_batches);
  std::deque<std::pair<std::size_t, std::future<std::vector<Vector>>>> in_flight;

  auto drain_one = [&] {
    auto& [index, fut] = in_flight.front();
    per_batch[index] = fut.get();
    in_flight.pop_front();
  };
  try {
    for (std::size_t b = 0; b < n_batches; ++b) {
      if (in_flight.size() >= options_.max_in_flight) drain_one();
      const auto chunk = texts.subspan(b * options_.batch_size,
                                       std::min(options_.batch_size, texts.size() - b * options_.batch_size));
      in_flight.emplace_back(b, std::async(std::launch::async,
                                           [this, chunk, side] { return embed_one_batch(chunk, side); }));
    }
    while (!in_flight.empty()) drain_one();
  } catch (...) {
    for (auto& [index, fut] : in_flight) {
      if (fut.valid()) fut.wait();
    }
    throw;
  }

  std::vector<Vector> out;
  out.reserve(texts.size());
  for (auto& batch : per_batch) {
    for (auto& v : batch) {
      if (dim_ == 0) dim_ = v.size();
      if (v.size() != dim_) {
        throw Error(ErrorCode::DimensionMismatch,
                    "expected " + std::to_string(dim_) + ", service returned " + std::to_string(v.size()));
      }
      out.push_back(std::move(v));
    }
  }
  return out;
}

std::vector<Vector> embed_batch(std::span<const std::string> texts, Side side, Embedder& provider) {
  if (texts.empty()) throw Error(ErrorCode::EmptyBatch, "no texts to embed");
  auto vectors = provider.embed(texts, side);
  if (vectors.size() != texts.size()) {
    throw Error(ErrorCode::DimensionMismatch, "provider returned " + std::to_string(vectors.size()) +
                                                  " vectors for " + std::to_string(texts.size()) + " texts");
  }
  const std::size_t dim = provider.dim() != 0 ? provider.dim() : vectors.front().size();
  for (const auto& v : vectors) {
    if (v.size() != dim) {
      throw Error(ErrorCode::DimensionMismatch,
                  "expected " + std::to_string(dim) + ", got " + std::to_string(v.size()));
    }
  }
  return vectors;
}

EmbeddingStore embed_corpus(const Corpus& corpus, Side side, Embedder& provider) {
  std::vector<std::string> texts;
  texts.reserve(corpus.size());
  for (const Exercise& ex : corpus) texts.push_back(ex.text(side));
  auto vectors = embed_batch(texts, side, provider);
  EmbeddingStore store(EmbeddingSpec{vectors.front().size(), provider.label(), side, std::nullopt});
  for (std::size_t i = 0; i < corpus.size(); ++i) store.add(corpus[i].id, std::move(vectors[i]));
  store.seal();
  return store;
}

}  // namespace hyex
