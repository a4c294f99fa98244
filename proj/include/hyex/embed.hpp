#pragma once

// Base sentence embeddings: providers (deterministic mock, remote HTTP
// encoder) and the on-disk embedding store.

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "hyex/core.hpp"

namespace hyex {

struct EmbeddingSpec {
  std::size_t dim = 0;
  std::string provider;
  Side side = Side::L2;
  std::optional<std::string> projection_id;

  friend bool operator==(const EmbeddingSpec&, const EmbeddingSpec&) = default;
};

/// Fixed-dimension vectors keyed by exercise id, all sharing one spec.
/// Insertion order is preserved; once sealed the store is read-only.
class EmbeddingStore {
 public:
  EmbeddingStore() = default;
  explicit EmbeddingStore(EmbeddingSpec spec);

  const EmbeddingSpec& spec() const { return spec_; }
  std::size_t dim() const { return spec_.dim; }
  std::size_t size() const { return ids_.size(); }
  bool empty() const { return ids_.empty(); }

  /// Rejects wrong dimension (DimensionMismatch), NaN/Inf (NonFinite),
  /// duplicate ids (DuplicateId) and inserts after seal().
  void add(ExerciseId id, Vector vector);
  void seal() { sealed_ = true; }
  bool sealed() const { return sealed_; }

  bool contains(ExerciseId id) const { return position_.count(id) != 0; }
  const Vector& at(ExerciseId id) const;

  const std::vector<ExerciseId>& ids() const { return ids_; }
  const std::vector<Vector>& vectors() const { return vectors_; }

  /// Same ids and order, vectors replaced. Used by projection.
  EmbeddingStore with_vectors(EmbeddingSpec spec, std::vector<Vector> vectors) const;

  friend bool operator==(const EmbeddingStore& a, const EmbeddingStore& b) {
    return a.spec_ == b.spec_ && a.ids_ == b.ids_ && a.vectors_ == b.vectors_;
  }

 private:
  EmbeddingSpec spec_;
  std::vector<ExerciseId> ids_;
  std::vector<Vector> vectors_;
  std::unordered_map<ExerciseId, std::size_t> position_;
  bool sealed_ = false;
};

/// First line is `{"meta": {...}}`, then one `{"id", "vector"}` per line.
/// With `append` the existing file's meta must equal `store.spec()`, else
/// SpecMismatch; only the entries are appended.
void save_store(const EmbeddingStore& store, const std::filesystem::path& path,
                bool append = false);
EmbeddingStore load_store(const std::filesystem::path& path);

/// Reads only the meta line.
EmbeddingSpec read_store_spec(const std::filesystem::path& path);

/// 64-bit FNV-1a over raw bytes.
std::uint64_t fnv1a64(std::string_view bytes);

/// Lowercased alphanumeric tokens. ASCII letters are folded; any byte that is
/// not an ASCII alphanumeric separates tokens, except that bytes of multi-byte
/// UTF-8 sequences are kept so accented words stay whole.
std::vector<std::string> tokenize(std::string_view text);

/// Bag of hashed tokens: +1 at fnv1a64(token) mod dim for each token, then
/// L2-normalized. Throws NoTokens for token-free text.
Vector mock_embed(std::string_view text, std::size_t dim);

class Embedder {
 public:
  virtual ~Embedder() = default;

  /// One vector per text, in input order.
  virtual std::vector<Vector> embed(std::span<const std::string> texts, Side side) = 0;
  /// Output dimension, or 0 if not known before the first call.
  virtual std::size_t dim() const = 0;
  virtual std::string label() const = 0;
};

class MockEmbedder final : public Embedder {
 public:
  explicit MockEmbedder(std::size_t dim);

  std::vector<Vector> embed(std::span<const std::string> texts, Side side) override;
  std::size_t dim() const override { return dim_; }
  std::string label() const override { return "mock"; }

 private:
  std::size_t dim_;
};

struct HttpEmbedderOptions {
  std::string base_url;
  /// 0 accepts whatever the service reports on first response.
  std::size_t expected_dim = 0;
  std::size_t batch_size = 64;
  std::size_t max_in_flight = 4;
  int max_retries = 3;
  std::chrono::milliseconds timeout{60000};
  std::chrono::milliseconds backoff_base{1000};
  /// Defaults to $HYEX_EMBED_TOKEN when unset.
  std::optional<std::string> bearer_token;
};

/// Client for `POST {base_url}/embed`. Batches are sent concurrently (bounded
/// by max_in_flight) and reassembled in request order.
class HttpEmbedder final : public Embedder {
 public:
  explicit HttpEmbedder(HttpEmbedderOptions options);

  std::vector<Vector> embed(std::span<const std::string> texts, Side side) override;
  std::size_t dim() const override { return dim_; }
  std::string label() const override { return "http:" + options_.base_url; }

 private:
  std::vector<Vector> embed_one_batch(std::span<const std::string> texts, Side side) const;

  HttpEmbedderOptions options_;
  std::size_t dim_;
};

/// Validated provider call: EmptyBatch on no input, DimensionMismatch when the
/// provider returns the wrong count or width.
std::vector<Vector> embed_batch(std::span<const std::string> texts, Side side, Embedder& provider);

/// Embeds every exercise's `side` text into a sealed store.
EmbeddingStore embed_corpus(const Corpus& corpus, Side side, Embedder& provider);

}  // namespace hyex
