#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "scansum/corpus_io.hpp"

namespace scansum {

/// Symmetric T x T frame-to-frame cosine similarity, entries in [0,1].
class SimilarityMatrix {
 public:
  SimilarityMatrix() = default;
  explicit SimilarityMatrix(std::size_t size) : size_(size), values_(size * size, 0.0) {}
  SimilarityMatrix(std::size_t size, std::vector<double> values);

  std::size_t size() const { return size_; }
  double operator()(std::size_t i, std::size_t j) const { return values_[i * size_ + j]; }
  double& operator()(std::size_t i, std::size_t j) { return values_[i * size_ + j]; }
  std::span<const double> row(std::size_t i) const { return {values_.data() + i * size_, size_}; }
  const std::vector<double>& values() const { return values_; }

  /// Principal submatrix on the given (sorted or unsorted) frame indices.
  SimilarityMatrix slice(std::span<const std::size_t> indices) const;

  bool operator==(const SimilarityMatrix&) const = default;

 private:
  std::size_t size_ = 0;
  std::vector<double> values_;
};

/// (u.v)/(|u||v|) clamped to [0,1]; products accumulated in double.
double cosine(std::span<const float> u, std::span<const float> v);
double cosine(std::span<const double> u, std::span<const double> v);

SimilarityMatrix similarity_matrix(const EmbeddingMatrix& embeddings);

/// FNV-1a over the channel's raw float bytes; identifies cache provenance.
std::uint64_t embedding_hash(const EmbeddingMatrix& embeddings);

/// Cache: `path` holds raw little-endian float64 T x T, `path + ".json"` the
/// sidecar with T and the source hash.
void write_similarity_cache(const fs::path& path, const SimilarityMatrix& sim,
                            std::uint64_t source_hash);
/// Returns std::nullopt when the cache is absent or stale for `source_hash`.
std::optional<SimilarityMatrix> read_similarity_cache(const fs::path& path,
                                                      std::uint64_t source_hash);

}  // namespace scansum
