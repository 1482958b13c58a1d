#include "scansum/similarity.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>

#include <json.hpp>

#include "scansum/error.hpp"

namespace scansum {

namespace {

template <typename T>
double cosine_impl(std::span<const T> u, std::span<const T> v) {
  if (u.size() != v.size()) {
    throw Error(ErrorCode::DimensionMismatch, "cosine of vectors with different length");
  }
  double dot = 0.0, nu = 0.0, nv = 0.0;
  for (std::size_t k = 0; k < u.size(); ++k) {
    const double a = u[k], b = v[k];
    dot += a * b;
    nu += a * a;
    nv += b * b;
  }
  if (nu == 0.0 || nv == 0.0) throw Error(ErrorCode::ZeroNormInput, "zero-norm vector");
  const double c = dot / (std::sqrt(nu) * std::sqrt(nv));
  return std::clamp(c, 0.0, 1.0);
}

}  // namespace

SimilarityMatrix::SimilarityMatrix(std::size_t size, std::vector<double> values)
    : size_(size), values_(std::move(values)) {
  if (values_.size() != size_ * size_) {
    throw Error(ErrorCode::SizeMismatch, "similarity buffer is not T x T");
  }
}

SimilarityMatrix SimilarityMatrix::slice(std::span<const std::size_t> indices) const {
  SimilarityMatrix out(indices.size());
  for (std::size_t a = 0; a < indices.size(); ++a) {
    for (std::size_t b = 0; b < indices.size(); ++b) {
      out(a, b) = (*this)(indices[a], indices[b]);
    }
  }
  return out;
}

double cosine(std::span<const float> u, std::span<const float> v) { return cosine_impl(u, v); }
double cosine(std::span<const double> u, std::span<const double> v) { return cosine_impl(u, v); }

SimilarityMatrix similarity_matrix(const EmbeddingMatrix& embeddings) {
  const std::size_t n = embeddings.rows();
  for (std::size_t i = 0; i < n; ++i) {
    const auto r = embeddings.row(i);
    if (std::all_of(r.begin(), r.end(), [](float v) { return v == 0.0f; })) {
      throw Error(ErrorCode::ZeroNormInput,
                  "row " + std::to_string(i) + " of channel '" + embeddings.channel() + "'");
    }
  }
  SimilarityMatrix sim(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i; j < n; ++j) {
      const double c = cosine(embeddings.row(i), embeddings.row(j));
      sim(i, j) = c;
      sim(j, i) = c;
    }
  }
  return sim;
}

std::uint64_t embedding_hash(const EmbeddingMatrix& embeddings) {
  std::uint64_t h = 14695981039346656037ull;
  for (float f : embeddings.values()) {
    auto bits = std::bit_cast<std::uint32_t>(f);
    for (int k = 0; k < 4; ++k) {
      h ^= bits & 0xFFu;
      h *= 1099511628211ull;
      bits >>= 8;
    }
  }
  return h;
}

void write_similarity_cache(const fs::path& path, const SimilarityMatrix& sim,
                            std::uint64_t source_hash) {
  std::vector<unsigned char> bytes(sim.values().size() * 8);
  for (std::size_t i = 0; i < sim.values().size(); ++i) {
    auto bits = std::bit_cast<std::uint64_t>(sim.values()[i]);
    for (int k = 0; k < 8; ++k) {
      bytes[8 * i + k] = static_cast<unsigned char>(bits & 0xFFu);
      bits >>= 8;
    }
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  nlohmann::json side = {{"T", sim.size()}, {"source_hash", source_hash}};
  write_text_file(fs::path(path.string() + ".json"), side.dump() + "\n");
}

std::optional<SimilarityMatrix> read_similarity_cache(const fs::path& path,
                                                      std::uint64_t source_hash) {
  const fs::path sidecar(path.string() + ".json");
  std::error_code ec;
  if (!fs::is_regular_file(path, ec) || !fs::is_regular_file(sidecar, ec)) return std::nullopt;
  nlohmann::json side;
  try {
    side = nlohmann::json::parse(read_text_file(sidecar));
  } catch (const nlohmann::json::exception&) {
    return std::nullopt;
  }
  if (!side.contains("T") || !side.contains("source_hash") ||
      side["source_hash"].get<std::uint64_t>() != source_hash) {
    return std::nullopt;
  }
  const auto n = side["T"].get<std::size_t>();
  std::ifstream in(path, std::ios::binary);
  std::vector<unsigned char> bytes{std::istreambuf_iterator<char>(in),
                                   std::istreambuf_iterator<char>()};
  if (bytes.size() != n * n * 8) return std::nullopt;
  std::vector<double> values(n * n);
  for (std::size_t i = 0; i < values.size(); ++i) {
    std::uint64_t bits = 0;
    for (int k = 7; k >= 0; --k) bits = (bits << 8) | bytes[8 * i + k];
    values[i] = std::bit_cast<double>(bits);
  }
  return SimilarityMatrix(n, std::move(values));
}

}  // namespace scansum
