#include <doctest.h>

#include <cmath>

#include "scansum/error.hpp"
#include "scansum/similarity.hpp"
#include "test_util.hpp"

using namespace scansum;

namespace {

// Naive double loop: dot product and norms from scratch, clamped.
double naive_cos(const EmbeddingMatrix& e, std::size_t i, std::size_t j) {
  double dot = 0, ni = 0, nj = 0;
  for (std::size_t d = 0; d < e.dim(); ++d) {
    const double a = e.row(i)[d], b = e.row(j)[d];
    dot += a * b;
    ni += a * a;
    nj += b * b;
  }
  const double c = dot / (std::sqrt(ni) * std::sqrt(nj));
  return c < 0 ? 0 : (c > 1 ? 1 : c);
}

}  // namespace

TEST_CASE("cosine basics") {
  const std::vector<float> x{1, 0}, y{0, 1}, nx{-1, 0};
  CHECK(cosine(std::span<const float>(x), std::span<const float>(x)) == 1.0);
  CHECK(cosine(std::span<const float>(x), std::span<const float>(y)) == 0.0);
  CHECK(cosine(std::span<const float>(x), std::span<const float>(nx)) == 0.0);
}

TEST_CASE("T=1 and orthonormal rows") {
  CHECK(similarity_matrix(EmbeddingMatrix("d", 1, 3, {0, 2, 0})).values() == std::vector<double>{1.0});
  const SimilarityMatrix s = similarity_matrix(EmbeddingMatrix("d", 3, 3, {1, 0, 0, 0, 1, 0, 0, 0, 1}));
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t j = 0; j < 3; ++j) CHECK(s(i, j) == (i == j ? 1.0 : 0.0));
  }
}

TEST_CASE("random matrices match the naive double loop") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    const EmbeddingMatrix e = testutil::random_embeddings(rng, 20, 1 + rng() % 12);
    const SimilarityMatrix s = similarity_matrix(e);
    for (std::size_t i = 0; i < 20; ++i) {
      CHECK(s(i, i) == doctest::Approx(1.0).epsilon(1e-12));
      for (std::size_t j = 0; j < 20; ++j) {
        CHECK(s(i, j) == s(j, i));
        CHECK(std::abs(s(i, j) - naive_cos(e, i, j)) < 1e-6);
        CHECK(s(i, j) == cosine(e.row(i), e.row(j)));
      }
    }
  }
}

TEST_CASE("zero row is ZeroNormInput") {
  try {
    similarity_matrix(EmbeddingMatrix("d", 3, 2, {1, 0, 0, 0, 0, 1}));
    FAIL("expected throw");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::ZeroNormInput);
    CHECK(std::string(e.what()).find("1") != std::string::npos);
  }
}

TEST_CASE("slice is the principal submatrix") {
  std::mt19937_64 rng(2);
  const SimilarityMatrix s = testutil::random_similarity(rng, 10);
  const std::vector<std::size_t> idx{1, 4, 9};
  const SimilarityMatrix sub = s.slice(idx);
  REQUIRE(sub.size() == 3);
  for (std::size_t a = 0; a < 3; ++a) {
    for (std::size_t b = 0; b < 3; ++b) CHECK(sub(a, b) == s(idx[a], idx[b]));
  }
}

TEST_CASE("similarity cache round-trip and staleness") {
  testutil::TempDir dir("sim_cache");
  std::mt19937_64 rng(9);
  const EmbeddingMatrix e = testutil::random_embeddings(rng, 15, 6);
  const SimilarityMatrix s = similarity_matrix(e);
  const auto h = embedding_hash(e);
  CHECK_FALSE(read_similarity_cache(dir / "S.f64", h).has_value());
  write_similarity_cache(dir / "S.f64", s, h);
  const auto back = read_similarity_cache(dir / "S.f64", h);
  REQUIRE(back.has_value());
  CHECK(*back == s);
  CHECK_FALSE(read_similarity_cache(dir / "S.f64", h + 1).has_value());
  const EmbeddingMatrix e2 = testutil::random_embeddings(rng, 15, 6);
  CHECK(embedding_hash(e2) != h);
}
