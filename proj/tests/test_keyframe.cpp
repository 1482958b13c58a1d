#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "oracles.hpp"
#include "scansum/error.hpp"
#include "scansum/keyframe.hpp"
#include "test_util.hpp"

using namespace scansum;

namespace {

SimilarityMatrix filled(std::size_t n, double off) {
  SimilarityMatrix s(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) s(i, j) = i == j ? 1.0 : off;
  }
  return s;
}

}  // namespace

TEST_CASE("diverse_select hand-run example") {
  SimilarityMatrix s = filled(4, 0.1);
  s(0, 1) = s(1, 0) = 0.97;
  const std::vector<double> p{0.9, 0.85, 0.7, 0.5};
  const KeyframeSet k = diverse_select(p, s, DetectionConfig{0.96, 0.8, 0.99});
  CHECK(k.indices == std::vector<std::size_t>{0});
  CHECK(k.scores == std::vector<double>{0.9});
}

TEST_CASE("diverse_select: all scores below tau_prime gives nothing") {
  const std::vector<double> p{0.1, 0.5, 0.79};
  CHECK(diverse_select(p, filled(3, 0.0), DetectionConfig{}).empty());
}

TEST_CASE("diverse_select equals the reference loop on random instances") {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t T = 1 + rng() % 30;
    const SimilarityMatrix S = testutil::random_similarity(rng, T, 0.4);
    std::vector<double> p(T);
    for (auto& x : p) x = trial % 3 == 0 ? std::round(u(rng) * 4) / 4 : u(rng);  // ties too
    const DetectionConfig cfg{0.9 + 0.09 * u(rng), 0.3 + 0.6 * u(rng), 0.99};
    const KeyframeSet k = diverse_select(p, S, cfg);
    CHECK(k.indices == oracle::diverse_select(p, S, cfg.tau, cfg.tau_prime));
    k.validate(T);
  }
}

TEST_CASE("diverse_select prefers the lowest index on ties") {
  const std::vector<double> p{0.9, 0.9};
  SimilarityMatrix s = filled(2, 0.99);
  CHECK(diverse_select(p, s, DetectionConfig{}).indices == std::vector<std::size_t>{0});
}

TEST_CASE("diverse_select size mismatch") {
  const std::vector<double> p{0.9, 0.9};
  CHECK_THROWS_AS(diverse_select(p, filled(3, 0.0), DetectionConfig{}), Error);
}

TEST_CASE("propagate_labels examples") {
  SimilarityMatrix s = filled(3, 0.0);
  s(0, 1) = s(1, 0) = 0.995;
  s(0, 2) = s(2, 0) = 0.5;
  CHECK(propagate_labels(s, {0, 0, 0}, 0.99) == KeyframeLabelVector{0, 0, 0});
  CHECK(propagate_labels(s, {1, 0, 0}, 0.99) == KeyframeLabelVector{1, 1, 0});

  SimilarityMatrix chain = filled(4, 0.0);
  chain(0, 1) = chain(1, 0) = 0.995;
  chain(1, 2) = chain(2, 1) = 0.995;
  chain(0, 2) = chain(2, 0) = 0.5;
  CHECK(propagate_labels(chain, {1, 0, 0, 0}, 0.99) == KeyframeLabelVector{1, 1, 0, 0});
}

TEST_CASE("propagate_labels matches its definition and is monotone") {
  std::mt19937_64 rng(23);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t T = 1 + rng() % 25;
    const SimilarityMatrix S = testutil::random_similarity(rng, T, 0.3);
    KeyframeLabelVector y(T);
    for (auto& v : y) v = rng() % 5 == 0;
    const double thr = 0.95 + 0.05 * (rng() % 100) / 100.0;
    const KeyframeLabelVector out = propagate_labels(S, y, thr);
    for (std::size_t i = 0; i < T; ++i) {
      bool expect = y[i];
      for (std::size_t j = 0; j < T; ++j) expect = expect || (y[j] && S(i, j) > thr);
      CHECK(out[i] == expect);
      CHECK(out[i] >= y[i]);
    }
  }
}

TEST_CASE("baseline_score equals the brute-force max-cosine loop") {
  std::mt19937_64 rng(3);
  const EmbeddingMatrix e = testutil::random_embeddings(rng, 10, 5);
  const EmbeddingMatrix protos_m = testutil::random_embeddings(rng, 2, 5);
  std::vector<std::vector<float>> protos;
  for (std::size_t k = 0; k < 2; ++k) protos.emplace_back(protos_m.row(k).begin(), protos_m.row(k).end());
  const ScoreVector s = baseline_score(e, protos);
  for (std::size_t t = 0; t < 10; ++t) {
    double best = 0;
    for (const auto& p : protos) best = std::max(best, cosine(e.row(t), p));
    CHECK(s[t] == best);
  }
  protos.assign(1, std::vector<float>(e.row(4).begin(), e.row(4).end()));
  CHECK(baseline_score(e, protos)[4] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(baseline_score(EmbeddingMatrix("d", 1, 2, {0, 1}), {{1.0f, 0.0f}})[0] == 0.0);
  CHECK_THROWS_AS(baseline_score(e, {}), Error);
  CHECK_THROWS_AS(baseline_score(e, {{1.0f}}), Error);
}

TEST_CASE("build_prototypes: single row, duplicate rows, greedy dedup oracle") {
  const EmbeddingMatrix one("d", 3, 2, {1, 0, 0.6f, 0.8f, 0, 1});
  const KeyframeLabelVector y1{0, 1, 0};
  std::vector<TrainingExam> ex{{&one, &y1}};
  CHECK(build_prototypes(ex, std::nullopt) == std::vector<std::vector<float>>{{0.6f, 0.8f}});

  const EmbeddingMatrix dup("d", 2, 2, {1, 1, 1, 1});
  const KeyframeLabelVector y2{1, 1};
  std::vector<TrainingExam> ex2{{&dup, &y2}};
  CHECK(build_prototypes(ex2, 0.99).size() == 1);
  CHECK(build_prototypes(ex2, std::nullopt).size() == 2);

  std::mt19937_64 rng(31);
  std::vector<EmbeddingMatrix> embs;
  std::vector<KeyframeLabelVector> labels{{1, 0, 1, 0}, {0, 1, 1, 0, 1}, {1, 1, 0}};
  for (const auto& y : labels) {
    EmbeddingMatrix e = testutil::random_embeddings(rng, y.size(), 3);
    embs.push_back(e);
  }
  // make two of the seven keyframe rows near-duplicates of earlier ones
  auto vals = embs[1].values();
  std::copy(embs[0].row(0).begin(), embs[0].row(0).end(), vals.begin() + 3);
  embs[1] = EmbeddingMatrix("d", 5, 3, vals);
  std::vector<TrainingExam> three;
  for (std::size_t k = 0; k < 3; ++k) three.push_back({&embs[k], &labels[k]});
  std::vector<std::vector<float>> expect;
  for (std::size_t k = 0; k < 3; ++k) {
    for (std::size_t t = 0; t < labels[k].size(); ++t) {
      if (!labels[k][t]) continue;
      bool keep = true;
      for (const auto& p : expect) keep = keep && !(cosine(embs[k].row(t), p) > 0.99);
      if (keep) expect.emplace_back(embs[k].row(t).begin(), embs[k].row(t).end());
    }
  }
  CHECK(build_prototypes(three, 0.99) == expect);
  CHECK(expect.size() < 7);

  const KeyframeLabelVector none{0, 0, 0};
  std::vector<TrainingExam> empty{{&one, &none}};
  CHECK_THROWS_AS(build_prototypes(empty, std::nullopt), Error);
}

TEST_CASE("drop_frames counts and set arithmetic") {
  std::mt19937_64 rng(42);
  const std::size_t T = 60;
  const SimilarityMatrix S = testutil::random_similarity(rng, T, 0.4);
  KeyframeLabelVector y(T, 0);
  y[5] = y[30] = y[47] = 1;
  const auto eligible = eligible_frames(S, y, 0.97);
  REQUIRE(eligible.size() > 2);
  for (std::size_t i : eligible) {
    CHECK(!y[i]);
    CHECK((S(i, 5) > 0.97 || S(i, 30) > 0.97 || S(i, 47) > 0.97));
  }

  std::vector<std::size_t> all(T);
  for (std::size_t i = 0; i < T; ++i) all[i] = i;
  CHECK(drop_frames(S, y, 0.0, 0.97, 1) == all);
  CHECK(drop_frames(S, y, 1.0, 0.97, 1).size() == T - eligible.size());

  const auto kept = drop_frames(S, y, 0.5, 0.97, 42);
  CHECK(kept.size() == T - eligible.size() / 2);
  CHECK(std::is_sorted(kept.begin(), kept.end()));
  std::set<std::size_t> kept_set(kept.begin(), kept.end());
  for (std::size_t i = 0; i < T; ++i) {
    if (y[i] || !std::binary_search(eligible.begin(), eligible.end(), i)) CHECK(kept_set.count(i));
  }
  CHECK(drop_frames(S, y, 0.5, 0.97, 42) == kept);

  // larger fractions drop a superset under the same seed
  const auto kept9 = drop_frames(S, y, 0.9, 0.97, 42);
  for (std::size_t i : kept9) CHECK(kept_set.count(i));

  CHECK_THROWS_AS(drop_frames(S, y, 1.5, 0.97, 1), Error);
}

TEST_CASE("compute_class_ratio") {
  CHECK(compute_class_ratio({1, 0}) == 1.0);
  CHECK(compute_class_ratio({1, 0, 0, 0}) == 3.0);
  KeyframeLabelVector y(1601, 0);
  y[800] = 1;
  CHECK(compute_class_ratio(y) == 1600.0);
  CHECK_THROWS_AS(compute_class_ratio({0, 0}), Error);
}

TEST_CASE("keyframes JSON round-trip and validation") {
  ExamManifest m;
  m.exam_id = "x";
  m.frame_count = 10;
  m.fps = 5;
  KeyframeSet k;
  k.indices = {1, 7};
  k.scores = {0.25, 0.875};
  const KeyframeFile f = parse_keyframes(keyframes_to_json(k, m));
  CHECK(f.exam_id == "x");
  CHECK(f.frame_count == 10);
  CHECK(f.keyframes == k);
  CHECK_THROWS_AS(parse_keyframes(R"({"frame_count":3,"keyframes":[{"frame_index":3}]})"), Error);
  CHECK_THROWS_AS(parse_keyframes(R"({"frame_count":5,"keyframes":[{"frame_index":3},{"frame_index":1}]})"),
                  Error);
}
