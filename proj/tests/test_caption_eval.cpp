#include <doctest.h>

#include <cmath>
#include <functional>
#include <map>
#include <random>

#include "scansum/caption_eval.hpp"
#include "oracles.hpp"
#include "scansum/error.hpp"

using namespace scansum;

namespace {

TokenSequence random_tokens(std::mt19937_64& rng, std::size_t max_len) {
  static const char* vocab[] = {"a", "b", "c", "d", "e"};
  TokenSequence t(rng() % (max_len + 1));
  for (auto& w : t) w = vocab[rng() % 5];
  return t;
}

}  // namespace

TEST_CASE("tokenize") {
  CHECK(tokenize("Head Circumference.") == TokenSequence{"head", "circumference"});
  CHECK(tokenize("").empty());
  CHECK(tokenize("this image shows the fetal abdomen").size() == 6);
  CHECK(tokenize("  (femur),  length!  ") == TokenSequence{"femur", "length"});
  CHECK(tokenize("a\xC2\xA0" "b") == TokenSequence{"a", "b"});  // no-break space
  CHECK(tokenize("... ,") .empty());
}

TEST_CASE("BLEU identities and the hand-computed example") {
  const TokenSequence s{"the", "fetal", "head", "in", "view"};
  for (int n = 1; n <= 4; ++n) CHECK(bleu_n(s, s, n) == 1.0);
  CHECK(bleu_n({"a", "b"}, {"c", "d"}, 1) == 0.0);

  const TokenSequence c{"the", "cat", "sat"}, r{"the", "cat", "sat", "down"};
  const double bp = std::exp(1.0 - 4.0 / 3.0);
  CHECK(bleu_n(c, r, 1) == bp * 1.0);
  CHECK(bleu_n(c, r, 2) == bp * std::sqrt(1.0 * 1.0));
  CHECK(std::abs(bleu_n(c, r, 1) - std::exp(-1.0 / 3.0)) < 1e-15);
  // no 4-gram in a 3-token candidate: unsmoothed BLEU-4 is 0
  CHECK(bleu_n(c, r, 4) == 0.0);
  // longer candidate: no brevity penalty, clipped unigram counts
  CHECK(bleu_n({"the", "the", "the"}, {"the", "cat"}, 1) == doctest::Approx(1.0 / 3.0));
  CHECK_THROWS_AS(bleu_n(c, r, 5), Error);
}

TEST_CASE("ROUGE-L formula example") {
  const TokenSequence c{"a", "b", "c", "d"}, r{"a", "c", "d"};
  CHECK(lcs_length(c, r) == 3);
  const double R = 1.0, P = 0.75, b2 = 1.2 * 1.2;
  CHECK(rouge_l(c, r) == doctest::Approx((1 + b2) * R * P / (R + b2 * P)).epsilon(1e-15));
  CHECK(rouge_l(c, c) == 1.0);
  CHECK(rouge_l({"x"}, {"y"}) == 0.0);
  CHECK(rouge_l({}, {"y"}) == 0.0);
}

TEST_CASE("LCS DP equals memoised recursion on fuzzed pairs") {
  std::mt19937_64 rng(99);
  for (int trial = 0; trial < 1000; ++trial) {
    const TokenSequence a = random_tokens(rng, 12), b = random_tokens(rng, 12);
    CHECK(lcs_length(a, b) == oracle::lcs(a, b));
  }
}

TEST_CASE("score_corpus mean and population std") {
  const TokenSequence s{"a", "b", "c"};
  const auto one = score_corpus({{s, s}});
  CHECK(one.mean.rouge_l == 1.0);
  CHECK(one.stddev.rouge_l == 0.0);
  const auto two = score_corpus({{s, s}, {{"x"}, {"y"}}});
  CHECK(two.mean.rouge_l == 0.5);
  CHECK(two.stddev.rouge_l == 0.5);
  CHECK(two.mean.bleu[0] == 0.5);
  CHECK_THROWS_AS(score_corpus({}), Error);

  std::mt19937_64 rng(5);
  std::vector<std::pair<TokenSequence, TokenSequence>> pairs;
  for (int k = 0; k < 10; ++k) pairs.emplace_back(random_tokens(rng, 8), random_tokens(rng, 8));
  const auto agg = score_corpus(pairs);
  double sum = 0, sq = 0;
  std::vector<double> vals;
  for (const auto& [c, r] : pairs) vals.push_back(rouge_l(c, r));
  for (double v : vals) sum += v;
  const double mean = sum / 10;
  for (double v : vals) sq += (v - mean) * (v - mean);
  CHECK(agg.mean.rouge_l == doctest::Approx(mean).epsilon(1e-12));
  CHECK(agg.stddev.rouge_l == doctest::Approx(std::sqrt(sq / 10)).epsilon(1e-12));
  CHECK(agg.count == 10);
}

TEST_CASE("pair_captions matches by frame") {
  const std::vector<CaptionRecord> pred{{1, "a b", false, std::nullopt}, {4, "c", false, std::nullopt}};
  const std::vector<CaptionRecord> gt{{4, "c", false, std::nullopt}, {9, "d", false, std::nullopt}};
  const CaptionPairing p = pair_captions(pred, gt);
  CHECK(p.frames == std::vector<std::size_t>{4});
  CHECK(p.unmatched_pred == 1);
  CHECK(p.unmatched_gt == 1);
}

TEST_CASE("caption providers") {
  const std::vector<CaptionRecord> recs{{2, "fetal head", false, std::nullopt}};
  LookupCaptioner lookup(recs);
  CHECK(lookup.caption(2, "") == "fetal head");
  CHECK(lookup.caption(3, "").empty());

  ExecCaptioner exec("echo frame {frame}");
  CHECK(exec.caption(12, "") == "frame 12");
  CHECK(ExecCaptioner("cat {image}").render(0, "it's.png") == "cat 'it'\\''s.png'");
  CHECK_THROWS_AS(make_caption_provider("bogus:x"), Error);
  CHECK(make_caption_provider("exec:echo hi")->caption(0, "") == "hi");
}
