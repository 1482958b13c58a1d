#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "scansum/corpus_io.hpp"

namespace scansum {

using TokenSequence = std::vector<std::string>;

/// Lowercases, splits on whitespace (ASCII and the Unicode space separators)
/// and strips leading/trailing ASCII punctuation from each token. Tokens that
/// end up empty are dropped.
TokenSequence tokenize(std::string_view text);

/// Cumulative BLEU-n against a single reference: geometric mean of the
/// clipped n-gram precisions of orders 1..n times the brevity penalty
/// min(1, exp(1 - r/c)). No smoothing, so any zero precision gives 0.
double bleu_n(const TokenSequence& candidate, const TokenSequence& reference, int n);

inline constexpr double kRougeBeta = 1.2;

std::size_t lcs_length(const TokenSequence& a, const TokenSequence& b);
double rouge_l(const TokenSequence& candidate, const TokenSequence& reference,
               double beta = kRougeBeta);

struct CaptionScore {
  std::array<double, 4> bleu{};
  double rouge_l = 0.0;

  bool operator==(const CaptionScore&) const = default;
};

CaptionScore score_caption(const TokenSequence& candidate, const TokenSequence& reference,
                           double beta = kRougeBeta);

struct CorpusCaptionScore {
  CaptionScore mean;
  CaptionScore stddev;  // population
  std::size_t count = 0;
};

CorpusCaptionScore score_corpus(const std::vector<std::pair<TokenSequence, TokenSequence>>& pairs,
                                double beta = kRougeBeta);

/// Pairs predicted and reference captions by frame index. Only frames present
/// in both files are scored; the number of unmatched frames on each side is
/// reported alongside.
struct CaptionPairing {
  std::vector<std::pair<TokenSequence, TokenSequence>> pairs;
  std::vector<std::size_t> frames;
  std::size_t unmatched_pred = 0;
  std::size_t unmatched_gt = 0;
};
CaptionPairing pair_captions(const std::vector<CaptionRecord>& pred,
                             const std::vector<CaptionRecord>& gt);

// Caption providers ---------------------------------------------------------

class CaptionProvider {
 public:
  virtual ~CaptionProvider() = default;
  /// Caption for the keyframe at `frame_index`; empty when none is available.
  virtual std::string caption(std::size_t frame_index, const std::string& image_path) const = 0;
};

/// Looks captions up by frame index in a JSON-lines caption file.
class LookupCaptioner : public CaptionProvider {
 public:
  explicit LookupCaptioner(const std::vector<CaptionRecord>& records);
  std::string caption(std::size_t frame_index, const std::string& image_path) const override;

 private:
  std::map<std::size_t, std::string> by_frame_;
};

/// Runs a shell command per keyframe and takes its trimmed stdout as the
/// caption. `{frame}` and `{image}` in the template are substituted.
class ExecCaptioner : public CaptionProvider {
 public:
  explicit ExecCaptioner(std::string command_template);
  std::string caption(std::size_t frame_index, const std::string& image_path) const override;

  std::string render(std::size_t frame_index, const std::string& image_path) const;

 private:
  std::string template_;
};

/// Parses `lookup:<file.jsonl>` or `exec:<command template>`.
std::unique_ptr<CaptionProvider> make_caption_provider(std::string_view spec);

}  // namespace scansum
