#include "scansum/caption_eval.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <map>

#include "scansum/error.hpp"

namespace scansum {

namespace {

// Decodes one UTF-8 code point at `pos`; returns its byte length.
std::size_t decode_utf8(std::string_view s, std::size_t pos, char32_t& cp) {
  const auto b0 = static_cast<unsigned char>(s[pos]);
  auto cont = [&](std::size_t k) -> unsigned {
    return pos + k < s.size() ? static_cast<unsigned char>(s[pos + k]) & 0x3Fu : 0u;
  };
  if (b0 < 0x80) {
    cp = b0;
    return 1;
  }
  if ((b0 & 0xE0) == 0xC0) {
    cp = ((b0 & 0x1Fu) << 6) | cont(1);
    return 2;
  }
  if ((b0 & 0xF0) == 0xE0) {
    cp = ((b0 & 0x0Fu) << 12) | (cont(1) << 6) | cont(2);
    return 3;
  }
  cp = ((b0 & 0x07u) << 18) | (cont(1) << 12) | (cont(2) << 6) | cont(3);
  return 4;
}

bool is_unicode_space(char32_t cp) {
  switch (cp) {
    case U' ': case U'\t': case U'\n': case U'\v': case U'\f': case U'\r':
    case 0x85: case 0xA0: case 0x1680: case 0x2028: case 0x2029:
    case 0x202F: case 0x205F: case 0x3000:
      return true;
    default:
      return cp >= 0x2000 && cp <= 0x200A;
  }
}

std::string strip_punct(std::string token) {
  auto is_p = [](char c) { return std::ispunct(static_cast<unsigned char>(c)) != 0; };
  const auto first = std::find_if_not(token.begin(), token.end(), is_p);
  const auto last = std::find_if_not(token.rbegin(), token.rend(), is_p).base();
  if (first >= last) return {};
  return std::string(first, last);
}

using NgramCounts = std::map<std::vector<std::string_view>, std::size_t>;

NgramCounts count_ngrams(const TokenSequence& seq, std::size_t n) {
  NgramCounts counts;
  if (seq.size() < n) return counts;
  for (std::size_t i = 0; i + n <= seq.size(); ++i) {
    std::vector<std::string_view> key(seq.begin() + static_cast<std::ptrdiff_t>(i),
                                      seq.begin() + static_cast<std::ptrdiff_t>(i + n));
    ++counts[key];
  }
  return counts;
}

std::string shell_quote(const std::string& s) {
  std::string out = "'";
  for (char c : s) {
    if (c == '\'') {
      out += "'\\''";
    } else {
      out += c;
    }
  }
  return out + "'";
}

void replace_all(std::string& s, std::string_view from, const std::string& to) {
  for (std::size_t pos = s.find(from); pos != std::string::npos; pos = s.find(from, pos + to.size())) {
    s.replace(pos, from.size(), to);
  }
}

}  // namespace

TokenSequence tokenize(std::string_view text) {
  TokenSequence tokens;
  std::string current;
  auto flush = [&]() {
    if (!current.empty()) {
      std::string t = strip_punct(std::move(current));
      if (!t.empty()) tokens.push_back(std::move(t));
      current.clear();
    }
  };
  for (std::size_t pos = 0; pos < text.size();) {
    char32_t cp = 0;
    const std::size_t len = decode_utf8(text, pos, cp);
    if (is_unicode_space(cp)) {
      flush();
    } else if (cp < 0x80) {
      current.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(cp))));
    } else {
      current.append(text.substr(pos, len));
    }
    pos += len;
  }
  flush();
  return tokens;
}

double bleu_n(const TokenSequence& candidate, const TokenSequence& reference, int n) {
  if (n < 1 || n > 4) throw Error(ErrorCode::InvalidArgument, "BLEU order must be 1..4");
  if (candidate.empty()) return 0.0;
  double log_sum = 0.0;
  for (int order = 1; order <= n; ++order) {
    const auto cand = count_ngrams(candidate, static_cast<std::size_t>(order));
    const auto ref = count_ngrams(reference, static_cast<std::size_t>(order));
    std::size_t total = 0;
    std::size_t matched = 0;
    for (const auto& [gram, count] : cand) {
      total += count;
      const auto it = ref.find(gram);
      if (it != ref.end()) matched += std::min(count, it->second);
    }
    if (matched == 0) return 0.0;
    log_sum += std::log(static_cast<double>(matched) / static_cast<double>(total));
  }
  const auto c = static_cast<double>(candidate.size());
  const auto r = static_cast<double>(reference.size());
  const double bp = c >= r ? 1.0 : std::exp(1.0 - r / c);
  return bp * std::exp(log_sum / n);
}

std::size_t lcs_length(const TokenSequence& a, const TokenSequence& b) {
  std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

double rouge_l(const TokenSequence& candidate, const TokenSequence& reference, double beta) {
  if (candidate.empty() || reference.empty()) return 0.0;
  const auto lcs = static_cast<double>(lcs_length(candidate, reference));
  if (lcs == 0.0) return 0.0;
  const double recall = lcs / static_cast<double>(reference.size());
  const double precision = lcs / static_cast<double>(candidate.size());
  const double b2 = beta * beta;
  return ((1.0 + b2) * recall * precision) / (recall + b2 * precision);
}

CaptionScore score_caption(const TokenSequence& candidate, const TokenSequence& reference,
                           double beta) {
  CaptionScore s;
  for (int n = 1; n <= 4; ++n) s.bleu[static_cast<std::size_t>(n - 1)] = bleu_n(candidate, reference, n);
  s.rouge_l = rouge_l(candidate, reference, beta);
  return s;
}

CorpusCaptionScore score_corpus(const std::vector<std::pair<TokenSequence, TokenSequence>>& pairs,
                                double beta) {
  if (pairs.empty()) throw Error(ErrorCode::EmptyCorpus, "no caption pairs to score");
  std::vector<CaptionScore> per;
  per.reserve(pairs.size());
  for (const auto& [cand, ref] : pairs) per.push_back(score_caption(cand, ref, beta));

  const auto n = static_cast<double>(per.size());
  auto stats = [&](auto get) {
    double sum = 0.0;
    for (const auto& s : per) sum += get(s);
    const double mean = sum / n;
    double sq = 0.0;
    for (const auto& s : per) sq += (get(s) - mean) * (get(s) - mean);
    return std::pair{mean, std::sqrt(sq / n)};
  };
  CorpusCaptionScore out;
  out.count = per.size();
  for (std::size_t k = 0; k < 4; ++k) {
    std::tie(out.mean.bleu[k], out.stddev.bleu[k]) =
        stats([k](const CaptionScore& s) { return s.bleu[k]; });
  }
  std::tie(out.mean.rouge_l, out.stddev.rouge_l) =
      stats([](const CaptionScore& s) { return s.rouge_l; });
  return out;
}

CaptionPairing pair_captions(const std::vector<CaptionRecord>& pred,
                             const std::vector<CaptionRecord>& gt) {
  std::map<std::size_t, const CaptionRecord*> gt_by_frame;
  for (const auto& r : gt) gt_by_frame.emplace(r.frame_index, &r);
  std::map<std::size_t, const CaptionRecord*> pred_by_frame;
  for (const auto& r : pred) pred_by_frame.emplace(r.frame_index, &r);

  CaptionPairing out;
  for (const auto& [frame, rec] : pred_by_frame) {
    const auto it = gt_by_frame.find(frame);
    if (it == gt_by_frame.end()) {
      ++out.unmatched_pred;
      continue;
    }
    out.pairs.emplace_back(tokenize(rec->text), tokenize(it->second->text));
    out.frames.push_back(frame);
  }
  out.unmatched_gt = gt_by_frame.size() - out.pairs.size();
  return out;
}

LookupCaptioner::LookupCaptioner(const std::vector<CaptionRecord>& records) {
  for (const auto& r : records) by_frame_.emplace(r.frame_index, r.text);
}

std::string LookupCaptioner::caption(std::size_t frame_index, const std::string&) const {
  const auto it = by_frame_.find(frame_index);
  return it == by_frame_.end() ? std::string() : it->second;
}

ExecCaptioner::ExecCaptioner(std::string command_template)
    : template_(std::move(command_template)) {
  if (template_.empty()) throw Error(ErrorCode::InvalidArgument, "empty captioner command");
}

std::string ExecCaptioner::render(std::size_t frame_index, const std::string& image_path) const {
  std::string cmd = template_;
  replace_all(cmd, "{frame}", std::to_string(frame_index));
  replace_all(cmd, "{image}", shell_quote(image_path));
  return cmd;
}

std::string ExecCaptioner::caption(std::size_t frame_index, const std::string& image_path) const {
  const std::string cmd = render(frame_index, image_path);
  FILE* pipe = ::popen(cmd.c_str(), "r");
  if (!pipe) throw Error(ErrorCode::IoError, "cannot run captioner: " + cmd);
  std::string out;
  char buf[512];
  while (std::size_t got = std::fread(buf, 1, sizeof(buf), pipe)) out.append(buf, got);
  const int status = ::pclose(pipe);
  if (status != 0) {
    throw Error(ErrorCode::IoError, "captioner exited with status " + std::to_string(status));
  }
  const auto not_space = [](unsigned char c) { return !std::isspace(c); };
  out.erase(out.begin(), std::find_if(out.begin(), out.end(), not_space));
  out.erase(std::find_if(out.rbegin(), out.rend(), not_space).base(), out.end());
  return out;
}

std::unique_ptr<CaptionProvider> make_caption_provider(std::string_view spec) {
  if (spec.starts_with("lookup:")) {
    return std::make_unique<LookupCaptioner>(read_captions(fs::path(spec.substr(7))));
  }
  if (spec.starts_with("exec:")) {
    return std::make_unique<ExecCaptioner>(std::string(spec.substr(5)));
  }
  throw Error(ErrorCode::InvalidArgument,
              "captioner must be lookup:<file> or exec:<command>, got '" + std::string(spec) + "'");
}

}  // namespace scansum
