#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "scansum/keyframe.hpp"
#include "scansum/similarity.hpp"

namespace scansum {

struct GtMatch {
  std::size_t gt_index = 0;
  std::size_t matched_pred_index = 0;  // most similar prediction
  double similarity = 0.0;
  std::size_t nearest_pred_index = 0;  // closest prediction in time
  double time_err_s = 0.0;

  bool operator==(const GtMatch&) const = default;
};

/// Set-to-set stage-1 metrics. Every ground-truth frame is matched
/// independently: to its most similar prediction for `cosine_simi_pct`, and
/// to its nearest prediction in time for the two time errors.
struct DetectionReport {
  double cosine_simi_pct = 0.0;
  double absolute_time_err_s = 0.0;
  double correct_time_err_s = 0.0;
  std::size_t keyframe_num_err = 0;
  /// True when no ground-truth frame fell below the similarity threshold;
  /// correct_time_err_s is then reported as 0.
  bool all_matched = false;
  std::vector<GtMatch> per_gt_matches;

  bool operator==(const DetectionReport&) const = default;
};

inline constexpr double kCorrectTimeSimThreshold = 0.96;

DetectionReport evaluate_detection(const KeyframeSet& pred, const KeyframeSet& gt,
                                   const SimilarityMatrix& sim, double fps,
                                   double sim_threshold = kCorrectTimeSimThreshold);

std::string detection_report_to_json(const DetectionReport& report);
DetectionReport parse_detection_report(std::string_view json_text);

}  // namespace scansum
