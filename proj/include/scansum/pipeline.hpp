#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "scansum/detect_eval.hpp"
#include "scansum/keyframe.hpp"
#include "scansum/similarity.hpp"

namespace scansum {

/// Everything the frame-drop simulation needs from one exam.
struct DropExam {
  std::string exam_id;
  double fps = 5.0;
  SimilarityMatrix sim;
  ScoreVector scores;
  KeyframeLabelVector labels;
};

inline constexpr double kDropEligibilityThreshold = 0.97;

struct DropSettings {
  std::vector<double> fractions{0.0, 0.5, 0.75, 0.9, 0.95};
  DetectionConfig detection;
  double eligibility_threshold = kDropEligibilityThreshold;
  double sim_threshold = kCorrectTimeSimThreshold;
  std::uint64_t seed = 0;
  unsigned jobs = 1;
};

struct DropExamResult {
  std::string exam_id;
  double drop_fraction = 0.0;
  std::size_t original_frames = 0;
  std::size_t retained_frames = 0;
  std::size_t eligible_frames = 0;
  double eligible_fraction = 0.0;
  double scan_time_saved_pct = 0.0;  // 100 * eligible_fraction * drop_fraction
  DetectionReport report;
};

struct MetricStats {
  double mean = 0.0;
  double stddev = 0.0;  // population
};

struct DropRow {
  double drop_fraction = 0.0;
  double scan_time_saved_pct = 0.0;  // mean over exams
  MetricStats cosine_simi_pct;
  MetricStats absolute_time_err_s;
  MetricStats correct_time_err_s;
  MetricStats keyframe_num_err;
  std::size_t exams = 0;
};

struct DropTable {
  std::vector<DropRow> rows;
  std::vector<DropExamResult> per_exam;  // sorted by (fraction, exam_id)
};

/// Maps each ground-truth keyframe onto the retained timeline: its own
/// position when it survived, otherwise the surviving frame most similar to
/// it (lowest index on ties). Duplicates collapse.
KeyframeSet remap_ground_truth(const KeyframeSet& gt, std::span<const std::size_t> retained,
                               const SimilarityMatrix& sim);

/// Drops eligible frames, reruns diverse selection on the retained
/// subsequence and scores it against the remapped ground truth, for every
/// fraction and exam. Exams are processed in parallel up to `jobs`.
DropTable simulate_drop_table(const std::vector<DropExam>& exams, const DropSettings& settings);

std::string drop_table_csv(const DropTable& table);

MetricStats mean_std(std::span<const double> values);

struct WelchResult {
  double t = 0.0;
  double df = 0.0;
  double p = 1.0;
};

/// Welch's unequal-variance two-sample test, two-tailed p from Student's t.
WelchResult welch_t_test(std::span<const double> a, std::span<const double> b);

struct AggregateResult {
  std::map<std::string, MetricStats> metrics;
  std::map<std::string, WelchResult> t_tests;  // present when two groups were given
  std::size_t reports = 0;
};

AggregateResult aggregate(const std::vector<DetectionReport>& reports);
AggregateResult aggregate(const std::vector<DetectionReport>& group_a,
                          const std::vector<DetectionReport>& group_b);

std::string aggregate_to_json(const AggregateResult& result);

}  // namespace scansum
