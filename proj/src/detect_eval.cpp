#include "scansum/detect_eval.hpp"

#include <cmath>

#include <json.hpp>

#include "scansum/canonical_json.hpp"
#include "scansum/error.hpp"

namespace scansum {

DetectionReport evaluate_detection(const KeyframeSet& pred, const KeyframeSet& gt,
                                   const SimilarityMatrix& sim, double fps, double sim_threshold) {
  if (pred.empty() || gt.empty()) {
    throw Error(ErrorCode::EmptySet, "prediction and ground-truth sets must be nonempty");
  }
  if (!(fps > 0.0)) throw Error(ErrorCode::InvalidArgument, "fps must be positive");
  for (const auto* set : {&pred, &gt}) {
    for (std::size_t idx : set->indices) {
      if (idx >= sim.size()) {
        throw Error(ErrorCode::IndexOutOfRange,
                    "frame " + std::to_string(idx) + " outside similarity matrix of size " +
                        std::to_string(sim.size()));
      }
    }
  }

  DetectionReport report;
  report.per_gt_matches.reserve(gt.size());
  double sim_sum = 0.0;
  double time_sum = 0.0;
  double correct_sum = 0.0;
  std::size_t correct_count = 0;
  for (std::size_t g : gt.indices) {
    GtMatch m;
    m.gt_index = g;
    m.matched_pred_index = pred.indices.front();
    m.similarity = sim(g, pred.indices.front());
    m.nearest_pred_index = pred.indices.front();
    std::size_t best_gap = g > m.nearest_pred_index ? g - m.nearest_pred_index
                                                    : m.nearest_pred_index - g;
    for (std::size_t p : pred.indices) {
      const double s = sim(g, p);
      if (s > m.similarity) {
        m.similarity = s;
        m.matched_pred_index = p;
      }
      const std::size_t gap = g > p ? g - p : p - g;
      if (gap < best_gap) {
        best_gap = gap;
        m.nearest_pred_index = p;
      }
    }
    m.time_err_s = static_cast<double>(best_gap) / fps;
    sim_sum += m.similarity;
    time_sum += m.time_err_s;
    if (m.similarity < sim_threshold) {
      correct_sum += m.time_err_s;
      ++correct_count;
    }
    report.per_gt_matches.push_back(m);
  }
  const auto n = static_cast<double>(gt.size());
  report.cosine_simi_pct = sim_sum / n * 100.0;
  report.absolute_time_err_s = time_sum / n;
  report.all_matched = correct_count == 0;
  report.correct_time_err_s =
      correct_count == 0 ? 0.0 : correct_sum / static_cast<double>(correct_count);
  report.keyframe_num_err =
      pred.size() > gt.size() ? pred.size() - gt.size() : gt.size() - pred.size();
  return report;
}

std::string detection_report_to_json(const DetectionReport& r) {
  nlohmann::json matches = nlohmann::json::array();
  for (const auto& m : r.per_gt_matches) {
    matches.push_back({{"gt_index", m.gt_index},
                       {"matched_pred_index", m.matched_pred_index},
                       {"similarity", m.similarity},
                       {"nearest_pred_index", m.nearest_pred_index},
                       {"time_err_s", m.time_err_s}});
  }
  return canonical_dump({{"cosine_simi_pct", r.cosine_simi_pct},
                         {"absolute_time_err_s", r.absolute_time_err_s},
                         {"correct_time_err_s", r.correct_time_err_s},
                         {"keyframe_num_err", r.keyframe_num_err},
                         {"all_matched", r.all_matched},
                         {"per_gt_matches", matches}});
}

DetectionReport parse_detection_report(std::string_view json_text) {
  DetectionReport r;
  try {
    const auto doc = nlohmann::json::parse(json_text);
    r.cosine_simi_pct = doc.at("cosine_simi_pct").get<double>();
    r.absolute_time_err_s = doc.at("absolute_time_err_s").get<double>();
    r.correct_time_err_s = doc.at("correct_time_err_s").get<double>();
    r.keyframe_num_err = doc.at("keyframe_num_err").get<std::size_t>();
    r.all_matched = doc.value("all_matched", false);
    if (doc.contains("per_gt_matches")) {
      for (const auto& m : doc["per_gt_matches"]) {
        r.per_gt_matches.push_back({m.at("gt_index").get<std::size_t>(),
                                    m.at("matched_pred_index").get<std::size_t>(),
                                    m.at("similarity").get<double>(),
                                    m.at("nearest_pred_index").get<std::size_t>(),
                                    m.at("time_err_s").get<double>()});
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidArgument, std::string("detection report JSON: ") + e.what());
  }
  return r;
}

}  // namespace scansum
