#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "scansum/biometry.hpp"
#include "scansum/corpus_io.hpp"
#include "scansum/keyframe.hpp"

namespace scansum {

struct SummaryKeyframe {
  std::size_t frame_index = 0;
  double timestamp_s = 0.0;
  double score = 0.0;
  std::optional<std::string> caption;
  std::optional<BiometrySet> biometry;

  bool operator==(const SummaryKeyframe&) const = default;
};

struct SummaryAggregate {
  std::optional<double> ga_weeks;
  std::optional<double> efw_grams;
  double scan_seconds = 0.0;
  std::size_t keyframe_count = 0;

  bool operator==(const SummaryAggregate&) const = default;
};

struct SummaryReport {
  std::string exam_id;
  std::vector<SummaryKeyframe> keyframes;
  SummaryAggregate aggregate;

  bool operator==(const SummaryReport&) const = default;
};

/// Measurements keyed by the frame they were taken on.
using MeasurementMap = std::map<std::size_t, BiometrySet>;

/// Builds the report. Captions and measurements must reference keyframes
/// (InconsistentInputs otherwise), and every measured keyframe must carry a
/// caption. Real values are rounded to 6 decimals so that the JSON emission
/// round-trips exactly.
SummaryReport assemble(const ExamManifest& manifest, const KeyframeSet& keyframes,
                       const std::vector<CaptionRecord>& captions,
                       const MeasurementMap& measurements, const EquationTable& equations);

enum class ReportFormat { Json, Markdown };

/// JSON: sorted keys, every real printed with 6 decimals. Markdown: summary
/// header plus one timeline table row per keyframe.
std::string emit(const SummaryReport& report, ReportFormat format);
SummaryReport parse_report(std::string_view json_text);

// measurements.json: {exam_id, mm_per_px, measurements: [{frame_index, biometry}]}
std::string measurements_to_json(const std::string& exam_id, double mm_per_px,
                                 const MeasurementMap& measurements);
MeasurementMap parse_measurements(std::string_view json_text);
MeasurementMap read_measurements(const fs::path& path);

}  // namespace scansum
