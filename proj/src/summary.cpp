#include "scansum/summary.hpp"

#include <algorithm>
#include <cstdio>
#include <set>
#include <sstream>

#include "scansum/canonical_json.hpp"
#include "scansum/error.hpp"

namespace scansum {

using nlohmann::json;

namespace {

std::optional<double> round_opt(std::optional<double> v) {
  return v ? std::optional<double>(round6(*v)) : std::nullopt;
}

BiometrySet rounded(const BiometrySet& b) {
  BiometrySet out;
  out.hc_mm = round_opt(b.hc_mm);
  out.ac_mm = round_opt(b.ac_mm);
  out.bpd_mm = round_opt(b.bpd_mm);
  out.cereb_mm = round_opt(b.cereb_mm);
  out.fl_mm = round_opt(b.fl_mm);
  out.ga_weeks = round_opt(b.ga_weeks);
  out.efw_grams = round_opt(b.efw_grams);
  return out;
}

json opt_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::optional<double> opt_from(const json& obj, const char* key) {
  if (!obj.contains(key) || obj[key].is_null()) return std::nullopt;
  return obj[key].get<double>();
}

json biometry_json(const BiometrySet& b) {
  return {{"AC_mm", opt_json(b.ac_mm)},       {"BPD_mm", opt_json(b.bpd_mm)},
          {"Cereb_mm", opt_json(b.cereb_mm)}, {"FL_mm", opt_json(b.fl_mm)},
          {"HC_mm", opt_json(b.hc_mm)},       {"efw_grams", opt_json(b.efw_grams)},
          {"ga_weeks", opt_json(b.ga_weeks)}};
}

BiometrySet biometry_from(const json& obj) {
  BiometrySet b;
  b.ac_mm = opt_from(obj, "AC_mm");
  b.bpd_mm = opt_from(obj, "BPD_mm");
  b.cereb_mm = opt_from(obj, "Cereb_mm");
  b.fl_mm = opt_from(obj, "FL_mm");
  b.hc_mm = opt_from(obj, "HC_mm");
  b.efw_grams = opt_from(obj, "efw_grams");
  b.ga_weeks = opt_from(obj, "ga_weeks");
  return b;
}

std::string fmt_fixed(double v, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", decimals, v);
  return buf;
}

std::string md_cell(std::string text) {
  std::string out;
  for (char c : text) {
    if (c == '|') {
      out += "\\|";
    } else if (c == '\n' || c == '\r') {
      out += ' ';
    } else {
      out += c;
    }
  }
  return out;
}

std::string biometry_cell(const BiometrySet& b) {
  std::vector<std::string> parts;
  auto add = [&](const char* name, const std::optional<double>& v) {
    if (v) parts.push_back(std::string(name) + " " + fmt_fixed(*v, 2) + " mm");
  };
  add("HC", b.hc_mm);
  add("BPD", b.bpd_mm);
  add("AC", b.ac_mm);
  add("Cereb", b.cereb_mm);
  add("FL", b.fl_mm);
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) out += (i ? ", " : "") + parts[i];
  return out;
}

}  // namespace

SummaryReport assemble(const ExamManifest& manifest, const KeyframeSet& keyframes,
                       const std::vector<CaptionRecord>& captions,
                       const MeasurementMap& measurements, const EquationTable& equations) {
  keyframes.validate(manifest.frame_count);
  const std::set<std::size_t> key_index(keyframes.indices.begin(), keyframes.indices.end());

  std::map<std::size_t, const CaptionRecord*> caption_at;
  for (const auto& c : captions) {
    if (!key_index.contains(c.frame_index)) {
      throw Error(ErrorCode::InconsistentInputs,
                  "caption for frame " + std::to_string(c.frame_index) + " which is not a keyframe");
    }
    if (!caption_at.emplace(c.frame_index, &c).second) {
      throw Error(ErrorCode::InconsistentInputs,
                  "two captions for frame " + std::to_string(c.frame_index));
    }
  }
  for (const auto& [frame, set] : measurements) {
    if (!key_index.contains(frame)) {
      throw Error(ErrorCode::InconsistentInputs,
                  "measurement on frame " + std::to_string(frame) + " which is not a keyframe");
    }
    if (set.has_any_measurement() && !caption_at.contains(frame)) {
      throw Error(ErrorCode::InconsistentInputs,
                  "measured keyframe " + std::to_string(frame) + " has no caption");
    }
  }

  SummaryReport report;
  report.exam_id = manifest.exam_id;
  BiometrySet combined;
  for (std::size_t k = 0; k < keyframes.size(); ++k) {
    SummaryKeyframe kf;
    kf.frame_index = keyframes.indices[k];
    kf.timestamp_s = round6(static_cast<double>(kf.frame_index) / manifest.fps);
    kf.score = round6(keyframes.scores[k]);
    if (const auto it = caption_at.find(kf.frame_index); it != caption_at.end()) {
      kf.caption = it->second->text;
    }
    if (const auto it = measurements.find(kf.frame_index); it != measurements.end()) {
      BiometrySet b = it->second;
      b.ga_weeks.reset();
      b.efw_grams.reset();
      kf.biometry = rounded(b);
      combined.merge_missing(b);
    }
    report.keyframes.push_back(std::move(kf));
  }
  derive_clinical(combined, equations);
  report.aggregate.ga_weeks = round_opt(combined.ga_weeks);
  report.aggregate.efw_grams = round_opt(combined.efw_grams);
  report.aggregate.scan_seconds =
      round6(static_cast<double>(manifest.frame_count) / manifest.fps);
  report.aggregate.keyframe_count = report.keyframes.size();
  return report;
}

std::string emit(const SummaryReport& report, ReportFormat format) {
  if (format == ReportFormat::Json) {
    json kfs = json::array();
    for (const auto& kf : report.keyframes) {
      kfs.push_back({{"frame_index", kf.frame_index},
                     {"timestamp_s", kf.timestamp_s},
                     {"score", kf.score},
                     {"caption", kf.caption ? json(*kf.caption) : json(nullptr)},
                     {"biometry", kf.biometry ? biometry_json(*kf.biometry) : json(nullptr)}});
    }
    json doc = {{"exam_id", report.exam_id},
                {"keyframes", kfs},
                {"aggregate",
                 {{"ga_weeks", opt_json(report.aggregate.ga_weeks)},
                  {"efw_grams", opt_json(report.aggregate.efw_grams)},
                  {"scan_seconds", report.aggregate.scan_seconds},
                  {"keyframe_count", report.aggregate.keyframe_count}}}};
    return canonical_dump(doc);
  }

  std::ostringstream md;
  md << "# Exam summary: " << md_cell(report.exam_id) << "\n\n";
  md << "- Scan duration: " << fmt_fixed(report.aggregate.scan_seconds, 1) << " s\n";
  md << "- Keyframes: " << report.aggregate.keyframe_count << "\n";
  md << "- Gestational age: "
     << (report.aggregate.ga_weeks ? fmt_fixed(*report.aggregate.ga_weeks, 1) + " weeks" : "n/a")
     << "\n";
  md << "- Estimated fetal weight: "
     << (report.aggregate.efw_grams ? fmt_fixed(*report.aggregate.efw_grams, 0) + " g" : "n/a")
     << "\n\n";
  md << "| # | Frame | Time (s) | Score | Caption | Biometry |\n";
  md << "|---|-------|----------|-------|---------|----------|\n";
  for (std::size_t k = 0; k < report.keyframes.size(); ++k) {
    const auto& kf = report.keyframes[k];
    md << "| " << k + 1 << " | " << kf.frame_index << " | " << fmt_fixed(kf.timestamp_s, 1)
       << " | " << fmt_fixed(kf.score, 3) << " | " << md_cell(kf.caption.value_or(""))
       << " | " << (kf.biometry ? biometry_cell(*kf.biometry) : std::string()) << " |\n";
  }
  return md.str();
}

SummaryReport parse_report(std::string_view json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::InvalidArgument, std::string("report JSON: ") + e.what());
  }
  SummaryReport r;
  try {
    r.exam_id = doc.at("exam_id").get<std::string>();
    for (const auto& k : doc.at("keyframes")) {
      SummaryKeyframe kf;
      kf.frame_index = k.at("frame_index").get<std::size_t>();
      kf.timestamp_s = k.at("timestamp_s").get<double>();
      kf.score = k.at("score").get<double>();
      if (!k.at("caption").is_null()) kf.caption = k["caption"].get<std::string>();
      if (!k.at("biometry").is_null()) kf.biometry = biometry_from(k["biometry"]);
      r.keyframes.push_back(std::move(kf));
    }
    const json& agg = doc.at("aggregate");
    r.aggregate.ga_weeks = opt_from(agg, "ga_weeks");
    r.aggregate.efw_grams = opt_from(agg, "efw_grams");
    r.aggregate.scan_seconds = agg.at("scan_seconds").get<double>();
    r.aggregate.keyframe_count = agg.at("keyframe_count").get<std::size_t>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidArgument, std::string("report JSON: ") + e.what());
  }
  return r;
}

std::string measurements_to_json(const std::string& exam_id, double mm_per_px,
                                 const MeasurementMap& measurements) {
  json list = json::array();
  for (const auto& [frame, b] : measurements) {
    list.push_back({{"frame_index", frame}, {"biometry", biometry_json(rounded(b))}});
  }
  return canonical_dump(
      {{"exam_id", exam_id}, {"mm_per_px", mm_per_px}, {"measurements", list}});
}

MeasurementMap parse_measurements(std::string_view json_text) {
  MeasurementMap out;
  try {
    const json doc = json::parse(json_text);
    for (const auto& m : doc.at("measurements")) {
      const auto frame = m.at("frame_index").get<std::size_t>();
      BiometrySet b = biometry_from(m.at("biometry"));
      auto [it, fresh] = out.emplace(frame, b);
      if (!fresh) it->second.merge_missing(b);
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidArgument, std::string("measurements JSON: ") + e.what());
  }
  return out;
}

MeasurementMap read_measurements(const fs::path& path) {
  return parse_measurements(read_text_file(path));
}

}  // namespace scansum
