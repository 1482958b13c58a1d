#include "scansum/keyframe.hpp"

#include <algorithm>
#include <cmath>

#include <json.hpp>

#include "scansum/canonical_json.hpp"
#include "scansum/error.hpp"
#include "scansum/rng.hpp"

namespace scansum {

namespace {

void check_square(const SimilarityMatrix& sim, std::size_t n, const char* what) {
  if (sim.size() != n) {
    throw Error(ErrorCode::SizeMismatch, std::string(what) + ": similarity matrix is " +
                                             std::to_string(sim.size()) + "x" +
                                             std::to_string(sim.size()) + ", expected " +
                                             std::to_string(n));
  }
}

}  // namespace

void KeyframeSet::validate(std::size_t frame_count) const {
  if (indices.size() != scores.size()) {
    throw Error(ErrorCode::InvalidArgument, "keyframe indices and scores differ in length");
  }
  for (std::size_t k = 0; k < indices.size(); ++k) {
    if (indices[k] >= frame_count) {
      throw Error(ErrorCode::IndexOutOfRange, "keyframe index " + std::to_string(indices[k]) +
                                                  " >= " + std::to_string(frame_count));
    }
    if (k > 0 && indices[k] <= indices[k - 1]) {
      throw Error(ErrorCode::InvalidArgument, "keyframe indices must be strictly increasing");
    }
  }
}

KeyframeSet keyframes_from_labels(const KeyframeLabelVector& labels) {
  KeyframeSet set;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i]) {
      set.indices.push_back(i);
      set.scores.push_back(1.0);
    }
  }
  return set;
}

void DetectionConfig::validate() const {
  auto in_unit = [](double v) { return v > 0.0 && v <= 1.0; };
  if (!in_unit(tau) || !in_unit(tau_prime) || !in_unit(propagation_threshold)) {
    throw Error(ErrorCode::InvalidArgument, "detection thresholds must lie in (0,1]");
  }
}

KeyframeLabelVector propagate_labels(const SimilarityMatrix& sim, const KeyframeLabelVector& labels,
                                     double threshold) {
  check_square(sim, labels.size(), "propagate_labels");
  std::vector<std::size_t> originals;
  for (std::size_t j = 0; j < labels.size(); ++j) {
    if (labels[j]) originals.push_back(j);
  }
  KeyframeLabelVector out = labels;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (out[i]) continue;
    for (std::size_t j : originals) {
      if (sim(i, j) > threshold) {
        out[i] = 1;
        break;
      }
    }
  }
  return out;
}

KeyframeSet diverse_select(std::span<const double> scores, const SimilarityMatrix& sim,
                           const DetectionConfig& cfg) {
  check_square(sim, scores.size(), "diverse_select");
  const std::size_t n = scores.size();
  std::vector<bool> masked(n, false);
  std::vector<std::size_t> picked;
  while (true) {
    std::size_t best = n;
    for (std::size_t i = 0; i < n; ++i) {
      if (!masked[i] && (best == n || scores[i] > scores[best])) best = i;
    }
    if (best == n || scores[best] < cfg.tau_prime) break;
    picked.push_back(best);
    masked[best] = true;
    const auto row = sim.row(best);
    for (std::size_t j = 0; j < n; ++j) {
      if (row[j] > cfg.tau) masked[j] = true;
    }
  }
  std::sort(picked.begin(), picked.end());
  KeyframeSet out;
  out.indices = picked;
  for (std::size_t i : picked) out.scores.push_back(scores[i]);
  return out;
}

ScoreVector baseline_score(const EmbeddingMatrix& detector,
                           const std::vector<std::vector<float>>& prototypes) {
  if (prototypes.empty()) throw Error(ErrorCode::EmptyPrototypes, "no prototypes");
  for (const auto& p : prototypes) {
    if (p.size() != detector.dim()) {
      throw Error(ErrorCode::DimensionMismatch, "prototype dim " + std::to_string(p.size()) +
                                                    " vs embedding dim " +
                                                    std::to_string(detector.dim()));
    }
  }
  ScoreVector scores(detector.rows(), 0.0);
  for (std::size_t t = 0; t < detector.rows(); ++t) {
    double best = 0.0;
    for (const auto& p : prototypes) best = std::max(best, cosine(detector.row(t), p));
    scores[t] = best;
  }
  return scores;
}

std::vector<std::vector<float>> build_prototypes(std::span<const TrainingExam> exams,
                                                 std::optional<double> dedup_threshold) {
  std::vector<std::vector<float>> protos;
  for (const auto& exam : exams) {
    if (exam.labels->size() != exam.embeddings->rows()) {
      throw Error(ErrorCode::SizeMismatch, "labels and embeddings differ in length");
    }
    for (std::size_t t = 0; t < exam.labels->size(); ++t) {
      if (!(*exam.labels)[t]) continue;
      const auto row = exam.embeddings->row(t);
      if (!protos.empty() && protos.front().size() != row.size()) {
        throw Error(ErrorCode::DimensionMismatch, "training exams have different dims");
      }
      const bool duplicate =
          dedup_threshold && std::any_of(protos.begin(), protos.end(), [&](const auto& p) {
            return cosine(row, p) > *dedup_threshold;
          });
      if (!duplicate) protos.emplace_back(row.begin(), row.end());
    }
  }
  if (protos.empty()) throw Error(ErrorCode::NoKeyframes, "no labelled keyframes to learn from");
  return protos;
}

std::vector<std::size_t> eligible_frames(const SimilarityMatrix& sim,
                                         const KeyframeLabelVector& labels,
                                         double high_sim_threshold) {
  check_square(sim, labels.size(), "eligible_frames");
  std::vector<std::size_t> keys;
  for (std::size_t j = 0; j < labels.size(); ++j) {
    if (labels[j]) keys.push_back(j);
  }
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i]) continue;
    if (std::any_of(keys.begin(), keys.end(),
                    [&](std::size_t j) { return sim(i, j) > high_sim_threshold; })) {
      out.push_back(i);
    }
  }
  return out;
}

std::vector<std::size_t> drop_frames(const SimilarityMatrix& sim, const KeyframeLabelVector& labels,
                                     double drop_fraction, double high_sim_threshold,
                                     std::uint64_t rng_seed) {
  if (!(drop_fraction >= 0.0 && drop_fraction <= 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "drop_fraction must lie in [0,1]");
  }
  if (!(high_sim_threshold > 0.0 && high_sim_threshold <= 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "high_sim_threshold must lie in (0,1]");
  }
  std::vector<std::size_t> pool = eligible_frames(sim, labels, high_sim_threshold);
  const auto n_drop =
      static_cast<std::size_t>(std::floor(drop_fraction * static_cast<double>(pool.size())));
  Rng rng(rng_seed);
  for (std::size_t k = 0; k < n_drop; ++k) {
    const std::size_t pick = k + static_cast<std::size_t>(rng.below(pool.size() - k));
    std::swap(pool[k], pool[pick]);
  }
  std::vector<bool> dropped(labels.size(), false);
  for (std::size_t k = 0; k < n_drop; ++k) dropped[pool[k]] = true;
  std::vector<std::size_t> survivors;
  survivors.reserve(labels.size() - n_drop);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (!dropped[i]) survivors.push_back(i);
  }
  return survivors;
}

double compute_class_ratio(const KeyframeLabelVector& labels) {
  const auto ones = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), 1));
  if (ones == 0) throw Error(ErrorCode::NoKeyframes, "class ratio needs at least one keyframe");
  return static_cast<double>(labels.size() - ones) / static_cast<double>(ones);
}

std::string keyframes_to_json(const KeyframeSet& set, const ExamManifest& manifest) {
  nlohmann::json list = nlohmann::json::array();
  for (std::size_t k = 0; k < set.size(); ++k) {
    list.push_back({{"frame_index", set.indices[k]}, {"score", set.scores[k]}});
  }
  return canonical_dump({{"exam_id", manifest.exam_id},
                         {"fps", manifest.fps},
                         {"frame_count", manifest.frame_count},
                         {"keyframes", list}});
}

KeyframeFile parse_keyframes(std::string_view json_text) {
  KeyframeFile out;
  try {
    const auto doc = nlohmann::json::parse(json_text);
    out.exam_id = doc.value("exam_id", std::string());
    out.fps = doc.value("fps", 5.0);
    out.frame_count = doc.at("frame_count").get<std::size_t>();
    for (const auto& k : doc.at("keyframes")) {
      out.keyframes.indices.push_back(k.at("frame_index").get<std::size_t>());
      out.keyframes.scores.push_back(k.value("score", 1.0));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidArgument, std::string("keyframes JSON: ") + e.what());
  }
  out.keyframes.validate(out.frame_count);
  return out;
}

KeyframeFile read_keyframes(const fs::path& path) { return parse_keyframes(read_text_file(path)); }

}  // namespace scansum
