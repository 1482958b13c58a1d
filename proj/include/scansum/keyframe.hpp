#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "scansum/corpus_io.hpp"
#include "scansum/similarity.hpp"

namespace scansum {

/// Per-frame keyframe probability, entries finite in [0,1].
using ScoreVector = std::vector<double>;

/// Selected (or annotated) frames in increasing index order.
struct KeyframeSet {
  std::vector<std::size_t> indices;
  std::vector<double> scores;

  std::size_t size() const { return indices.size(); }
  bool empty() const { return indices.empty(); }
  bool operator==(const KeyframeSet&) const = default;

  /// Checks strictly increasing indices below `frame_count` and matching
  /// score count; throws InvalidArgument / IndexOutOfRange.
  void validate(std::size_t frame_count) const;
};

/// The annotated keyframes of a label vector, each with score 1.
KeyframeSet keyframes_from_labels(const KeyframeLabelVector& labels);

struct DetectionConfig {
  double tau = 0.96;        // masking similarity
  double tau_prime = 0.8;   // stop once the best remaining score is below this
  double propagation_threshold = 0.99;

  void validate() const;
};

/// y'[i] = 1 iff y[i] = 1 or S[i][j] > threshold for some originally
/// labelled j. Single pass: newly propagated frames do not propagate further.
KeyframeLabelVector propagate_labels(const SimilarityMatrix& sim, const KeyframeLabelVector& labels,
                                     double threshold);

/// Greedy diverse keyframe selection. Repeatedly takes the highest-scoring
/// unmasked frame (lowest index on ties) while its score is >= tau_prime,
/// then masks it together with every unmasked frame whose similarity to it
/// exceeds tau. The whole video is eligible for masking, not only later
/// frames.
KeyframeSet diverse_select(std::span<const double> scores, const SimilarityMatrix& sim,
                           const DetectionConfig& cfg);

/// Stand-in scorer: max cosine of each frame to any prototype.
ScoreVector baseline_score(const EmbeddingMatrix& detector,
                           const std::vector<std::vector<float>>& prototypes);

struct TrainingExam {
  const EmbeddingMatrix* embeddings;
  const KeyframeLabelVector* labels;
};

/// Keyframe rows of the training exams in (exam, frame) order. With
/// `dedup_threshold`, a row is dropped when its cosine to an already kept
/// prototype exceeds the threshold.
std::vector<std::vector<float>> build_prototypes(std::span<const TrainingExam> exams,
                                                 std::optional<double> dedup_threshold);

/// Non-keyframes whose similarity to some labelled keyframe exceeds
/// `high_sim_threshold`, in increasing order.
std::vector<std::size_t> eligible_frames(const SimilarityMatrix& sim,
                                         const KeyframeLabelVector& labels,
                                         double high_sim_threshold);

/// Removes floor(drop_fraction * |eligible|) eligible frames chosen uniformly
/// at random (mt19937_64 seeded with `rng_seed`, partial Fisher-Yates over the
/// eligible list) and returns the sorted survivors.
std::vector<std::size_t> drop_frames(const SimilarityMatrix& sim, const KeyframeLabelVector& labels,
                                     double drop_fraction, double high_sim_threshold,
                                     std::uint64_t rng_seed);

/// #non-keyframes / #keyframes.
double compute_class_ratio(const KeyframeLabelVector& labels);

// keyframes.json ------------------------------------------------------------

struct KeyframeFile {
  std::string exam_id;
  double fps = 5.0;
  std::size_t frame_count = 0;
  KeyframeSet keyframes;
};

/// Canonical JSON: {exam_id, fps, frame_count, keyframes: [{frame_index, score}]}.
std::string keyframes_to_json(const KeyframeSet& set, const ExamManifest& manifest);
KeyframeFile parse_keyframes(std::string_view json_text);
KeyframeFile read_keyframes(const fs::path& path);

}  // namespace scansum
