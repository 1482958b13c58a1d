#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "scansum/biometry.hpp"
#include "scansum/corpus_io.hpp"

namespace scansum {

struct SynthShape {
  BiometryClass cls = BiometryClass::HC;
  // Ellipse classes (HC, AC): semi-axes. Bar classes (FL, Cereb): length, width.
  double a = 0.0;
  double b = 0.0;
  double length = 0.0;
  double width = 0.0;
  double theta = 0.0;
  double cx = 0.0;
  double cy = 0.0;

  bool is_ellipse() const { return cls == BiometryClass::HC || cls == BiometryClass::AC; }
};

struct SynthSpec {
  std::string exam_id = "synth";
  std::uint64_t rng_seed = 0;
  std::size_t frame_count = 500;
  std::size_t dim = 64;
  std::size_t n_anatomy_clusters = 8;
  std::size_t keyframes_per_cluster = 1;  // visits per cluster, one keyframe each
  double within_cluster_similarity = 0.98;
  double cross_cluster_similarity = 0.3;
  double noise_frames_fraction = 0.3;
  double fps = 5.0;
  double mm_per_px = 0.2;
  double tick_spacing_mm = 10.0;
  int caliper_jitter_px = 1;
  std::size_t canvas_width = 512;
  std::size_t canvas_height = 512;
  std::vector<SynthShape> biometry_shapes;

  /// Throws InfeasibleSpec for inconsistent counts or targets.
  void validate() const;

  static SynthSpec from_json(std::string_view text);
  std::string to_json() const;
  /// Four plausible mid-trimester shapes (HC, AC, FL, Cereb).
  static std::vector<SynthShape> default_shapes();
};

struct PlantedShape {
  SynthShape shape;
  std::size_t frame_index = 0;
  std::size_t foreground_pixels = 0;
  double true_mm = 0.0;       // exact perimeter (HC/AC) or length (FL/Cereb)
  double true_bpd_mm = 0.0;   // HC only: 2b
};

struct Segment {
  std::size_t begin = 0;  // inclusive
  std::size_t end = 0;    // exclusive
  std::size_t cluster = 0;
  std::size_t keyframe = 0;
};

struct GroundTruth {
  std::vector<std::size_t> keyframes;               // sorted
  std::vector<std::vector<std::size_t>> groups;     // keyframes per cluster
  std::vector<Segment> segments;
  std::vector<CaptionRecord> captions;
  std::vector<PlantedShape> shapes;
  double mm_per_px = 0.0;
  std::vector<double> caliper_tick_rows;
  double realized_within_min = 0.0;  // min cosine frame -> its keyframe
  double realized_within_max = 0.0;
  double realized_cross_max = 0.0;   // max cosine between cluster centroids
};

struct SynthExam {
  SynthSpec spec;
  EmbeddingMatrix embeddings;
  std::vector<std::vector<float>> centroids;
  std::vector<float> scores;  // baseline score against the centroids
  KeyframeLabelVector labels;
  std::vector<GrayImage> masks;  // parallel to truth.shapes
  GrayImage caliper_strip;
  GroundTruth truth;
};

/// Deterministic in-memory exam.
SynthExam synthesize(const SynthSpec& spec);

/// Writes the corpus under `out_dir` (manifest.json, embeddings.f32,
/// scores.f32, labels.json, captions.jsonl, gt_keyframes.json,
/// ground_truth.json, masks/*.pgm, caliper.pgm) and returns the manifest.
ExamManifest write_corpus(const SynthExam& exam, const fs::path& out_dir);

GroundTruth generate(const SynthSpec& spec, const fs::path& out_dir);
GroundTruth ground_truth(const SynthSpec& spec);

std::string ground_truth_to_json(const GroundTruth& truth);

/// Pixel-centre rasterisations used by the generator.
GrayImage rasterize_ellipse(std::size_t width, std::size_t height, double cx, double cy, double a,
                            double b, double theta);
GrayImage rasterize_bar(std::size_t width, std::size_t height, double cx, double cy, double length,
                        double thickness, double theta);

/// Exact ellipse perimeter by the arithmetic-geometric mean.
double exact_ellipse_perimeter(double a, double b);

}  // namespace scansum
