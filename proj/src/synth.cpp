#include "scansum/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <json.hpp>

#include "scansum/error.hpp"
#include "scansum/keyframe.hpp"
#include "scansum/rng.hpp"
#include "scansum/similarity.hpp"

namespace scansum {

using nlohmann::json;

namespace {

constexpr int kMaxRejections = 20000;

const char* const kAnatomyCaptions[] = {
    "four chamber view of the fetal heart",
    "fetal spine in sagittal section with intact skin line",
    "both fetal kidneys in transverse section",
    "fetal face profile showing the nose and lips",
    "placenta on the anterior wall with normal amniotic fluid",
    "three vessel view of the fetal heart",
    "fetal bladder with the umbilical arteries",
    "umbilical cord insertion into the fetal abdomen",
};

std::string biometry_caption(BiometryClass cls) {
  switch (cls) {
    case BiometryClass::HC:
      return "transventricular view of the fetal head for head circumference measurement";
    case BiometryClass::AC:
      return "transverse abdomen with stomach bubble for abdominal circumference measurement";
    case BiometryClass::FL:
      return "full length of the fetal femur for femur length measurement";
    case BiometryClass::Cereb:
      return "transcerebellar view of the fetal head showing the cerebellum";
  }
  return {};
}

std::vector<double> random_unit(Rng& rng, std::size_t dim) {
  std::vector<double> v(dim);
  double n2 = 0.0;
  do {
    n2 = 0.0;
    for (double& x : v) {
      x = rng.normal();
      n2 += x * x;
    }
  } while (n2 == 0.0);
  const double n = std::sqrt(n2);
  for (double& x : v) x /= n;
  return v;
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += a[k] * b[k];
  return s;
}

// Random unit vector orthogonal to unit `base`.
std::vector<double> random_orthogonal(Rng& rng, const std::vector<double>& base) {
  while (true) {
    std::vector<double> v = random_unit(rng, base.size());
    const double proj = dot(v, base);
    double n2 = 0.0;
    for (std::size_t k = 0; k < v.size(); ++k) {
      v[k] -= proj * base[k];
      n2 += v[k] * v[k];
    }
    if (n2 < 1e-6) continue;
    const double n = std::sqrt(n2);
    for (double& x : v) x /= n;
    return v;
  }
}

// Unit vector at cosine `c` from unit `base`.
std::vector<double> at_cosine(Rng& rng, const std::vector<double>& base, double c) {
  const std::vector<double> w = random_orthogonal(rng, base);
  const double s = std::sqrt(std::max(0.0, 1.0 - c * c));
  std::vector<double> v(base.size());
  for (std::size_t k = 0; k < v.size(); ++k) v[k] = c * base[k] + s * w[k];
  return v;
}

std::vector<float> to_float(const std::vector<double>& v) { return {v.begin(), v.end()}; }

json shape_json(const SynthShape& s) {
  json j = {{"class", std::string(to_string(s.cls))}, {"theta", s.theta}, {"cx", s.cx},
            {"cy", s.cy}};
  if (s.is_ellipse()) {
    j["a"] = s.a;
    j["b"] = s.b;
  } else {
    j["length"] = s.length;
    j["width"] = s.width;
  }
  return j;
}

[[noreturn]] void infeasible(const std::string& why) { throw Error(ErrorCode::InfeasibleSpec, why); }

}  // namespace

// Spec ----------------------------------------------------------------------

std::vector<SynthShape> SynthSpec::default_shapes() {
  std::vector<SynthShape> shapes(4);
  shapes[0].cls = BiometryClass::HC;
  shapes[0].a = 150.0;
  shapes[0].b = 128.0;
  shapes[0].theta = 0.3;
  shapes[1].cls = BiometryClass::AC;
  shapes[1].a = 125.0;
  shapes[1].b = 114.0;
  shapes[1].theta = 1.1;
  shapes[2].cls = BiometryClass::FL;
  shapes[2].length = 160.0;
  shapes[2].width = 16.0;
  shapes[2].theta = 0.6;
  shapes[3].cls = BiometryClass::Cereb;
  shapes[3].length = 100.0;
  shapes[3].width = 30.0;
  shapes[3].theta = 2.0;
  for (auto& s : shapes) {
    s.cx = 256.0;
    s.cy = 256.0;
  }
  return shapes;
}

void SynthSpec::validate() const {
  if (frame_count < 1) infeasible("frame_count must be >= 1");
  if (dim < 2) infeasible("dim must be >= 2");
  if (n_anatomy_clusters < 1 || keyframes_per_cluster < 1) {
    infeasible("need at least one cluster and one keyframe per cluster");
  }
  if (!(within_cluster_similarity > cross_cluster_similarity)) {
    infeasible("within_cluster_similarity must exceed cross_cluster_similarity");
  }
  if (!(within_cluster_similarity > 0.0 && within_cluster_similarity <= 1.0) ||
      !(cross_cluster_similarity > -1.0 && cross_cluster_similarity < 1.0)) {
    infeasible("similarity targets out of range");
  }
  if (!(noise_frames_fraction >= 0.0 && noise_frames_fraction < 1.0)) {
    infeasible("noise_frames_fraction must lie in [0,1)");
  }
  const auto noise = static_cast<std::size_t>(
      std::floor(noise_frames_fraction * static_cast<double>(frame_count)));
  if (n_anatomy_clusters * keyframes_per_cluster > frame_count - noise) {
    infeasible("not enough non-noise frames for one keyframe per cluster visit");
  }
  if (biometry_shapes.size() > n_anatomy_clusters) {
    infeasible("more biometry shapes than clusters");
  }
  if (!(fps > 0.0) || !(mm_per_px > 0.0) || !(tick_spacing_mm > 0.0) || caliper_jitter_px < 0) {
    infeasible("fps, mm_per_px and tick_spacing_mm must be positive");
  }
  if (tick_spacing_mm / mm_per_px < 2.0 * caliper_jitter_px + 3.0) {
    infeasible("caliper ticks would merge at this scale");
  }
  for (const auto& s : biometry_shapes) {
    const bool ok = s.is_ellipse() ? (s.a >= s.b && s.b > 0.0)
                                   : (s.length >= s.width && s.width > 0.0);
    if (!ok) infeasible("biometry shape needs a >= b > 0 (or length >= width > 0)");
  }
}

SynthSpec SynthSpec::from_json(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::InvalidArgument, std::string("synth spec: ") + e.what());
  }
  SynthSpec s;
  try {
    s.exam_id = doc.value("exam_id", s.exam_id);
    s.rng_seed = doc.value("rng_seed", s.rng_seed);
    s.frame_count = doc.value("T", s.frame_count);
    s.dim = doc.value("D", s.dim);
    s.n_anatomy_clusters = doc.value("n_anatomy_clusters", s.n_anatomy_clusters);
    s.keyframes_per_cluster = doc.value("keyframes_per_cluster", s.keyframes_per_cluster);
    s.within_cluster_similarity = doc.value("within_cluster_similarity", s.within_cluster_similarity);
    s.cross_cluster_similarity = doc.value("cross_cluster_similarity", s.cross_cluster_similarity);
    s.noise_frames_fraction = doc.value("noise_frames_fraction", s.noise_frames_fraction);
    s.fps = doc.value("fps", s.fps);
    s.mm_per_px = doc.value("mm_per_px", s.mm_per_px);
    s.tick_spacing_mm = doc.value("tick_spacing_mm", s.tick_spacing_mm);
    s.caliper_jitter_px = doc.value("caliper_jitter_px", s.caliper_jitter_px);
    s.canvas_width = doc.value("canvas_width", s.canvas_width);
    s.canvas_height = doc.value("canvas_height", s.canvas_height);
    if (doc.contains("biometry_shapes")) {
      for (const auto& j : doc["biometry_shapes"]) {
        SynthShape sh;
        sh.cls = parse_biometry_class(j.at("class").get<std::string>());
        if (sh.is_ellipse()) {
          sh.a = j.at("a").get<double>();
          sh.b = j.at("b").get<double>();
        } else {
          sh.length = j.at("length").get<double>();
          sh.width = j.at("width").get<double>();
        }
        sh.theta = j.value("theta", 0.0);
        sh.cx = j.value("cx", static_cast<double>(s.canvas_width) / 2.0);
        sh.cy = j.value("cy", static_cast<double>(s.canvas_height) / 2.0);
        s.biometry_shapes.push_back(sh);
      }
    } else {
      s.biometry_shapes = default_shapes();
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidArgument, std::string("synth spec: ") + e.what());
  }
  s.validate();
  return s;
}

std::string SynthSpec::to_json() const {
  json shapes = json::array();
  for (const auto& s : biometry_shapes) shapes.push_back(shape_json(s));
  json doc = {{"exam_id", exam_id},
              {"rng_seed", rng_seed},
              {"T", frame_count},
              {"D", dim},
              {"n_anatomy_clusters", n_anatomy_clusters},
              {"keyframes_per_cluster", keyframes_per_cluster},
              {"within_cluster_similarity", within_cluster_similarity},
              {"cross_cluster_similarity", cross_cluster_similarity},
              {"noise_frames_fraction", noise_frames_fraction},
              {"fps", fps},
              {"mm_per_px", mm_per_px},
              {"tick_spacing_mm", tick_spacing_mm},
              {"caliper_jitter_px", caliper_jitter_px},
              {"canvas_width", canvas_width},
              {"canvas_height", canvas_height},
              {"biometry_shapes", shapes}};
  return doc.dump(2) + "\n";
}

// Geometry helpers ----------------------------------------------------------

GrayImage rasterize_ellipse(std::size_t width, std::size_t height, double cx, double cy, double a,
                            double b, double theta) {
  GrayImage img{width, height, std::vector<std::uint8_t>(width * height, 0)};
  const double c = std::cos(theta), s = std::sin(theta);
  for (std::size_t y = 0; y < height; ++y) {
    for (std::size_t x = 0; x < width; ++x) {
      const double dx = static_cast<double>(x) - cx, dy = static_cast<double>(y) - cy;
      const double u = (dx * c + dy * s) / a, v = (-dx * s + dy * c) / b;
      if (u * u + v * v <= 1.0) img.pixels[y * width + x] = 255;
    }
  }
  return img;
}

GrayImage rasterize_bar(std::size_t width, std::size_t height, double cx, double cy, double length,
                        double thickness, double theta) {
  GrayImage img{width, height, std::vector<std::uint8_t>(width * height, 0)};
  const double c = std::cos(theta), s = std::sin(theta);
  for (std::size_t y = 0; y < height; ++y) {
    for (std::size_t x = 0; x < width; ++x) {
      const double dx = static_cast<double>(x) - cx, dy = static_cast<double>(y) - cy;
      const double along = dx * c + dy * s, across = -dx * s + dy * c;
      if (std::abs(along) <= length / 2.0 && std::abs(across) <= thickness / 2.0) {
        img.pixels[y * width + x] = 255;
      }
    }
  }
  return img;
}

double exact_ellipse_perimeter(double a, double b) {
  if (a < b) std::swap(a, b);
  double an = a, bn = b;
  double sum = (a * a - b * b) / 2.0;  // 2^{-1} c_0^2
  double weight = 1.0;                 // 2^{n-1} for n >= 1
  for (int it = 0; it < 64; ++it) {
    const double cn = (an - bn) / 2.0;
    const double next_a = (an + bn) / 2.0;
    const double next_b = std::sqrt(an * bn);
    sum += weight * cn * cn;
    weight *= 2.0;
    an = next_a;
    bn = next_b;
    if (cn <= 1e-17 * a) break;
  }
  return 2.0 * std::numbers::pi / an * (a * a - sum);
}

// Generation ----------------------------------------------------------------

SynthExam synthesize(const SynthSpec& spec) {
  spec.validate();
  Rng rng(spec.rng_seed);
  const std::size_t n_clusters = spec.n_anatomy_clusters;
  const std::size_t dim = spec.dim;

  // Cluster centroids. The first pair sits exactly at the cross-cluster
  // target so the realized maximum hits it; the rest are rejection-sampled
  // below it.
  std::vector<std::vector<double>> centroids;
  centroids.push_back(random_unit(rng, dim));
  if (n_clusters >= 2) centroids.push_back(at_cosine(rng, centroids[0], spec.cross_cluster_similarity));
  while (centroids.size() < n_clusters) {
    bool placed = false;
    for (int attempt = 0; attempt < kMaxRejections && !placed; ++attempt) {
      std::vector<double> v = random_unit(rng, dim);
      if (std::all_of(centroids.begin(), centroids.end(), [&](const auto& c) {
            return dot(v, c) < spec.cross_cluster_similarity;
          })) {
        centroids.push_back(std::move(v));
        placed = true;
      }
    }
    if (!placed) infeasible("cannot place " + std::to_string(n_clusters) +
                            " centroids below cosine " +
                            std::to_string(spec.cross_cluster_similarity) + " in dimension " +
                            std::to_string(dim));
  }

  // Timeline: visits of clusters 0..n-1, repeated keyframes_per_cluster
  // times, separated by noise gaps.
  const std::size_t T = spec.frame_count;
  const auto n_noise =
      static_cast<std::size_t>(std::floor(spec.noise_frames_fraction * static_cast<double>(T)));
  const std::size_t n_visits = n_clusters * spec.keyframes_per_cluster;
  const std::size_t cluster_frames = T - n_noise;
  const std::size_t gaps = n_visits + 1;

  GroundTruth truth;
  truth.mm_per_px = spec.mm_per_px;
  truth.groups.resize(n_clusters);
  std::vector<int> frame_cluster(T, -1);
  std::size_t cursor = 0;
  for (std::size_t v = 0; v <= n_visits; ++v) {
    cursor += n_noise / gaps + (v < n_noise % gaps ? 1 : 0);
    if (v == n_visits) break;
    const std::size_t len = cluster_frames / n_visits + (v < cluster_frames % n_visits ? 1 : 0);
    Segment seg;
    seg.begin = cursor;
    seg.end = cursor + len;
    seg.cluster = v % n_clusters;
    seg.keyframe = seg.begin + static_cast<std::size_t>(rng.below(len));
    for (std::size_t t = seg.begin; t < seg.end; ++t) frame_cluster[t] = static_cast<int>(seg.cluster);
    truth.segments.push_back(seg);
    truth.keyframes.push_back(seg.keyframe);
    truth.groups[seg.cluster].push_back(seg.keyframe);
    cursor = seg.end;
  }

  std::vector<float> values(T * dim);
  KeyframeLabelVector labels(T, 0);
  for (const auto& seg : truth.segments) labels[seg.keyframe] = 1;
  for (std::size_t t = 0; t < T; ++t) {
    std::vector<double> row;
    if (frame_cluster[t] < 0) {
      bool placed = false;
      for (int attempt = 0; attempt < kMaxRejections && !placed; ++attempt) {
        row = random_unit(rng, dim);
        placed = std::all_of(centroids.begin(), centroids.end(), [&](const auto& c) {
          return dot(row, c) < spec.cross_cluster_similarity;
        });
      }
      if (!placed) infeasible("cannot place noise frames below the cross-cluster cosine");
    } else if (labels[t]) {
      row = centroids[static_cast<std::size_t>(frame_cluster[t])];
    } else {
      row = at_cosine(rng, centroids[static_cast<std::size_t>(frame_cluster[t])],
                      spec.within_cluster_similarity);
    }
    std::copy(row.begin(), row.end(), values.begin() + static_cast<std::ptrdiff_t>(t * dim));
  }

  SynthExam exam;
  exam.spec = spec;
  exam.embeddings = EmbeddingMatrix(std::string(kSimilarityChannel), T, dim, std::move(values));
  exam.labels = labels;
  for (const auto& c : centroids) exam.centroids.push_back(to_float(c));
  const ScoreVector scores = baseline_score(exam.embeddings, exam.centroids);
  exam.scores.assign(scores.begin(), scores.end());

  // Realized similarity statistics.
  truth.realized_within_min = 1.0;
  truth.realized_within_max = 0.0;
  for (const auto& seg : truth.segments) {
    for (std::size_t t = seg.begin; t < seg.end; ++t) {
      if (t == seg.keyframe) continue;
      const double c = cosine(exam.embeddings.row(t), exam.embeddings.row(seg.keyframe));
      truth.realized_within_min = std::min(truth.realized_within_min, c);
      truth.realized_within_max = std::max(truth.realized_within_max, c);
    }
  }
  if (truth.realized_within_min > truth.realized_within_max) {
    truth.realized_within_min = truth.realized_within_max = spec.within_cluster_similarity;
  }
  truth.realized_cross_max = 0.0;
  for (std::size_t i = 0; i < n_clusters; ++i) {
    for (std::size_t j = i + 1; j < n_clusters; ++j) {
      truth.realized_cross_max =
          std::max(truth.realized_cross_max, cosine(exam.centroids[i], exam.centroids[j]));
    }
  }
  const double tol = 0.01;
  if (std::abs(truth.realized_within_min - spec.within_cluster_similarity) > tol ||
      std::abs(truth.realized_within_max - spec.within_cluster_similarity) > tol ||
      (n_clusters >= 2 &&
       std::abs(truth.realized_cross_max - std::max(0.0, spec.cross_cluster_similarity)) > tol)) {
    infeasible("realized similarities miss the targets by more than 0.01");
  }

  // Captions: one per visit; biometry shapes go to the first visit of
  // clusters 0, 1, ... in order.
  for (const auto& seg : truth.segments) {
    CaptionRecord rec;
    rec.frame_index = seg.keyframe;
    const bool first_visit = truth.groups[seg.cluster].front() == seg.keyframe;
    if (first_visit && seg.cluster < spec.biometry_shapes.size()) {
      const SynthShape& shape = spec.biometry_shapes[seg.cluster];
      rec.text = biometry_caption(shape.cls);
      rec.is_biometry = true;
      rec.biometry_class = shape.cls;
    } else {
      constexpr std::size_t n_text = std::size(kAnatomyCaptions);
      rec.text = kAnatomyCaptions[seg.cluster % n_text];
    }
    truth.captions.push_back(std::move(rec));
  }

  for (std::size_t k = 0; k < spec.biometry_shapes.size(); ++k) {
    const SynthShape& s = spec.biometry_shapes[k];
    GrayImage img = s.is_ellipse()
                        ? rasterize_ellipse(spec.canvas_width, spec.canvas_height, s.cx, s.cy, s.a,
                                            s.b, s.theta)
                        : rasterize_bar(spec.canvas_width, spec.canvas_height, s.cx, s.cy,
                                        s.length, s.width, s.theta);
    PlantedShape planted;
    planted.shape = s;
    planted.frame_index = truth.groups[k].front();
    planted.foreground_pixels = static_cast<std::size_t>(
        std::count_if(img.pixels.begin(), img.pixels.end(), [](std::uint8_t p) { return p != 0; }));
    if (planted.foreground_pixels == 0) infeasible("biometry shape lies outside the canvas");
    if (s.is_ellipse()) {
      planted.true_mm = exact_ellipse_perimeter(s.a, s.b) * spec.mm_per_px;
      if (s.cls == BiometryClass::HC) planted.true_bpd_mm = 2.0 * s.b * spec.mm_per_px;
    } else {
      planted.true_mm = s.length * spec.mm_per_px;
    }
    truth.shapes.push_back(planted);
    exam.masks.push_back(std::move(img));
  }

  // Caliper strip: a bright band on the left edge every tick_spacing_mm.
  const std::size_t strip_w = 16;
  const std::size_t strip_h = spec.canvas_height;
  exam.caliper_strip = GrayImage{strip_w, strip_h, std::vector<std::uint8_t>(strip_w * strip_h, 0)};
  const double spacing_px = spec.tick_spacing_mm / spec.mm_per_px;
  for (double nominal = 8.0; nominal + spec.caliper_jitter_px < static_cast<double>(strip_h) - 1.0;
       nominal += spacing_px) {
    const int jitter = spec.caliper_jitter_px == 0
                           ? 0
                           : static_cast<int>(rng.below(2 * spec.caliper_jitter_px + 1)) -
                                 spec.caliper_jitter_px;
    const auto row = static_cast<std::size_t>(std::lround(nominal) + jitter);
    truth.caliper_tick_rows.push_back(static_cast<double>(row));
    for (std::size_t x = 0; x < 6; ++x) exam.caliper_strip.pixels[row * strip_w + x] = 255;
  }

  std::sort(truth.keyframes.begin(), truth.keyframes.end());
  exam.truth = std::move(truth);
  return exam;
}

std::string ground_truth_to_json(const GroundTruth& t) {
  json segments = json::array();
  for (const auto& s : t.segments) {
    segments.push_back(
        {{"begin", s.begin}, {"end", s.end}, {"cluster", s.cluster}, {"keyframe", s.keyframe}});
  }
  json shapes = json::array();
  for (const auto& p : t.shapes) {
    json j = shape_json(p.shape);
    j["frame_index"] = p.frame_index;
    j["foreground_pixels"] = p.foreground_pixels;
    j["true_mm"] = p.true_mm;
    if (p.shape.cls == BiometryClass::HC) j["true_bpd_mm"] = p.true_bpd_mm;
    shapes.push_back(j);
  }
  json captions = json::array();
  for (const auto& c : t.captions) {
    captions.push_back({{"frame_index", c.frame_index}, {"text", c.text}});
  }
  json doc = {{"keyframes", t.keyframes},
              {"groups", t.groups},
              {"segments", segments},
              {"captions", captions},
              {"shapes", shapes},
              {"mm_per_px", t.mm_per_px},
              {"caliper_tick_rows", t.caliper_tick_rows},
              {"realized_within_min", t.realized_within_min},
              {"realized_within_max", t.realized_within_max},
              {"realized_cross_max", t.realized_cross_max}};
  return doc.dump(2) + "\n";
}

ExamManifest write_corpus(const SynthExam& exam, const fs::path& out_dir) {
  std::error_code ec;
  fs::create_directories(out_dir / "masks", ec);
  if (ec) throw Error(ErrorCode::IoError, "cannot create " + out_dir.string() + ": " + ec.message());

  const SynthSpec& spec = exam.spec;
  write_f32(out_dir / "embeddings.f32", exam.embeddings.values());
  write_f32(out_dir / "scores.f32", exam.scores);
  write_labels(out_dir / "labels.json", exam.labels);
  write_captions(out_dir / "captions.jsonl", exam.truth.captions);
  write_pgm(out_dir / "caliper.pgm", exam.caliper_strip);

  ExamManifest m;
  m.exam_id = spec.exam_id;
  m.frame_count = spec.frame_count;
  m.fps = spec.fps;
  m.embedding_channels[std::string(kDetectorChannel)] = {spec.dim, "embeddings.f32"};
  m.embedding_channels[std::string(kSimilarityChannel)] = {spec.dim, "embeddings.f32"};
  m.embedding_channels[std::string(kScoresChannel)] = {1, "scores.f32"};
  m.keyframe_labels = "labels.json";
  m.captions = "captions.jsonl";
  for (std::size_t k = 0; k < exam.truth.shapes.size(); ++k) {
    const auto& planted = exam.truth.shapes[k];
    const std::string rel = "masks/" + std::to_string(planted.frame_index) + "_" +
                            std::string(to_string(planted.shape.cls)) + ".pgm";
    write_pgm(out_dir / rel, exam.masks[k]);
    m.masks.push_back({planted.frame_index, planted.shape.cls, rel});
  }
  m.mm_per_px = spec.mm_per_px;
  m.caliper_strip = CaliperStripRef{"caliper.pgm", spec.tick_spacing_mm};
  m.rng_algorithm = Rng::kAlgorithm;
  m.base_dir = out_dir;

  write_text_file(out_dir / "gt_keyframes.json",
                  keyframes_to_json(keyframes_from_labels(exam.labels), m));
  write_text_file(out_dir / "ground_truth.json", ground_truth_to_json(exam.truth));
  write_text_file(out_dir / "synth_spec.json", spec.to_json());
  save_manifest(m, out_dir / "manifest.json");
  return m;
}

GroundTruth generate(const SynthSpec& spec, const fs::path& out_dir) {
  SynthExam exam = synthesize(spec);
  write_corpus(exam, out_dir);
  return std::move(exam.truth);
}

GroundTruth ground_truth(const SynthSpec& spec) { return synthesize(spec).truth; }

}  // namespace scansum
