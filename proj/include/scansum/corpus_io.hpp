#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace scansum {

namespace fs = std::filesystem;

enum class BiometryClass { HC, AC, FL, Cereb };

std::string_view to_string(BiometryClass cls);
BiometryClass parse_biometry_class(std::string_view name);

struct ChannelRef {
  std::size_t dim = 0;
  std::string path;  // relative to the manifest directory unless absolute

  bool operator==(const ChannelRef&) const = default;
};

struct MaskRef {
  std::size_t frame_index = 0;
  BiometryClass cls = BiometryClass::HC;
  std::string path;

  bool operator==(const MaskRef&) const = default;
};

struct CaliperStripRef {
  std::string path;
  double tick_spacing_mm = 0.0;

  bool operator==(const CaliperStripRef&) const = default;
};

/// One exam video on disk. Paths are stored as written in the manifest and
/// resolved against `base_dir` on access.
struct ExamManifest {
  std::string exam_id;
  std::size_t frame_count = 0;
  double fps = 5.0;
  std::map<std::string, ChannelRef> embedding_channels;
  std::optional<std::string> keyframe_labels;
  std::optional<std::string> captions;
  std::vector<MaskRef> masks;
  std::optional<double> mm_per_px;
  std::optional<CaliperStripRef> caliper_strip;
  std::optional<std::string> rng_algorithm;
  fs::path base_dir;

  fs::path resolve(const std::string& relative) const;

  bool operator==(const ExamManifest& other) const;
};

inline constexpr std::string_view kDetectorChannel = "detector";
inline constexpr std::string_view kSimilarityChannel = "similarity";
inline constexpr std::string_view kScoresChannel = "scores";

/// T x D row-major matrix of 32-bit reals.
class EmbeddingMatrix {
 public:
  EmbeddingMatrix() = default;
  EmbeddingMatrix(std::string channel, std::size_t rows, std::size_t dim,
                  std::vector<float> values);

  const std::string& channel() const { return channel_; }
  std::size_t rows() const { return rows_; }
  std::size_t dim() const { return dim_; }
  std::span<const float> row(std::size_t i) const {
    return {values_.data() + i * dim_, dim_};
  }
  const std::vector<float>& values() const { return values_; }

  bool operator==(const EmbeddingMatrix&) const = default;

 private:
  std::string channel_;
  std::size_t rows_ = 0;
  std::size_t dim_ = 0;
  std::vector<float> values_;
};

using KeyframeLabelVector = std::vector<std::uint8_t>;

struct CaptionRecord {
  std::size_t frame_index = 0;
  std::string text;
  bool is_biometry = false;
  std::optional<BiometryClass> biometry_class;

  bool operator==(const CaptionRecord&) const = default;
};

/// 8-bit grayscale raster, row-major.
struct GrayImage {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::uint8_t> pixels;

  std::uint8_t at(std::size_t x, std::size_t y) const {
    return pixels[y * width + x];
  }
  bool operator==(const GrayImage&) const = default;
};

struct BinaryMask {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::uint8_t> pixels;  // 0 or 1, row-major
  double mm_per_px = 1.0;

  bool at(std::size_t x, std::size_t y) const {
    return pixels[y * width + x] != 0;
  }
  std::size_t foreground_count() const;
};

// Manifest ------------------------------------------------------------------

ExamManifest load_manifest(const fs::path& path);
ExamManifest parse_manifest(std::string_view json_text, const fs::path& base_dir);
std::string manifest_to_json(const ExamManifest& manifest);
void save_manifest(const ExamManifest& manifest, const fs::path& path);

// Embeddings and scores -----------------------------------------------------

EmbeddingMatrix load_embeddings(const ExamManifest& manifest,
                                std::string_view channel);
/// Raw little-endian float32 reader with no validation beyond the length.
std::vector<float> read_f32(const fs::path& path);
void write_f32(const fs::path& path, std::span<const float> values);
/// Reads the length-T score channel; entries must be finite and in [0,1].
std::vector<double> load_scores(const ExamManifest& manifest);
std::vector<double> load_score_file(const fs::path& path, std::size_t frame_count);

// Labels and captions -------------------------------------------------------

KeyframeLabelVector load_labels(const ExamManifest& manifest);
KeyframeLabelVector read_labels(const fs::path& path, std::size_t frame_count);
void write_labels(const fs::path& path, const KeyframeLabelVector& labels);

std::vector<CaptionRecord> read_captions(const fs::path& path);
std::vector<CaptionRecord> parse_captions(std::string_view jsonl);
void write_captions(const fs::path& path, const std::vector<CaptionRecord>& captions);

// Rasters -------------------------------------------------------------------

/// Reads 8-bit PNG (gray, or converted to gray) or PGM (P2/P5).
GrayImage read_gray_image(const fs::path& path);
void write_pgm(const fs::path& path, const GrayImage& image);
void write_png(const fs::path& path, const GrayImage& image);

BinaryMask mask_from_image(const GrayImage& image, double mm_per_px);
BinaryMask load_mask(const fs::path& path, double mm_per_px);

// Misc ----------------------------------------------------------------------

std::string read_text_file(const fs::path& path);
void write_text_file(const fs::path& path, std::string_view content);

}  // namespace scansum
