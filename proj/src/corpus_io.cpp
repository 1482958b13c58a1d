#include "scansum/corpus_io.hpp"

#include <png.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "scansum/error.hpp"

namespace scansum {

using nlohmann::json;

namespace {

[[noreturn]] void malformed(const std::string& what) {
  throw Error(ErrorCode::MalformedManifest, what);
}

void require_file(const fs::path& path, const std::string& what) {
  std::error_code ec;
  if (!fs::is_regular_file(path, ec)) {
    throw Error(ErrorCode::MissingFile, what + " not found: " + path.string());
  }
}

template <typename T>
T get_field(const json& obj, const char* key, const char* context) {
  if (!obj.contains(key)) malformed(std::string(context) + ": missing '" + key + "'");
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception& e) {
    malformed(std::string(context) + ": bad '" + key + "': " + e.what());
  }
}

std::size_t get_count(const json& obj, const char* key, const char* context) {
  if (!obj.contains(key)) malformed(std::string(context) + ": missing '" + key + "'");
  const json& v = obj.at(key);
  if (!v.is_number_integer() || v.get<std::int64_t>() < 0) {
    malformed(std::string(context) + ": '" + key + "' must be a non-negative integer");
  }
  return v.get<std::size_t>();
}

float load_le_float(const unsigned char* bytes) {
  std::uint32_t bits = 0;
  for (int k = 3; k >= 0; --k) bits = (bits << 8) | bytes[k];
  return std::bit_cast<float>(bits);
}

void store_le_float(float value, unsigned char* bytes) {
  auto bits = std::bit_cast<std::uint32_t>(value);
  for (int k = 0; k < 4; ++k) {
    bytes[k] = static_cast<unsigned char>(bits & 0xFFu);
    bits >>= 8;
  }
}

std::vector<unsigned char> read_bytes(const fs::path& path) {
  require_file(path, "file");
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

bool is_space(unsigned char c) { return std::isspace(c) != 0; }

GrayImage read_pgm(const std::vector<unsigned char>& bytes, const fs::path& path) {
  std::size_t pos = 2;
  auto next_token = [&]() -> std::string {
    while (pos < bytes.size()) {
      if (is_space(bytes[pos])) {
        ++pos;
      } else if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else {
        break;
      }
    }
    std::string tok;
    while (pos < bytes.size() && !is_space(bytes[pos]) && bytes[pos] != '#') {
      tok.push_back(static_cast<char>(bytes[pos++]));
    }
    if (tok.empty()) {
      throw Error(ErrorCode::UnsupportedFormat, "truncated PGM: " + path.string());
    }
    return tok;
  };
  auto next_number = [&]() -> std::size_t {
    std::string tok = next_token();
    if (!std::all_of(tok.begin(), tok.end(), [](char c) { return c >= '0' && c <= '9'; })) {
      throw Error(ErrorCode::UnsupportedFormat, "bad PGM header: " + path.string());
    }
    return std::stoul(tok);
  };
  const bool binary = bytes[1] == '5';
  GrayImage img;
  img.width = next_number();
  img.height = next_number();
  const std::size_t maxval = next_number();
  if (maxval == 0 || maxval > 255) {
    throw Error(ErrorCode::UnsupportedFormat, "only 8-bit PGM is supported: " + path.string());
  }
  const std::size_t count = img.width * img.height;
  img.pixels.resize(count);
  if (binary) {
    ++pos;  // single whitespace after maxval
    if (bytes.size() < pos + count) {
      throw Error(ErrorCode::UnsupportedFormat, "truncated PGM raster: " + path.string());
    }
    std::copy_n(bytes.begin() + static_cast<std::ptrdiff_t>(pos), count, img.pixels.begin());
  } else {
    for (std::size_t i = 0; i < count; ++i) {
      img.pixels[i] = static_cast<std::uint8_t>(std::min<std::size_t>(next_number(), 255));
    }
  }
  return img;
}

GrayImage read_png(const fs::path& path) {
  png_image image;
  std::memset(&image, 0, sizeof(image));
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&image, path.c_str())) {
    throw Error(ErrorCode::UnsupportedFormat,
                "cannot decode PNG " + path.string() + ": " + image.message);
  }
  image.format = PNG_FORMAT_GRAY;
  GrayImage out;
  out.width = image.width;
  out.height = image.height;
  out.pixels.resize(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, out.pixels.data(), 0, nullptr)) {
    std::string msg = image.message;
    png_image_free(&image);
    throw Error(ErrorCode::UnsupportedFormat, "cannot decode PNG " + path.string() + ": " + msg);
  }
  return out;
}

}  // namespace

std::string_view to_string(BiometryClass cls) {
  switch (cls) {
    case BiometryClass::HC: return "HC";
    case BiometryClass::AC: return "AC";
    case BiometryClass::FL: return "FL";
    case BiometryClass::Cereb: return "Cereb";
  }
  return "?";
}

BiometryClass parse_biometry_class(std::string_view name) {
  if (name == "HC") return BiometryClass::HC;
  if (name == "AC") return BiometryClass::AC;
  if (name == "FL") return BiometryClass::FL;
  if (name == "Cereb") return BiometryClass::Cereb;
  throw Error(ErrorCode::InvalidArgument, "unknown biometry class '" + std::string(name) + "'");
}

fs::path ExamManifest::resolve(const std::string& relative) const {
  fs::path p(relative);
  return p.is_absolute() ? p : base_dir / p;
}

bool ExamManifest::operator==(const ExamManifest& o) const {
  return exam_id == o.exam_id && frame_count == o.frame_count && fps == o.fps &&
         embedding_channels == o.embedding_channels && keyframe_labels == o.keyframe_labels &&
         captions == o.captions && masks == o.masks && mm_per_px == o.mm_per_px &&
         caliper_strip == o.caliper_strip && rng_algorithm == o.rng_algorithm;
}

EmbeddingMatrix::EmbeddingMatrix(std::string channel, std::size_t rows, std::size_t dim,
                                 std::vector<float> values)
    : channel_(std::move(channel)), rows_(rows), dim_(dim), values_(std::move(values)) {
  if (values_.size() != rows_ * dim_) {
    throw Error(ErrorCode::SizeMismatch, "embedding buffer does not hold rows x dim values");
  }
}

std::size_t BinaryMask::foreground_count() const {
  return static_cast<std::size_t>(std::count_if(pixels.begin(), pixels.end(),
                                                [](std::uint8_t p) { return p != 0; }));
}

// Manifest ------------------------------------------------------------------

ExamManifest parse_manifest(std::string_view json_text, const fs::path& base_dir) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    malformed(std::string("invalid JSON: ") + e.what());
  }
  if (!doc.is_object()) malformed("manifest must be a JSON object");

  ExamManifest m;
  m.base_dir = base_dir;
  m.exam_id = get_field<std::string>(doc, "exam_id", "manifest");
  m.frame_count = get_count(doc, "frame_count", "manifest");
  if (m.frame_count < 1) malformed("frame_count must be >= 1");
  if (doc.contains("fps")) m.fps = get_field<double>(doc, "fps", "manifest");
  if (!(m.fps > 0.0) || !std::isfinite(m.fps)) malformed("fps must be positive");

  if (!doc.contains("embedding_channels") || !doc["embedding_channels"].is_object() ||
      doc["embedding_channels"].empty()) {
    malformed("embedding_channels must be a non-empty object");
  }
  for (const auto& [name, entry] : doc["embedding_channels"].items()) {
    if (!entry.is_object()) malformed("channel '" + name + "' must be an object");
    ChannelRef ref;
    ref.dim = get_count(entry, "dim", "channel");
    ref.path = get_field<std::string>(entry, "path", "channel");
    if (ref.dim < 1) malformed("channel '" + name + "' has dim 0");
    if (name == kScoresChannel && ref.dim != 1) malformed("scores channel must have dim 1");
    m.embedding_channels.emplace(name, std::move(ref));
  }

  if (doc.contains("keyframe_labels") && !doc["keyframe_labels"].is_null()) {
    m.keyframe_labels = get_field<std::string>(doc, "keyframe_labels", "manifest");
  }
  if (doc.contains("captions") && !doc["captions"].is_null()) {
    m.captions = get_field<std::string>(doc, "captions", "manifest");
  }
  if (doc.contains("masks") && !doc["masks"].is_null()) {
    if (!doc["masks"].is_array()) malformed("masks must be an array");
    for (const auto& entry : doc["masks"]) {
      if (!entry.is_object()) malformed("mask entry must be an object");
      MaskRef ref;
      ref.frame_index = get_count(entry, "frame_index", "mask");
      try {
        ref.cls = parse_biometry_class(get_field<std::string>(entry, "class", "mask"));
      } catch (const Error& e) {
        malformed(e.what());
      }
      ref.path = get_field<std::string>(entry, "path", "mask");
      if (ref.frame_index >= m.frame_count) malformed("mask frame_index out of range");
      m.masks.push_back(std::move(ref));
    }
  }
  if (doc.contains("mm_per_px") && !doc["mm_per_px"].is_null()) {
    const double s = get_field<double>(doc, "mm_per_px", "manifest");
    if (!(s > 0.0) || !std::isfinite(s)) malformed("mm_per_px must be positive");
    m.mm_per_px = s;
  }
  if (doc.contains("caliper_strip") && !doc["caliper_strip"].is_null()) {
    const json& c = doc["caliper_strip"];
    if (!c.is_object()) malformed("caliper_strip must be an object");
    CaliperStripRef ref;
    ref.path = get_field<std::string>(c, "path", "caliper_strip");
    ref.tick_spacing_mm = get_field<double>(c, "tick_spacing_mm", "caliper_strip");
    if (!(ref.tick_spacing_mm > 0.0)) malformed("tick_spacing_mm must be positive");
    m.caliper_strip = std::move(ref);
  }
  if (doc.contains("rng_algorithm") && !doc["rng_algorithm"].is_null()) {
    m.rng_algorithm = get_field<std::string>(doc, "rng_algorithm", "manifest");
  }
  if (!m.masks.empty() && !m.mm_per_px && !m.caliper_strip) {
    malformed("masks require mm_per_px or caliper_strip");
  }

  // Referenced files, checked eagerly.
  for (const auto& [name, ref] : m.embedding_channels) {
    const fs::path p = m.resolve(ref.path);
    require_file(p, "channel '" + name + "'");
    const auto expected = static_cast<std::uintmax_t>(m.frame_count * ref.dim * 4);
    const auto actual = fs::file_size(p);
    if (actual != expected) {
      throw Error(ErrorCode::SizeMismatch,
                  "channel '" + name + "': " + std::to_string(actual) + " bytes, expected " +
                      std::to_string(expected));
    }
  }
  if (m.keyframe_labels) require_file(m.resolve(*m.keyframe_labels), "keyframe_labels");
  if (m.captions) require_file(m.resolve(*m.captions), "captions");
  for (const auto& mask : m.masks) require_file(m.resolve(mask.path), "mask");
  if (m.caliper_strip) require_file(m.resolve(m.caliper_strip->path), "caliper_strip");
  return m;
}

ExamManifest load_manifest(const fs::path& path) {
  const std::string text = read_text_file(path);
  return parse_manifest(text, path.parent_path());
}

std::string manifest_to_json(const ExamManifest& m) {
  json doc;
  doc["exam_id"] = m.exam_id;
  doc["frame_count"] = m.frame_count;
  doc["fps"] = m.fps;
  json channels = json::object();
  for (const auto& [name, ref] : m.embedding_channels) {
    channels[name] = {{"dim", ref.dim}, {"path", ref.path}};
  }
  doc["embedding_channels"] = channels;
  if (m.keyframe_labels) doc["keyframe_labels"] = *m.keyframe_labels;
  if (m.captions) doc["captions"] = *m.captions;
  if (!m.masks.empty()) {
    json masks = json::array();
    for (const auto& mask : m.masks) {
      masks.push_back({{"frame_index", mask.frame_index},
                       {"class", std::string(to_string(mask.cls))},
                       {"path", mask.path}});
    }
    doc["masks"] = masks;
  }
  if (m.mm_per_px) doc["mm_per_px"] = *m.mm_per_px;
  if (m.caliper_strip) {
    doc["caliper_strip"] = {{"path", m.caliper_strip->path},
                            {"tick_spacing_mm", m.caliper_strip->tick_spacing_mm}};
  }
  if (m.rng_algorithm) doc["rng_algorithm"] = *m.rng_algorithm;
  return doc.dump(2) + "\n";
}

void save_manifest(const ExamManifest& manifest, const fs::path& path) {
  write_text_file(path, manifest_to_json(manifest));
}

// Embeddings ----------------------------------------------------------------

std::vector<float> read_f32(const fs::path& path) {
  const auto bytes = read_bytes(path);
  if (bytes.size() % 4 != 0) {
    throw Error(ErrorCode::SizeMismatch, path.string() + " is not a whole number of float32s");
  }
  std::vector<float> out(bytes.size() / 4);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = load_le_float(&bytes[4 * i]);
  return out;
}

void write_f32(const fs::path& path, std::span<const float> values) {
  std::vector<unsigned char> bytes(values.size() * 4);
  for (std::size_t i = 0; i < values.size(); ++i) store_le_float(values[i], &bytes[4 * i]);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

EmbeddingMatrix load_embeddings(const ExamManifest& manifest, std::string_view channel) {
  const auto it = manifest.embedding_channels.find(std::string(channel));
  if (it == manifest.embedding_channels.end()) {
    throw Error(ErrorCode::UnknownChannel, "no channel '" + std::string(channel) + "'");
  }
  const ChannelRef& ref = it->second;
  std::vector<float> values = read_f32(manifest.resolve(ref.path));
  if (values.size() != manifest.frame_count * ref.dim) {
    throw Error(ErrorCode::SizeMismatch, "channel '" + it->first + "' length changed on disk");
  }
  for (std::size_t t = 0; t < manifest.frame_count; ++t) {
    double norm2 = 0.0;
    for (std::size_t d = 0; d < ref.dim; ++d) {
      const float v = values[t * ref.dim + d];
      if (!std::isfinite(v)) {
        throw Error(ErrorCode::NonFiniteValue,
                    "channel '" + it->first + "' row " + std::to_string(t));
      }
      norm2 += static_cast<double>(v) * v;
    }
    if (norm2 == 0.0) {
      throw Error(ErrorCode::ZeroNormRow, "channel '" + it->first + "' row " + std::to_string(t));
    }
  }
  return EmbeddingMatrix(it->first, manifest.frame_count, ref.dim, std::move(values));
}

std::vector<double> load_score_file(const fs::path& path, std::size_t frame_count) {
  const std::vector<float> raw = read_f32(path);
  if (raw.size() != frame_count) {
    throw Error(ErrorCode::SizeMismatch, "score file " + path.string() + " has " +
                                             std::to_string(raw.size()) + " entries, expected " +
                                             std::to_string(frame_count));
  }
  std::vector<double> scores(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) {
    if (!std::isfinite(raw[i])) {
      throw Error(ErrorCode::NonFiniteValue, "score " + std::to_string(i));
    }
    if (raw[i] < 0.0f || raw[i] > 1.0f) {
      throw Error(ErrorCode::OutOfValidRange, "score " + std::to_string(i) + " outside [0,1]");
    }
    scores[i] = raw[i];
  }
  return scores;
}

std::vector<double> load_scores(const ExamManifest& manifest) {
  const auto it = manifest.embedding_channels.find(std::string(kScoresChannel));
  if (it == manifest.embedding_channels.end()) {
    throw Error(ErrorCode::UnknownChannel, "manifest has no 'scores' channel");
  }
  return load_score_file(manifest.resolve(it->second.path), manifest.frame_count);
}

// Labels and captions -------------------------------------------------------

KeyframeLabelVector read_labels(const fs::path& path, std::size_t frame_count) {
  json doc;
  try {
    doc = json::parse(read_text_file(path));
  } catch (const json::parse_error& e) {
    malformed("labels " + path.string() + ": " + e.what());
  }
  if (!doc.is_array()) malformed("labels must be a JSON array of 0/1");
  if (doc.size() != frame_count) {
    throw Error(ErrorCode::SizeMismatch, "labels have " + std::to_string(doc.size()) +
                                             " entries, expected " + std::to_string(frame_count));
  }
  KeyframeLabelVector labels(doc.size());
  for (std::size_t i = 0; i < doc.size(); ++i) {
    if (!doc[i].is_number_integer() || (doc[i] != 0 && doc[i] != 1)) {
      malformed("label " + std::to_string(i) + " is not 0 or 1");
    }
    labels[i] = doc[i].get<std::uint8_t>();
  }
  return labels;
}

KeyframeLabelVector load_labels(const ExamManifest& manifest) {
  if (!manifest.keyframe_labels) malformed("manifest has no keyframe_labels");
  return read_labels(manifest.resolve(*manifest.keyframe_labels), manifest.frame_count);
}

void write_labels(const fs::path& path, const KeyframeLabelVector& labels) {
  json doc = json::array();
  for (auto v : labels) doc.push_back(static_cast<int>(v));
  write_text_file(path, doc.dump() + "\n");
}

std::vector<CaptionRecord> parse_captions(std::string_view jsonl) {
  std::vector<CaptionRecord> out;
  std::istringstream lines{std::string(jsonl)};
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(lines, line)) {
    ++lineno;
    if (std::all_of(line.begin(), line.end(), [](unsigned char c) { return std::isspace(c); })) {
      continue;
    }
    const std::string where = "captions line " + std::to_string(lineno);
    json rec;
    try {
      rec = json::parse(line);
    } catch (const json::parse_error& e) {
      malformed(where + ": " + e.what());
    }
    if (!rec.is_object()) malformed(where + ": not an object");
    CaptionRecord c;
    c.frame_index = get_count(rec, "frame_index", where.c_str());
    c.text = get_field<std::string>(rec, "text", where.c_str());
    c.is_biometry = rec.value("is_biometry", false);
    if (rec.contains("biometry_class") && !rec["biometry_class"].is_null()) {
      try {
        c.biometry_class =
            parse_biometry_class(get_field<std::string>(rec, "biometry_class", where.c_str()));
      } catch (const Error& e) {
        malformed(where + ": " + e.what());
      }
    }
    if (c.is_biometry != c.biometry_class.has_value()) {
      malformed(where + ": biometry_class must be present iff is_biometry");
    }
    out.push_back(std::move(c));
  }
  return out;
}

std::vector<CaptionRecord> read_captions(const fs::path& path) {
  return parse_captions(read_text_file(path));
}

void write_captions(const fs::path& path, const std::vector<CaptionRecord>& captions) {
  std::string out;
  for (const auto& c : captions) {
    json rec;
    rec["frame_index"] = c.frame_index;
    rec["text"] = c.text;
    rec["is_biometry"] = c.is_biometry;
    rec["biometry_class"] =
        c.biometry_class ? json(std::string(to_string(*c.biometry_class))) : json(nullptr);
    out += rec.dump() + "\n";
  }
  write_text_file(path, out);
}

// Rasters -------------------------------------------------------------------

GrayImage read_gray_image(const fs::path& path) {
  const auto bytes = read_bytes(path);
  static constexpr unsigned char kPngSig[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1A, '\n'};
  if (bytes.size() >= 8 && std::equal(std::begin(kPngSig), std::end(kPngSig), bytes.begin())) {
    return read_png(path);
  }
  if (bytes.size() >= 2 && bytes[0] == 'P' && (bytes[1] == '2' || bytes[1] == '5')) {
    return read_pgm(bytes, path);
  }
  throw Error(ErrorCode::UnsupportedFormat, path.string() + " is neither PNG nor PGM");
}

void write_pgm(const fs::path& path, const GrayImage& image) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out << "P5\n" << image.width << ' ' << image.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(image.pixels.data()),
            static_cast<std::streamsize>(image.pixels.size()));
}

void write_png(const fs::path& path, const GrayImage& image) {
  png_image png;
  std::memset(&png, 0, sizeof(png));
  png.version = PNG_IMAGE_VERSION;
  png.width = static_cast<png_uint_32>(image.width);
  png.height = static_cast<png_uint_32>(image.height);
  png.format = PNG_FORMAT_GRAY;
  if (!png_image_write_to_file(&png, path.c_str(), 0, image.pixels.data(), 0, nullptr)) {
    throw Error(ErrorCode::IoError, "cannot write PNG " + path.string() + ": " + png.message);
  }
}

BinaryMask mask_from_image(const GrayImage& image, double mm_per_px) {
  if (!(mm_per_px > 0.0)) throw Error(ErrorCode::InvalidArgument, "mm_per_px must be positive");
  BinaryMask mask;
  mask.width = image.width;
  mask.height = image.height;
  mask.mm_per_px = mm_per_px;
  mask.pixels.resize(image.pixels.size());
  std::transform(image.pixels.begin(), image.pixels.end(), mask.pixels.begin(),
                 [](std::uint8_t v) { return static_cast<std::uint8_t>(v != 0); });
  if (mask.foreground_count() == 0) throw Error(ErrorCode::EmptyMask, "mask has no foreground");
  return mask;
}

BinaryMask load_mask(const fs::path& path, double mm_per_px) {
  try {
    return mask_from_image(read_gray_image(path), mm_per_px);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::EmptyMask) throw Error(ErrorCode::EmptyMask, path.string());
    throw;
  }
}

// Misc ----------------------------------------------------------------------

std::string read_text_file(const fs::path& path) {
  require_file(path, "file");
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const fs::path& path, std::string_view content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
}

}  // namespace scansum
