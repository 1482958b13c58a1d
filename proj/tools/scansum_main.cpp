#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "scansum/biometry.hpp"
#include "scansum/canonical_json.hpp"
#include "scansum/caption_eval.hpp"
#include "scansum/corpus_io.hpp"
#include "scansum/detect_eval.hpp"
#include "scansum/error.hpp"
#include "scansum/keyframe.hpp"
#include "scansum/pipeline.hpp"
#include "scansum/similarity.hpp"
#include "scansum/summary.hpp"
#include "scansum/synth.hpp"

using namespace scansum;
using nlohmann::json;

namespace {

struct Globals {
  bool json_out = false;
  std::optional<std::uint64_t> seed;
  unsigned jobs = 1;
  std::string equations;
};

Globals g;

void report(const json& doc, const std::string& human) {
  if (g.json_out) {
    std::cout << canonical_dump(doc);
  } else if (!human.empty()) {
    std::cout << human << "\n";
  }
}

void write_or_print(const std::string& out, const std::string& content) {
  if (out.empty() || out == "-") {
    std::cout << content;
  } else {
    write_text_file(out, content);
  }
}

EquationTable equation_table() {
  std::string path = g.equations;
  if (path.empty()) {
    if (const char* env = std::getenv("SCANSUM_EQUATIONS"); env && *env) path = env;
  }
  return path.empty() ? EquationTable::defaults() : load_equation_table(path);
}

// --config reader. Top-level keys fill global options and any option of the
// invoked subcommand; keys under an object named after a subcommand only
// that subcommand, and there an unknown key is an error. Values given on the
// command line win.
class JsonConfig : public CLI::Config {
 public:
  explicit JsonConfig(const CLI::App& app) : app_(app) {}

  std::string to_config(const CLI::App*, bool, bool, std::string) const override { return {}; }

  std::vector<CLI::ConfigItem> from_config(std::istream& input) const override {
    json doc;
    try {
      input >> doc;
    } catch (const json::exception& e) {
      throw Error(ErrorCode::InvalidArgument, std::string("config: ") + e.what());
    }
    if (!doc.is_object()) throw Error(ErrorCode::InvalidArgument, "config must be a JSON object");
    const std::vector<CLI::App*> invoked = app_.get_subcommands();
    std::vector<CLI::ConfigItem> items;
    for (const auto& [key, value] : doc.items()) {
      if (value.is_object()) {
        const CLI::App* sub = app_.get_subcommand_no_throw(key);
        if (!sub) throw Error(ErrorCode::InvalidArgument, "config: unknown section '" + key + "'");
        if (std::find(invoked.begin(), invoked.end(), sub) == invoked.end()) continue;
        for (const auto& [k, v] : value.items()) {
          if (!sub->get_option_no_throw("--" + option_name(k))) {
            throw Error(ErrorCode::InvalidArgument, "config: unknown option '" + key + "." + k + "'");
          }
          items.push_back(item({key}, k, v));
        }
        continue;
      }
      if (app_.get_option_no_throw("--" + option_name(key))) {
        items.push_back(item({}, key, value));
        continue;
      }
      for (const CLI::App* sub : invoked) {
        if (sub->get_option_no_throw("--" + option_name(key))) items.push_back(item({sub->get_name()}, key, value));
      }
    }
    return items;
  }

 private:
  static std::string option_name(std::string key) {
    std::replace(key.begin(), key.end(), '_', '-');
    return key;
  }

  static CLI::ConfigItem item(std::vector<std::string> parents, const std::string& key, const json& value) {
    CLI::ConfigItem it;
    it.parents = std::move(parents);
    it.name = option_name(key);
    for (const auto& v : value.is_array() ? value : json::array({value})) {
      if (v.is_string()) {
        it.inputs.push_back(v.get<std::string>());
      } else if (v.is_boolean()) {
        it.inputs.push_back(v.get<bool>() ? "true" : "false");
      } else {
        it.inputs.push_back(v.dump());
      }
    }
    return it;
  }

  const CLI::App& app_;
};

SimilarityMatrix exam_similarity(const ExamManifest& m, const std::string& cache) {
  const std::string channel = m.embedding_channels.count(std::string(kSimilarityChannel))
                                  ? std::string(kSimilarityChannel)
                                  : std::string(kDetectorChannel);
  const EmbeddingMatrix emb = load_embeddings(m, channel);
  if (cache.empty()) return similarity_matrix(emb);
  const std::uint64_t hash = embedding_hash(emb);
  if (auto cached = read_similarity_cache(cache, hash)) return std::move(*cached);
  SimilarityMatrix sim = similarity_matrix(emb);
  write_similarity_cache(cache, sim, hash);
  return sim;
}

struct ScoreOptions {
  std::string source = "auto";  // auto | manifest | baseline | <file>
  std::vector<std::string> train;
  std::optional<double> dedup;
};

ScoreVector exam_scores(const ExamManifest& m, const ScoreOptions& opt) {
  const bool has_channel = m.embedding_channels.count(std::string(kScoresChannel)) > 0;
  if (opt.source == "manifest" || (opt.source == "auto" && has_channel)) return load_scores(m);
  if (opt.source == "baseline" || opt.source == "auto") {
    if (opt.train.empty()) {
      throw Error(ErrorCode::EmptyPrototypes,
                  "baseline scoring needs --train manifests (or a scores channel)");
    }
    std::vector<EmbeddingMatrix> embs;
    std::vector<KeyframeLabelVector> labels;
    embs.reserve(opt.train.size());
    labels.reserve(opt.train.size());
    for (const auto& path : opt.train) {
      const ExamManifest tm = load_manifest(path);
      embs.push_back(load_embeddings(tm, kDetectorChannel));
      labels.push_back(load_labels(tm));
    }
    std::vector<TrainingExam> exams;
    for (std::size_t k = 0; k < embs.size(); ++k) exams.push_back({&embs[k], &labels[k]});
    return baseline_score(load_embeddings(m, kDetectorChannel), build_prototypes(exams, opt.dedup));
  }
  return load_score_file(opt.source, m.frame_count);
}

KeyframeSet read_keyframe_or_labels(const std::string& path, std::size_t frame_count) {
  const std::string text = read_text_file(path);
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first != std::string::npos && text[first] == '[') {
    return keyframes_from_labels(read_labels(path, frame_count));
  }
  KeyframeFile f = parse_keyframes(text);
  if (f.frame_count != frame_count) {
    throw Error(ErrorCode::SizeMismatch, path + ": frame_count " + std::to_string(f.frame_count) +
                                             " vs manifest " + std::to_string(frame_count));
  }
  return f.keyframes;
}

double parse_scale(std::string text) {
  if (text.size() > 2 && text.substr(text.size() - 2) == "mm") text.resize(text.size() - 2);
  try {
    std::size_t used = 0;
    const double v = std::stod(text, &used);
    if (used != text.size() || !(v > 0.0) || !std::isfinite(v)) throw std::invalid_argument("");
    return v;
  } catch (const std::exception&) {
    throw Error(ErrorCode::InvalidArgument, "--scale expects a positive value such as 0.2mm");
  }
}

json biometry_doc(const BiometrySet& b) {
  auto put = [](const std::optional<double>& v) { return v ? json(round6(*v)) : json(nullptr); };
  return {{"HC_mm", put(b.hc_mm)},   {"AC_mm", put(b.ac_mm)},         {"BPD_mm", put(b.bpd_mm)},
          {"FL_mm", put(b.fl_mm)},   {"Cereb_mm", put(b.cereb_mm)},   {"ga_weeks", put(b.ga_weeks)},
          {"efw_grams", put(b.efw_grams)}};
}

json caption_score_doc(const CaptionScore& s) {
  return {{"bleu1", s.bleu[0]}, {"bleu2", s.bleu[1]}, {"bleu3", s.bleu[2]},
          {"bleu4", s.bleu[3]}, {"rouge_l", s.rouge_l}};
}

json report_summary(const DetectionReport& r) {
  return {{"cosine_simi_pct", r.cosine_simi_pct},
          {"absolute_time_err_s", r.absolute_time_err_s},
          {"correct_time_err_s", r.correct_time_err_s},
          {"keyframe_num_err", r.keyframe_num_err},
          {"all_matched", r.all_matched}};
}

std::vector<fs::path> manifests_under(const std::vector<std::string>& manifests,
                                      const std::string& corpus) {
  std::vector<fs::path> out(manifests.begin(), manifests.end());
  if (!corpus.empty()) {
    if (!fs::is_directory(corpus)) throw Error(ErrorCode::MissingFile, corpus + " is not a directory");
    if (fs::exists(fs::path(corpus) / "manifest.json")) out.emplace_back(fs::path(corpus) / "manifest.json");
    for (const auto& entry : fs::directory_iterator(corpus)) {
      if (entry.is_directory() && fs::exists(entry.path() / "manifest.json")) {
        out.push_back(entry.path() / "manifest.json");
      }
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"scansum: keyframe detection, captions and biometry for ultrasound exam videos"};
  app.require_subcommand(1);
  app.fallthrough();
  app.add_flag("--json", g.json_out, "Machine-readable JSON on stdout");
  app.add_option("--seed", g.seed, "Random seed (synth, simulate-drop)");
  app.set_config("--config", "", "JSON file with option defaults");
  app.config_formatter(std::make_shared<JsonConfig>(app));
  app.add_option("--jobs", g.jobs, "Parallel exams")->check(CLI::PositiveNumber);
  app.add_option("--equations", g.equations, "Equation table JSON (default: $SCANSUM_EQUATIONS)");

  // synth ---------------------------------------------------------------------
  auto* synth = app.add_subcommand("synth", "Generate a synthetic exam corpus");
  std::string synth_spec, synth_out;
  std::size_t synth_count = 1;
  synth->add_option("--spec", synth_spec, "SynthSpec JSON");
  synth->add_option("--out", synth_out, "Output directory")->required();
  synth->add_option("--count", synth_count, "Number of exams (seed, seed+1, ...)")
      ->check(CLI::PositiveNumber);

  // detect --------------------------------------------------------------------
  auto* detect = app.add_subcommand("detect", "Diverse keyframe detection");
  std::string det_manifest, det_out, det_cache;
  DetectionConfig det_cfg;
  ScoreOptions det_scores;
  detect->add_option("--manifest", det_manifest)->required();
  detect->add_option("--tau", det_cfg.tau, "Masking similarity");
  detect->add_option("--tau-prime", det_cfg.tau_prime, "Stopping score");
  detect->add_option("--scores", det_scores.source, "auto | manifest | baseline | <file.f32>");
  detect->add_option("--train", det_scores.train, "Training manifests for baseline prototypes");
  detect->add_option("--dedup", det_scores.dedup, "Prototype deduplication cosine");
  detect->add_option("--sim-cache", det_cache, "Similarity matrix cache file");
  detect->add_option("--out", det_out, "keyframes.json (stdout if omitted)");

  // eval-detect ---------------------------------------------------------------
  auto* evald = app.add_subcommand("eval-detect", "Set-to-set detection metrics");
  std::string ed_pred, ed_gt, ed_manifest, ed_out, ed_cache;
  double ed_thr = kCorrectTimeSimThreshold;
  evald->add_option("--pred", ed_pred)->required();
  evald->add_option("--gt", ed_gt, "keyframes.json or label array")->required();
  evald->add_option("--manifest", ed_manifest)->required();
  evald->add_option("--sim-threshold", ed_thr);
  evald->add_option("--sim-cache", ed_cache);
  evald->add_option("--out", ed_out);

  // eval-captions -------------------------------------------------------------
  auto* evalc = app.add_subcommand("eval-captions", "BLEU-1..4 and ROUGE-L");
  std::string ec_pred, ec_gt, ec_out, ec_captioner, ec_keyframes;
  auto* ec_pred_opt = evalc->add_option("--pred", ec_pred, "Predicted captions.jsonl");
  auto* ec_cap_opt = evalc->add_option("--captioner", ec_captioner, "lookup:<file> | exec:<cmd>");
  ec_pred_opt->excludes(ec_cap_opt);
  evalc->add_option("--keyframes", ec_keyframes, "Frames to caption with --captioner")
      ->needs(ec_cap_opt);
  evalc->add_option("--gt", ec_gt)->required();
  evalc->add_option("--out", ec_out);

  // measure -------------------------------------------------------------------
  auto* meas = app.add_subcommand("measure", "Biometry from segmentation masks");
  std::string m_mask, m_class, m_scale, m_caliper, m_manifest, m_out;
  double m_tick = 0.0;
  auto* m_mask_opt = meas->add_option("--mask", m_mask);
  auto* m_manifest_opt = meas->add_option("--manifest", m_manifest);
  auto* m_class_opt = meas->add_option("--class", m_class, "HC | AC | FL | Cereb");
  auto* m_scale_opt = meas->add_option("--scale", m_scale, "mm per pixel, e.g. 0.2mm");
  auto* m_caliper_opt = meas->add_option("--caliper", m_caliper, "Caliper strip image");
  auto* m_tick_opt = meas->add_option("--tick-mm", m_tick, "Caliper tick spacing");
  meas->add_option("--out", m_out);
  m_mask_opt->excludes(m_manifest_opt);
  m_mask_opt->needs(m_class_opt);
  m_manifest_opt->excludes(m_class_opt);
  m_scale_opt->excludes(m_caliper_opt);
  m_caliper_opt->needs(m_tick_opt);

  // summarize -----------------------------------------------------------------
  auto* summ = app.add_subcommand("summarize", "Multimodal summary report");
  std::string s_manifest, s_keyframes, s_captions, s_captioner, s_measurements, s_out, s_format;
  summ->add_option("--manifest", s_manifest)->required();
  summ->add_option("--keyframes", s_keyframes)->required();
  auto* s_cap_opt = summ->add_option("--captions", s_captions);
  auto* s_capr_opt = summ->add_option("--captioner", s_captioner, "lookup:<file> | exec:<cmd>");
  s_cap_opt->excludes(s_capr_opt);
  summ->add_option("--measurements", s_measurements, "Output of measure --manifest");
  summ->add_option("--out", s_out, "report.json or report.md");
  summ->add_option("--format", s_format, "json | md (default: from --out extension)");

  // simulate-drop -------------------------------------------------------------
  auto* drop = app.add_subcommand("simulate-drop", "Frame-drop / scan-time experiment");
  std::vector<std::string> d_manifests;
  std::string d_corpus, d_out, d_per_exam;
  DropSettings d_settings;
  ScoreOptions d_scores;
  drop->add_option("--manifest", d_manifests, "Exam manifests");
  drop->add_option("--corpus", d_corpus, "Directory of exam subdirectories");
  drop->add_option("--fractions", d_settings.fractions)->delimiter(',');
  drop->add_option("--tau", d_settings.detection.tau);
  drop->add_option("--tau-prime", d_settings.detection.tau_prime);
  drop->add_option("--eligibility", d_settings.eligibility_threshold);
  drop->add_option("--sim-threshold", d_settings.sim_threshold);
  drop->add_option("--scores", d_scores.source);
  drop->add_option("--train", d_scores.train);
  drop->add_option("--out", d_out, "CSV table (stdout if omitted)");
  drop->add_option("--per-exam", d_per_exam, "Per-exam JSON results");

  // aggregate -----------------------------------------------------------------
  auto* agg = app.add_subcommand("aggregate", "Mean/std of reports, optional Welch t-test");
  std::vector<std::string> a_reports, a_group_b;
  std::string a_out;
  agg->add_option("--reports", a_reports, "Detection reports (group A)")->required();
  agg->add_option("--group-b", a_group_b, "Second group for the t-test");
  agg->add_option("--out", a_out);

  try {
    try {
      app.parse(argc, argv);
    } catch (const CLI::FileError& e) {
      app.exit(e);
      return 2;
    } catch (const CLI::ParseError& e) {
      const int rc = app.exit(e);
      return rc == 0 ? 0 : 1;
    }

    CLI::App* sub = app.get_subcommands().front();

    if (sub == synth) {
      SynthSpec spec = SynthSpec::from_json(synth_spec.empty() ? "{}" : read_text_file(synth_spec));
      if (g.seed) spec.rng_seed = *g.seed;
      json exams = json::array();
      for (std::size_t k = 0; k < synth_count; ++k) {
        SynthSpec s = spec;
        fs::path dir = synth_out;
        if (synth_count > 1) {
          char suffix[16];
          std::snprintf(suffix, sizeof(suffix), "_%03zu", k);
          s.exam_id = spec.exam_id + suffix;
          s.rng_seed = spec.rng_seed + k;
          dir /= s.exam_id;
        }
        const GroundTruth truth = generate(s, dir);
        exams.push_back({{"exam_id", s.exam_id},
                         {"dir", dir.string()},
                         {"keyframes", truth.keyframes},
                         {"realized_within_min", truth.realized_within_min},
                         {"realized_cross_max", truth.realized_cross_max}});
      }
      report({{"exams", exams}}, "wrote " + std::to_string(synth_count) + " exam(s) to " + synth_out);
    } else if (sub == detect) {
      det_cfg.validate();
      const ExamManifest m = load_manifest(det_manifest);
      const ScoreVector scores = exam_scores(m, det_scores);
      const SimilarityMatrix sim = exam_similarity(m, det_cache);
      const KeyframeSet kf = diverse_select(scores, sim, det_cfg);
      write_or_print(det_out, keyframes_to_json(kf, m));
      if (!det_out.empty()) {
        report({{"exam_id", m.exam_id}, {"keyframes", kf.indices}},
               std::to_string(kf.size()) + " keyframes -> " + det_out);
      }
    } else if (sub == evald) {
      const ExamManifest m = load_manifest(ed_manifest);
      const KeyframeSet pred = read_keyframe_or_labels(ed_pred, m.frame_count);
      const KeyframeSet gt = read_keyframe_or_labels(ed_gt, m.frame_count);
      const SimilarityMatrix sim = exam_similarity(m, ed_cache);
      const DetectionReport r = evaluate_detection(pred, gt, sim, m.fps, ed_thr);
      write_or_print(ed_out, detection_report_to_json(r));
      if (!ed_out.empty()) {
        char line[160];
        std::snprintf(line, sizeof(line), "cosine %.3f%%  abs %.3fs  correct %.3fs  num_err %zu",
                      r.cosine_simi_pct, r.absolute_time_err_s, r.correct_time_err_s,
                      r.keyframe_num_err);
        report(report_summary(r), line);
      }
    } else if (sub == evalc) {
      const auto gt = read_captions(ec_gt);
      std::vector<CaptionRecord> pred;
      if (!ec_captioner.empty()) {
        const auto provider = make_caption_provider(ec_captioner);
        std::vector<std::size_t> frames;
        if (!ec_keyframes.empty()) {
          frames = parse_keyframes(read_text_file(ec_keyframes)).keyframes.indices;
        } else {
          for (const auto& c : gt) frames.push_back(c.frame_index);
        }
        for (std::size_t f : frames) pred.push_back({f, provider->caption(f, ""), false, std::nullopt});
      } else if (!ec_pred.empty()) {
        pred = read_captions(ec_pred);
      } else {
        throw Error(ErrorCode::InvalidArgument, "eval-captions needs --pred or --captioner");
      }
      const CaptionPairing pairing = pair_captions(pred, gt);
      const CorpusCaptionScore corpus = score_corpus(pairing.pairs);
      json per = json::array();
      for (std::size_t k = 0; k < pairing.pairs.size(); ++k) {
        json row = caption_score_doc(score_caption(pairing.pairs[k].first, pairing.pairs[k].second));
        row["frame_index"] = pairing.frames[k];
        per.push_back(row);
      }
      const json doc = {{"count", corpus.count},
                        {"unmatched_pred", pairing.unmatched_pred},
                        {"unmatched_gt", pairing.unmatched_gt},
                        {"mean", caption_score_doc(corpus.mean)},
                        {"std", caption_score_doc(corpus.stddev)},
                        {"per_frame", per}};
      write_or_print(ec_out, canonical_dump(doc));
      if (!ec_out.empty()) {
        char line[160];
        std::snprintf(line, sizeof(line), "%zu captions  BLEU-4 %.4f  ROUGE-L %.4f", corpus.count,
                      corpus.mean.bleu[3], corpus.mean.rouge_l);
        report(doc["mean"], line);
      }
    } else if (sub == meas) {
      const EquationTable table = equation_table();
      std::optional<double> scale;
      if (!m_scale.empty()) scale = parse_scale(m_scale);
      if (!m_caliper.empty()) scale = caliper_scale(read_gray_image(m_caliper), m_tick);
      if (*m_tick_opt && m_caliper.empty()) {
        throw Error(ErrorCode::InvalidArgument, "--tick-mm needs --caliper");
      }
      if (!m_mask.empty()) {
        if (!scale) throw Error(ErrorCode::InvalidArgument, "--mask needs --scale or --caliper");
        BiometrySet b = measure(load_mask(m_mask, *scale), parse_biometry_class(m_class));
        derive_clinical(b, table);
        json doc = biometry_doc(b);
        doc["mm_per_px"] = *scale;
        doc["class"] = m_class;
        write_or_print(m_out, canonical_dump(doc));
      } else if (!m_manifest.empty()) {
        const ExamManifest m = load_manifest(m_manifest);
        if (!scale) {
          if (m.mm_per_px) {
            scale = *m.mm_per_px;
          } else if (m.caliper_strip) {
            scale = caliper_scale(read_gray_image(m.resolve(m.caliper_strip->path)),
                                  m.caliper_strip->tick_spacing_mm);
          } else {
            throw Error(ErrorCode::InvalidArgument,
                        "manifest has neither mm_per_px nor a caliper strip; pass --scale");
          }
        }
        MeasurementMap out;
        for (const auto& ref : m.masks) {
          const BiometrySet b = measure(load_mask(m.resolve(ref.path), *scale), ref.cls);
          out[ref.frame_index].merge_missing(b);
        }
        for (auto& [frame, b] : out) derive_clinical(b, table);
        write_or_print(m_out, measurements_to_json(m.exam_id, *scale, out));
        if (!m_out.empty()) {
          report({{"exam_id", m.exam_id}, {"masks", m.masks.size()}},
                 std::to_string(m.masks.size()) + " masks measured -> " + m_out);
        }
      } else {
        throw Error(ErrorCode::InvalidArgument, "measure needs --mask or --manifest");
      }
    } else if (sub == summ) {
      const ExamManifest m = load_manifest(s_manifest);
      const KeyframeFile kf = read_keyframes(s_keyframes);
      if (kf.frame_count != m.frame_count) {
        throw Error(ErrorCode::SizeMismatch, "keyframes frame_count differs from the manifest");
      }
      kf.keyframes.validate(m.frame_count);
      MeasurementMap measurements;
      if (!s_measurements.empty()) measurements = read_measurements(s_measurements);
      std::vector<CaptionRecord> captions;
      if (!s_captioner.empty()) {
        const auto provider = make_caption_provider(s_captioner);
        for (std::size_t f : kf.keyframes.indices) {
          std::string text = provider->caption(f, "");
          if (text.empty()) continue;
          captions.push_back({f, std::move(text), measurements.count(f) > 0, std::nullopt});
        }
      } else if (!s_captions.empty()) {
        captions = read_captions(s_captions);
      } else if (m.captions) {
        captions = read_captions(m.resolve(*m.captions));
      }
      const SummaryReport rep = assemble(m, kf.keyframes, captions, measurements, equation_table());
      std::string format = s_format;
      if (format.empty()) format = fs::path(s_out).extension() == ".md" ? "md" : "json";
      if (format != "json" && format != "md") {
        throw Error(ErrorCode::InvalidArgument, "--format must be json or md");
      }
      write_or_print(s_out, emit(rep, format == "md" ? ReportFormat::Markdown : ReportFormat::Json));
      if (!s_out.empty()) {
        report({{"exam_id", rep.exam_id}, {"keyframes", rep.keyframes.size()}},
               std::to_string(rep.keyframes.size()) + " keyframes -> " + s_out);
      }
    } else if (sub == drop) {
      const auto paths = manifests_under(d_manifests, d_corpus);
      if (paths.empty()) throw Error(ErrorCode::InsufficientData, "no exams given");
      d_settings.jobs = g.jobs;
      d_settings.seed = g.seed.value_or(0);
      std::vector<DropExam> exams;
      for (const auto& p : paths) {
        const ExamManifest m = load_manifest(p);
        DropExam e;
        e.exam_id = m.exam_id;
        e.fps = m.fps;
        e.sim = exam_similarity(m, "");
        e.scores = exam_scores(m, d_scores);
        e.labels = load_labels(m);
        exams.push_back(std::move(e));
      }
      const DropTable table = simulate_drop_table(exams, d_settings);
      write_or_print(d_out, drop_table_csv(table));
      if (!d_per_exam.empty()) {
        json rows = json::array();
        for (const auto& r : table.per_exam) {
          json row = report_summary(r.report);
          row["exam_id"] = r.exam_id;
          row["drop_fraction"] = r.drop_fraction;
          row["original_frames"] = r.original_frames;
          row["retained_frames"] = r.retained_frames;
          row["eligible_frames"] = r.eligible_frames;
          row["eligible_fraction"] = r.eligible_fraction;
          row["scan_time_saved_pct"] = r.scan_time_saved_pct;
          rows.push_back(row);
        }
        write_text_file(d_per_exam, canonical_dump({{"results", rows}}));
      }
      if (!d_out.empty()) {
        report({{"exams", exams.size()}, {"rows", table.rows.size()}},
               std::to_string(exams.size()) + " exams -> " + d_out);
      }
    } else if (sub == agg) {
      auto load = [](const std::vector<std::string>& files) {
        std::vector<DetectionReport> out;
        for (const auto& f : files) out.push_back(parse_detection_report(read_text_file(f)));
        return out;
      };
      const AggregateResult r =
          a_group_b.empty() ? aggregate(load(a_reports)) : aggregate(load(a_reports), load(a_group_b));
      write_or_print(a_out, aggregate_to_json(r));
    }
    return 0;
  } catch (const Error& e) {
    std::cerr << "scansum: " << e.what() << "\n";
    if (g.json_out) {
      std::cout << canonical_dump(
          {{"error", {{"code", std::string(to_string(e.code()))}, {"message", e.what()}}}});
    }
    return static_cast<int>(e.category());
  } catch (const std::exception& e) {
    std::cerr << "scansum: " << e.what() << "\n";
    return 2;
  }
}
