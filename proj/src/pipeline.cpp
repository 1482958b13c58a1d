#include "scansum/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <mutex>
#include <thread>

#include <boost/math/distributions/students_t.hpp>
#include <json.hpp>

#include "scansum/canonical_json.hpp"
#include "scansum/error.hpp"

namespace scansum {

namespace {

const char* const kMetricNames[] = {"cosine_simi_pct", "absolute_time_err_s",
                                    "correct_time_err_s", "keyframe_num_err"};

double metric_value(const DetectionReport& r, std::size_t k) {
  switch (k) {
    case 0: return r.cosine_simi_pct;
    case 1: return r.absolute_time_err_s;
    case 2: return r.correct_time_err_s;
    default: return static_cast<double>(r.keyframe_num_err);
  }
}

std::vector<DropExamResult> run_exam(const DropExam& exam, std::uint64_t seed,
                                     const DropSettings& settings) {
  const KeyframeSet gt = keyframes_from_labels(exam.labels);
  if (gt.empty()) throw Error(ErrorCode::NoKeyframes, "exam " + exam.exam_id + " has no keyframes");
  const std::size_t n_eligible =
      eligible_frames(exam.sim, exam.labels, settings.eligibility_threshold).size();
  const double eligible_fraction =
      static_cast<double>(n_eligible) / static_cast<double>(exam.labels.size());

  std::vector<DropExamResult> out;
  for (double fraction : settings.fractions) {
    const std::vector<std::size_t> kept =
        drop_frames(exam.sim, exam.labels, fraction, settings.eligibility_threshold, seed);
    const SimilarityMatrix sub_sim = exam.sim.slice(kept);
    ScoreVector sub_scores(kept.size());
    for (std::size_t k = 0; k < kept.size(); ++k) sub_scores[k] = exam.scores[kept[k]];

    KeyframeSet pred = diverse_select(sub_scores, sub_sim, settings.detection);
    const KeyframeSet sub_gt = remap_ground_truth(gt, kept, exam.sim);

    DropExamResult r;
    r.exam_id = exam.exam_id;
    r.drop_fraction = fraction;
    r.original_frames = exam.labels.size();
    r.retained_frames = kept.size();
    r.eligible_frames = n_eligible;
    r.eligible_fraction = eligible_fraction;
    r.scan_time_saved_pct = 100.0 * eligible_fraction * fraction;
    if (pred.empty()) {
      // Nothing cleared tau_prime: similarity and time terms are undefined,
      // keyframe count error is the whole ground truth.
      r.report.keyframe_num_err = sub_gt.size();
      r.report.cosine_simi_pct = 0.0;
      r.report.absolute_time_err_s = std::numeric_limits<double>::quiet_NaN();
      r.report.correct_time_err_s = std::numeric_limits<double>::quiet_NaN();
    } else {
      r.report = evaluate_detection(pred, sub_gt, sub_sim, exam.fps, settings.sim_threshold);
    }
    out.push_back(std::move(r));
  }
  return out;
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

}  // namespace

KeyframeSet remap_ground_truth(const KeyframeSet& gt, std::span<const std::size_t> retained,
                               const SimilarityMatrix& sim) {
  if (retained.empty()) throw Error(ErrorCode::EmptySet, "no retained frames");
  std::vector<std::size_t> mapped;
  for (std::size_t g : gt.indices) {
    const auto it = std::lower_bound(retained.begin(), retained.end(), g);
    if (it != retained.end() && *it == g) {
      mapped.push_back(static_cast<std::size_t>(it - retained.begin()));
      continue;
    }
    std::size_t best = 0;
    for (std::size_t k = 1; k < retained.size(); ++k) {
      if (sim(g, retained[k]) > sim(g, retained[best])) best = k;
    }
    mapped.push_back(best);
  }
  std::sort(mapped.begin(), mapped.end());
  mapped.erase(std::unique(mapped.begin(), mapped.end()), mapped.end());
  KeyframeSet out;
  out.indices = mapped;
  out.scores.assign(mapped.size(), 1.0);
  return out;
}

MetricStats mean_std(std::span<const double> values) {
  MetricStats s;
  if (values.empty()) return s;
  double sum = 0.0;
  for (double v : values) sum += v;
  s.mean = sum / static_cast<double>(values.size());
  double sq = 0.0;
  for (double v : values) sq += (v - s.mean) * (v - s.mean);
  s.stddev = std::sqrt(sq / static_cast<double>(values.size()));
  return s;
}

DropTable simulate_drop_table(const std::vector<DropExam>& exams, const DropSettings& settings) {
  if (exams.empty()) throw Error(ErrorCode::InsufficientData, "no exams to simulate");
  settings.detection.validate();
  std::vector<const DropExam*> order;
  for (const auto& e : exams) order.push_back(&e);
  std::stable_sort(order.begin(), order.end(),
                   [](const DropExam* a, const DropExam* b) { return a->exam_id < b->exam_id; });

  std::vector<std::vector<DropExamResult>> results(order.size());
  std::vector<std::string> errors(order.size());
  std::size_t next = 0;
  std::mutex mu;
  auto worker = [&]() {
    while (true) {
      std::size_t k;
      {
        std::lock_guard<std::mutex> lock(mu);
        if (next >= order.size()) return;
        k = next++;
      }
      try {
        results[k] = run_exam(*order[k], settings.seed + k, settings);
      } catch (const std::exception& e) {
        errors[k] = "exam " + order[k]->exam_id + ": " + e.what();
      }
    }
  };
  const unsigned jobs = std::max(1u, std::min<unsigned>(settings.jobs,
                                                        static_cast<unsigned>(order.size())));
  std::vector<std::thread> pool;
  for (unsigned j = 1; j < jobs; ++j) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  for (std::size_t k = 0; k < order.size(); ++k) {
    if (!errors[k].empty()) {
      // Rethrow with exam context; the category is lost across threads, so
      // re-run serially to surface the original error type.
      try {
        run_exam(*order[k], settings.seed + k, settings);
      } catch (const Error& e) {
        throw Error(e.code(), "exam " + order[k]->exam_id + ": " + e.what());
      }
      throw std::runtime_error(errors[k]);
    }
  }

  DropTable table;
  for (std::size_t f = 0; f < settings.fractions.size(); ++f) {
    DropRow row;
    row.drop_fraction = settings.fractions[f];
    row.exams = order.size();
    std::vector<double> saved, metric[4];
    for (const auto& per : results) {
      const DropExamResult& r = per[f];
      saved.push_back(r.scan_time_saved_pct);
      for (std::size_t k = 0; k < 4; ++k) metric[k].push_back(metric_value(r.report, k));
      table.per_exam.push_back(r);
    }
    row.scan_time_saved_pct = mean_std(saved).mean;
    row.cosine_simi_pct = mean_std(metric[0]);
    row.absolute_time_err_s = mean_std(metric[1]);
    row.correct_time_err_s = mean_std(metric[2]);
    row.keyframe_num_err = mean_std(metric[3]);
    table.rows.push_back(row);
  }
  return table;
}

std::string drop_table_csv(const DropTable& table) {
  std::string out =
      "drop_pct,scan_time_saved_pct,cosine_simi_pct_mean,cosine_simi_pct_std,"
      "absolute_time_err_s_mean,absolute_time_err_s_std,correct_time_err_s_mean,"
      "correct_time_err_s_std,keyframe_num_err_mean,keyframe_num_err_std,exams\n";
  for (const auto& r : table.rows) {
    out += fmt(100.0 * r.drop_fraction) + "," + fmt(r.scan_time_saved_pct) + "," +
           fmt(r.cosine_simi_pct.mean) + "," + fmt(r.cosine_simi_pct.stddev) + "," +
           fmt(r.absolute_time_err_s.mean) + "," + fmt(r.absolute_time_err_s.stddev) + "," +
           fmt(r.correct_time_err_s.mean) + "," + fmt(r.correct_time_err_s.stddev) + "," +
           fmt(r.keyframe_num_err.mean) + "," + fmt(r.keyframe_num_err.stddev) + "," +
           std::to_string(r.exams) + "\n";
  }
  return out;
}

WelchResult welch_t_test(std::span<const double> a, std::span<const double> b) {
  if (a.size() < 2 || b.size() < 2) {
    throw Error(ErrorCode::InsufficientData, "t-test needs at least two values per group");
  }
  auto sample_stats = [](std::span<const double> v) {
    double sum = 0.0;
    for (double x : v) sum += x;
    const double mean = sum / static_cast<double>(v.size());
    double sq = 0.0;
    for (double x : v) sq += (x - mean) * (x - mean);
    return std::pair{mean, sq / static_cast<double>(v.size() - 1)};
  };
  const auto [ma, va] = sample_stats(a);
  const auto [mb, vb] = sample_stats(b);
  const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
  const double se2 = va / na + vb / nb;
  WelchResult r;
  if (se2 == 0.0) {
    r.df = na + nb - 2.0;
    if (ma == mb) {
      r.t = 0.0;
      r.p = 1.0;
    } else {
      r.t = ma > mb ? std::numeric_limits<double>::infinity()
                    : -std::numeric_limits<double>::infinity();
      r.p = 0.0;
    }
    return r;
  }
  r.t = (ma - mb) / std::sqrt(se2);
  r.df = se2 * se2 /
         ((va / na) * (va / na) / (na - 1.0) + (vb / nb) * (vb / nb) / (nb - 1.0));
  const boost::math::students_t dist(r.df);
  r.p = 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(r.t)));
  r.p = std::min(1.0, r.p);
  return r;
}

AggregateResult aggregate(const std::vector<DetectionReport>& reports) {
  if (reports.size() < 2) throw Error(ErrorCode::InsufficientData, "aggregate needs >= 2 reports");
  AggregateResult out;
  out.reports = reports.size();
  for (std::size_t k = 0; k < 4; ++k) {
    std::vector<double> v;
    for (const auto& r : reports) v.push_back(metric_value(r, k));
    out.metrics[kMetricNames[k]] = mean_std(v);
  }
  return out;
}

AggregateResult aggregate(const std::vector<DetectionReport>& group_a,
                          const std::vector<DetectionReport>& group_b) {
  if (group_a.empty() || group_b.empty()) {
    throw Error(ErrorCode::InsufficientData, "both groups must be nonempty");
  }
  std::vector<DetectionReport> all = group_a;
  all.insert(all.end(), group_b.begin(), group_b.end());
  AggregateResult out = aggregate(all);
  for (std::size_t k = 0; k < 4; ++k) {
    std::vector<double> va, vb;
    for (const auto& r : group_a) va.push_back(metric_value(r, k));
    for (const auto& r : group_b) vb.push_back(metric_value(r, k));
    out.metrics[std::string("A.") + kMetricNames[k]] = mean_std(va);
    out.metrics[std::string("B.") + kMetricNames[k]] = mean_std(vb);
    out.t_tests[kMetricNames[k]] = welch_t_test(va, vb);
  }
  return out;
}

std::string aggregate_to_json(const AggregateResult& result) {
  nlohmann::json metrics = nlohmann::json::object();
  for (const auto& [name, s] : result.metrics) {
    metrics[name] = {{"mean", s.mean}, {"std", s.stddev}};
  }
  nlohmann::json tests = nlohmann::json::object();
  for (const auto& [name, w] : result.t_tests) {
    auto num = [](double v) {
      return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(v > 0 ? "inf" : "-inf");
    };
    tests[name] = {{"t", num(w.t)}, {"df", w.df}, {"p", w.p}};
  }
  return canonical_dump(
      {{"reports", result.reports}, {"metrics", metrics}, {"t_tests", tests}});
}

}  // namespace scansum
