#include "tecp/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <tuple>
#include <utility>

#include "tecp/error.hpp"

namespace tecp {

namespace {

template <typename F>
auto in_stage(const char* stage, F&& body) -> decltype(body()) {
  try {
    return body();
  } catch (const PipelineError&) {
    throw;
  } catch (const std::exception& e) {
    throw PipelineError(stage, e.what());
  }
}

MetricSummary summarize(const std::vector<double>& values) {
  MetricSummary s;
  const auto n = static_cast<double>(values.size());
  for (double v : values) s.mean += v;
  s.mean /= n;
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - s.mean) * (v - s.mean);
    s.std = std::sqrt(ss / (n - 1.0));
  }
  return s;
}

}  // namespace

bool is_covered(const ScoredRecord& scored, const PredictionSet& set, double correctness_threshold) {
  const auto& candidates = scored.record->candidates;
  return std::any_of(set.member_indices.begin(), set.member_indices.end(), [&](std::size_t m) {
    const auto& sim = candidates.at(m).ref_similarity;
    if (!sim) throw Error("record '" + scored.record->id + "': ref_similarity unresolved");
    return *sim >= correctness_threshold;
  });
}

double emr(std::span<const ScoredRecord> test, std::span<const PredictionSet> sets,
           double correctness_threshold) {
  if (test.empty()) throw Error("empty test split");
  if (test.size() != sets.size()) throw Error("test records and prediction sets differ in length");
  std::size_t missed = 0;
  for (std::size_t i = 0; i < test.size(); ++i) {
    if (test[i].record->id != sets[i].record_id) {
      throw Error("prediction set for '" + sets[i].record_id + "' aligned with record '" +
                  test[i].record->id + "'");
    }
    if (!is_covered(test[i], sets[i], correctness_threshold)) ++missed;
  }
  return static_cast<double>(missed) / static_cast<double>(test.size());
}

double apss(std::span<const PredictionSet> sets) {
  if (sets.empty()) throw Error("no prediction sets");
  std::size_t total = 0;
  for (const auto& s : sets) total += s.set_size();
  return static_cast<double>(total) / static_cast<double>(sets.size());
}

PreparedDataset prepare_dataset(const std::vector<GenerationRecord>& records,
                                const SimilarityConfig& sim_cfg, const ScoreConfig& score_cfg,
                                double tau) {
  PreparedDataset prepared;
  prepared.score_method = score_cfg.method;
  prepared.candidate_count =
      in_stage("load", [&] { return require_uniform_candidate_count(records); });

  std::vector<ScoredRecord> scored;
  scored.reserve(records.size());
  for (const auto& r : records) {
    auto resolved = in_stage("resolve", [&] {
      return std::make_shared<const GenerationRecord>(resolve_similarities(r, sim_cfg));
    });
    scored.push_back(in_stage("score", [&] { return score_record(std::move(resolved), score_cfg); }));
  }

  prepared.assessable = in_stage("filter", [&] { return filter_assessable(scored, tau); });
  prepared.n_filtered_out = records.size() - prepared.assessable.size();
  return prepared;
}

std::vector<TrialResult> run_split(const PreparedDataset& prepared, const CalibrationConfig& cfg,
                                   std::span<const double> alphas) {
  in_stage("config", [&] {
    for (double a : alphas) {
      auto c = cfg;
      c.alpha = a;
      c.validate();
    }
  });

  const auto split = in_stage("split", [&] {
    return split_cal_test(prepared.assessable, cfg.split_ratio, cfg.seed);
  });
  const auto multiset = in_stage("multiset", [&] {
    return build_score_multiset(split.calibration, cfg);
  });

  std::vector<TrialResult> results;
  results.reserve(alphas.size());
  for (double alpha : alphas) {
    const auto calibration = in_stage("quantile", [&] {
      auto r = conformal_quantile(multiset, alpha);
      r.score_variant = cfg.score_variant;
      return r;
    });

    TrialResult t;
    t.alpha = alpha;
    t.split_ratio = cfg.split_ratio;
    t.seed = cfg.seed;
    t.q_hat = calibration.q_hat;
    t.q_level = calibration.q_level;
    t.n_scores = calibration.n;
    t.n_cal = split.calibration.size();
    t.n_test = split.test.size();
    t.n_filtered_out = prepared.n_filtered_out;
    t.score_method = prepared.score_method;

    in_stage("evaluate", [&] {
      std::vector<PredictionSet> sets;
      sets.reserve(split.test.size());
      for (const auto& r : split.test) sets.push_back(prediction_set(r, calibration.q_hat));
      t.emr = emr(split.test, sets, cfg.correctness_threshold);
      t.coverage = 1.0 - t.emr;
      t.apss = apss(sets);
    });
    results.push_back(t);
  }
  return results;
}

TrialResult run_trial(const std::vector<GenerationRecord>& records, const ScoreConfig& score_cfg,
                      const CalibrationConfig& cal_cfg, const SimilarityConfig& sim_cfg) {
  in_stage("config", [&] { cal_cfg.validate(); });
  const auto prepared = prepare_dataset(records, sim_cfg, score_cfg, cal_cfg.tau);
  const double alpha[] = {cal_cfg.alpha};
  return run_split(prepared, cal_cfg, alpha).front();
}

SweepSummary aggregate(std::span<const TrialResult> trials) {
  if (trials.empty()) throw Error("no trials to aggregate");
  std::vector<TrialResult> sorted(trials.begin(), trials.end());
  const auto method = sorted.front().score_method;
  for (const auto& t : sorted) {
    if (t.score_method != method) throw Error("trials mix score methods");
  }
  std::sort(sorted.begin(), sorted.end(), [](const TrialResult& a, const TrialResult& b) {
    return std::tie(a.alpha, a.split_ratio, a.seed) < std::tie(b.alpha, b.split_ratio, b.seed);
  });

  SweepSummary summary;
  summary.score_method = method;
  for (std::size_t begin = 0; begin < sorted.size();) {
    std::size_t end = begin;
    std::vector<double> emrs, coverages, sizes;
    while (end < sorted.size() && sorted[end].alpha == sorted[begin].alpha &&
           sorted[end].split_ratio == sorted[begin].split_ratio) {
      emrs.push_back(sorted[end].emr);
      coverages.push_back(sorted[end].coverage);
      sizes.push_back(sorted[end].apss);
      ++end;
    }
    SummaryRow row;
    row.alpha = sorted[begin].alpha;
    row.split_ratio = sorted[begin].split_ratio;
    row.n_seeds = end - begin;
    row.emr = summarize(emrs);
    row.coverage = summarize(coverages);
    row.apss = summarize(sizes);
    summary.rows.push_back(row);
    begin = end;
  }
  return summary;
}

}  // namespace tecp
