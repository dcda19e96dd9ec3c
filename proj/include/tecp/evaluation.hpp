#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "tecp/calibration.hpp"

namespace tecp {

struct TrialResult {
  double alpha = 0.0;
  double split_ratio = 0.0;
  std::uint64_t seed = 0;
  double emr = 0.0;
  double coverage = 0.0;
  double apss = 0.0;
  double q_hat = 0.0;
  double q_level = 0.0;
  std::size_t n_scores = 0;  // |R|
  std::size_t n_cal = 0;
  std::size_t n_test = 0;
  std::size_t n_filtered_out = 0;
  ScoreMethod score_method = ScoreMethod::token_entropy;

  friend bool operator==(const TrialResult&, const TrialResult&) = default;
};

struct MetricSummary {
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation, 0 for a single trial
};

struct SummaryRow {
  double alpha = 0.0;
  double split_ratio = 0.0;
  std::size_t n_seeds = 0;
  MetricSummary emr;
  MetricSummary coverage;
  MetricSummary apss;
};

struct SweepSummary {
  ScoreMethod score_method = ScoreMethod::token_entropy;
  std::vector<SummaryRow> rows;  // ascending (alpha, split_ratio)
};

bool is_covered(const ScoredRecord& scored, const PredictionSet& set, double correctness_threshold);

double emr(std::span<const ScoredRecord> test, std::span<const PredictionSet> sets,
           double correctness_threshold);

double apss(std::span<const PredictionSet> sets);

// Records resolved, scored and passed through the assessability filter. Built
// once per dataset; every (alpha, ratio, seed) trial starts from it.
struct PreparedDataset {
  std::vector<ScoredRecord> assessable;
  std::size_t n_filtered_out = 0;
  std::size_t candidate_count = 0;
  ScoreMethod score_method = ScoreMethod::token_entropy;
};

PreparedDataset prepare_dataset(const std::vector<GenerationRecord>& records,
                                const SimilarityConfig& sim_cfg, const ScoreConfig& score_cfg,
                                double tau);

// One split (cfg.split_ratio, cfg.seed) evaluated at every alpha in `alphas`;
// cfg.alpha is ignored. Result i matches run_trial with alpha = alphas[i].
std::vector<TrialResult> run_split(const PreparedDataset& prepared, const CalibrationConfig& cfg,
                                   std::span<const double> alphas);

// resolve -> score -> filter -> split -> multiset -> threshold -> sets -> metrics.
TrialResult run_trial(const std::vector<GenerationRecord>& records, const ScoreConfig& score_cfg,
                      const CalibrationConfig& cal_cfg, const SimilarityConfig& sim_cfg = {});

SweepSummary aggregate(std::span<const TrialResult> trials);

}  // namespace tecp
