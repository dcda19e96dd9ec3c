#pragma once

// Split conformal calibration: assessability filtering, the calibration/test
// split, the calibration score multiset, the conformal threshold and the
// resulting prediction sets.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "tecp/scoring.hpp"

namespace tecp {

enum class ScoreVariant { correct_only, all_candidates };

std::string_view to_string(ScoreVariant variant);
ScoreVariant parse_score_variant(std::string_view name);

struct CalibrationConfig {
  double alpha = 0.1;
  double tau = 0.9;
  double split_ratio = 0.5;
  std::uint64_t seed = 0;
  ScoreVariant score_variant = ScoreVariant::correct_only;
  double correctness_threshold = 0.7;

  void validate() const;
};

struct CalibrationResult {
  double q_hat = 0.0;  // +infinity when the rank exceeds n
  double q_level = 0.0;
  std::size_t n = 0;
  double alpha = 0.0;
  ScoreVariant score_variant = ScoreVariant::correct_only;
};

struct PredictionSet {
  std::string record_id;
  std::vector<std::size_t> member_indices;  // ascending

  std::size_t set_size() const noexcept { return member_indices.size(); }
  bool contains(std::size_t index) const;
};

struct Split {
  std::vector<ScoredRecord> calibration;
  std::vector<ScoredRecord> test;
};

// Highest ref_similarity among the record's candidates. Throws if any is unresolved.
double best_ref_similarity(const GenerationRecord& record);

std::vector<ScoredRecord> filter_assessable(std::span<const ScoredRecord> records, double tau);

// Size of the calibration side: round(ratio * n) clamped to [1, n - 1].
std::size_t calibration_size(std::size_t n, double split_ratio);

// Seeded uniform partition. Each side keeps input order.
Split split_cal_test(std::span<const ScoredRecord> records, double split_ratio, std::uint64_t seed);

std::vector<double> build_score_multiset(std::span<const ScoredRecord> calibration,
                                         const CalibrationConfig& cfg);

// Rank of the conformal order statistic, ceil((1 - alpha)(n + 1)). Products
// within 1e-9 of an integer are snapped to it first, so decimal alphas such
// as 0.7 do not pick up an extra rank from binary rounding.
std::size_t conformal_rank(std::size_t n, double alpha);

CalibrationResult conformal_quantile(std::vector<double> scores, double alpha);

PredictionSet prediction_set(const ScoredRecord& scored, double q_hat);

}  // namespace tecp
