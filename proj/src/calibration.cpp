#include "tecp/calibration.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "tecp/error.hpp"
#include "tecp/random.hpp"

namespace tecp {

namespace {

// Keeps split streams apart from other consumers of the same user seed.
constexpr std::uint64_t kSplitStream = 0x73706c6974ULL;

double resolved_ref_similarity(const GenerationRecord& record, std::size_t m) {
  const auto& sim = record.candidates[m].ref_similarity;
  if (!sim) {
    throw Error("record '" + record.id + "' candidate " + std::to_string(m) +
                ": ref_similarity unresolved");
  }
  return *sim;
}

}  // namespace

std::string_view to_string(ScoreVariant variant) {
  switch (variant) {
    case ScoreVariant::correct_only: return "correct_only";
    case ScoreVariant::all_candidates: return "all_candidates";
  }
  return "?";
}

ScoreVariant parse_score_variant(std::string_view name) {
  for (auto v : {ScoreVariant::correct_only, ScoreVariant::all_candidates}) {
    if (to_string(v) == name) return v;
  }
  throw Error("unknown score variant '" + std::string(name) + "'");
}

void CalibrationConfig::validate() const {
  if (!(alpha > 0.0 && alpha < 1.0)) throw Error("alpha must lie in (0,1)");
  if (!(split_ratio > 0.0 && split_ratio < 1.0)) throw Error("split_ratio must lie in (0,1)");
  if (!(tau >= 0.0 && tau <= 1.0)) throw Error("tau must lie in [0,1]");
  if (!(correctness_threshold >= 0.0 && correctness_threshold <= 1.0)) {
    throw Error("correctness_threshold must lie in [0,1]");
  }
}

bool PredictionSet::contains(std::size_t index) const {
  return std::binary_search(member_indices.begin(), member_indices.end(), index);
}

double best_ref_similarity(const GenerationRecord& record) {
  double best = -std::numeric_limits<double>::infinity();
  for (std::size_t m = 0; m < record.candidates.size(); ++m) {
    best = std::max(best, resolved_ref_similarity(record, m));
  }
  return best;
}

std::vector<ScoredRecord> filter_assessable(std::span<const ScoredRecord> records, double tau) {
  std::vector<ScoredRecord> kept;
  for (const auto& r : records) {
    if (best_ref_similarity(*r.record) >= tau) kept.push_back(r);
  }
  if (kept.empty()) throw Error("no assessable samples at tau " + std::to_string(tau));
  return kept;
}

std::size_t calibration_size(std::size_t n, double split_ratio) {
  const auto target = std::llround(split_ratio * static_cast<double>(n));
  return static_cast<std::size_t>(std::clamp<long long>(target, 1, static_cast<long long>(n) - 1));
}

Split split_cal_test(std::span<const ScoredRecord> records, double split_ratio, std::uint64_t seed) {
  const std::size_t n = records.size();
  if (n < 2) throw Error("need at least 2 records to split, got " + std::to_string(n));
  if (!(split_ratio > 0.0 && split_ratio < 1.0)) throw Error("split_ratio must lie in (0,1)");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(seed, kSplitStream);
  rng.shuffle(std::span(order));

  const std::size_t n_cal = calibration_size(n, split_ratio);
  std::vector<bool> in_cal(n, false);
  for (std::size_t i = 0; i < n_cal; ++i) in_cal[order[i]] = true;

  Split split;
  split.calibration.reserve(n_cal);
  split.test.reserve(n - n_cal);
  for (std::size_t i = 0; i < n; ++i) {
    (in_cal[i] ? split.calibration : split.test).push_back(records[i]);
  }
  return split;
}

std::vector<double> build_score_multiset(std::span<const ScoredRecord> calibration,
                                         const CalibrationConfig& cfg) {
  std::vector<double> scores;
  for (const auto& r : calibration) {
    for (std::size_t m = 0; m < r.scores.size(); ++m) {
      if (cfg.score_variant == ScoreVariant::all_candidates ||
          resolved_ref_similarity(*r.record, m) >= cfg.correctness_threshold) {
        scores.push_back(r.scores[m]);
      }
    }
  }
  if (scores.empty()) throw Error("no calibration scores");
  return scores;
}

std::size_t conformal_rank(std::size_t n, double alpha) {
  const double x = (1.0 - alpha) * static_cast<double>(n + 1);
  const double nearest = std::round(x);
  const double k = std::abs(x - nearest) <= 1e-9 * std::max(1.0, x) ? nearest : std::ceil(x);
  return std::max<std::size_t>(1, static_cast<std::size_t>(k));
}

CalibrationResult conformal_quantile(std::vector<double> scores, double alpha) {
  if (scores.empty()) throw Error("empty score multiset");
  if (!(alpha > 0.0 && alpha < 1.0)) throw Error("alpha must lie in (0,1)");
  for (double s : scores) {
    if (std::isnan(s)) throw Error("NaN in score multiset");
  }

  const std::size_t n = scores.size();
  const std::size_t k = conformal_rank(n, alpha);
  CalibrationResult result;
  result.n = n;
  result.alpha = alpha;
  result.q_level = static_cast<double>(k) / static_cast<double>(n);
  if (k > n) {
    result.q_hat = std::numeric_limits<double>::infinity();
  } else {
    const auto kth = scores.begin() + static_cast<std::ptrdiff_t>(k - 1);
    std::nth_element(scores.begin(), kth, scores.end());
    result.q_hat = *kth;
  }
  return result;
}

PredictionSet prediction_set(const ScoredRecord& scored, double q_hat) {
  PredictionSet set;
  set.record_id = scored.record->id;
  for (std::size_t m = 0; m < scored.scores.size(); ++m) {
    if (scored.scores[m] <= q_hat) set.member_indices.push_back(m);
  }
  return set;
}

}  // namespace tecp
