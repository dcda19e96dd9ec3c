#pragma once

// Per-candidate uncertainty scores. Lower means more confident; these act as
// nonconformity scores for calibration.

#include <cstddef>
#include <memory>
#include <span>
#include <string_view>
#include <vector>

#include "tecp/ingest.hpp"

namespace tecp {

enum class ScoreMethod { token_entropy, consistency };
enum class EntropyAggregation { sum, mean };

std::string_view to_string(ScoreMethod method);
std::string_view to_string(EntropyAggregation aggregation);
ScoreMethod parse_score_method(std::string_view name);
EntropyAggregation parse_entropy_aggregation(std::string_view name);

struct ScoreConfig {
  ScoreMethod method = ScoreMethod::token_entropy;
  EntropyAggregation entropy_aggregation = EntropyAggregation::sum;
  double lambda = 0.5;                 // weight of the agreement frequency
  double equivalence_threshold = 0.9;  // S >= threshold counts as equivalent
  bool include_self = true;

  void validate() const;
};

struct ScoredRecord {
  std::shared_ptr<const GenerationRecord> record;
  std::vector<double> scores;  // one per candidate, candidate order
};

// Shannon entropy in nats, with 0 ln 0 = 0. Throws if any probability is
// negative or the row does not sum to 1 within kDistributionSumTolerance.
double entropy_at_position(std::span<const double> distribution);

// Sum (or mean) of per-position entropies. Precomputed token_entropies take
// precedence over token_distributions.
double token_entropy_score(const Candidate& candidate, const ScoreConfig& cfg);

// 1 - lambda * f - (1 - lambda) * s, where f is the fraction of candidates
// equivalent to candidate `index` and s its mean similarity to them. Needs a
// populated pairwise_similarity.
double consistency_score(std::size_t index, const GenerationRecord& record, const ScoreConfig& cfg);

ScoredRecord score_record(std::shared_ptr<const GenerationRecord> record, const ScoreConfig& cfg);
ScoredRecord score_record(const GenerationRecord& record, const ScoreConfig& cfg);

}  // namespace tecp
