#include "tecp/scoring.hpp"

#include <algorithm>
#include <cmath>

#include "tecp/error.hpp"

namespace tecp {

std::string_view to_string(ScoreMethod method) {
  switch (method) {
    case ScoreMethod::token_entropy: return "token_entropy";
    case ScoreMethod::consistency: return "consistency";
  }
  return "?";
}

std::string_view to_string(EntropyAggregation aggregation) {
  switch (aggregation) {
    case EntropyAggregation::sum: return "sum";
    case EntropyAggregation::mean: return "mean";
  }
  return "?";
}

ScoreMethod parse_score_method(std::string_view name) {
  for (auto m : {ScoreMethod::token_entropy, ScoreMethod::consistency}) {
    if (to_string(m) == name) return m;
  }
  throw Error("unknown score method '" + std::string(name) + "'");
}

EntropyAggregation parse_entropy_aggregation(std::string_view name) {
  for (auto a : {EntropyAggregation::sum, EntropyAggregation::mean}) {
    if (to_string(a) == name) return a;
  }
  throw Error("unknown entropy aggregation '" + std::string(name) + "'");
}

void ScoreConfig::validate() const {
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw Error("lambda must lie in [0,1]");
  if (!(equivalence_threshold >= 0.0 && equivalence_threshold <= 1.0)) {
    throw Error("equivalence_threshold must lie in [0,1]");
  }
}

double entropy_at_position(std::span<const double> distribution) {
  double sum = 0.0;
  double entropy = 0.0;
  for (double p : distribution) {
    if (!(p >= 0.0)) throw Error("negative probability in token distribution");
    sum += p;
    if (p > 0.0) entropy -= p * std::log(p);
  }
  if (!(std::abs(sum - 1.0) <= kDistributionSumTolerance)) {
    throw Error("token distribution sums to " + std::to_string(sum) + ", expected 1");
  }
  // Probabilities a hair above 1 (within tolerance) can push a one-hot row below zero.
  return std::max(entropy, 0.0);
}

double token_entropy_score(const Candidate& candidate, const ScoreConfig& cfg) {
  double total = 0.0;
  std::size_t length = 0;
  if (candidate.token_entropies) {
    length = candidate.token_entropies->size();
    for (double h : *candidate.token_entropies) total += h;
  } else if (candidate.token_distributions) {
    length = candidate.token_distributions->size();
    for (const auto& row : *candidate.token_distributions) total += entropy_at_position(row);
  } else {
    throw Error("entropy inputs missing");
  }
  if (length == 0) throw Error("empty candidate");
  if (cfg.entropy_aggregation == EntropyAggregation::mean) {
    return total / static_cast<double>(length);
  }
  return total;
}

double consistency_score(std::size_t index, const GenerationRecord& record, const ScoreConfig& cfg) {
  if (!record.pairwise_similarity) throw Error("pairwise_similarity missing");
  const auto& s = *record.pairwise_similarity;
  const std::size_t m = record.candidates.size();
  if (index >= m || s.size() != m || s[index].size() != m) {
    throw Error("pairwise_similarity does not match candidate count");
  }
  const std::size_t peers = cfg.include_self ? m : m - 1;
  if (peers == 0) throw Error("no peers");

  std::size_t equivalent = 0;
  double similarity = 0.0;
  for (std::size_t j = 0; j < m; ++j) {
    if (j == index && !cfg.include_self) continue;
    if (s[j][index] >= cfg.equivalence_threshold) ++equivalent;
    similarity += s[index][j];
  }
  const double denom = static_cast<double>(peers);
  const double frequency = static_cast<double>(equivalent) / denom;
  const double mean_similarity = similarity / denom;
  const double u = 1.0 - cfg.lambda * frequency - (1.0 - cfg.lambda) * mean_similarity;
  return std::clamp(u, 0.0, 1.0);
}

ScoredRecord score_record(std::shared_ptr<const GenerationRecord> record, const ScoreConfig& cfg) {
  cfg.validate();
  ScoredRecord out;
  out.scores.reserve(record->candidates.size());
  for (std::size_t m = 0; m < record->candidates.size(); ++m) {
    try {
      const double u = cfg.method == ScoreMethod::token_entropy
                           ? token_entropy_score(record->candidates[m], cfg)
                           : consistency_score(m, *record, cfg);
      if (!std::isfinite(u)) throw Error("non-finite score");
      out.scores.push_back(u);
    } catch (const Error& e) {
      throw Error("record '" + record->id + "' candidate " + std::to_string(m) + ": " + e.what());
    }
  }
  out.record = std::move(record);
  return out;
}

ScoredRecord score_record(const GenerationRecord& record, const ScoreConfig& cfg) {
  return score_record(std::make_shared<const GenerationRecord>(record), cfg);
}

}  // namespace tecp
