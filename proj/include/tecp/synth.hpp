#pragma once

// Synthetic datasets that are exchangeable by construction. Each candidate's
// score is planted as a single-position token entropy, so the regular scoring
// path recovers it exactly.

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "tecp/ingest.hpp"
#include "tecp/random.hpp"

namespace tecp {

enum class SynthMode { exact, realistic };

std::string_view to_string(SynthMode mode);
SynthMode parse_synth_mode(std::string_view name);

// Score distribution family. Scores are entropies, so support must be >= 0.
struct ScoreDistribution {
  enum class Family { uniform, exponential };

  Family family = Family::uniform;
  double a = 0.0;  // uniform: low;  exponential: shift
  double b = 1.0;  // uniform: high; exponential: rate

  static ScoreDistribution uniform(double low, double high) { return {Family::uniform, low, high}; }
  static ScoreDistribution exponential(double shift, double rate) {
    return {Family::exponential, shift, rate};
  }

  void validate() const;
  double draw(Rng& rng) const;

  // "uniform:LOW,HIGH" or "exponential:SHIFT,RATE"
  static ScoreDistribution parse(std::string_view text);
  std::string to_string() const;
};

struct SynthConfig {
  SynthMode mode = SynthMode::exact;
  std::size_t n_records = 1000;
  std::size_t m_candidates = 10;
  ScoreDistribution correct_scores = ScoreDistribution::uniform(0.0, 1.0);
  ScoreDistribution incorrect_scores = ScoreDistribution::uniform(0.5, 1.5);
  double correct_fraction = 0.3;  // realistic mode only
  bool agreement = false;         // realistic mode: same-correctness candidates agree
  std::uint64_t seed = 0;

  void validate() const;
};

std::vector<GenerationRecord> generate(const SynthConfig& cfg);

// Expected-coverage interval [1 - alpha, 1 - alpha + 1 / (n_cal + 1)] for
// exact-mode data, where each calibration record contributes one score.
std::pair<double, double> theoretical_coverage_bounds(std::size_t n_cal, double alpha);

}  // namespace tecp
