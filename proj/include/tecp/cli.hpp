#pragma once

// Command implementations behind the `tecp` executable. Each returns the
// process exit status and writes human-readable output to the given streams.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "tecp/calibration.hpp"
#include "tecp/evaluation.hpp"
#include "tecp/synth.hpp"

namespace tecp {

struct RunSpec {
  std::vector<std::filesystem::path> inputs;

  SimilarityConfig similarity;
  ScoreConfig score;
  double tau = 0.9;
  double correctness_threshold = 0.7;
  ScoreVariant score_variant = ScoreVariant::correct_only;

  std::vector<double> alphas = {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};
  std::vector<double> split_ratios = {0.5};
  std::vector<std::uint64_t> seeds;  // explicit list; empty means seed0 + [0, seed_count)
  std::uint64_t seed0 = 0;
  std::size_t seed_count = 100;

  std::filesystem::path output_dir;
  bool write_csv = true;
  bool write_json = false;
  std::size_t workers = 1;

  std::vector<std::uint64_t> resolved_seeds() const;
  void validate() const;
};

// Runs every (alpha, ratio, seed) trial on an already-loaded dataset. Results
// are sorted by (alpha, split_ratio, seed) regardless of worker count.
std::vector<TrialResult> run_sweep(const std::vector<GenerationRecord>& records, const RunSpec& spec);

// Number formatting for report files: locale-independent, "inf" for infinity.
std::string format_full(double value);          // shortest round-trip
std::string format_significant(double value);   // 6 significant digits

void write_trials_csv(std::ostream& out, const std::vector<TrialResult>& trials, const RunSpec& spec);
void write_summary_csv(std::ostream& out, const SweepSummary& summary);
nlohmann::json trials_json(const std::vector<TrialResult>& trials, const RunSpec& spec);
nlohmann::json summary_json(const SweepSummary& summary);

std::string sha256_hex(const std::string& bytes);

int cmd_validate(const std::filesystem::path& input, std::ostream& out, std::ostream& err);
int cmd_synth(const SynthConfig& cfg, const std::filesystem::path& output, std::ostream& out,
              std::ostream& err);
int cmd_run(const RunSpec& spec, std::ostream& out, std::ostream& err);

std::string tool_version();

}  // namespace tecp
