// tecp: validate generation-record files, generate synthetic datasets, and run
// conformal calibration sweeps.

#include <algorithm>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "tecp/cli.hpp"
#include "tecp/error.hpp"

namespace {

template <typename Parse>
auto enum_option(CLI::App& app, const std::string& name, std::string& storage,
                 const std::string& help, Parse parse) {
  return app.add_option(name, storage, help)
      ->check([parse](const std::string& value) -> std::string {
        try {
          parse(value);
          return {};
        } catch (const tecp::Error& e) {
          return e.what();
        }
      })
      ->capture_default_str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Token-entropy conformal prediction engine"};
  app.set_version_flag("--version", "tecp " + tecp::tool_version());
  app.require_subcommand(1);

  // validate
  auto* validate = app.add_subcommand("validate", "Check a record file against the schema");
  std::string validate_input;
  validate->add_option("input", validate_input, "Line-delimited record file")->required();

  // synth
  auto* synth = app.add_subcommand("synth", "Write a synthetic exchangeable dataset");
  tecp::SynthConfig synth_cfg;
  std::string synth_mode = "exact";
  std::string correct_dist = synth_cfg.correct_scores.to_string();
  std::string incorrect_dist = synth_cfg.incorrect_scores.to_string();
  std::string synth_output;
  enum_option(*synth, "--mode", synth_mode, "exact | realistic", tecp::parse_synth_mode);
  synth->add_option("--n-records", synth_cfg.n_records, "Number of records")->capture_default_str();
  synth->add_option("--m-candidates", synth_cfg.m_candidates, "Candidates per record")
      ->capture_default_str();
  synth->add_option("--correct-score-distribution", correct_dist,
                    "uniform:LOW,HIGH or exponential:SHIFT,RATE")
      ->capture_default_str();
  synth->add_option("--incorrect-score-distribution", incorrect_dist,
                    "uniform:LOW,HIGH or exponential:SHIFT,RATE")
      ->capture_default_str();
  synth->add_option("--correct-fraction", synth_cfg.correct_fraction,
                    "Realistic mode: per-candidate probability of being correct")
      ->capture_default_str();
  synth->add_flag("--agreement", synth_cfg.agreement,
                  "Realistic mode: candidates with equal correctness are fully similar");
  synth->add_option("--seed", synth_cfg.seed, "Generator seed")->capture_default_str();
  synth->add_option("--output", synth_output, "Output file")->required();

  // run
  auto* run = app.add_subcommand("run", "Run an alpha x split-ratio x seed calibration sweep");
  tecp::RunSpec spec;
  std::vector<std::string> inputs;
  std::string similarity_source{tecp::to_string(spec.similarity.source)};
  std::string score_method{tecp::to_string(spec.score.method)};
  std::string aggregation{tecp::to_string(spec.score.entropy_aggregation)};
  std::string score_variant{tecp::to_string(spec.score_variant)};
  std::string output_dir;
  std::vector<std::string> formats = {"csv"};
  run->add_option("--input", inputs, "Record file(s)")->required();
  enum_option(*run, "--similarity-source", similarity_source,
              "provided_only | builtin_fallback | builtin_only", tecp::parse_similarity_source);
  enum_option(*run, "--score-method", score_method, "token_entropy | consistency",
              tecp::parse_score_method);
  enum_option(*run, "--entropy-aggregation", aggregation, "sum | mean",
              tecp::parse_entropy_aggregation);
  run->add_option("--lambda", spec.score.lambda, "Consistency weight of agreement frequency")
      ->capture_default_str();
  run->add_option("--equivalence-threshold", spec.score.equivalence_threshold,
                  "Similarity at which two candidates count as equivalent")
      ->capture_default_str();
  run->add_option("--include-self", spec.score.include_self,
                  "Count a candidate among its own peers (true | false)")
      ->capture_default_str();
  run->add_option("--tau", spec.tau, "Assessability threshold")->capture_default_str();
  run->add_option("--correctness-threshold", spec.correctness_threshold,
                  "ref_similarity at which a candidate is correct")
      ->capture_default_str();
  enum_option(*run, "--score-variant", score_variant, "correct_only | all_candidates",
              tecp::parse_score_variant);
  run->add_option("--alphas", spec.alphas, "Risk levels")->delimiter(',')->capture_default_str();
  run->add_option("--split-ratios", spec.split_ratios, "Calibration fractions")
      ->delimiter(',')
      ->capture_default_str();
  auto* seeds_opt = run->add_option("--seeds", spec.seeds, "Explicit seed list")->delimiter(',');
  run->add_option("--seed0", spec.seed0, "First seed of a consecutive range")
      ->capture_default_str()
      ->excludes(seeds_opt);
  run->add_option("--seed-count", spec.seed_count, "Number of consecutive seeds")
      ->capture_default_str()
      ->excludes(seeds_opt);
  run->add_option("--output-dir", output_dir, "Directory for trials/summary/manifest")->required();
  run->add_option("--output-formats", formats, "csv and/or json")
      ->delimiter(',')
      ->check(CLI::IsMember({"csv", "json"}))
      ->capture_default_str();
  run->add_option("--workers", spec.workers, "Concurrent trial workers")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  try {
    if (validate->parsed()) return tecp::cmd_validate(validate_input, std::cout, std::cerr);

    if (synth->parsed()) {
      synth_cfg.mode = tecp::parse_synth_mode(synth_mode);
      synth_cfg.correct_scores = tecp::ScoreDistribution::parse(correct_dist);
      synth_cfg.incorrect_scores = tecp::ScoreDistribution::parse(incorrect_dist);
      return tecp::cmd_synth(synth_cfg, synth_output, std::cout, std::cerr);
    }

    spec.inputs.assign(inputs.begin(), inputs.end());
    spec.similarity.source = tecp::parse_similarity_source(similarity_source);
    spec.similarity.equivalence_threshold = spec.score.equivalence_threshold;
    spec.score.method = tecp::parse_score_method(score_method);
    spec.score.entropy_aggregation = tecp::parse_entropy_aggregation(aggregation);
    spec.score_variant = tecp::parse_score_variant(score_variant);
    spec.output_dir = output_dir;
    spec.write_csv = std::find(formats.begin(), formats.end(), "csv") != formats.end();
    spec.write_json = std::find(formats.begin(), formats.end(), "json") != formats.end();
    return tecp::cmd_run(spec, std::cout, std::cerr);
  } catch (const tecp::Error& e) {
    std::cerr << "tecp: " << e.what() << '\n';
    return 1;
  }
}
