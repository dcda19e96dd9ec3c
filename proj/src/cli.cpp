#include "tecp/cli.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <fstream>
#include <mutex>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <thread>
#include <tuple>

#include "tecp/error.hpp"

#ifndef TECP_VERSION
#define TECP_VERSION "0.0.0"
#endif

namespace tecp {

using nlohmann::json;

namespace {

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  if (in.bad()) throw Error("error reading " + path.string());
  return buffer.str();
}

void write_file(const std::filesystem::path& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out << contents;
  out.flush();
  if (!out) throw Error("error writing " + path.string());
}

template <typename T>
void require_unique(std::vector<T> values, const char* what) {
  std::sort(values.begin(), values.end());
  if (std::adjacent_find(values.begin(), values.end()) != values.end()) {
    throw Error(std::string("duplicate value in ") + what);
  }
}

std::string trial_label(double alpha, double ratio, std::uint64_t seed) {
  return "alpha=" + format_full(alpha) + " split_ratio=" + format_full(ratio) +
         " seed=" + std::to_string(seed);
}

// Runs one (ratio, seed) split over every alpha. On failure, re-runs alphas
// one at a time so the error names the exact trial.
std::vector<TrialResult> run_task(const PreparedDataset& prepared, CalibrationConfig cfg,
                                  const std::vector<double>& alphas) {
  try {
    return run_split(prepared, cfg, alphas);
  } catch (const std::exception& whole) {
    for (double alpha : alphas) {
      try {
        const double one[] = {alpha};
        run_split(prepared, cfg, one);
      } catch (const std::exception& e) {
        throw Error("trial " + trial_label(alpha, cfg.split_ratio, cfg.seed) + " failed: " + e.what());
      }
    }
    throw Error("trial " + trial_label(alphas.front(), cfg.split_ratio, cfg.seed) +
                " failed: " + whole.what());
  }
}

json config_json(const RunSpec& spec) {
  json j;
  j["similarity_source"] = to_string(spec.similarity.source);
  j["equivalence_threshold"] = spec.score.equivalence_threshold;
  j["score_method"] = to_string(spec.score.method);
  j["entropy_aggregation"] = to_string(spec.score.entropy_aggregation);
  j["lambda"] = spec.score.lambda;
  j["include_self"] = spec.score.include_self;
  j["tau"] = spec.tau;
  j["correctness_threshold"] = spec.correctness_threshold;
  j["score_variant"] = to_string(spec.score_variant);
  j["alphas"] = spec.alphas;
  j["split_ratios"] = spec.split_ratios;
  j["seeds"] = spec.resolved_seeds();
  j["workers"] = spec.workers;
  json formats = json::array();
  if (spec.write_csv) formats.push_back("csv");
  if (spec.write_json) formats.push_back("json");
  j["output_formats"] = formats;
  return j;
}

}  // namespace

std::vector<std::uint64_t> RunSpec::resolved_seeds() const {
  if (!seeds.empty()) return seeds;
  std::vector<std::uint64_t> out(seed_count);
  for (std::size_t i = 0; i < seed_count; ++i) out[i] = seed0 + i;
  return out;
}

void RunSpec::validate() const {
  if (alphas.empty()) throw Error("no alpha values");
  for (double a : alphas) {
    if (!(a > 0.0 && a < 1.0)) throw Error("alpha values must lie in (0,1)");
  }
  if (split_ratios.empty()) throw Error("no split ratios");
  for (double r : split_ratios) {
    if (!(r > 0.0 && r < 1.0)) throw Error("split ratios must lie in (0,1)");
  }
  const auto all_seeds = resolved_seeds();
  if (all_seeds.empty()) throw Error("at least one seed is required");
  require_unique(alphas, "alphas");
  require_unique(split_ratios, "split ratios");
  require_unique(all_seeds, "seeds");
  if (!(tau >= 0.0 && tau <= 1.0)) throw Error("tau must lie in [0,1]");
  if (!(correctness_threshold >= 0.0 && correctness_threshold <= 1.0)) {
    throw Error("correctness threshold must lie in [0,1]");
  }
  score.validate();
  if (workers < 1) throw Error("workers must be >= 1");
}

std::vector<TrialResult> run_sweep(const std::vector<GenerationRecord>& records, const RunSpec& spec) {
  spec.validate();
  const auto prepared = prepare_dataset(records, spec.similarity, spec.score, spec.tau);

  struct Task {
    double ratio;
    std::uint64_t seed;
  };
  std::vector<Task> tasks;
  for (double ratio : spec.split_ratios) {
    for (auto seed : spec.resolved_seeds()) tasks.push_back({ratio, seed});
  }

  CalibrationConfig base;
  base.tau = spec.tau;
  base.correctness_threshold = spec.correctness_threshold;
  base.score_variant = spec.score_variant;

  std::vector<std::vector<TrialResult>> per_task(tasks.size());
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::mutex error_mutex;
  std::optional<std::pair<std::size_t, std::string>> first_error;  // lowest failing task

  const auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= tasks.size() || failed.load()) return;
      auto cfg = base;
      cfg.split_ratio = tasks[i].ratio;
      cfg.seed = tasks[i].seed;
      try {
        per_task[i] = run_task(prepared, cfg, spec.alphas);
      } catch (const std::exception& e) {
        std::lock_guard lock(error_mutex);
        if (!first_error || i < first_error->first) first_error.emplace(i, e.what());
        failed = true;
      }
    }
  };

  const std::size_t n_workers = std::min(spec.workers, std::max<std::size_t>(tasks.size(), 1));
  if (n_workers <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < n_workers; ++w) pool.emplace_back(worker);
  }
  if (first_error) throw Error(first_error->second);

  std::vector<TrialResult> trials;
  for (auto& batch : per_task) trials.insert(trials.end(), batch.begin(), batch.end());
  std::sort(trials.begin(), trials.end(), [](const TrialResult& a, const TrialResult& b) {
    return std::tie(a.alpha, a.split_ratio, a.seed) < std::tie(b.alpha, b.split_ratio, b.seed);
  });
  return trials;
}

std::string format_full(double value) {
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  if (std::isnan(value)) return "nan";
  char buf[64];
  const auto result = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, result.ptr);
}

std::string format_significant(double value) {
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  if (std::isnan(value)) return "nan";
  char buf[64];
  const auto result = std::to_chars(buf, buf + sizeof buf, value, std::chars_format::general, 6);
  return std::string(buf, result.ptr);
}

void write_trials_csv(std::ostream& out, const std::vector<TrialResult>& trials, const RunSpec& spec) {
  out << "alpha,split_ratio,seed,score_method,entropy_aggregation,lambda,tau,correctness_threshold,"
         "score_variant,n_filtered_out,n_cal,n_test,q_level,q_hat,emr,coverage,apss\n";
  for (const auto& t : trials) {
    out << format_full(t.alpha) << ',' << format_full(t.split_ratio) << ',' << t.seed << ','
        << to_string(t.score_method) << ',' << to_string(spec.score.entropy_aggregation) << ','
        << format_full(spec.score.lambda) << ',' << format_full(spec.tau) << ','
        << format_full(spec.correctness_threshold) << ',' << to_string(spec.score_variant) << ','
        << t.n_filtered_out << ',' << t.n_cal << ',' << t.n_test << ',' << format_full(t.q_level)
        << ',' << format_full(t.q_hat) << ',' << format_significant(t.emr) << ','
        << format_significant(t.coverage) << ',' << format_significant(t.apss) << '\n';
  }
}

void write_summary_csv(std::ostream& out, const SweepSummary& summary) {
  out << "alpha,split_ratio,score_method,n_seeds,emr_mean,emr_std,coverage_mean,coverage_std,"
         "apss_mean,apss_std\n";
  for (const auto& row : summary.rows) {
    out << format_full(row.alpha) << ',' << format_full(row.split_ratio) << ','
        << to_string(summary.score_method) << ',' << row.n_seeds << ','
        << format_significant(row.emr.mean) << ',' << format_significant(row.emr.std) << ','
        << format_significant(row.coverage.mean) << ',' << format_significant(row.coverage.std)
        << ',' << format_significant(row.apss.mean) << ',' << format_significant(row.apss.std)
        << '\n';
  }
}

json trials_json(const std::vector<TrialResult>& trials, const RunSpec& spec) {
  json rows = json::array();
  for (const auto& t : trials) {
    json row;
    row["alpha"] = t.alpha;
    row["split_ratio"] = t.split_ratio;
    row["seed"] = t.seed;
    row["score_method"] = to_string(t.score_method);
    row["entropy_aggregation"] = to_string(spec.score.entropy_aggregation);
    row["lambda"] = spec.score.lambda;
    row["tau"] = spec.tau;
    row["correctness_threshold"] = spec.correctness_threshold;
    row["score_variant"] = to_string(spec.score_variant);
    row["n_filtered_out"] = t.n_filtered_out;
    row["n_cal"] = t.n_cal;
    row["n_test"] = t.n_test;
    row["n_scores"] = t.n_scores;
    row["q_level"] = t.q_level;
    // JSON has no infinity literal; keep the CSV spelling.
    row["q_hat"] = std::isfinite(t.q_hat) ? json(t.q_hat) : json("inf");
    row["emr"] = t.emr;
    row["coverage"] = t.coverage;
    row["apss"] = t.apss;
    rows.push_back(std::move(row));
  }
  return rows;
}

json summary_json(const SweepSummary& summary) {
  json rows = json::array();
  for (const auto& r : summary.rows) {
    const auto metric = [](const MetricSummary& m) { return json{{"mean", m.mean}, {"std", m.std}}; };
    rows.push_back({{"alpha", r.alpha},
                    {"split_ratio", r.split_ratio},
                    {"score_method", to_string(summary.score_method)},
                    {"n_seeds", r.n_seeds},
                    {"emr", metric(r.emr)},
                    {"coverage", metric(r.coverage)},
                    {"apss", metric(r.apss)}});
  }
  return rows;
}

std::string sha256_hex(const std::string& bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int length = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &length, EVP_sha256(), nullptr) != 1) {
    throw Error("sha256 failed");
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(2 * length);
  for (unsigned int i = 0; i < length; ++i) {
    out.push_back(kHex[digest[i] >> 4]);
    out.push_back(kHex[digest[i] & 0xf]);
  }
  return out;
}

std::string tool_version() { return TECP_VERSION; }

int cmd_validate(const std::filesystem::path& input, std::ostream& out, std::ostream& err) {
  std::string contents;
  try {
    contents = read_file(input);
  } catch (const Error& e) {
    err << e.what() << '\n';
    return 1;
  }

  std::istringstream in(contents);
  std::set<std::string, std::less<>> ids;
  std::string text;
  std::size_t line = 0;
  std::size_t records = 0;
  std::size_t problems = 0;
  while (std::getline(in, text)) {
    ++line;
    if (!text.empty() && text.back() == '\r') text.pop_back();
    if (text.find_first_not_of(" \t") == std::string::npos) continue;
    ++records;
    try {
      json object;
      try {
        object = json::parse(text);
      } catch (const json::parse_error& e) {
        throw ParseError(line, "", std::string("malformed JSON: ") + e.what());
      }
      const auto record = decode_record(object, line);
      for (const auto& v : validate_record(record).violations) {
        out << ParseError(line, v.path, "record '" + record.id + "': " + v.message).what() << '\n';
        ++problems;
      }
      if (!record.id.empty() && !ids.insert(record.id).second) {
        out << ParseError(line, "id", "duplicate id '" + record.id + "'").what() << '\n';
        ++problems;
      }
    } catch (const ParseError& e) {
      out << e.what() << '\n';
      ++problems;
    }
  }

  if (records == 0) {
    err << input.string() << ": no records\n";
    return 1;
  }
  if (problems > 0) {
    err << problems << " violation(s) in " << records << " records\n";
    return 1;
  }
  out << records << " records OK\n";
  return 0;
}

int cmd_synth(const SynthConfig& cfg, const std::filesystem::path& output, std::ostream& out,
              std::ostream& err) {
  try {
    const auto records = generate(cfg);
    std::ostringstream buffer;
    write_records(buffer, records);
    if (output.has_parent_path()) std::filesystem::create_directories(output.parent_path());
    write_file(output, buffer.str());
    out << "wrote " << records.size() << " records to " << output.string() << '\n';
    return 0;
  } catch (const std::exception& e) {
    err << "synth: " << e.what() << '\n';
    return 1;
  }
}

int cmd_run(const RunSpec& spec, std::ostream& out, std::ostream& err) {
  try {
    if (spec.inputs.empty()) throw Error("no input files");
    if (spec.output_dir.empty()) throw Error("--output-dir is required");
    spec.validate();

    std::vector<GenerationRecord> records;
    std::set<std::string, std::less<>> ids;
    json inputs = json::array();
    std::string digests;
    for (const auto& path : spec.inputs) {
      const auto contents = read_file(path);
      std::istringstream in(contents);
      std::vector<GenerationRecord> batch;
      try {
        batch = parse_records(in);
      } catch (const Error& e) {
        throw Error(path.string() + ": " + e.what());
      }
      for (auto& r : batch) {
        if (!ids.insert(r.id).second) {
          throw Error(path.string() + ": id '" + r.id + "' already defined by an earlier input");
        }
        records.push_back(std::move(r));
      }
      const auto digest = sha256_hex(contents);
      digests += digest;
      inputs.push_back({{"path", path.string()}, {"sha256", digest}, {"records", batch.size()}});
    }

    const auto trials = run_sweep(records, spec);
    const auto summary = aggregate(trials);

    std::filesystem::create_directories(spec.output_dir);
    if (spec.write_csv) {
      std::ostringstream t, s;
      write_trials_csv(t, trials, spec);
      write_summary_csv(s, summary);
      write_file(spec.output_dir / "trials.csv", t.str());
      write_file(spec.output_dir / "summary.csv", s.str());
    }
    if (spec.write_json) {
      write_file(spec.output_dir / "trials.json", trials_json(trials, spec).dump(2) + "\n");
      write_file(spec.output_dir / "summary.json", summary_json(summary).dump(2) + "\n");
    }

    json manifest;
    manifest["tool"] = "tecp";
    manifest["version"] = tool_version();
    manifest["inputs"] = inputs;
    manifest["dataset_digest"] = spec.inputs.size() == 1 ? digests : sha256_hex(digests);
    manifest["n_records"] = records.size();
    manifest["candidate_count"] = records.front().candidate_count();
    manifest["n_filtered_out"] = trials.front().n_filtered_out;
    manifest["n_trials"] = trials.size();
    manifest["config"] = config_json(spec);
    write_file(spec.output_dir / "manifest.json", manifest.dump(2) + "\n");

    out << "ran " << trials.size() << " trials on " << records.size() << " records ("
        << trials.front().n_filtered_out << " filtered out); results in "
        << spec.output_dir.string() << '\n';
    return 0;
  } catch (const std::exception& e) {
    err << "run: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace tecp
