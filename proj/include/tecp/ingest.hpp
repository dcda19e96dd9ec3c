#pragma once

// Generation records: one QA prompt with its M sampled candidates, read from
// and written to a line-delimited JSON format (one record per line).

#include <cstddef>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace tecp {

using Matrix = std::vector<std::vector<double>>;

struct Candidate {
  std::optional<std::string> text;
  std::optional<std::vector<std::string>> tokens;
  std::optional<std::vector<double>> token_entropies;  // nats, one per position
  std::optional<Matrix> token_distributions;           // one probability row per position
  std::optional<double> ref_similarity;                // max over references

  nlohmann::json extra = nlohmann::json::object();  // unknown fields, kept verbatim

  friend bool operator==(const Candidate&, const Candidate&) = default;
};

struct GenerationRecord {
  std::string id;
  std::string prompt;
  std::vector<std::string> references;
  std::map<std::string, double> decoding;
  std::vector<Candidate> candidates;
  std::optional<Matrix> pairwise_similarity;  // M x M

  nlohmann::json extra = nlohmann::json::object();

  std::size_t candidate_count() const noexcept { return candidates.size(); }

  friend bool operator==(const GenerationRecord&, const GenerationRecord&) = default;
};

struct Violation {
  std::string path;
  std::string message;

  friend bool operator==(const Violation&, const Violation&) = default;
};

struct ValidationReport {
  std::vector<Violation> violations;

  bool ok() const noexcept { return violations.empty(); }
};

inline constexpr double kDistributionSumTolerance = 1e-6;
inline constexpr double kPairwiseTolerance = 1e-9;

ValidationReport validate_record(const GenerationRecord& record);

// Decodes one JSON object into a record. Structural problems (wrong types,
// missing required fields) throw ParseError tagged with `line`; invariant
// violations are left for validate_record.
GenerationRecord decode_record(const nlohmann::json& object, std::size_t line);

nlohmann::json encode_record(const GenerationRecord& record);
std::string serialize_record(const GenerationRecord& record);

// Reads every record, in file order. Blank lines are skipped. Throws ParseError
// on malformed lines, invariant violations (naming the record id), duplicate
// ids, or an empty stream.
std::vector<GenerationRecord> parse_records(std::istream& in);

void write_records(std::ostream& out, const std::vector<GenerationRecord>& records);

// Throws Error unless every record has the same number of candidates; returns it.
std::size_t require_uniform_candidate_count(const std::vector<GenerationRecord>& records);

// ---------------------------------------------------------------------------
// Similarity resolution

enum class SimilaritySource { provided_only, builtin_fallback, builtin_only };

std::string_view to_string(SimilaritySource source);
SimilaritySource parse_similarity_source(std::string_view name);

struct SimilarityConfig {
  SimilaritySource source = SimilaritySource::builtin_fallback;
  double equivalence_threshold = 0.9;
};

// Bag-of-words F1 over normalized tokens: ASCII letters lowercased, every
// other non-alphanumeric byte treated as a separator. Two empty texts give 1.
double builtin_similarity(std::string_view a, std::string_view b);

// Fills every candidate's ref_similarity and the pairwise matrix. Provided
// values are kept unless the source is builtin_only.
GenerationRecord resolve_similarities(GenerationRecord record, const SimilarityConfig& cfg);

}  // namespace tecp
