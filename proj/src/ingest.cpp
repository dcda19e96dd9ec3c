#include "tecp/ingest.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <set>

#include "tecp/error.hpp"

namespace tecp {

using nlohmann::json;

namespace {

std::string index_path(const std::string& base, std::size_t i) {
  return base + "[" + std::to_string(i) + "]";
}

std::string join_path(const std::string& base, const std::string& field) {
  return base.empty() ? field : base + "." + field;
}

bool present(const json& object, const char* key) {
  const auto it = object.find(key);
  return it != object.end() && !it->is_null();
}

double read_number(const json& value, std::size_t line, const std::string& path) {
  if (!value.is_number()) throw ParseError(line, path, "expected a number");
  return value.get<double>();
}

std::string read_string(const json& value, std::size_t line, const std::string& path) {
  if (!value.is_string()) throw ParseError(line, path, "expected a string");
  return value.get<std::string>();
}

const json& read_array(const json& value, std::size_t line, const std::string& path) {
  if (!value.is_array()) throw ParseError(line, path, "expected an array");
  return value;
}

std::vector<double> read_numbers(const json& value, std::size_t line, const std::string& path) {
  const auto& array = read_array(value, line, path);
  std::vector<double> out;
  out.reserve(array.size());
  for (std::size_t i = 0; i < array.size(); ++i) {
    out.push_back(read_number(array[i], line, index_path(path, i)));
  }
  return out;
}

std::vector<std::string> read_strings(const json& value, std::size_t line, const std::string& path) {
  const auto& array = read_array(value, line, path);
  std::vector<std::string> out;
  out.reserve(array.size());
  for (std::size_t i = 0; i < array.size(); ++i) {
    out.push_back(read_string(array[i], line, index_path(path, i)));
  }
  return out;
}

Matrix read_matrix(const json& value, std::size_t line, const std::string& path) {
  const auto& array = read_array(value, line, path);
  Matrix out;
  out.reserve(array.size());
  for (std::size_t i = 0; i < array.size(); ++i) {
    out.push_back(read_numbers(array[i], line, index_path(path, i)));
  }
  return out;
}

Candidate decode_candidate(const json& object, std::size_t line, const std::string& path) {
  if (!object.is_object()) throw ParseError(line, path, "expected an object");
  Candidate c;
  for (const auto& [key, value] : object.items()) {
    const std::string field = join_path(path, key);
    if (key == "text") {
      if (!value.is_null()) c.text = read_string(value, line, field);
    } else if (key == "tokens") {
      if (!value.is_null()) c.tokens = read_strings(value, line, field);
    } else if (key == "token_entropies") {
      if (!value.is_null()) c.token_entropies = read_numbers(value, line, field);
    } else if (key == "token_distributions") {
      if (!value.is_null()) c.token_distributions = read_matrix(value, line, field);
    } else if (key == "ref_similarity") {
      if (!value.is_null()) c.ref_similarity = read_number(value, line, field);
    } else {
      c.extra[key] = value;
    }
  }
  return c;
}

void check_unit_interval(double value, const std::string& path, const char* what,
                         std::vector<Violation>& out) {
  if (!(value >= 0.0 && value <= 1.0)) {
    out.push_back({path, std::string(what) + " outside [0,1]"});
  }
}

void validate_candidate(const Candidate& c, const std::string& path, std::vector<Violation>& out) {
  if (!c.text && !c.token_entropies && !c.token_distributions) {
    out.push_back({path, "no text, token_entropies or token_distributions"});
  }
  if (c.token_entropies) {
    const auto& h = *c.token_entropies;
    for (std::size_t t = 0; t < h.size(); ++t) {
      const auto p = index_path(join_path(path, "token_entropies"), t);
      if (!std::isfinite(h[t])) {
        out.push_back({p, "non-finite entropy"});
      } else if (h[t] < 0.0) {
        out.push_back({p, "negative entropy"});
      }
    }
  }
  if (c.token_distributions) {
    const auto& rows = *c.token_distributions;
    for (std::size_t t = 0; t < rows.size(); ++t) {
      const auto p = index_path(join_path(path, "token_distributions"), t);
      double sum = 0.0;
      bool negative = false;
      for (double prob : rows[t]) {
        if (!(prob >= 0.0)) negative = true;
        sum += prob;
      }
      if (negative) {
        out.push_back({p, "negative probability"});
      } else if (!(std::abs(sum - 1.0) <= kDistributionSumTolerance)) {
        out.push_back({p, "distribution sums to " + std::to_string(sum) + ", expected 1"});
      }
    }
  }
  const auto lengths_agree = [&](std::size_t a, std::size_t b, const char* what) {
    if (a != b) out.push_back({path, std::string("length mismatch between ") + what});
  };
  if (c.tokens && c.token_entropies) {
    lengths_agree(c.tokens->size(), c.token_entropies->size(), "tokens and token_entropies");
  }
  if (c.tokens && c.token_distributions) {
    lengths_agree(c.tokens->size(), c.token_distributions->size(), "tokens and token_distributions");
  }
  if (c.token_entropies && c.token_distributions) {
    lengths_agree(c.token_entropies->size(), c.token_distributions->size(),
                  "token_entropies and token_distributions");
  }
  if (c.ref_similarity) {
    check_unit_interval(*c.ref_similarity, join_path(path, "ref_similarity"), "ref_similarity", out);
  }
}

void validate_pairwise(const Matrix& s, std::size_t m, std::vector<Violation>& out) {
  const std::string path = "pairwise_similarity";
  bool square = s.size() == m;
  for (const auto& row : s) square = square && row.size() == m;
  if (!square) {
    out.push_back({path, "expected a " + std::to_string(m) + "x" + std::to_string(m) + " matrix"});
    return;
  }
  bool asymmetric = false;
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      const auto p = index_path(index_path(path, i), j);
      if (!(s[i][j] >= 0.0 && s[i][j] <= 1.0)) out.push_back({p, "similarity outside [0,1]"});
      if (j > i && !(std::abs(s[i][j] - s[j][i]) <= kPairwiseTolerance)) asymmetric = true;
    }
    if (!(std::abs(s[i][i] - 1.0) <= kPairwiseTolerance)) {
      out.push_back({index_path(index_path(path, i), i), "diagonal entry is not 1"});
    }
  }
  if (asymmetric) out.push_back({path, "asymmetric pairwise_similarity"});
}

std::vector<std::string> normalized_tokens(std::string_view text) {
  std::vector<std::string> tokens;
  std::string current;
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    const bool digit = c >= '0' && c <= '9';
    const bool lower = c >= 'a' && c <= 'z';
    const bool upper = c >= 'A' && c <= 'Z';
    if (digit || lower) {
      current.push_back(static_cast<char>(c));
    } else if (upper) {
      current.push_back(static_cast<char>(c - 'A' + 'a'));
    } else if (!current.empty()) {
      tokens.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  std::sort(tokens.begin(), tokens.end());
  return tokens;
}

const std::string& require_text(const Candidate& c, std::size_t index) {
  if (!c.text) {
    throw Error(index_path("candidates", index) + ".text missing; needed for builtin similarity");
  }
  return *c.text;
}

}  // namespace

ValidationReport validate_record(const GenerationRecord& record) {
  ValidationReport report;
  auto& out = report.violations;
  if (record.id.empty()) out.push_back({"id", "empty id"});
  if (record.references.empty()) out.push_back({"references", "no references"});
  if (record.candidates.empty()) out.push_back({"candidates", "no candidates"});
  for (const auto& [key, value] : record.decoding) {
    if (!std::isfinite(value)) out.push_back({"decoding." + key, "non-finite value"});
  }
  for (std::size_t i = 0; i < record.candidates.size(); ++i) {
    validate_candidate(record.candidates[i], index_path("candidates", i), out);
  }
  if (record.pairwise_similarity) {
    validate_pairwise(*record.pairwise_similarity, record.candidates.size(), out);
  }
  return report;
}

GenerationRecord decode_record(const json& object, std::size_t line) {
  if (!object.is_object()) throw ParseError(line, "", "expected a JSON object");
  for (const char* required : {"id", "references", "candidates"}) {
    if (!present(object, required)) throw ParseError(line, required, "missing required field");
  }

  GenerationRecord r;
  for (const auto& [key, value] : object.items()) {
    if (key == "id") {
      r.id = read_string(value, line, key);
    } else if (key == "prompt") {
      if (!value.is_null()) r.prompt = read_string(value, line, key);
    } else if (key == "references") {
      r.references = read_strings(value, line, key);
    } else if (key == "decoding") {
      if (value.is_null()) continue;
      if (!value.is_object()) throw ParseError(line, key, "expected an object");
      for (const auto& [name, number] : value.items()) {
        r.decoding[name] = read_number(number, line, join_path(key, name));
      }
    } else if (key == "candidates") {
      const auto& array = read_array(value, line, key);
      r.candidates.reserve(array.size());
      for (std::size_t i = 0; i < array.size(); ++i) {
        r.candidates.push_back(decode_candidate(array[i], line, index_path(key, i)));
      }
    } else if (key == "pairwise_similarity") {
      if (!value.is_null()) r.pairwise_similarity = read_matrix(value, line, key);
    } else {
      r.extra[key] = value;
    }
  }
  return r;
}

json encode_record(const GenerationRecord& record) {
  json out = record.extra.is_object() ? record.extra : json::object();
  out["id"] = record.id;
  out["prompt"] = record.prompt;
  out["references"] = record.references;
  if (!record.decoding.empty()) out["decoding"] = record.decoding;

  json candidates = json::array();
  for (const auto& c : record.candidates) {
    json cj = c.extra.is_object() ? c.extra : json::object();
    if (c.text) cj["text"] = *c.text;
    if (c.tokens) cj["tokens"] = *c.tokens;
    if (c.token_entropies) cj["token_entropies"] = *c.token_entropies;
    if (c.token_distributions) cj["token_distributions"] = *c.token_distributions;
    if (c.ref_similarity) cj["ref_similarity"] = *c.ref_similarity;
    candidates.push_back(std::move(cj));
  }
  out["candidates"] = std::move(candidates);
  if (record.pairwise_similarity) out["pairwise_similarity"] = *record.pairwise_similarity;
  return out;
}

std::string serialize_record(const GenerationRecord& record) { return encode_record(record).dump(); }

std::vector<GenerationRecord> parse_records(std::istream& in) {
  std::vector<GenerationRecord> records;
  std::set<std::string, std::less<>> ids;
  std::string text;
  std::size_t line = 0;
  while (std::getline(in, text)) {
    ++line;
    if (!text.empty() && text.back() == '\r') text.pop_back();
    if (text.find_first_not_of(" \t") == std::string::npos) continue;

    json object;
    try {
      object = json::parse(text);
    } catch (const json::parse_error& e) {
      throw ParseError(line, "", std::string("malformed JSON: ") + e.what());
    }
    auto record = decode_record(object, line);

    const auto report = validate_record(record);
    if (!report.ok()) {
      const auto& first = report.violations.front();
      throw ParseError(line, first.path, "record '" + record.id + "': " + first.message);
    }
    if (!ids.insert(record.id).second) {
      throw ParseError(line, "id", "duplicate id '" + record.id + "'");
    }
    records.push_back(std::move(record));
  }
  if (records.empty()) throw Error("no records");
  return records;
}

void write_records(std::ostream& out, const std::vector<GenerationRecord>& records) {
  for (const auto& r : records) out << serialize_record(r) << '\n';
}

std::size_t require_uniform_candidate_count(const std::vector<GenerationRecord>& records) {
  if (records.empty()) throw Error("no records");
  const std::size_t m = records.front().candidate_count();
  for (const auto& r : records) {
    if (r.candidate_count() != m) {
      throw Error("non-uniform candidate count: record '" + r.id + "' has " +
                  std::to_string(r.candidate_count()) + ", expected " + std::to_string(m));
    }
  }
  return m;
}

std::string_view to_string(SimilaritySource source) {
  switch (source) {
    case SimilaritySource::provided_only: return "provided_only";
    case SimilaritySource::builtin_fallback: return "builtin_fallback";
    case SimilaritySource::builtin_only: return "builtin_only";
  }
  return "?";
}

SimilaritySource parse_similarity_source(std::string_view name) {
  for (auto s : {SimilaritySource::provided_only, SimilaritySource::builtin_fallback,
                 SimilaritySource::builtin_only}) {
    if (to_string(s) == name) return s;
  }
  throw Error("unknown similarity source '" + std::string(name) + "'");
}

double builtin_similarity(std::string_view a, std::string_view b) {
  const auto ta = normalized_tokens(a);
  const auto tb = normalized_tokens(b);
  if (ta.empty() && tb.empty()) return 1.0;

  // Multiset intersection of two sorted token lists.
  std::size_t common = 0;
  auto ia = ta.begin();
  auto ib = tb.begin();
  while (ia != ta.end() && ib != tb.end()) {
    if (*ia < *ib) {
      ++ia;
    } else if (*ib < *ia) {
      ++ib;
    } else {
      ++common;
      ++ia;
      ++ib;
    }
  }
  return 2.0 * static_cast<double>(common) / static_cast<double>(ta.size() + tb.size());
}

GenerationRecord resolve_similarities(GenerationRecord record, const SimilarityConfig& cfg) {
  if (!(cfg.equivalence_threshold >= 0.0 && cfg.equivalence_threshold <= 1.0)) {
    throw Error("equivalence_threshold must lie in [0,1]");
  }
  const bool recompute = cfg.source == SimilaritySource::builtin_only;
  const bool may_compute = cfg.source != SimilaritySource::provided_only;
  auto& candidates = record.candidates;

  for (std::size_t i = 0; i < candidates.size(); ++i) {
    auto& c = candidates[i];
    if (c.ref_similarity && !recompute) continue;
    if (!may_compute) {
      throw Error("record '" + record.id + "': " + index_path("candidates", i) +
                  ".ref_similarity missing");
    }
    const auto& text = require_text(c, i);
    double best = 0.0;
    for (const auto& ref : record.references) best = std::max(best, builtin_similarity(text, ref));
    c.ref_similarity = best;
  }

  if (!record.pairwise_similarity || recompute) {
    if (!may_compute) throw Error("record '" + record.id + "': pairwise_similarity missing");
    const std::size_t m = candidates.size();
    Matrix s(m, std::vector<double>(m, 1.0));
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = i + 1; j < m; ++j) {
        s[i][j] = s[j][i] = builtin_similarity(require_text(candidates[i], i),
                                               require_text(candidates[j], j));
      }
    }
    record.pairwise_similarity = std::move(s);
  }
  return record;
}

}  // namespace tecp
