#include "tecp/synth.hpp"

#include <charconv>
#include <cmath>

#include "tecp/error.hpp"

namespace tecp {

namespace {

constexpr std::uint64_t kSynthStream = 0x73796e7468ULL;

double parse_double(std::string_view text) {
  double value = 0.0;
  const auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || end != text.data() + text.size()) {
    throw Error("invalid number '" + std::string(text) + "'");
  }
  return value;
}

Candidate planted_candidate(std::size_t index, double score, bool correct) {
  Candidate c;
  c.text = "synthetic candidate " + std::to_string(index);
  c.token_entropies = std::vector<double>{score};
  c.ref_similarity = correct ? 1.0 : 0.0;
  return c;
}

}  // namespace

std::string_view to_string(SynthMode mode) {
  switch (mode) {
    case SynthMode::exact: return "exact";
    case SynthMode::realistic: return "realistic";
  }
  return "?";
}

SynthMode parse_synth_mode(std::string_view name) {
  for (auto m : {SynthMode::exact, SynthMode::realistic}) {
    if (to_string(m) == name) return m;
  }
  throw Error("unknown synth mode '" + std::string(name) + "'");
}

void ScoreDistribution::validate() const {
  if (!std::isfinite(a) || !std::isfinite(b)) throw Error("distribution parameters must be finite");
  switch (family) {
    case Family::uniform:
      if (a < 0.0 || b < a) throw Error("uniform scores need 0 <= low <= high");
      break;
    case Family::exponential:
      if (a < 0.0 || b <= 0.0) throw Error("exponential scores need shift >= 0 and rate > 0");
      break;
  }
}

double ScoreDistribution::draw(Rng& rng) const {
  const double u = rng.uniform01();
  switch (family) {
    case Family::uniform: return a + (b - a) * u;
    case Family::exponential: return a - std::log1p(-u) / b;
  }
  return a;
}

ScoreDistribution ScoreDistribution::parse(std::string_view text) {
  const auto colon = text.find(':');
  const auto comma = text.find(',', colon == std::string_view::npos ? 0 : colon);
  if (colon == std::string_view::npos || comma == std::string_view::npos) {
    throw Error("expected FAMILY:A,B, got '" + std::string(text) + "'");
  }
  const auto family = text.substr(0, colon);
  const double a = parse_double(text.substr(colon + 1, comma - colon - 1));
  const double b = parse_double(text.substr(comma + 1));
  ScoreDistribution d;
  if (family == "uniform") {
    d = uniform(a, b);
  } else if (family == "exponential") {
    d = exponential(a, b);
  } else {
    throw Error("unknown distribution family '" + std::string(family) + "'");
  }
  d.validate();
  return d;
}

std::string ScoreDistribution::to_string() const {
  char buf[64];
  auto* p = buf;
  const auto* name = family == Family::uniform ? "uniform:" : "exponential:";
  std::string out = name;
  p = std::to_chars(buf, buf + sizeof buf, a).ptr;
  out.append(buf, p);
  out += ',';
  p = std::to_chars(buf, buf + sizeof buf, b).ptr;
  out.append(buf, p);
  return out;
}

void SynthConfig::validate() const {
  if (m_candidates < 1) throw Error("m_candidates must be >= 1");
  if (n_records < 2) throw Error("n_records must be >= 2");
  if (!(correct_fraction > 0.0 && correct_fraction <= 1.0)) {
    throw Error("correct_fraction must lie in (0,1]");
  }
  correct_scores.validate();
  incorrect_scores.validate();
}

std::vector<GenerationRecord> generate(const SynthConfig& cfg) {
  cfg.validate();
  Rng rng(cfg.seed, kSynthStream);
  const std::size_t m = cfg.m_candidates;

  std::vector<GenerationRecord> records;
  records.reserve(cfg.n_records);
  std::vector<bool> correct(m);
  for (std::size_t i = 0; i < cfg.n_records; ++i) {
    if (cfg.mode == SynthMode::exact) {
      const auto chosen = rng.below(m);
      for (std::size_t j = 0; j < m; ++j) correct[j] = j == chosen;
    } else {
      bool any = false;
      while (!any) {
        for (std::size_t j = 0; j < m; ++j) {
          correct[j] = rng.uniform01() < cfg.correct_fraction;
          any = any || correct[j];
        }
      }
    }

    GenerationRecord r;
    r.id = "synth-" + std::to_string(i);
    r.prompt = "synthetic prompt " + std::to_string(i);
    r.references = {"synthetic reference"};
    r.candidates.reserve(m);
    for (std::size_t j = 0; j < m; ++j) {
      const auto& dist = correct[j] ? cfg.correct_scores : cfg.incorrect_scores;
      r.candidates.push_back(planted_candidate(j, dist.draw(rng), correct[j]));
    }

    const bool agreement = cfg.mode == SynthMode::realistic && cfg.agreement;
    Matrix s(m, std::vector<double>(m, 0.0));
    for (std::size_t a = 0; a < m; ++a) {
      for (std::size_t b = 0; b < m; ++b) {
        s[a][b] = (a == b || (agreement && correct[a] == correct[b])) ? 1.0 : 0.0;
      }
    }
    r.pairwise_similarity = std::move(s);
    records.push_back(std::move(r));
  }
  return records;
}

std::pair<double, double> theoretical_coverage_bounds(std::size_t n_cal, double alpha) {
  if (n_cal < 1) throw Error("n_cal must be >= 1");
  const double lower = 1.0 - alpha;
  return {lower, lower + 1.0 / static_cast<double>(n_cal + 1)};
}

}  // namespace tecp
