#include <doctest.h>

#include <cmath>

#include "tecp/error.hpp"
#include "tecp/evaluation.hpp"
#include "tecp/synth.hpp"

using namespace tecp;

namespace {

ScoredRecord scored(const std::string& id, std::vector<double> scores, std::vector<double> sims) {
  auto r = std::make_shared<GenerationRecord>();
  r->id = id;
  r->references = {"ref"};
  for (double s : sims) {
    Candidate c;
    c.text = "t";
    c.ref_similarity = s;
    r->candidates.push_back(c);
  }
  return {r, std::move(scores)};
}

PredictionSet set_of(const std::string& id, std::vector<std::size_t> members) {
  return {id, std::move(members)};
}

// Every candidate correct; each record's lowest score is the global minimum 0.1,
// so any finite threshold admits at least one candidate.
std::vector<GenerationRecord> all_correct(std::size_t n, std::size_t m) {
  std::vector<GenerationRecord> out;
  for (std::size_t i = 0; i < n; ++i) {
    GenerationRecord r;
    r.id = "ok" + std::to_string(i);
    r.references = {"answer"};
    for (std::size_t j = 0; j < m; ++j) {
      Candidate c;
      c.text = "answer";
      c.token_entropies = std::vector<double>{j == 0 ? 0.1 : 0.1 * static_cast<double>(j + 1 + i % 3)};
      c.ref_similarity = 1.0;
      r.candidates.push_back(c);
    }
    out.push_back(r);
  }
  return out;
}

}  // namespace

TEST_CASE("is_covered") {
  const auto r = scored("a", {0.0, 0.0, 0.0}, {0.65, 0.69, 0.95});
  CHECK_FALSE(is_covered(r, set_of("a", {}), 0.7));
  CHECK_FALSE(is_covered(r, set_of("a", {0, 1}), 0.7));
  CHECK(is_covered(r, set_of("a", {1, 2}), 0.7));
  CHECK(is_covered(r, set_of("a", {0}), 0.65));

  // The full set of an assessable record (best similarity >= tau >= threshold) always covers.
  CHECK(is_covered(r, set_of("a", {0, 1, 2}), 0.7));
}

TEST_CASE("emr and apss") {
  const std::vector<ScoredRecord> test{scored("a", {0, 0}, {1, 0}), scored("b", {0, 0}, {1, 0}),
                                       scored("c", {0, 0}, {1, 0}), scored("d", {0, 0}, {1, 0})};
  std::vector<PredictionSet> sets{set_of("a", {0}), set_of("b", {0, 1}), set_of("c", {0}),
                                  set_of("d", {0})};
  CHECK(emr(test, sets, 0.7) == 0.0);
  sets[2] = set_of("c", {1});
  CHECK(emr(test, sets, 0.7) == 0.25);
  const std::vector<PredictionSet> empty{set_of("a", {}), set_of("b", {}), set_of("c", {}),
                                         set_of("d", {})};
  CHECK(emr(test, empty, 0.7) == 1.0);

  CHECK_THROWS_AS(emr({}, {}, 0.7), Error);
  sets[3].record_id = "zz";
  CHECK_THROWS_AS(emr(test, sets, 0.7), Error);
  CHECK_THROWS_AS(emr(test, std::vector<PredictionSet>(sets.begin(), sets.begin() + 2), 0.7), Error);

  const std::vector<PredictionSet> nines{set_of("a", {0, 1, 2, 3, 4, 5, 6, 7, 8}),
                                         set_of("b", {0, 1, 2, 3, 4, 5, 6, 7, 8}),
                                         set_of("c", {0, 1, 2, 3, 4, 5, 6, 7, 8})};
  CHECK(apss(nines) == 9.0);
  CHECK(apss(std::vector{set_of("a", {0, 1, 2, 3, 4, 5, 6, 7, 8, 9}), set_of("b", {})}) == 5.0);
  CHECK_THROWS_AS(apss({}), Error);
}

TEST_CASE("run_trial on an all-correct corpus") {
  const auto records = all_correct(40, 10);
  ScoreConfig score;
  CalibrationConfig cal;
  cal.tau = 0.0;
  for (double alpha : {0.1, 0.3, 0.5, 0.7, 0.9}) {
    cal.alpha = alpha;
    const auto t = run_trial(records, score, cal);
    CHECK(t.emr == 0.0);
    CHECK(t.coverage == 1.0);
    CHECK(t.apss >= 1.0);
  }
  cal.alpha = 0.1;
  const auto tiny = all_correct(4, 1);
  const auto t = run_trial(tiny, score, cal);
  CHECK(std::isinf(t.q_hat));
  CHECK(t.emr == 0.0);
  CHECK(t.apss == 1.0);
}

TEST_CASE("run_trial is deterministic and matches run_split") {
  SynthConfig sc;
  sc.n_records = 300;
  sc.seed = 3;
  const auto records = generate(sc);
  ScoreConfig score;
  CalibrationConfig cal;
  cal.seed = 17;
  cal.alpha = 0.2;
  const auto a = run_trial(records, score, cal);
  const auto b = run_trial(records, score, cal);
  CHECK(a == b);
  CHECK(a.n_cal == 150);
  CHECK(a.n_test == 150);
  CHECK(a.n_filtered_out == 0);
  CHECK(std::abs(a.coverage + a.emr - 1.0) <= 1e-12);

  const auto prepared = prepare_dataset(records, {}, score, cal.tau);
  const std::vector<double> alphas{0.1, 0.2, 0.5};
  const auto batch = run_split(prepared, cal, alphas);
  CHECK(batch[1] == a);
}

TEST_CASE("EMR rises and APSS falls with alpha on a fixed dataset and seed") {
  for (auto mode : {SynthMode::exact, SynthMode::realistic}) {
    SynthConfig sc;
    sc.mode = mode;
    sc.n_records = 200;
    sc.seed = 11;
    const auto prepared = prepare_dataset(generate(sc), {}, {}, 0.9);
    std::vector<double> alphas;
    for (int i = 1; i < 100; ++i) alphas.push_back(i / 100.0);
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      CalibrationConfig cal;
      cal.seed = seed;
      const auto trials = run_split(prepared, cal, alphas);
      for (std::size_t i = 1; i < trials.size(); ++i) {
        CHECK(trials[i].emr >= trials[i - 1].emr);
        CHECK(trials[i].apss <= trials[i - 1].apss);
        CHECK(trials[i].q_hat <= trials[i - 1].q_hat);
      }
    }
  }
}

TEST_CASE("coverage is 1 when each record's best candidate holds the minimum calibration score") {
  std::vector<GenerationRecord> records;
  for (int i = 0; i < 60; ++i) {
    GenerationRecord r;
    r.id = "m" + std::to_string(i);
    r.references = {"ref"};
    for (int j = 0; j < 4; ++j) {
      Candidate c;
      c.text = "t";
      const bool correct = j == i % 4;
      c.token_entropies = std::vector<double>{correct ? 0.25 : 1.0 + 0.1 * j};
      c.ref_similarity = correct ? 1.0 : 0.0;
      r.candidates.push_back(c);
    }
    records.push_back(r);
  }
  CalibrationConfig cal;
  for (double alpha = 0.05; alpha < 1.0; alpha += 0.05) {
    cal.alpha = alpha;
    const auto t = run_trial(records, {}, cal);
    REQUIRE(std::isfinite(t.q_hat));
    CHECK(t.coverage == 1.0);
    CHECK(t.apss == 1.0);
  }
}

TEST_CASE("exact-mode coverage meets 1 - alpha on average over seeds") {
  SynthConfig sc;
  sc.n_records = 400;
  sc.seed = 1;
  const auto prepared = prepare_dataset(generate(sc), {}, {}, 0.9);
  const double alphas[] = {0.5};
  double total = 0.0;
  const int seeds = 200;
  for (int seed = 0; seed < seeds; ++seed) {
    CalibrationConfig cal;
    cal.seed = static_cast<std::uint64_t>(seed);
    total += run_split(prepared, cal, alphas).front().coverage;
  }
  // Per-split sd is about 0.035; the mean over 200 splits has sd ~0.0025.
  CHECK(total / seeds >= 0.5 - 0.0075);
}

TEST_CASE("pipeline errors name their stage") {
  SynthConfig sc;
  sc.n_records = 10;
  auto records = generate(sc);
  CalibrationConfig cal;

  SUBCASE("filter") {
    for (auto& r : records) {
      for (auto& c : r.candidates) c.ref_similarity = 0.5;
    }
    try {
      run_trial(records, {}, cal);
      FAIL("expected PipelineError");
    } catch (const PipelineError& e) {
      CHECK(e.stage() == "filter");
    }
  }
  SUBCASE("load") {
    records[3].candidates.pop_back();
    records[3].pairwise_similarity.reset();
    try {
      run_trial(records, {}, cal);
      FAIL("expected PipelineError");
    } catch (const PipelineError& e) {
      CHECK(e.stage() == "load");
    }
  }
  SUBCASE("multiset") {
    cal.tau = 0.0;
    cal.correctness_threshold = 1.0;
    for (auto& r : records) {
      for (auto& c : r.candidates) c.ref_similarity = 0.9;
    }
    try {
      run_trial(records, {}, cal);
      FAIL("expected PipelineError");
    } catch (const PipelineError& e) {
      CHECK(e.stage() == "multiset");
    }
  }
  SUBCASE("config") {
    cal.alpha = 1.5;
    CHECK_THROWS_AS(run_trial(records, {}, cal), PipelineError);
  }
}

TEST_CASE("aggregate") {
  TrialResult t;
  t.alpha = 0.1;
  t.split_ratio = 0.5;
  t.coverage = 0.9;
  t.emr = 0.1;
  t.apss = 9.0;

  const auto single = aggregate(std::vector{t});
  REQUIRE(single.rows.size() == 1);
  CHECK(single.rows[0].coverage.mean == 0.9);
  CHECK(single.rows[0].coverage.std == 0.0);
  CHECK(single.rows[0].n_seeds == 1);

  auto u = t;
  u.seed = 1;
  u.coverage = 1.0;
  u.emr = 0.0;
  const auto pair = aggregate(std::vector{t, u});
  REQUIRE(pair.rows.size() == 1);
  CHECK(pair.rows[0].coverage.mean == doctest::Approx(0.95));
  CHECK(pair.rows[0].coverage.std == doctest::Approx(0.07071067811865474).epsilon(1e-12));
  CHECK(pair.rows[0].n_seeds == 2);

  auto v = t;
  v.alpha = 0.2;
  const auto two_rows = aggregate(std::vector{v, t, u});
  REQUIRE(two_rows.rows.size() == 2);
  CHECK(two_rows.rows[0].alpha == 0.1);
  CHECK(two_rows.rows[1].alpha == 0.2);
  // Input order does not change the fold.
  CHECK(aggregate(std::vector{u, v, t}).rows[0].coverage.mean == two_rows.rows[0].coverage.mean);

  CHECK_THROWS_AS(aggregate({}), Error);
  v.score_method = ScoreMethod::consistency;
  CHECK_THROWS_AS(aggregate(std::vector{t, v}), Error);
}

TEST_CASE("realistic-mode coverage is at least 1 - alpha up to Monte-Carlo error") {
  SynthConfig sc;
  sc.mode = SynthMode::realistic;
  sc.n_records = 1000;
  sc.seed = 21;
  const auto prepared = prepare_dataset(generate(sc), {}, {}, 0.9);
  const std::vector<double> alphas{0.1, 0.3, 0.5, 0.7, 0.9};
  std::vector<TrialResult> trials;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    CalibrationConfig cal;
    cal.seed = seed;
    const auto batch = run_split(prepared, cal, alphas);
    trials.insert(trials.end(), batch.begin(), batch.end());
  }
  for (const auto& row : aggregate(trials).rows) {
    const double se = row.coverage.std / std::sqrt(static_cast<double>(row.n_seeds));
    CHECK(row.coverage.mean >= 1.0 - row.alpha - 3 * se);
  }
}
