#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <set>
#include <sstream>

#include "pacc/selection/plan.hpp"
#include "pacc/synth/evaluation.hpp"
#include "pacc/synth/generator.hpp"
#include "pacc/synth/outcomes.hpp"
#include "support/fixtures.hpp"

using namespace pacc;
using namespace pacc::synth;
using selection::SelectionDecision;
using selection::Strategy;
using pacc::testing::make_case;

namespace {

struct Files {
  std::string cases, watchlist, registry, truth;
  bool operator==(const Files&) const = default;
};

Files serialize(const GeneratedCorpus& g) {
  std::ostringstream c, w, r, t;
  write_cases_jsonl(c, g.corpus.cases);
  write_watchlist_csv(w, g.watchlist);
  write_registry_csv(r, g.registry);
  write_truth_jsonl(t, g.truth);
  return {c.str(), w.str(), r.str(), t.str()};
}

SelectionDecision pick(std::string id, Strategy s) { return {std::move(id), s, "test", std::nullopt, std::nullopt}; }

}  // namespace

TEST_CASE("generator is deterministic per seed", "[synth][generator]") {
  GeneratorConfig cfg;
  cfg.n_cases = 700;
  cfg.seed = 17;
  auto a = serialize(generate_corpus(cfg));
  auto b = serialize(generate_corpus(cfg));
  CHECK(a == b);
  cfg.seed = 18;
  CHECK_FALSE(serialize(generate_corpus(cfg)) == a);
}

TEST_CASE("generator fraud counts follow the configured rate", "[synth][generator]") {
  for (double rate : {0.0, 0.05, 0.2}) {
    GeneratorConfig cfg;
    cfg.n_cases = 1000;
    cfg.fraud_rate = rate;
    auto g = generate_corpus(cfg);
    CHECK(g.corpus.cases.size() == 1000);
    CHECK(g.truth.cases.size() == 1000);
    CHECK(g.truth.fraud_count() == static_cast<std::size_t>(std::lround(1000 * rate)));
    if (rate == 0.0) {
      for (const auto& [_, t] : g.truth.cases) CHECK(t.pattern == FraudPattern::NONE);
    }
  }
}

TEST_CASE("generator rejects infeasible configurations", "[synth][generator]") {
  GeneratorConfig cfg;
  cfg.n_cases = 9;
  CHECK_THROWS_AS(generate_corpus(cfg), std::invalid_argument);
  cfg = {};
  cfg.n_cases = 20;
  cfg.ring_size_min = 21;
  cfg.ring_size_max = 30;
  CHECK_THROWS_AS(generate_corpus(cfg), std::invalid_argument);
  cfg = {};
  cfg.fraud_rate = 1.0;
  CHECK_THROWS_AS(generate_corpus(cfg), std::invalid_argument);
}

TEST_CASE("generated cases validate against the schema", "[synth][generator]") {
  GeneratorConfig cfg;
  cfg.n_cases = 1500;
  auto g = generate_corpus(cfg);
  for (const auto& c : g.corpus.cases) {
    auto d = validate_case(c, pacc::testing::schema(), g.corpus.current_year());
    INFO(c.case_id << (d.empty() ? "" : ": " + d.front().path + " " + d.front().message));
    CHECK(d.empty());
  }
  CHECK(g.registry_store().consistent());
}

TEST_CASE("every ring member carries all planted conditions", "[synth][generator]") {
  GeneratorConfig cfg;
  auto g = generate_corpus(cfg);
  auto registry = g.registry_store();
  auto watchlist = g.watchlist_store();
  int rings = 0;
  std::set<int> ring_ids;
  for (const auto& c : g.corpus.cases) {
    const auto& t = g.truth.cases.at(c.case_id);
    if (t.pattern != FraudPattern::MT_RING) continue;
    ++rings;
    ring_ids.insert(t.ring);
    CHECK(c.kind == CaseKind::missing_trader);
    CHECK(registry.companies_at(c.address_id) > 13);
    CHECK(*c.number("employee_count") < 4);
    int links = 0;
    for (const auto& p : c.persons) links += watchlist.linked_elsewhere(p, c.case_id) ? 1 : 0;
    CHECK(links >= 1);
    // No return in the most recent months before the start.
    for (const auto& v : c.vat_returns) CHECK(v.period.ordinal() <= cfg.start.ordinal() - 4);
    for (const auto& p : c.trading_partners) {
      if (p[0] == 'G') CHECK_FALSE(g.truth.uid_valid.at(p));
    }
  }
  CHECK(rings == static_cast<int>(std::lround(cfg.n_cases * cfg.fraud_rate * 0.4)));
  CHECK(ring_ids.size() >= static_cast<std::size_t>(rings / cfg.ring_size_max));

  // Honest companies never reach the co-location threshold.
  for (const auto& c : g.corpus.cases) {
    if (!g.truth.cases.at(c.case_id).is_fraud) CHECK(registry.companies_at(c.address_id) <= 13);
  }
}

TEST_CASE("attach_outcomes with no delay and no misses reveals the truth", "[synth][outcomes]") {
  GeneratorConfig cfg;
  cfg.n_cases = 300;
  auto g = generate_corpus(cfg);
  for (auto& c : g.corpus.cases) c.outcome.reset();
  std::vector<std::string> audited;
  for (std::size_t i = 0; i < g.corpus.cases.size(); i += 2) audited.push_back(g.corpus.cases[i].case_id);
  OutcomeOptions opt;
  opt.delay_months = 0;
  opt.miss_rate = 0.0;
  attach_outcomes(g.corpus.cases, g.truth, audited, 5, opt);
  for (std::size_t i = 0; i < g.corpus.cases.size(); ++i) {
    const auto& c = g.corpus.cases[i];
    if (i % 2) {
      CHECK_FALSE(c.outcome);
      continue;
    }
    REQUIRE(c.outcome);
    CHECK(c.outcome->available_at == 5);
    CHECK(c.outcome->fraud_found == g.truth.cases.at(c.case_id).is_fraud);
    // The audited period is the year before the audit month.
    CHECK(c.last_audited_year == std::max(c.registered_date.year, 2023));
  }
}

TEST_CASE("default outcome delay stays within its jitter bounds", "[synth][outcomes]") {
  std::vector<TaxpayerCase> cases;
  GroundTruth truth;
  std::vector<std::string> audited;
  for (int i = 0; i < 1000; ++i) {
    cases.push_back(make_case("O" + std::to_string(i)));
    truth.cases[cases.back().case_id] = {i % 3 == 0, FraudPattern::NONE, -1, -1};
    audited.push_back(cases.back().case_id);
  }
  OutcomeOptions opt;
  attach_outcomes(cases, truth, audited, 10, opt);
  std::set<int> seen;
  int missed = 0, frauds = 0;
  for (const auto& c : cases) {
    REQUIRE(c.outcome);
    CHECK(c.outcome->available_at >= 14);
    CHECK(c.outcome->available_at <= 18);
    seen.insert(c.outcome->available_at);
    if (truth.cases.at(c.case_id).is_fraud) {
      ++frauds;
      missed += c.outcome->fraud_found ? 0 : 1;
    } else {
      CHECK_FALSE(c.outcome->fraud_found);
    }
  }
  CHECK(seen.size() == 5);
  CHECK(std::abs(static_cast<double>(missed) / frauds - 0.1) < 0.05);

  // The draw does not depend on the order of the audited list.
  auto again = cases;
  for (auto& c : again) c.outcome.reset();
  std::reverse(audited.begin(), audited.end());
  attach_outcomes(again, truth, audited, 10, opt);
  CHECK(again == cases);
}

TEST_CASE("success_rate examples", "[synth][evaluation]") {
  std::vector<TaxpayerCase> cases;
  std::vector<SelectionDecision> ds;
  for (int i = 0; i < 10; ++i) {
    auto c = make_case("R" + std::to_string(i));
    if (i < 7) c.outcome = AuditOutcome{true, i < 5, Money{}, 3};
    cases.push_back(c);
    ds.push_back(pick(c.case_id, Strategy::RISK));
  }
  auto rep = success_rate(ds, cases, 3);
  REQUIRE(rep.find(Strategy::RISK));
  CHECK(rep.rate(Strategy::RISK) == Catch::Approx(5.0 / 7.0));
  CHECK(rep.find(Strategy::RISK)->matured == 7);
  CHECK(rep.caveats.empty());

  auto early = success_rate(ds, cases, 2);
  CHECK(early.rate(Strategy::RISK) == 0.0);
  CHECK(early.find(Strategy::RISK)->immature);
  REQUIRE_FALSE(early.caveats.empty());
  CHECK(early.caveats[0].find("0% of selected cases have matured") != std::string::npos);

  CHECK(success_rate({}, cases, 3).strategies.empty());
}

TEST_CASE("success_rate ignores decision order", "[synth][evaluation][property]") {
  Rng rng(8);
  std::vector<TaxpayerCase> cases;
  std::vector<SelectionDecision> ds;
  for (int i = 0; i < 60; ++i) {
    auto c = make_case("P" + std::to_string(i));
    if (rng.bernoulli(0.7)) c.outcome = AuditOutcome{true, rng.bernoulli(0.4), Money{}, static_cast<int>(rng.index(12))};
    cases.push_back(c);
    ds.push_back(pick(c.case_id, selection::kStrategyOrder[rng.index(6)]));
  }
  auto base = evaluation_to_json(success_rate(ds, cases, 6)).dump();
  for (int i = 0; i < 50; ++i) {
    rng.shuffle(ds);
    CHECK(evaluation_to_json(success_rate(ds, cases, 6)).dump() == base);
  }
}

TEST_CASE("evaluation only sees outcomes, never the truth", "[synth][evaluation]") {
  GeneratorConfig cfg;
  cfg.n_cases = 400;
  auto g = generate_corpus(cfg);
  std::vector<SelectionDecision> ds;
  std::vector<std::string> audited;
  for (std::size_t i = 0; i < g.corpus.cases.size(); i += 3) {
    ds.push_back(pick(g.corpus.cases[i].case_id, i % 2 ? Strategy::RISK : Strategy::RANDOM_CONTROL));
    audited.push_back(g.corpus.cases[i].case_id);
  }
  attach_outcomes(g.corpus.cases, g.truth, audited, 0);
  auto before = evaluation_to_json(success_rate(ds, g.corpus.cases, 12)).dump();

  // Round trip the cases through the public file format and drop the truth.
  std::stringstream io;
  write_cases_jsonl(io, g.corpus.cases);
  g.truth = {};
  auto reloaded = read_cases_jsonl(io);
  CHECK(io.str().find("is_fraud") == std::string::npos);
  CHECK(evaluation_to_json(success_rate(ds, reloaded, 12)).dump() == before);
}

TEST_CASE("compare_strategies", "[synth][evaluation]") {
  CHECK_THROWS_AS(compare_strategies({}), std::invalid_argument);
  EvaluationReport r;
  r.strategies.push_back({Strategy::RISK, 10, 8, 6, 0.75, false, 0});
  r.strategies.push_back({Strategy::RANDOM_CONTROL, 10, 8, 1, 0.125, false, 0});
  auto one = compare_strategies({r});
  REQUIRE(one.find(Strategy::RISK));
  CHECK(one.find(Strategy::RISK)->mean == 0.75);
  auto two = compare_strategies({r, r});
  CHECK(two.find(Strategy::RISK)->max - two.find(Strategy::RISK)->min == 0.0);
  auto r2 = r;
  r2.strategies[0].success_rate = 0.25;
  auto mixed = compare_strategies({r, r2});
  CHECK(mixed.find(Strategy::RISK)->mean == Catch::Approx(0.5));
  CHECK(mixed.find(Strategy::RISK)->min == 0.25);
  CHECK(mixed.find(Strategy::RISK)->max == 0.75);
  CHECK(comparison_to_json(mixed)["strategies"].size() == 2);
  CHECK(comparison_to_text(mixed).find("RANDOM_CONTROL") != std::string::npos);
}

TEST_CASE("truth file round trip", "[synth]") {
  GeneratorConfig cfg;
  cfg.n_cases = 200;
  auto g = generate_corpus(cfg);
  std::stringstream io;
  write_truth_jsonl(io, g.truth);
  CHECK(read_truth_jsonl(io) == g.truth);
  std::stringstream bad("{\"case_id\":\"X\",\"is_fraud\":true,\"pattern\":\"ALIENS\"}\n");
  CHECK_THROWS_AS(read_truth_jsonl(bad), DataError);
}
