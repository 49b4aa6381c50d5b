#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <set>
#include <sstream>

#include "pacc/engine/report.hpp"
#include "pacc/selection/plan.hpp"
#include "pacc/synth/liability.hpp"
#include "support/world.hpp"

using namespace pacc;
using namespace pacc::selection;
using pacc::testing::make_case;

namespace {

std::vector<std::string> ids(const std::vector<SelectionDecision>& ds) {
  std::vector<std::string> out;
  for (const auto& d : ds) out.push_back(d.case_id);
  return out;
}

engine::ScoreReport report(std::string id, int score) {
  engine::ScoreReport r;
  r.case_id = std::move(id);
  r.score = FraudScore(score);
  return r;
}

std::vector<TaxpayerCase> numbered(int n) {
  std::vector<TaxpayerCase> out;
  for (int i = 0; i < n; ++i) out.push_back(make_case("K" + std::to_string(i)));
  return out;
}

/// Months since the last filed return, or since registration, computed
/// from calendar fields.
int gap_oracle(const TaxpayerCase& c, YearMonth now) {
  int best = -1;
  for (const auto& v : c.vat_returns) {
    if (v.filed) best = std::max(best, v.period.year * 12 + v.period.month - 1);
  }
  int ref = best >= 0 ? best : c.registered_date.year * 12 + c.registered_date.month - 1;
  return now.year * 12 + now.month - 1 - ref;
}

}  // namespace

TEST_CASE("select_by_time", "[selection]") {
  auto cs = numbered(4);
  cs[0].last_audited_year = 2020;
  cs[1].last_audited_year = 2010;
  cs[2].last_audited_year = 2015;
  cs[3].last_audited_year = 2020;
  CHECK(ids(select_by_time(cs, 2)) == std::vector<std::string>{"K1", "K2"});
  CHECK(select_by_time(cs, 0).empty());
  auto three = select_by_time(cs, 3);
  CHECK(ids(three) == std::vector<std::string>{"K0", "K1", "K2"});  // tie at 2020 broken by id
  CHECK(three[1].rationale.find("2010") != std::string::npos);

  std::vector<TaxpayerCase> two{make_case("A"), make_case("B")};
  two[0].last_audited_year = 2020;
  auto first = select_by_time(two, 1);
  REQUIRE(first.size() == 1);
  CHECK(first[0].case_id == "B");
  CHECK(first[0].strategy == Strategy::TIME);
}

TEST_CASE("select_group_random", "[selection]") {
  auto cs = numbered(30);
  CHECK(select_group_random(cs, 7, 42) == select_group_random(cs, 7, 42));
  CHECK(select_group_random(cs, 30, 1).size() == 30);
  CHECK(select_group_random(cs, 50, 1).size() == 30);
  auto picks = select_group_random(cs, 10, 3);
  auto picked = ids(picks);
  std::set<std::string> uniq(picked.begin(), picked.end());
  CHECK(uniq.size() == 10);
  for (const auto& d : picks) CHECK_FALSE(d.rationale.empty());
}

TEST_CASE("group sampling is uniform over seeds", "[selection][montecarlo]") {
  auto cs = numbered(10);
  std::map<std::string, int> hits;
  const int seeds = 10000;
  for (int s = 0; s < seeds; ++s) ++hits[select_group_random(cs, 1, static_cast<std::uint64_t>(s))[0].case_id];
  REQUIRE(hits.size() == 10);
  for (const auto& [id, n] : hits) {
    INFO(id << " " << n);
    CHECK(std::abs(static_cast<double>(n) / seeds - 0.1) <= 0.02);
  }
}

TEST_CASE("select_individual", "[selection]") {
  auto cs = numbered(5);
  CHECK(select_individual(cs, {}).empty());
  auto one = select_individual(cs, {{"K2", SignalKind::COMPLAINT, "anonymous tip"}});
  REQUIRE(one.size() == 1);
  CHECK(one[0].strategy == Strategy::INDIVIDUAL);
  CHECK(one[0].rationale == "COMPLAINT: anonymous tip");
  auto two = select_individual(cs, {{"K2", SignalKind::COMPLAINT, "tip"},
                                    {"K2", SignalKind::RESTRUCTURING, "merger"},
                                    {"UNKNOWN", SignalKind::MANDATED, ""}});
  REQUIRE(two.size() == 1);
  CHECK(two[0].rationale == "COMPLAINT: tip; RESTRUCTURING: merger");
}

TEST_CASE("select_new_entries", "[selection]") {
  YearMonth now{2026, 6};
  auto a = make_case("A");
  a.vat_returns = {{{2024, 5}, true}};  // 25 months
  auto b = make_case("B");
  b.vat_returns = {{{2024, 6}, true}};  // 24 months
  auto c = make_case("C", CaseKind::company_audit);
  c.vat_returns = {{{2023, 12}, true}};  // 30 months, wrong kind
  auto d = make_case("D");
  d.registered_date = Date{2023, 1, 1};  // never filed, 41 months
  auto picks = select_new_entries({a, b, c, d}, now);
  CHECK(ids(picks) == std::vector<std::string>{"A", "D"});
  CHECK(picks[0].rationale.find("25 months") != std::string::npos);
  CHECK(picks[1].rationale.find("never filed") != std::string::npos);
}

TEST_CASE("select_by_risk applies the liability threshold in cents", "[selection]") {
  std::vector<engine::ScoreReport> rs{report("A", 990), report("B", 500), report("C", 800), report("D", 300)};
  std::map<std::string, Money> liab{{"A", Money::from_cents(999'999)},
                                    {"B", Money::from_cents(1'000'000)},
                                    {"C", Money::from_eur(50'000)},
                                    {"D", Money::from_eur(12'000)}};
  Money threshold = Money::from_eur(10'000);
  auto all = select_by_risk(rs, liab, threshold, 10);
  CHECK(ids(all) == std::vector<std::string>{"B", "C", "D"});
  for (const auto& d : all) {
    REQUIRE(d.score);
    REQUIRE(d.estimated_liability);
    CHECK(*d.estimated_liability >= threshold);
  }
  CHECK(ids(select_by_risk(rs, liab, threshold, 1)) == std::vector<std::string>{"C"});
  CHECK(select_by_risk(rs, {}, threshold, 3).empty());
}

TEST_CASE("risk selection is invariant to positive score scaling", "[selection][property]") {
  Rng rng(12);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<engine::ScoreReport> rs, scaled;
    std::map<std::string, Money> liab;
    int n = 5 + static_cast<int>(rng.index(40));
    for (int i = 0; i < n; ++i) {
      std::string id = "R" + std::to_string(i);
      int s = static_cast<int>(rng.index(100));
      rs.push_back(report(id, s));
      scaled.push_back(report(id, s * 9));  // stays within 0..999
      liab[id] = Money::from_eur(rng.uniform(0, 30'000));
    }
    auto k = static_cast<std::size_t>(rng.index(static_cast<std::uint64_t>(n)));
    CHECK(ids(select_by_risk(rs, liab, Money::from_eur(10'000), k)) ==
          ids(select_by_risk(scaled, liab, Money::from_eur(10'000), k)));
  }
}

TEST_CASE("random control is disjoint from risk picks", "[selection]") {
  auto cs = numbered(50);
  std::vector<engine::ScoreReport> rs;
  std::map<std::string, Money> liab;
  for (const auto& c : cs) {
    rs.push_back(report(c.case_id, static_cast<int>(c.case_id.size() * 100)));
    liab[c.case_id] = Money::from_eur(20'000);
  }
  auto risk = select_by_risk(rs, liab, Money::from_eur(10'000), 20);
  Exclusions ex;
  for (const auto& d : risk) ex.insert(d.case_id);
  auto control = select_random_control(cs, 30, 9, &ex);
  CHECK(control.size() == 30);
  for (const auto& d : control) {
    CHECK(d.strategy == Strategy::RANDOM_CONTROL);
    CHECK_FALSE(ex.count(d.case_id));
  }
  CHECK(select_random_control(cs, 0, 9).empty());
  CHECK(select_random_control(cs, 5, 9) == select_random_control(cs, 5, 9));
}

TEST_CASE("compose_plan precedence and empty plan", "[selection][plan]") {
  auto cs = numbered(6);
  cs[0].last_audited_year = 2001;
  for (std::size_t i = 1; i < cs.size(); ++i) cs[i].last_audited_year = 2022;
  std::vector<engine::ScoreReport> rs;
  std::map<std::string, Money> liab;
  for (const auto& c : cs) {
    rs.push_back(report(c.case_id, c.case_id == "K0" ? 999 : 100));
    liab[c.case_id] = Money::from_eur(20'000);
  }
  PlanInputs in{&cs, &rs, &liab, nullptr, {2024, 1}};
  SelectionPlan empty;
  CHECK(compose_plan(empty, in).decisions.empty());

  SelectionPlan p;
  p.counts = {{Strategy::TIME, 1}, {Strategy::RISK, 1}};
  auto res = compose_plan(p, in);
  REQUIRE(res.decisions.size() == 2);
  CHECK(res.decisions[0].case_id == "K0");
  CHECK(res.decisions[0].strategy == Strategy::TIME);
  CHECK(res.decisions[1].strategy == Strategy::RISK);
  CHECK(res.decisions[1].case_id != "K0");

  p.counts = {{Strategy::GROUP_RANDOM, 100}};
  res = compose_plan(p, in);
  CHECK(res.decisions.size() == 6);
  REQUIRE(res.warnings.size() == 1);
  CHECK(res.warnings[0].find("truncated") != std::string::npos);

  p.counts = {{Strategy::TIME, -1}};
  CHECK_THROWS_AS(compose_plan(p, in), std::invalid_argument);
}

TEST_CASE("composed plans never select a case twice", "[selection][plan][property]") {
  auto w = pacc::testing::make_world(9, 1200);
  auto snap = w.hub->snapshot();
  engine::SharedContext shared{&w.models, snap.get(), {}, w.now, 0};
  auto mt = pacc::testing::load_rules("missing_trader.rules");
  auto ca = pacc::testing::load_rules("company_audit.rules");
  std::vector<engine::ScoreReport> reports;
  for (const auto* rs : {&mt, &ca}) {
    auto kind = *rs->kind;
    auto b = engine::score_batch(*rs, w.of_kind(kind), shared);
    REQUIRE(b.errors.empty());
    reports.insert(reports.end(), b.reports.begin(), b.reports.end());
  }
  auto liab = synth::estimate_liabilities(w.models, w.cases(), reports);
  Rng rng(31);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<Signal> signals;
    for (int i = static_cast<int>(rng.index(20)); i > 0; --i) {
      signals.push_back({w.cases()[rng.index(w.cases().size())].case_id,
                         static_cast<SignalKind>(rng.index(4)), "note " + std::to_string(i)});
    }
    SelectionPlan plan;
    plan.seed = rng.next();
    for (Strategy s : kStrategyOrder) plan.counts[s] = static_cast<int>(rng.index(150));
    plan.liability_threshold = Money::from_eur(rng.uniform(1, 40'000));
    PlanInputs in{&w.cases(), &reports, &liab, &signals, w.now};
    auto res = compose_plan(plan, in);

    std::set<std::string> seen;
    for (const auto& d : res.decisions) REQUIRE(seen.insert(d.case_id).second);
    for (const auto& d : res.decisions) {
      REQUIRE_FALSE(d.rationale.empty());
      if (d.strategy == Strategy::RISK) {
        REQUIRE(d.estimated_liability);
        REQUIRE(d.estimated_liability->cents() >= plan.liability_threshold.cents());
        REQUIRE(d.estimated_liability->cents() == liab.at(d.case_id).cents());
      }
    }
    // Strategy order, then case id.
    for (std::size_t i = 1; i < res.decisions.size(); ++i) {
      const auto& a = res.decisions[i - 1];
      const auto& b = res.decisions[i];
      REQUIRE((a.strategy < b.strategy || (a.strategy == b.strategy && a.case_id < b.case_id)));
    }

    // Recount: each strategy takes min(quota, eligible cases not yet chosen).
    std::set<std::string> chosen;
    std::map<Strategy, std::vector<std::string>> by;
    for (const auto& d : res.decisions) by[d.strategy].push_back(d.case_id);
    for (Strategy s : kStrategyOrder) {
      std::size_t eligible = 0;
      for (const auto& c : w.cases()) {
        if (chosen.count(c.case_id)) continue;
        bool ok = true;
        if (s == Strategy::INDIVIDUAL) {
          ok = std::any_of(signals.begin(), signals.end(), [&](const Signal& g) { return g.case_id == c.case_id; });
        } else if (s == Strategy::NEW_ENTRY) {
          ok = c.kind == CaseKind::missing_trader && gap_oracle(c, w.now) > 24;
        } else if (s == Strategy::RISK) {
          ok = liab.count(c.case_id) && liab.at(c.case_id) >= plan.liability_threshold;
        }
        eligible += ok ? 1 : 0;
      }
      auto expect = std::min<std::size_t>(static_cast<std::size_t>(plan.count(s)), eligible);
      INFO(to_string(s));
      REQUIRE(by[s].size() == expect);
      chosen.insert(by[s].begin(), by[s].end());
    }

    // Byte-identical on rerun.
    std::ostringstream a, b;
    write_decisions_jsonl(a, res.decisions);
    write_decisions_jsonl(b, compose_plan(plan, in).decisions);
    REQUIRE(a.str() == b.str());
  }
}

TEST_CASE("plan and decision files round trip", "[selection][json]") {
  SelectionPlan p;
  p.counts = {{Strategy::TIME, 5}, {Strategy::RISK, 100}, {Strategy::RANDOM_CONTROL, 100}};
  p.seed = 77;
  p.liability_threshold = Money::from_eur(10'000);
  auto back = plan_from_json(plan_to_json(p));
  CHECK(back.seed == 77);
  CHECK(back.liability_threshold == p.liability_threshold);
  for (Strategy s : kStrategyOrder) CHECK(back.count(s) == p.count(s));
  CHECK_THROWS_AS(plan_from_json(Json::parse(R"({"counts":{"ASTROLOGY":1}})")), DataError);
  CHECK_THROWS_AS(plan_from_json(Json::parse(R"({"counts":{"TIME":-2}})")), DataError);
  CHECK_THROWS_AS(plan_from_json(Json::parse(R"({"counts":{},"liability_threshold_eur":0})")), DataError);

  std::vector<SelectionDecision> ds{
      {"A", Strategy::RISK, "fraud score 700", FraudScore(700), Money::from_cents(1'234'567)},
      {"B", Strategy::TIME, "never audited", std::nullopt, std::nullopt}};
  std::stringstream io;
  write_decisions_jsonl(io, ds);
  CHECK(read_decisions_jsonl(io) == ds);
}
