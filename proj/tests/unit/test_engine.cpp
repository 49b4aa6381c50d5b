#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <sstream>

#include "pacc/engine/report.hpp"
#include "support/random_rules.hpp"
#include "support/world.hpp"

using namespace pacc;
using namespace pacc::engine;
using pacc::testing::make_case;

namespace {

/// Exact noisy-OR score for contributions that are multiples of 0.1:
/// integer arithmetic over tenths, half-up rounding.
int tenths_oracle(const std::vector<int>& tenths) {
  long long denom = 1, keep = 1;
  for (int t : tenths) {
    denom *= 10;
    keep *= 10 - t;
  }
  long long num = 999 * (denom - keep);  // 999 * s = num / denom
  return static_cast<int>((2 * num + denom) / (2 * denom));
}

/// Hub, models and case for the four Table 1 rules.
struct Table1 {
  sources::SourceHub hub;
  models::TrainedModels models;
  dsl::RuleSet rules = pacc::testing::load_rules("table1.rules");
  TaxpayerCase taxpayer = make_case("T1");
  SharedContext shared;

  Table1() {
    sources::WatchlistStore w;
    w.add("W1", "P-LINKED");
    hub.replace_watchlist(w);
    sources::RegistryStore r;
    r.add({"T1", "ADDR-T1", "AT"});
    hub.replace_registry(r);
    // Risk equals logistic(vat_refund_claims).
    models::EffectivenessModel m;
    m.feature_list = {"vat_refund_claims"};
    m.roles = {models::FeatureRole::plain};
    m.standardization = {{0.0, 1.0}};
    m.weights = {1.0};
    models.effectiveness = m;
    taxpayer.features["vat_refund_claims"] = 0.0;
  }

  void fill_address(int n) {
    sources::RegistryStore r;
    r.add({"T1", "ADDR-T1", "AT"});
    for (int i = 1; i < n; ++i) r.add({"N" + std::to_string(i), "ADDR-T1", "AT"});
    hub.replace_registry(r);
  }

  ScoreReport score(std::set<std::string> off = {}) {
    snap = hub.snapshot();
    shared = SharedContext{&models, snap.get(), std::move(off), {2024, 6}, 5};
    return score_case(rules, CaseContext{&taxpayer, &shared});
  }

  RuleEvaluation eval(const std::string& rule) {
    snap = hub.snapshot();
    shared = SharedContext{&models, snap.get(), {}, {2024, 6}, 5};
    return evaluate_rule(*rules.find(rule), CaseContext{&taxpayer, &shared});
  }

  std::shared_ptr<const sources::SourceSnapshot> snap;
};

std::vector<std::string> names(const ScoreReport& r) {
  std::vector<std::string> out;
  for (const auto& t : r.triggered) out.push_back(t.rule_name);
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

TEST_CASE("combine_contributions examples", "[engine][combine]") {
  CHECK(combine_contributions({}).value() == 0);
  CHECK(combine_contributions({0.6}).value() == 599);
  CHECK(combine_contributions({0.6, 0.3}).value() == 719);
  CHECK(combine_contributions({1.0}).value() == 999);
  CHECK(combine_contributions({0.3}, {0.6}).value() == 719);
  CHECK_THROWS_AS(combine_contributions({0.0}), std::invalid_argument);
  CHECK_THROWS_AS(combine_contributions({1.5}), std::invalid_argument);
  CHECK_THROWS_AS(combine_contributions({0.2}, {-0.1}), std::invalid_argument);
  CHECK_THROWS_AS(combine_contributions({std::nan("")}), std::invalid_argument);
}

TEST_CASE("combination matches an exact oracle on all small multisets", "[engine][combine]") {
  const int values[] = {1, 3, 6, 10};
  int checked = 0;
  for (int len = 0; len <= 6; ++len) {
    int total = 1;
    for (int i = 0; i < len; ++i) total *= 4;
    for (int code = 0; code < total; ++code) {
      std::vector<int> tenths;
      std::vector<double> contribs;
      for (int i = 0, c = code; i < len; ++i, c /= 4) {
        tenths.push_back(values[c % 4]);
        contribs.push_back(values[c % 4] / 10.0);
      }
      INFO("code " << code << " len " << len);
      CHECK(combine_contributions(contribs).value() == tenths_oracle(tenths));
      ++checked;
    }
  }
  CHECK(checked == 5461);
}

TEST_CASE("combination is bounded, monotone and order independent", "[engine][combine][property]") {
  Rng rng(77);
  for (int trial = 0; trial < 10000; ++trial) {
    std::vector<double> c;
    for (int n = static_cast<int>(rng.index(12)); n > 0; --n) c.push_back(1e-9 + rng.uniform() * (1.0 - 1e-9));
    int s = combine_contributions(c).value();
    CHECK(s >= 0);
    CHECK(s <= 999);
    auto more = c;
    more.push_back(1e-9 + rng.uniform() * (1.0 - 1e-9));
    CHECK(combine_contributions(more).value() >= s);
    rng.shuffle(c);
    CHECK(combine_contributions(c).value() == s);
  }
}

TEST_CASE("Table 1: few employees boundary", "[engine][table1]") {
  Table1 t;
  t.taxpayer.features["employee_count"] = 3.0;
  CHECK(t.eval("FewEmployees").status == RuleStatus::triggered);
  t.taxpayer.features["employee_count"] = 4.0;
  CHECK(t.eval("FewEmployees").status == RuleStatus::not_triggered);
  t.taxpayer.features.erase("employee_count");
  auto e = t.eval("FewEmployees");
  CHECK(e.status == RuleStatus::not_applicable);
  CHECK(e.reason == "missing feature employee_count");
}

TEST_CASE("Table 1: multiple address usage boundary", "[engine][table1]") {
  Table1 t;
  t.fill_address(14);
  auto e = t.eval("MultipleAddressUsage");
  REQUIRE(e.status == RuleStatus::triggered);
  CHECK(e.triggered->inputs_snapshot.at("companies_at_address()") == "14");
  CHECK(e.triggered->explanation.find("Companies at address: 14.") != std::string::npos);
  t.fill_address(13);
  CHECK(t.eval("MultipleAddressUsage").status == RuleStatus::not_triggered);
}

TEST_CASE("Table 1: watchlist link boundary", "[engine][table1]") {
  Table1 t;
  t.taxpayer.persons = {"P-OTHER"};
  CHECK(t.eval("PersonLinkedToEurofiscWatchlist").status == RuleStatus::not_triggered);
  t.taxpayer.persons = {"P-OTHER", "P-LINKED"};
  auto e = t.eval("PersonLinkedToEurofiscWatchlist");
  REQUIRE(e.status == RuleStatus::triggered);
  CHECK(e.triggered->contribution == 0.6);
  t.hub.set_legal_basis("watchlist", false);
  e = t.eval("PersonLinkedToEurofiscWatchlist");
  CHECK(e.status == RuleStatus::not_applicable);
  CHECK(e.reason == "no legal basis for source watchlist");
}

TEST_CASE("Table 1: effectiveness risk threshold", "[engine][table1]") {
  Table1 t;
  // logistic(ln 4) = 0.8
  t.taxpayer.features["vat_refund_claims"] = std::log(4.0) + 1e-6;
  auto e = t.eval("HighOverallRisk");
  REQUIRE(e.status == RuleStatus::triggered);
  CHECK(e.triggered->tier == WeightTier::HIGH);
  CHECK(e.triggered->source == dsl::RuleSource::model_backed);
  t.taxpayer.features["vat_refund_claims"] = std::log(4.0) - 1e-6;
  CHECK(t.eval("HighOverallRisk").status == RuleStatus::not_triggered);
  t.models.effectiveness.reset();
  CHECK(t.eval("HighOverallRisk").status == RuleStatus::not_applicable);
}

TEST_CASE("score_case on Table 1 rules", "[engine][table1]") {
  Table1 t;
  t.taxpayer.features["employee_count"] = 10.0;
  auto none = t.score();
  CHECK(none.score.value() == 0);
  CHECK(none.triggered.empty());

  t.taxpayer.persons = {"P-LINKED"};
  t.taxpayer.features["employee_count"] = 2.0;
  auto both = t.score();
  CHECK(both.score.value() == 719);
  CHECK(names(both) == std::vector<std::string>{"FewEmployees", "PersonLinkedToEurofiscWatchlist"});
  CHECK(both.scored_at == 5);
  CHECK(both.ruleset_digest == dsl::ruleset_digest(t.rules));

  auto off = t.score({"FewEmployees"});
  CHECK(off.score.value() == 599);
  CHECK(off.deactivated == std::vector<std::string>{"FewEmployees"});
  CHECK_THROWS_AS(t.score({"NoSuchRule"}), ScoringError);

  t.taxpayer.kind = CaseKind::company_audit;
  CHECK_THROWS_AS(t.score(), ScoringError);
}

TEST_CASE("evaluation is strict and reports the first reason", "[engine]") {
  auto rs = dsl::parse_rules(R"(rule "R" { weight: LOW
      when: case.revenue_eur > 0 or case.employee_count > 0
      explain: "x" }
    rule "D" { weight: LOW
      when: case.employee_count / case.revenue_eur > 1
      explain: "x" }
    rule "S" { weight: LOW
      when: case.legal_form == "GmbH" and watchlist_links() > 0
      explain: "x" })",
                             pacc::testing::schema());
  REQUIRE(rs.ok());
  sources::SourceHub hub;
  models::TrainedModels m;
  auto snap = hub.snapshot();
  SharedContext shared{&m, snap.get(), {}, {2024, 1}, 0};
  auto c = make_case("C1");
  c.features["employee_count"] = 5.0;
  CaseContext ctx{&c, &shared};
  auto r = evaluate_rule(rs.rules->rules[0], ctx);
  CHECK(r.status == RuleStatus::not_applicable);
  CHECK(r.reason == "missing feature revenue_eur");
  c.features["revenue_eur"] = 0.0;
  r = evaluate_rule(rs.rules->rules[1], ctx);
  CHECK(r.status == RuleStatus::not_applicable);
  CHECK(r.reason == "division by zero");
  c.features["legal_form"] = std::string("AG");
  r = evaluate_rule(rs.rules->rules[2], ctx);
  CHECK(r.status == RuleStatus::not_applicable);
  CHECK(r.reason == "source watchlist unavailable");
}

TEST_CASE("rank_cases orders by score then id", "[engine]") {
  auto rep = [](std::string id, int s) {
    ScoreReport r;
    r.case_id = std::move(id);
    r.score = FraudScore(s);
    return r;
  };
  std::vector<ScoreReport> rs{rep("C", 10), rep("B", 700), rep("A", 700)};
  CHECK(rank_cases(rs, 2) == std::vector<std::string>{"A", "B"});
  CHECK(rank_cases(rs, 0).empty());
  CHECK(rank_cases(rs, 10) == std::vector<std::string>{"A", "B", "C"});
  CHECK(rank_cases({}, 3).empty());
}

TEST_CASE("explanation documents", "[engine][report]") {
  ScoreReport empty;
  empty.case_id = "E";
  auto doc = render_explanations(empty);
  CHECK(doc.find("Fraud score: 0 / 999") != std::string::npos);
  CHECK(doc.find(kRegularAuditNotice) != std::string::npos);
  CHECK(doc.find("[") == std::string::npos);

  Table1 t;
  t.fill_address(14);
  auto r = t.score();
  doc = render_explanations(r);
  CHECK(doc.find("[LOW] MultipleAddressUsage") != std::string::npos);
  CHECK(doc.find("Companies at address: 14.") != std::string::npos);
  CHECK(doc.find("companies_at_address()=14") != std::string::npos);

  auto rs = dsl::parse_rules(R"(rule "M" { weight: HIGH
      when: model.effectiveness_risk >= 0.5
      source: model })",
                             pacc::testing::schema());
  REQUIRE(rs.ok());
  t.rules = *rs.rules;
  t.taxpayer.features["vat_refund_claims"] = 1.0;
  r = t.score();
  REQUIRE(r.triggered.size() == 1);
  CHECK(r.triggered[0].explanation.empty());
  CHECK(render_explanations(r).find(kLimitedExplanationNotice) != std::string::npos);
}

TEST_CASE("report JSON round trip", "[engine][report]") {
  auto w = pacc::testing::make_world(4, 600);
  auto rs = pacc::testing::load_rules("missing_trader.rules");
  auto batch = score_batch(rs, w.of_kind(CaseKind::missing_trader), *w.hub, w.models, {}, w.now, 3);
  REQUIRE(batch.errors.empty());
  std::stringstream io;
  write_reports_jsonl(io, batch.reports);
  auto back = read_reports_jsonl(io);
  REQUIRE(back.size() == batch.reports.size());
  for (std::size_t i = 0; i < back.size(); ++i) CHECK(back[i] == batch.reports[i]);
  std::stringstream bad("{\"case_id\": 1}\n");
  CHECK_THROWS_AS(read_reports_jsonl(bad), DataError);
}

TEST_CASE("batch equals single calls and is worker independent", "[engine][batch]") {
  auto w = pacc::testing::make_world(5, 800);
  auto rs = pacc::testing::load_rules("company_audit.rules");
  auto cases = w.of_kind(CaseKind::company_audit);
  auto one = score_batch(rs, cases, *w.hub, w.models, {}, w.now, 2, 1);
  auto four = score_batch(rs, cases, *w.hub, w.models, {}, w.now, 2, 4);
  REQUIRE(one.reports.size() == cases.size());
  CHECK(one.reports == four.reports);
  auto snap = w.hub->snapshot();
  SharedContext shared{&w.models, snap.get(), {}, w.now, 2};
  for (std::size_t i = 0; i < cases.size(); i += 37) {
    CHECK(score_case(rs, CaseContext{cases[i], &shared}) == one.reports[i]);
  }
  CHECK(score_batch(rs, {}, shared).reports.empty());

  // A wrong-kind case fails alone.
  auto mixed = cases;
  auto mt = w.of_kind(CaseKind::missing_trader);
  mixed.insert(mixed.begin() + 3, mt.front());
  auto res = score_batch(rs, mixed, shared, 3);
  CHECK(res.reports.size() == cases.size());
  REQUIRE(res.errors.size() == 1);
  CHECK(res.errors[0].index == 3);
  CHECK(res.errors[0].case_id == mt.front()->case_id);
}

TEST_CASE("a batch holds its snapshot", "[engine][batch]") {
  auto w = pacc::testing::make_world(6, 300, 0);
  auto guard = w.hub->begin_batch();
  CHECK_THROWS_AS(w.hub->set_legal_basis("registry", false), sources::MidBatchMutation);
}

TEST_CASE("scoring properties over random rule sets", "[engine][property]") {
  auto w = pacc::testing::make_world(7, 400);
  auto snap = w.hub->snapshot();
  pacc::testing::RandomRules gen(99);
  const auto& cases = w.cases();
  int trials = 0;
  while (trials < 10000) {
    auto rs = gen.ruleset(10);
    rs.kind.reset();
    if (rs.rules.empty()) continue;
    const auto& c = cases[static_cast<std::size_t>(gen.pick(static_cast<int>(cases.size())))];
    SharedContext shared{&w.models, snap.get(), {}, w.now, 0};
    CaseContext ctx{&c, &shared};
    auto r = score_case(rs, ctx);
    ++trials;

    // Bounds and reproducibility.
    REQUIRE(r.score.value() >= 0);
    REQUIRE(r.score.value() <= 999);
    REQUIRE(r.recombined() == r.score);

    // Every rule lands in exactly one bucket.
    std::set<std::string> seen;
    for (const auto& t : r.triggered) REQUIRE(seen.insert(t.rule_name).second);
    for (const auto& n : r.not_applicable) REQUIRE(seen.insert(n.rule_name).second);
    REQUIRE(seen.size() <= rs.rules.size());

    // Order independence.
    auto shuffled = rs;
    std::shuffle(shuffled.rules.begin(), shuffled.rules.end(), gen.rng());
    auto rp = score_case(shuffled, ctx);
    REQUIRE(rp.score == r.score);
    REQUIRE(names(rp) == names(r));

    // Monotonicity: an extra always-true rule never lowers the score.
    auto more = rs;
    dsl::RuleDef extra;
    extra.name = "ExtraAlwaysTrue";
    extra.condition = dsl::Expr::bool_lit(true);
    extra.contribution = gen.unit_interval();
    more.rules.push_back(extra);
    REQUIRE(score_case(more, ctx).score >= r.score);

    // Removing the not-applicable rules changes nothing.
    auto trimmed = rs;
    std::erase_if(trimmed.rules, [&](const dsl::RuleDef& d) {
      return std::any_of(r.not_applicable.begin(), r.not_applicable.end(),
                         [&](const NotApplicableRule& n) { return n.rule_name == d.name; });
    });
    REQUIRE(score_case(trimmed, ctx).score == r.score);

    // Deactivating a rule equals removing it.
    const auto& victim = rs.rules[static_cast<std::size_t>(gen.pick(static_cast<int>(rs.rules.size())))];
    SharedContext off_shared = shared;
    off_shared.deactivated = {victim.name};
    auto off = score_case(rs, CaseContext{&c, &off_shared});
    auto removed = rs;
    std::erase_if(removed.rules, [&](const dsl::RuleDef& d) { return d.name == victim.name; });
    auto rr = score_case(removed, ctx);
    REQUIRE(off.score == rr.score);
    REQUIRE(names(off) == names(rr));
  }
  CHECK(trials == 10000);
}

TEST_CASE("barred sources never decide a rule", "[engine][property]") {
  auto w = pacc::testing::make_world(8, 300);
  const std::map<std::string, std::vector<std::string>> calls_of{
      {"watchlist", {"watchlist_links"}},
      {"registry", {"companies_at_address"}},
      {"vat_filings", {"months_since_last_vat_return"}},
      {"uid_validation", {"uid_invalid_count"}},
      {"peer_stats", {"peer_zscore", "peer_ratio"}}};
  pacc::testing::RandomRules gen(5);
  for (const auto& [source, calls] : calls_of) {
    w.hub->set_legal_basis(source, false);
    auto snap = w.hub->snapshot();
    SharedContext shared{&w.models, snap.get(), {}, w.now, 0};
    int touched = 0;
    for (int i = 0; i < 400; ++i) {
      auto rule = gen.rule("R");
      auto refs = dsl::references_of(rule);
      bool uses = std::any_of(calls.begin(), calls.end(), [&](const auto& n) { return refs.calls.count(n) != 0; });
      if (!uses) continue;
      ++touched;
      for (std::size_t k = 0; k < w.cases().size(); k += 29) {
        auto e = evaluate_rule(rule, CaseContext{&w.cases()[k], &shared});
        REQUIRE(e.status == RuleStatus::not_applicable);
      }
    }
    CHECK(touched > 0);
    w.hub->set_legal_basis(source, true);
  }
}
