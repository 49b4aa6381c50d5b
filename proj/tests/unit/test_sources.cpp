#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "pacc/sources/ingest.hpp"
#include "pacc/synth/generator.hpp"
#include "support/fixtures.hpp"
#include "support/tempdir.hpp"

using namespace pacc;
using namespace pacc::sources;
using pacc::testing::make_case;
using pacc::testing::TempDir;

namespace {

double value_of(const ModelValue& v) {
  REQUIRE(models::applicable(v));
  return std::get<double>(v);
}

std::string reason_of(const ModelValue& v) {
  REQUIRE_FALSE(models::applicable(v));
  return std::get<models::NotApplicable>(v).reason;
}

std::size_t count_data_lines(const std::string& path, bool header) {
  std::ifstream in(path);
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    if (!line.empty()) ++n;
  }
  return header && n > 0 ? n - 1 : n;
}

}  // namespace

TEST_CASE("watchlist_links counts linked persons", "[sources]") {
  SourceHub hub;
  auto c = make_case("C1");
  CHECK(reason_of(watchlist_links(*hub.snapshot(), c)).find("unavailable") != std::string::npos);

  WatchlistStore w;
  w.add("W1", "P1");
  w.add("W2", "P2");
  w.add("C1", "P3");  // linked only to the case's own company
  hub.replace_watchlist(w);
  CHECK(value_of(watchlist_links(*hub.snapshot(), c)) == 0.0);
  c.persons = {"P1"};
  CHECK(value_of(watchlist_links(*hub.snapshot(), c)) == 1.0);
  c.persons = {"P1", "P2", "P3", "P1"};
  CHECK(value_of(watchlist_links(*hub.snapshot(), c)) == 2.0);

  hub.set_legal_basis("watchlist", false);
  CHECK(reason_of(watchlist_links(*hub.snapshot(), c)) == "no legal basis for source watchlist");
}

TEST_CASE("companies_at_address counts the registry", "[sources]") {
  SourceHub hub;
  RegistryStore r;
  r.add({"C1", "A1", "AT"});
  for (int i = 0; i < 13; ++i) r.add({"X" + std::to_string(i), "A2", "AT"});
  r.add({"C2", "A2", "DE"});
  hub.replace_registry(r);
  auto c = make_case("C1");
  c.address_id = "A1";
  CHECK(value_of(companies_at_address(*hub.snapshot(), c)) == 1.0);
  c.address_id = "A2";
  CHECK(value_of(companies_at_address(*hub.snapshot(), c)) == 14.0);
  c.address_id = "NOWHERE";
  CHECK(value_of(companies_at_address(*hub.snapshot(), c)) == 0.0);
  c.address_id.clear();
  CHECK_FALSE(models::applicable(companies_at_address(*hub.snapshot(), c)));
  hub.set_legal_basis("registry", false);
  c.address_id = "A2";
  CHECK(reason_of(companies_at_address(*hub.snapshot(), c)) == "no legal basis for source registry");
}

TEST_CASE("registry rejects duplicates and keeps its index consistent", "[sources]") {
  RegistryStore r;
  r.add({"C1", "A1", "AT"});
  CHECK_THROWS_AS(r.add({"C1", "A2", "AT"}), DataError);
  Rng rng(3);
  for (int i = 0; i < 500; ++i) {
    r.add({"K" + std::to_string(i), "A" + std::to_string(rng.index(40)), "AT"});
  }
  CHECK(r.consistent());
  std::size_t total = 0;
  for (int a = 0; a < 41; ++a) total += r.companies_at("A" + std::to_string(a));
  CHECK(total == r.size());
}

TEST_CASE("months since the last filed VAT return", "[sources]") {
  SourceHub hub;
  const auto& s = *hub.snapshot();
  YearMonth now{2026, 6};
  auto c = make_case("C1");
  c.vat_returns = {{{2026, 6}, true}};
  CHECK(value_of(months_since_last_vat_return(s, c, now)) == 0.0);
  c.vat_returns = {{{2024, 5}, true}, {{2025, 1}, false}};
  CHECK(value_of(months_since_last_vat_return(s, c, now)) == 25.0);
  c.vat_returns.clear();
  c.registered_date = Date{2023, 6, 20};
  CHECK(value_of(months_since_last_vat_return(s, c, now)) == 36.0);
  c.registered_date = Date{2026, 6, 1};
  CHECK_FALSE(models::applicable(months_since_last_vat_return(s, c, now)));
  hub.set_legal_basis("vat_filings", false);
  c.vat_returns = {{{2026, 6}, true}};
  CHECK(reason_of(months_since_last_vat_return(*hub.snapshot(), c, now)) == "no legal basis for source vat_filings");
}

TEST_CASE("uid_invalid_count treats pending as not invalid", "[sources]") {
  SourceHub hub(2);
  auto c = make_case("C1");
  c.trading_partners = {"U1", "U2", "U3"};
  CHECK(value_of(uid_invalid_count(*hub.snapshot(), c)) == 0.0);
  for (const auto& u : c.trading_partners) hub.uid_client().enqueue("DE", u, 500);
  hub.run_validation_day([](const std::string&) { return false; });
  CHECK(value_of(uid_invalid_count(*hub.snapshot(), c)) == 2.0);
  hub.run_validation_day([](const std::string&) { return false; });
  CHECK(value_of(uid_invalid_count(*hub.snapshot(), c)) == 3.0);
  hub.set_legal_basis("uid_validation", false);
  CHECK(reason_of(uid_invalid_count(*hub.snapshot(), c)) == "no legal basis for source uid_validation");
}

TEST_CASE("UID queue order, idempotency and quota", "[sources][uid]") {
  UidValidationClient client(2);
  CHECK(client.enqueue("DE", "B", 100));
  CHECK(client.enqueue("DE", "A", 100));
  CHECK(client.enqueue("DE", "Z", 900));
  CHECK_FALSE(client.enqueue("DE", "Z", 900));
  CHECK(client.pending("DE") == 3);
  CHECK(client.status("A") == UidStatus::pending);
  client.enqueue("DE", "C", 50);
  client.enqueue("DE", "D", 40);
  auto day = client.run_validation_day([](const std::string& u) { return u != "A"; });
  REQUIRE(day.size() == 2);
  CHECK(day[0].uid == "Z");
  CHECK(day[1].uid == "A");
  CHECK(client.status("A") == UidStatus::invalid);
  CHECK(client.status("Z") == UidStatus::valid);
  CHECK(client.pending("DE") == 3);

  UidValidationClient big;
  for (int i = 0; i < 5; ++i) big.enqueue("FR", "F" + std::to_string(i), i);
  CHECK(big.run_validation_day([](const std::string&) { return true; }).size() == 5);
  CHECK(big.pending() == 0);
  CHECK_THROWS_AS(UidValidationClient(0), std::invalid_argument);
}

TEST_CASE("UID quota safety and liveness over randomized schedules", "[sources][uid]") {
  Rng rng(2024);
  const std::vector<std::string> states{"AT", "DE", "FR", "IT", "SK"};
  for (int trial = 0; trial < 1000; ++trial) {
    int q = 1 + static_cast<int>(rng.index(6));
    UidValidationClient client(q);
    std::map<std::string, std::size_t> queued;
    std::set<std::string> enqueued;
    int n = static_cast<int>(rng.index(40));
    for (int i = 0; i < n; ++i) {
      const auto& st = states[rng.index(states.size())];
      std::string uid = st + std::to_string(rng.index(30));
      if (client.enqueue(st, uid, static_cast<int>(rng.index(1000)))) {
        ++queued[st];
        enqueued.insert(uid);
      }
    }
    std::size_t longest = 0;
    for (const auto& [_, len] : queued) longest = std::max(longest, len);
    auto bound = static_cast<int>((longest + q - 1) / q);
    for (int d = 0; d < bound; ++d) {
      client.run_validation_day([](const std::string& u) { return u.back() % 2 == 0; });
    }
    for (const auto& day : client.day_log()) {
      for (const auto& [_, done] : day) CHECK(done <= q);
    }
    CHECK(client.pending() == 0);
    for (const auto& u : enqueued) CHECK(client.status(u) != UidStatus::pending);
  }
}

TEST_CASE("queue persistence restores service order", "[sources][uid]") {
  UidValidationClient a(1);
  for (int i = 0; i < 6; ++i) a.enqueue(i % 2 ? "DE" : "AT", "U" + std::to_string(i), 10 * (i % 3));
  a.run_validation_day([](const std::string&) { return true; });
  UidValidationClient b(1);
  b.restore(a.queued(), a.results(), a.seen(), a.day());
  CHECK(b.day() == a.day());
  CHECK_FALSE(b.enqueue("DE", "U1", 0));
  for (int d = 0; d < 3; ++d) {
    auto x = a.run_validation_day([](const std::string&) { return true; });
    auto y = b.run_validation_day([](const std::string&) { return true; });
    REQUIRE(x.size() == y.size());
    for (std::size_t i = 0; i < x.size(); ++i) CHECK(x[i].uid == y[i].uid);
  }
}

TEST_CASE("snapshots are isolated and batches block mutation", "[sources]") {
  SourceHub hub;
  WatchlistStore w;
  w.add("W1", "P1");
  hub.replace_watchlist(w);
  auto before = hub.snapshot();
  {
    auto guard = hub.begin_batch();
    CHECK(hub.batch_active());
    CHECK_THROWS_AS(hub.replace_watchlist(WatchlistStore{}), MidBatchMutation);
    CHECK_THROWS_AS(hub.set_legal_basis("watchlist", false), MidBatchMutation);
    CHECK_THROWS_AS(hub.run_validation_day([](const std::string&) { return true; }), MidBatchMutation);
    CHECK(hub.snapshot() == before);
  }
  CHECK_FALSE(hub.batch_active());
  hub.replace_watchlist(WatchlistStore{});
  auto after = hub.snapshot();
  CHECK(after->version == before->version + 1);
  auto c = make_case("C1");
  c.persons = {"P1"};
  CHECK(value_of(watchlist_links(*before, c)) == 1.0);
  CHECK(value_of(watchlist_links(*after, c)) == 0.0);
}

TEST_CASE("CSV parsing", "[sources][csv]") {
  CHECK(split_csv_line("a,b,c") == std::vector<std::string>{"a", "b", "c"});
  CHECK(split_csv_line("\"a,1\",\"say \"\"hi\"\"\",") == std::vector<std::string>{"a,1", "say \"hi\"", ""});
  CHECK(split_csv_line("x\r") == std::vector<std::string>{"x"});
}

TEST_CASE("ingest of empty files gives zero counts", "[sources][ingest]") {
  TempDir dir("pacc_sources");
  IngestPaths p{dir.write("cases.jsonl", ""), dir.write("watchlist.csv", "company_id,person_id\n"),
                dir.write("registry.csv", "company_id,address_id,member_state\n")};
  SourceHub hub;
  Corpus corpus;
  auto s = ingest(hub, corpus, p, pacc::testing::schema());
  CHECK(s.cases == 0);
  CHECK(s.watchlist_rows == 0);
  CHECK(s.registry_rows == 0);
  CHECK(s.addresses == 0);
  CHECK(hub.snapshot()->loaded.count("registry") == 1);
}

TEST_CASE("ingest of generated files matches independent line counts", "[sources][ingest]") {
  synth::GeneratorConfig cfg;
  cfg.n_cases = 400;
  auto g = synth::generate_corpus(cfg);
  TempDir dir("pacc_sources");
  std::ostringstream cases, wl, reg;
  write_cases_jsonl(cases, g.corpus.cases);
  synth::write_watchlist_csv(wl, g.watchlist);
  synth::write_registry_csv(reg, g.registry);
  IngestPaths p{dir.write("cases.jsonl", cases.str()), dir.write("watchlist.csv", wl.str()),
                dir.write("registry.csv", reg.str())};
  SourceHub hub;
  Corpus corpus;
  auto s = ingest(hub, corpus, p, pacc::testing::schema());
  CHECK(s.cases == count_data_lines(p.cases, false));
  CHECK(s.watchlist_rows == count_data_lines(p.watchlist, true));
  CHECK(s.registry_rows == count_data_lines(p.registry, true));
  CHECK(corpus.cases == g.corpus.cases);
  CHECK(hub.snapshot()->registry.consistent());
}

TEST_CASE("malformed input rejects the whole load with line diagnostics", "[sources][ingest]") {
  TempDir dir("pacc_sources");
  std::ostringstream good;
  write_cases_jsonl(good, {make_case("C1"), make_case("C2")});
  auto cases = dir.write("cases.jsonl", good.str());
  SourceHub hub;
  Corpus corpus;

  SECTION("duplicate registry company id") {
    auto reg = dir.write("registry.csv", "company_id,address_id,member_state\nC1,A1,AT\nC2,A1,AT\nC1,A2,AT\n");
    try {
      ingest(hub, corpus, {cases, "", reg}, pacc::testing::schema());
      FAIL("expected rejection");
    } catch (const IngestError& e) {
      REQUIRE(e.diagnostics.size() == 1);
      CHECK(e.diagnostics[0].path == reg + ":line 4");
      CHECK(e.diagnostics[0].message.find("duplicate") != std::string::npos);
    }
  }
  SECTION("bad JSON line and wrong field count") {
    auto bad = dir.write("bad.jsonl", good.str() + "{not json\n");
    auto wl = dir.write("watchlist.csv", "company_id,person_id\nW1,P1,extra\n");
    try {
      ingest(hub, corpus, {bad, wl, ""}, pacc::testing::schema());
      FAIL("expected rejection");
    } catch (const IngestError& e) {
      REQUIRE(e.diagnostics.size() == 2);
      CHECK(e.diagnostics[0].path == bad + ":line 3");
      CHECK(e.diagnostics[1].path == wl + ":line 2");
    }
  }
  SECTION("duplicate case id and wrong header") {
    std::ostringstream dup;
    write_cases_jsonl(dup, {make_case("C1"), make_case("C1")});
    auto d = dir.write("dup.jsonl", dup.str());
    auto wl = dir.write("watchlist.csv", "person_id,company_id\n");
    try {
      ingest(hub, corpus, {d, wl, ""}, pacc::testing::schema());
      FAIL("expected rejection");
    } catch (const IngestError& e) {
      REQUIRE(e.diagnostics.size() == 2);
      CHECK(e.diagnostics[0].message.find("duplicate case_id C1") != std::string::npos);
      CHECK(e.diagnostics[1].path == wl + ":line 1");
    }
  }
  SECTION("missing file") {
    CHECK_THROWS_AS(ingest(hub, corpus, {(dir.path / "nope.jsonl").string(), "", ""}, pacc::testing::schema()),
                    IngestError);
  }
  CHECK(corpus.cases.empty());
  CHECK(hub.snapshot()->version == 0);
}
