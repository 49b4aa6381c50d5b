#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "pacc/app/config.hpp"
#include "pacc/app/http.hpp"
#include "pacc/app/service.hpp"
#include "pacc/app/simulate.hpp"
#include "pacc/app/workspace.hpp"
#include "pacc/synth/generator.hpp"

namespace {

using namespace pacc;

constexpr int kOk = 0;
constexpr int kUsage = 1;
constexpr int kData = 2;

struct Options {
  std::string config;
  std::string workspace;

  std::uint64_t seed = 1;
  int n = 5000;
  double fraud_rate = 0.05;
  std::string out;

  std::string cases, watchlist, registry;
  std::vector<std::string> rules;
  int workers = 0;
  std::string plan;
  int months = 1;
  bool json = false;
  int port = 0;
  std::string host = "127.0.0.1";
  std::string case_id;
};

app::AppConfig config_for(const Options& o) {
  auto cfg = app::resolve_config(o.config.empty() ? std::nullopt : std::optional<std::string>(o.config));
  if (!o.workspace.empty()) cfg.workspace = o.workspace;
  if (!o.cases.empty()) cfg.cases = o.cases;
  if (!o.watchlist.empty()) cfg.watchlist = o.watchlist;
  if (!o.registry.empty()) cfg.registry = o.registry;
  if (o.workers > 0) cfg.workers = o.workers;
  if (o.port > 0) cfg.port = o.port;
  cfg.validate();
  return cfg;
}

int cmd_gen(const Options& o) {
  synth::GeneratorConfig g;
  g.seed = o.seed;
  g.n_cases = o.n;
  g.fraud_rate = o.fraud_rate;
  try {
    g.validate();
  } catch (const std::invalid_argument& e) {
    throw DataError(std::string("gen: ") + e.what());
  }
  auto gen = synth::generate_corpus(g);
  std::filesystem::path dir = o.out.empty() ? "." : o.out;
  std::filesystem::create_directories(dir);
  auto open = [&](const char* name) {
    std::ofstream f(dir / name, std::ios::trunc);
    if (!f) throw DataError("cannot write " + (dir / name).string());
    return f;
  };
  {
    auto f = open("cases.jsonl");
    write_cases_jsonl(f, gen.corpus.cases);
  }
  {
    auto f = open("watchlist.csv");
    synth::write_watchlist_csv(f, gen.watchlist);
  }
  {
    auto f = open("registry.csv");
    synth::write_registry_csv(f, gen.registry);
  }
  {
    auto f = open("truth.jsonl");
    synth::write_truth_jsonl(f, gen.truth);
  }
  std::cout << "generated " << gen.corpus.cases.size() << " cases (" << gen.truth.fraud_count() << " fraud) into "
            << dir.string() << "\n";
  return kOk;
}

int cmd_ingest(const Options& o) {
  auto ws = app::Workspace::open(config_for(o));
  const auto& s = ws->load_summary();
  std::cout << "cases: " << s.cases << "\n"
            << "watchlist rows: " << s.watchlist_rows << " (companies " << s.watchlisted_companies << ", persons "
            << s.linked_persons << ")\n"
            << "registry rows: " << s.registry_rows << " (addresses " << s.addresses << ")\n";
  for (const auto& b : ws->rulebooks()) {
    std::cout << "rules: " << b.path << " (" << b.rules.rules.size() << " rules, digest " << b.digest.substr(0, 16)
              << ")\n";
  }
  return kOk;
}

int cmd_train(const Options& o) {
  auto cfg = config_for(o);
  if (!o.out.empty()) cfg.models = o.out;
  auto ws = app::Workspace::open(cfg);
  auto m = ws->train();
  ws->save_models();
  std::cout << "trained at clock " << m.trained_at << ": " << (m.clusters ? m.clusters->k() : 0) << " clusters, "
            << m.classifiers.size() << " classifiers, effectiveness model "
            << (m.effectiveness ? "fitted" : "absent") << "\nwrote " << cfg.models_path() << "\n";
  return kOk;
}

int cmd_score(const Options& o) {
  auto ws = app::Workspace::open(config_for(o));
  if (!o.rules.empty()) ws->use_rules(o.rules);
  if (ws->rulebooks().empty()) throw DataError("no rule files; pass --rules or set config.rules");
  auto run = ws->score_all(static_cast<unsigned>(ws->config().workers));
  for (const auto& e : run.errors) std::cerr << "warning: " << e.case_id << ": " << e.message << "\n";
  std::cout << "scored " << run.reports.size() << " cases (" << run.errors.size() << " errors), digest "
            << run.digest << "\n";
  ws->commit_batch(std::move(run));
  if (!o.out.empty()) ws->save_reports(o.out);
  return kOk;
}

int cmd_select(const Options& o) {
  auto ws = app::Workspace::open(config_for(o));
  std::string plan_path = o.plan.empty() ? ws->config().plan : o.plan;
  if (plan_path.empty()) throw DataError("no plan; pass --plan or set config.plan");
  auto plan = selection::plan_from_json(read_json_file(plan_path));
  if (ws->reports().empty()) throw DataError("no score reports; run `pacc score` first");
  auto res = ws->select(plan);
  for (const auto& w : res.warnings) std::cerr << "warning: " << w << "\n";
  std::map<selection::Strategy, int> per;
  std::vector<std::string> ids;
  for (const auto& d : res.decisions) {
    ++per[d.strategy];
    ids.push_back(d.case_id);
  }
  ws->set_selection(res.decisions);
  ws->save_selection();
  if (!o.out.empty()) ws->save_selection(o.out);
  for (auto s : selection::kStrategyOrder) {
    if (plan.count(s) > 0) std::cout << to_string(s) << ": " << per[s] << " of " << plan.count(s) << "\n";
  }
  if (!ws->config().truth.empty()) {
    app::start_audits(*ws, app::load_truth(ws->config()), ids);
    std::cout << "opened " << ids.size() << " simulated audits at clock " << ws->clock() << "\n";
  }
  return kOk;
}

int cmd_simulate(const Options& o) {
  if (o.months < 1) throw CLI::ValidationError("--months", "must be >= 1");
  auto ws = app::Workspace::open(config_for(o));
  auto truth = app::load_truth(ws->config());
  if (!ws->has_models()) throw DataError("no trained models; run `pacc train` first");
  for (int i = 0; i < o.months; ++i) std::cout << app::simulate_month(*ws, truth).to_line() << "\n";
  return kOk;
}

int cmd_evaluate(const Options& o) {
  auto ws = app::Workspace::open(config_for(o));
  auto rep = ws->evaluate();
  if (o.json) {
    std::cout << synth::evaluation_to_json(rep).dump(2) << "\n";
  } else {
    std::cout << synth::evaluation_to_text(rep);
  }
  return kOk;
}

int cmd_serve(const Options& o) {
  auto ws = app::Workspace::open(config_for(o));
  app::Service service(*ws);
  auto server = app::make_http_server(service);
  int port = ws->config().port;
  std::cout << "serving on http://" << o.host << ":" << port << "/api" << std::endl;
  if (!server->listen(o.host, port)) throw DataError("cannot listen on " + o.host + ":" + std::to_string(port));
  return kOk;
}

int cmd_explain(const Options& o) {
  auto ws = app::Workspace::open(config_for(o));
  if (!ws->find_case(o.case_id)) throw DataError("unknown case " + o.case_id);
  const auto* r = ws->report_for(o.case_id);
  if (!r) throw DataError("case " + o.case_id + " has no score report; run `pacc score` first");
  std::cout << engine::render_explanations(*r);
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  Options o;
  CLI::App cli{"pacc: audit case scoring and selection"};
  cli.require_subcommand(1);
  cli.add_option("--config", o.config, "config file (default: $PACC_SELECT_CONFIG)");
  cli.add_option("--workspace", o.workspace, "workspace directory for derived files");

  auto* gen = cli.add_subcommand("gen", "generate a synthetic corpus");
  gen->add_option("--seed", o.seed, "generator seed");
  gen->add_option("--n", o.n, "number of cases");
  gen->add_option("--fraud-rate", o.fraud_rate, "share of fraudulent cases");
  gen->add_option("--out", o.out, "output directory");

  auto* ingest = cli.add_subcommand("ingest", "validate and load the input files");
  ingest->add_option("--cases", o.cases, "cases JSONL");
  ingest->add_option("--watchlist", o.watchlist, "watchlist CSV");
  ingest->add_option("--registry", o.registry, "registry CSV");

  auto* train = cli.add_subcommand("train", "train the predictive models");
  train->add_option("--out", o.out, "models file");

  auto* score = cli.add_subcommand("score", "score every case");
  score->add_option("--rules", o.rules, "rule file (repeatable)");
  score->add_option("--out", o.out, "extra copy of the reports JSONL");
  score->add_option("--workers", o.workers, "scoring threads");

  auto* select = cli.add_subcommand("select", "compose a selection plan");
  select->add_option("--plan", o.plan, "plan JSON");
  select->add_option("--out", o.out, "extra copy of the decisions JSONL");

  auto* simulate = cli.add_subcommand("simulate-month", "advance the simulated clock");
  simulate->add_option("--months", o.months, "months to simulate");

  auto* evaluate = cli.add_subcommand("evaluate", "success rates of the recorded selection");
  evaluate->add_flag("--json", o.json, "print JSON");

  auto* serve = cli.add_subcommand("serve", "run the HTTP API");
  serve->add_option("--port", o.port, "port");
  serve->add_option("--host", o.host, "bind address");

  auto* explain = cli.add_subcommand("explain", "print a case's explanation document");
  explain->add_option("--case", o.case_id, "case id")->required();

  try {
    cli.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return cli.exit(e);
  } catch (const CLI::ParseError& e) {
    cli.exit(e);
    return kUsage;
  }

  try {
    if (*gen) return cmd_gen(o);
    if (*ingest) return cmd_ingest(o);
    if (*train) return cmd_train(o);
    if (*score) return cmd_score(o);
    if (*select) return cmd_select(o);
    if (*simulate) return cmd_simulate(o);
    if (*evaluate) return cmd_evaluate(o);
    if (*serve) return cmd_serve(o);
    if (*explain) return cmd_explain(o);
  } catch (const CLI::ParseError& e) {
    std::cerr << "usage error: " << e.what() << "\n" << cli.help();
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kData;
  }
  return kUsage;
}
