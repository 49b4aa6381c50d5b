#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "pacc/app/config.hpp"
#include "pacc/core/digest.hpp"
#include "pacc/dsl/lint.hpp"
#include "pacc/dsl/parser.hpp"
#include "pacc/engine/report.hpp"
#include "pacc/engine/score.hpp"
#include "pacc/models/trained.hpp"
#include "pacc/selection/plan.hpp"
#include "pacc/sources/ingest.hpp"
#include "pacc/synth/evaluation.hpp"
#include "pacc/synth/liability.hpp"

namespace pacc::app {

inline constexpr int kStateFormatVersion = 1;

/// One parsed rule file.
struct RuleBook {
  std::string path;
  dsl::RuleSet rules;
  std::string digest;
};

/// Result of scoring every case once.
struct BatchRun {
  std::vector<engine::ScoreReport> reports;  // corpus order
  std::vector<engine::BatchError> errors;
  std::string digest;  // SHA-256 of the reports as JSONL
  int scored_at = 0;
};

inline std::string reports_digest(const std::vector<engine::ScoreReport>& reports) {
  std::ostringstream out;
  engine::write_reports_jsonl(out, reports);
  return sha256_hex(out.str());
}

inline dsl::RuleSet parse_rule_file(const std::string& path, const FeatureSchema& schema,
                                    const dsl::TierDefaults& tiers) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  auto res = dsl::parse_rules(ss.str(), schema, dsl::default_model_ids(), tiers);
  if (!res.ok()) {
    std::string msg = path + ": rule file rejected";
    for (const auto& e : res.errors) msg += "\n  " + path + ":" + e.to_string();
    throw DataError(msg);
  }
  return std::move(*res.rules);
}

inline std::vector<selection::Signal> read_signals_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  std::vector<selection::Signal> out;
  std::string line;
  int n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.empty()) continue;
    std::string where = path + ":" + std::to_string(n);
    try {
      Json j = Json::parse(line);
      pacc::detail::reject_unknown_keys(j, {"case_id", "kind", "note"}, where);
      selection::Signal s;
      s.case_id = j.at("case_id").get<std::string>();
      auto kind = selection::parse_signal_kind(j.at("kind").get<std::string>());
      if (!kind) throw DataError(where + ": unknown signal kind");
      s.kind = *kind;
      if (j.contains("note")) s.note = j.at("note").get<std::string>();
      out.push_back(std::move(s));
    } catch (const nlohmann::json::exception& e) {
      throw DataError(where + ": " + e.what());
    }
  }
  return out;
}

/// Loaded inputs plus the derived state kept under `config.workspace`:
/// models.json, reports.jsonl, selection.jsonl, outcomes.jsonl, state.json
/// and run.log. Input files are never written.
class Workspace {
 public:
  explicit Workspace(AppConfig cfg) : cfg_(std::move(cfg)), hub_(std::make_unique<sources::SourceHub>(cfg_.uid_quota)) {}
  Workspace(const Workspace&) = delete;
  Workspace& operator=(const Workspace&) = delete;

  /// Loads inputs and any saved state. Throws DataError (IngestError for
  /// malformed input files).
  static std::unique_ptr<Workspace> open(const AppConfig& cfg) {
    cfg.validate();
    auto ws = std::make_unique<Workspace>(cfg);
    ws->load();
    return ws;
  }

  const AppConfig& config() const { return cfg_; }
  const FeatureSchema& schema() const { return schema_; }
  Corpus& corpus() { return corpus_; }
  const Corpus& corpus() const { return corpus_; }
  sources::SourceHub& hub() { return *hub_; }
  const sources::LoadSummary& load_summary() const { return summary_; }
  const std::vector<RuleBook>& rulebooks() const { return books_; }
  const std::vector<selection::Signal>& signals() const { return signals_; }
  int clock() const { return corpus_.clock.now(); }
  YearMonth now() const { return corpus_.current_month(); }

  const TaxpayerCase* find_case(const std::string& id) const {
    auto it = case_index_.find(id);
    return it == case_index_.end() ? nullptr : &corpus_.cases[it->second];
  }
  TaxpayerCase* find_case(const std::string& id) {
    auto it = case_index_.find(id);
    return it == case_index_.end() ? nullptr : &corpus_.cases[it->second];
  }

  /// The rule file for a case kind: one naming the kind, else one without a
  /// kind directive.
  const RuleBook* rules_for(CaseKind k) const {
    const RuleBook* any = nullptr;
    for (const auto& b : books_) {
      if (b.rules.kind == k) return &b;
      if (!b.rules.kind && !any) any = &b;
    }
    return any;
  }

  /// Replaces the configured rule files, e.g. for a one-off `score --rules`.
  void use_rules(const std::vector<std::string>& paths) {
    std::vector<RuleBook> books;
    std::set<std::string> kinds;
    for (const auto& p : paths) {
      RuleBook b{p, parse_rule_file(p, schema_, cfg_.tier_defaults), {}};
      b.digest = dsl::ruleset_digest(b.rules);
      std::string kind = b.rules.kind ? std::string(to_string(*b.rules.kind)) : "any";
      if (!kinds.insert(kind).second) throw DataError("two rule files cover case kind " + kind);
      books.push_back(std::move(b));
    }
    books_ = std::move(books);
  }

  // -- models ---------------------------------------------------------------

  bool has_models() const { return models_.has_value(); }
  const models::TrainedModels& models() const {
    if (!models_) throw DataError("no trained models at " + cfg_.models_path() + "; run `pacc train` first");
    return *models_;
  }
  void set_models(models::TrainedModels m) { models_ = std::move(m); }

  models::TrainedModels train() {
    models::ModelConfig mc;
    mc.seed = cfg_.seed;
    auto m = models::train_models(corpus_.cases, clock(), mc, schema_);
    models_ = m;
    return m;
  }

  // -- per-case activation ---------------------------------------------------

  const std::set<std::string>& deactivated_for(const std::string& case_id) const {
    static const std::set<std::string> kNone;
    auto it = deactivated_.find(case_id);
    return it == deactivated_.end() ? kNone : it->second;
  }
  void set_deactivated(const std::string& case_id, std::set<std::string> names) {
    if (names.empty()) {
      deactivated_.erase(case_id);
    } else {
      deactivated_[case_id] = std::move(names);
    }
  }
  const std::map<std::string, std::set<std::string>>& deactivations() const { return deactivated_; }

  // -- scoring ---------------------------------------------------------------

  /// Scores one case with an explicit activation against the current
  /// source snapshot. Throws ScoringError for unknown rule names.
  engine::ScoreReport score_one(const TaxpayerCase& c, const std::set<std::string>& disabled) const {
    const RuleBook* book = rules_for(c.kind);
    if (!book) throw DataError("no rule file for case kind " + std::string(to_string(c.kind)));
    auto snap = hub_->snapshot();
    engine::SharedContext shared{&models(), snap.get(), disabled, now(), clock()};
    return engine::score_case(book->rules, engine::CaseContext{&c, &shared});
  }

  /// Scores every case that has a rule file, honouring saved per-case
  /// activations. Sources are frozen for the duration.
  BatchRun score_all(unsigned workers = 1) {
    const auto& m = models();
    BatchRun run;
    run.scored_at = clock();
    auto guard = hub_->begin_batch();
    auto snap = hub_->snapshot();
    std::map<std::string, engine::ScoreReport> by_id;
    for (const auto& book : books_) {
      std::vector<const TaxpayerCase*> plain;
      std::vector<const TaxpayerCase*> custom;
      for (const auto& c : corpus_.cases) {
        if (rules_for(c.kind) != &book) continue;
        (deactivated_.count(c.case_id) ? custom : plain).push_back(&c);
      }
      engine::SharedContext shared{&m, snap.get(), {}, now(), clock()};
      auto res = engine::score_batch(book.rules, plain, shared, workers);
      for (auto& r : res.reports) by_id.emplace(r.case_id, std::move(r));
      for (auto& e : res.errors) run.errors.push_back(std::move(e));
      for (const auto* c : custom) {
        try {
          engine::SharedContext own{&m, snap.get(), deactivated_.at(c->case_id), now(), clock()};
          by_id.emplace(c->case_id, engine::score_case(book.rules, engine::CaseContext{c, &own}));
        } catch (const std::exception& e) {
          run.errors.push_back({0, c->case_id, e.what()});
        }
      }
    }
    for (const auto& c : corpus_.cases) {
      auto it = by_id.find(c.case_id);
      if (it != by_id.end()) run.reports.push_back(std::move(it->second));
    }
    run.digest = reports_digest(run.reports);
    return run;
  }

  // -- stored reports and selection -----------------------------------------

  const std::vector<engine::ScoreReport>& reports() const { return reports_; }
  const engine::ScoreReport* report_for(const std::string& case_id) const {
    auto it = report_index_.find(case_id);
    return it == report_index_.end() ? nullptr : &reports_[it->second];
  }
  void set_reports(std::vector<engine::ScoreReport> reports) {
    reports_ = std::move(reports);
    report_index_.clear();
    for (std::size_t i = 0; i < reports_.size(); ++i) report_index_[reports_[i].case_id] = i;
  }
  void replace_report(engine::ScoreReport r) {
    auto it = report_index_.find(r.case_id);
    if (it == report_index_.end()) {
      report_index_[r.case_id] = reports_.size();
      reports_.push_back(std::move(r));
    } else {
      reports_[it->second] = std::move(r);
    }
  }

  const std::vector<selection::SelectionDecision>& selection() const { return selection_; }
  void set_selection(std::vector<selection::SelectionDecision> d) { selection_ = std::move(d); }

  /// Composes `plan` over the stored reports. Liabilities come from the
  /// trained models.
  selection::PlanResult select(const selection::SelectionPlan& plan) const {
    auto liabilities = synth::estimate_liabilities(models(), corpus_.cases, reports_);
    selection::PlanInputs in{&corpus_.cases, &reports_, &liabilities, &signals_, now()};
    return selection::compose_plan(plan, in);
  }

  synth::EvaluationReport evaluate() const {
    return synth::success_rate(selection_, corpus_.cases, clock(), cfg_.audits.delay_months, &reports_);
  }

  // -- persistence -----------------------------------------------------------

  void ensure_dir() const { std::filesystem::create_directories(cfg_.workspace); }

  void save_models() const {
    ensure_dir();
    models::save_models(models(), cfg_.models_path());
  }
  void save_reports(const std::string& path = {}) const {
    ensure_dir();
    write_file(path.empty() ? cfg_.file("reports.jsonl") : path,
               [&](std::ostream& o) { engine::write_reports_jsonl(o, reports_); });
  }
  void save_selection(const std::string& path = {}) const {
    ensure_dir();
    write_file(path.empty() ? cfg_.file("selection.jsonl") : path,
               [&](std::ostream& o) { selection::write_decisions_jsonl(o, selection_); });
  }
  void save_outcomes() const {
    ensure_dir();
    write_file(cfg_.file("outcomes.jsonl"), [&](std::ostream& o) {
      for (const auto& c : corpus_.cases) {
        if (!c.outcome || !opened_.count(c.case_id)) continue;
        Json j{{"case_id", c.case_id},
               {"audited", c.outcome->audited},
               {"fraud_found", c.outcome->fraud_found},
               {"back_tax_eur", c.outcome->back_tax.eur()},
               {"available_at", c.outcome->available_at},
               {"last_audited_year", c.last_audited_year ? Json(*c.last_audited_year) : Json(nullptr)}};
        o << j.dump() << "\n";
      }
    });
  }
  /// Marks outcomes set on these cases as workspace records to persist.
  void record_audits(const std::vector<std::string>& ids) { opened_.insert(ids.begin(), ids.end()); }

  void save_state() const {
    ensure_dir();
    Json deact = Json::object();
    for (const auto& [id, names] : deactivated_) deact[id] = names;
    const auto& uid = hub_->uid_client();
    Json queued = Json::array();
    for (const auto& q : uid.queued()) queued.push_back(Json::array({q.state, q.uid, q.priority}));
    Json results = Json::object();
    for (const auto& [u, s] : uid.results()) results[u] = std::string(sources::to_string(s));
    Json seen = Json::array();
    for (const auto& [state, u] : uid.seen()) seen.push_back(Json::array({state, u}));
    Json j{{"format_version", kStateFormatVersion},
           {"clock", clock()},
           {"start", to_string(corpus_.start)},
           {"batches", batches_},
           {"deactivated", deact},
           {"uid", Json{{"day", uid.day()}, {"queued", queued}, {"results", results}, {"seen", seen}}}};
    write_file(cfg_.file("state.json"), [&](std::ostream& o) { o << j.dump(2) << "\n"; });
  }

  void append_log(const std::string& line) const {
    ensure_dir();
    std::ofstream out(cfg_.file("run.log"), std::ios::app);
    out << line << "\n";
  }

  int batches() const { return batches_; }

  /// Stores a finished batch as the current reports, saves them and logs
  /// its digest.
  void commit_batch(BatchRun run) {
    ++batches_;
    std::string line = "clock=" + std::to_string(clock()) + " month=" + to_string(now()) +
                       " event=batch n=" + std::to_string(batches_) + " digest=" + run.digest +
                       " reports=" + std::to_string(run.reports.size()) + " errors=" + std::to_string(run.errors.size());
    set_reports(std::move(run.reports));
    save_reports();
    save_state();
    append_log(line);
  }

  /// Advances the corpus clock by one month.
  void advance_clock() { corpus_.clock.advance(1); }

 private:
  template <class F>
  static void write_file(const std::string& path, F&& body) {
    std::string tmp = path + ".tmp";
    {
      std::ofstream out(tmp, std::ios::trunc);
      if (!out) throw DataError("cannot write " + path);
      body(out);
      if (!out) throw DataError("cannot write " + path);
    }
    std::filesystem::rename(tmp, path);
  }

  void load() {
    schema_ = load_schema(cfg_.schema_path());
    if (cfg_.cases.empty()) throw DataError("config.cases is not set");
    summary_ = sources::ingest(*hub_, corpus_, {cfg_.cases, cfg_.watchlist, cfg_.registry}, schema_);
    for (std::size_t i = 0; i < corpus_.cases.size(); ++i) case_index_[corpus_.cases[i].case_id] = i;
    use_rules(cfg_.rules);
    if (!cfg_.signals.empty()) signals_ = read_signals_jsonl(cfg_.signals);
    namespace fs = std::filesystem;
    if (fs::exists(cfg_.file("state.json"))) load_state();
    if (fs::exists(cfg_.file("outcomes.jsonl"))) load_outcomes();
    if (fs::exists(cfg_.models_path())) models_ = models::load_models(cfg_.models_path());
    if (fs::exists(cfg_.file("reports.jsonl"))) {
      std::ifstream in(cfg_.file("reports.jsonl"));
      set_reports(engine::read_reports_jsonl(in));
    }
    if (fs::exists(cfg_.file("selection.jsonl"))) {
      std::ifstream in(cfg_.file("selection.jsonl"));
      selection_ = selection::read_decisions_jsonl(in);
    }
  }

  void load_state() {
    Json j = read_json_file(cfg_.file("state.json"));
    std::string where = cfg_.file("state.json");
    try {
      if (j.at("format_version").get<int>() != kStateFormatVersion) throw DataError(where + ": unsupported format_version");
      auto start = parse_year_month(j.at("start").get<std::string>());
      if (!start) throw DataError(where + ": bad start month");
      corpus_.start = *start;
      corpus_.clock = CorpusClock(j.at("clock").get<int>());
      batches_ = j.at("batches").get<int>();
      for (const auto& [id, names] : j.at("deactivated").items()) {
        deactivated_[id] = names.get<std::set<std::string>>();
      }
      const Json& u = j.at("uid");
      std::vector<sources::UidValidationClient::QueuedCheck> queued;
      for (const auto& q : u.at("queued")) queued.push_back({q.at(0).get<std::string>(), q.at(1).get<std::string>(), q.at(2).get<int>()});
      std::map<std::string, sources::UidStatus> results;
      for (const auto& [uid, s] : u.at("results").items()) {
        auto st = sources::parse_uid_status(s.get<std::string>());
        if (!st) throw DataError(where + ": bad UID status for " + uid);
        results[uid] = *st;
      }
      std::set<std::pair<std::string, std::string>> seen;
      for (const auto& s : u.at("seen")) seen.insert({s.at(0).get<std::string>(), s.at(1).get<std::string>()});
      hub_->uid_client().restore(queued, results, seen, u.at("day").get<int>());
      if (!results.empty()) hub_->publish_uid_results();
    } catch (const nlohmann::json::exception& e) {
      throw DataError(where + ": " + e.what());
    }
  }

  void load_outcomes() {
    std::ifstream in(cfg_.file("outcomes.jsonl"));
    std::string line;
    int n = 0;
    while (std::getline(in, line)) {
      ++n;
      if (line.empty()) continue;
      std::string where = cfg_.file("outcomes.jsonl") + ":" + std::to_string(n);
      try {
        Json j = Json::parse(line);
        auto* c = find_case(j.at("case_id").get<std::string>());
        if (!c) throw DataError(where + ": unknown case " + j.at("case_id").get<std::string>());
        AuditOutcome o;
        o.audited = j.at("audited").get<bool>();
        o.fraud_found = j.at("fraud_found").get<bool>();
        o.back_tax = Money::from_eur(j.at("back_tax_eur").get<double>());
        o.available_at = j.at("available_at").get<int>();
        c->outcome = o;
        const Json& y = j.at("last_audited_year");
        c->last_audited_year = y.is_null() ? std::nullopt : std::optional<int>(y.get<int>());
        opened_.insert(c->case_id);
      } catch (const nlohmann::json::exception& e) {
        throw DataError(where + ": " + e.what());
      }
    }
  }

  AppConfig cfg_;
  FeatureSchema schema_;
  Corpus corpus_;
  std::unique_ptr<sources::SourceHub> hub_;
  sources::LoadSummary summary_;
  std::map<std::string, std::size_t> case_index_;
  std::vector<RuleBook> books_;
  std::vector<selection::Signal> signals_;
  std::optional<models::TrainedModels> models_;
  std::vector<engine::ScoreReport> reports_;
  std::map<std::string, std::size_t> report_index_;
  std::vector<selection::SelectionDecision> selection_;
  std::map<std::string, std::set<std::string>> deactivated_;
  std::set<std::string> opened_;
  int batches_ = 0;
};

}  // namespace pacc::app
