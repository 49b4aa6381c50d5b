#pragma once

#include <atomic>
#include <map>
#include <mutex>
#include <set>
#include <shared_mutex>
#include <string>
#include <vector>

#include "pacc/app/workspace.hpp"

namespace pacc::app {

struct HttpResponse {
  int status = 200;
  Json body;
};

inline HttpResponse error_response(int status, const std::string& code, const std::string& message) {
  return {status, Json{{"error", Json{{"code", code}, {"message", message}}}}};
}

/// Body of POST /api/cases/{id}/whatif.
struct WhatIfRequest {
  std::string case_id;
  std::set<std::string> disabled_rules;
  bool persist = false;
};

/// The analyst JSON API over a workspace. Reads and what-if computations
/// run concurrently; batches and persisted activation changes take the
/// writer side.
class Service {
 public:
  /// Trains models and runs a first batch when the workspace has none.
  explicit Service(Workspace& ws) : ws_(ws) {
    if (!ws_.has_models()) {
      ws_.train();
      ws_.save_models();
    }
    if (ws_.reports().empty()) ws_.commit_batch(ws_.score_all(static_cast<unsigned>(ws_.config().workers)));
  }

  Workspace& workspace() { return ws_; }

  /// `target` is a path with an optional query string.
  HttpResponse handle(const std::string& method, const std::string& target, const std::string& body = {}) {
    auto q = target.find('?');
    std::map<std::string, std::string> query;
    if (q != std::string::npos) {
      std::string qs = target.substr(q + 1);
      std::size_t pos = 0;
      while (pos <= qs.size()) {
        auto amp = qs.find('&', pos);
        std::string part = qs.substr(pos, amp == std::string::npos ? std::string::npos : amp - pos);
        if (!part.empty()) {
          auto eq = part.find('=');
          query[part.substr(0, eq)] = eq == std::string::npos ? "" : part.substr(eq + 1);
        }
        if (amp == std::string::npos) break;
        pos = amp + 1;
      }
    }
    return handle(method, target.substr(0, q), query, body);
  }

  HttpResponse handle(const std::string& method, const std::string& path,
                      const std::map<std::string, std::string>& query, const std::string& body) {
    try {
      return route(method, path, query, body);
    } catch (const std::exception& e) {
      return error_response(500, "internal", e.what());
    }
  }

 private:
  static std::vector<std::string> split_path(const std::string& path) {
    std::vector<std::string> parts;
    std::size_t pos = 0;
    while (pos < path.size()) {
      auto slash = path.find('/', pos);
      if (slash == std::string::npos) slash = path.size();
      if (slash > pos) parts.push_back(path.substr(pos, slash - pos));
      pos = slash + 1;
    }
    return parts;
  }

  HttpResponse route(const std::string& method, const std::string& path,
                     const std::map<std::string, std::string>& query, const std::string& body) {
    auto p = split_path(path);
    if (p.empty() || p[0] != "api") return error_response(404, "not_found", "no route for " + path);
    auto want = [&](const char* m) { return method == m; };
    auto wrong_method = [&] { return error_response(405, "method_not_allowed", method + " not allowed on " + path); };

    if (p.size() == 2 && p[1] == "health") return want("GET") ? health() : wrong_method();
    if (p.size() == 2 && p[1] == "rules") return want("GET") ? rules() : wrong_method();
    if (p.size() == 2 && p[1] == "cases") return want("GET") ? cases(query) : wrong_method();
    if (p.size() == 4 && p[1] == "cases" && p[3] == "report") return want("GET") ? report(p[2]) : wrong_method();
    if (p.size() == 4 && p[1] == "cases" && p[3] == "whatif") return want("POST") ? whatif(p[2], body) : wrong_method();
    if (p.size() == 3 && p[1] == "batch" && p[2] == "score") return want("POST") ? batch() : wrong_method();
    if (p.size() == 3 && p[1] == "evaluation" && p[2] == "summary") return want("GET") ? evaluation() : wrong_method();
    return error_response(404, "not_found", "no route for " + path);
  }

  HttpResponse health() {
    std::shared_lock lock(mu_);
    Json rulesets = Json::array();
    for (const auto& b : ws_.rulebooks()) rulesets.push_back(b.digest);
    return {200, Json{{"status", "ok"},
                      {"clock", ws_.clock()},
                      {"month", to_string(ws_.now())},
                      {"cases", ws_.corpus().cases.size()},
                      {"reports", ws_.reports().size()},
                      {"batches", ws_.batches()},
                      {"ruleset_digests", rulesets},
                      {"models_trained_at", ws_.models().trained_at}}};
  }

  HttpResponse rules() {
    std::shared_lock lock(mu_);
    const auto& t = ws_.config().tier_defaults;
    Json rules = Json::array();
    Json synergies = Json::array();
    for (const auto& b : ws_.rulebooks()) {
      Json kind = b.rules.kind ? Json(std::string(to_string(*b.rules.kind))) : Json(nullptr);
      for (const auto& r : b.rules.rules) {
        rules.push_back(Json{{"name", r.name},
                             {"kind", kind},
                             {"tier", std::string(to_string(r.tier))},
                             {"contribution", r.contribution},
                             {"source", r.source == dsl::RuleSource::expert ? "expert" : "model"},
                             {"explanation", r.explanation},
                             {"ruleset_digest", b.digest}});
      }
      for (const auto& s : b.rules.synergies) {
        synergies.push_back(Json{{"kind", kind}, {"rules", s.rule_names}, {"bonus", s.bonus}});
      }
    }
    return {200, Json{{"tier_defaults", Json{{"LOW", t.low}, {"MED", t.med}, {"HIGH", t.high}}},
                      {"rules", rules},
                      {"synergies", synergies}}};
  }

  HttpResponse cases(const std::map<std::string, std::string>& query) {
    std::string sort = "score";
    std::size_t limit = 50;
    for (const auto& [k, v] : query) {
      if (k == "sort") {
        sort = v;
      } else if (k == "limit") {
        auto n = pacc::detail::parse_digits(v);
        if (!n || *n < 1) return error_response(400, "bad_request", "limit must be a positive integer");
        limit = static_cast<std::size_t>(*n);
      } else {
        return error_response(400, "bad_request", "unknown query parameter '" + k + "'");
      }
    }
    if (sort != "score") return error_response(400, "bad_request", "sort must be 'score'");
    std::shared_lock lock(mu_);
    auto ids = engine::rank_cases(ws_.reports(), limit);
    Json rows = Json::array();
    int rank = 0;
    for (const auto& id : ids) {
      const auto* r = ws_.report_for(id);
      Json triggered = Json::array();
      for (const auto& t : r->triggered) triggered.push_back(t.rule_name);
      rows.push_back(Json{{"rank", ++rank},
                          {"case_id", id},
                          {"kind", std::string(to_string(r->kind))},
                          {"score", r->score.value()},
                          {"triggered", triggered},
                          {"not_applicable", r->not_applicable.size()},
                          {"disabled_rules", ws_.deactivated_for(id)}});
    }
    return {200, Json{{"sort", sort}, {"limit", limit}, {"total", ws_.reports().size()}, {"cases", rows}}};
  }

  HttpResponse report(const std::string& id) {
    std::shared_lock lock(mu_);
    if (!ws_.find_case(id)) return error_response(404, "unknown_case", "unknown case " + id);
    const auto* r = ws_.report_for(id);
    if (!r) return error_response(404, "unknown_case", "case " + id + " has no score report");
    return {200, Json{{"report", engine::report_to_json(*r)},
                      {"explanation", engine::render_explanations(*r)},
                      {"disabled_rules", ws_.deactivated_for(id)}}};
  }

  static std::optional<WhatIfRequest> parse_whatif(const std::string& body, std::string& error) {
    Json j = Json::parse(body, nullptr, false);
    if (j.is_discarded()) {
      error = "body is not valid JSON";
      return std::nullopt;
    }
    if (!j.is_object()) {
      error = "body must be a JSON object";
      return std::nullopt;
    }
    WhatIfRequest req;
    for (const auto& [k, v] : j.items()) {
      if (k == "case_id" && v.is_string()) {
        req.case_id = v.get<std::string>();
      } else if (k == "persist" && v.is_boolean()) {
        req.persist = v.get<bool>();
      } else if (k == "disabled_rules" && v.is_array()) {
        for (const auto& n : v) {
          if (!n.is_string()) {
            error = "disabled_rules must hold strings";
            return std::nullopt;
          }
          req.disabled_rules.insert(n.get<std::string>());
        }
      } else {
        error = "unexpected or mistyped field '" + k + "'";
        return std::nullopt;
      }
    }
    return req;
  }

  HttpResponse whatif(const std::string& id, const std::string& body) {
    std::string err;
    auto req = parse_whatif(body, err);
    if (!req) return error_response(400, "bad_request", err);
    if (!req->case_id.empty() && req->case_id != id) {
      return error_response(400, "bad_request", "case_id in body does not match the path");
    }
    engine::ScoreReport fresh;
    {
      std::shared_lock lock(mu_);
      const auto* c = ws_.find_case(id);
      if (!c) return error_response(404, "unknown_case", "unknown case " + id);
      const auto* book = ws_.rules_for(c->kind);
      if (!book) return error_response(422, "unknown_rule", "no rule set covers case kind " + std::string(to_string(c->kind)));
      for (const auto& n : req->disabled_rules) {
        if (!book->rules.find(n)) return error_response(422, "unknown_rule", "unknown rule name \"" + n + "\"");
      }
      fresh = ws_.score_one(*c, req->disabled_rules);
    }
    if (req->persist) {
      if (batch_running_ || ws_.hub().batch_active()) {
        return error_response(409, "batch_in_progress", "rule activation cannot change during a scoring batch");
      }
      std::unique_lock lock(mu_);
      ws_.set_deactivated(id, req->disabled_rules);
      ws_.replace_report(fresh);
      ws_.save_reports();
      ws_.save_state();
    }
    return {200, Json{{"report", engine::report_to_json(fresh)},
                      {"explanation", engine::render_explanations(fresh)},
                      {"persisted", req->persist}}};
  }

  HttpResponse batch() {
    if (batch_running_.exchange(true)) {
      return error_response(409, "batch_in_progress", "a scoring batch is already running");
    }
    struct Reset {
      std::atomic<bool>& flag;
      ~Reset() { flag = false; }
    } reset{batch_running_};
    BatchRun run;
    {
      std::shared_lock lock(mu_);
      try {
        run = ws_.score_all(static_cast<unsigned>(ws_.config().workers));
      } catch (const sources::MidBatchMutation& e) {
        return error_response(409, "batch_in_progress", e.what());
      }
    }
    std::unique_lock lock(mu_);
    Json out{{"digest", run.digest},
             {"count", run.reports.size()},
             {"errors", run.errors.size()},
             {"scored_at", run.scored_at}};
    ws_.commit_batch(std::move(run));
    return {200, out};
  }

  HttpResponse evaluation() {
    std::shared_lock lock(mu_);
    auto rep = ws_.evaluate();
    Json j = synth::evaluation_to_json(rep);
    if (ws_.selection().empty()) j["caveats"].push_back("no selection decisions recorded yet");
    return {200, j};
  }

  Workspace& ws_;
  std::shared_mutex mu_;
  std::atomic<bool> batch_running_{false};
};

}  // namespace pacc::app
