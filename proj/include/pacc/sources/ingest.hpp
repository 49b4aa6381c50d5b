#pragma once

#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "pacc/core/json_io.hpp"
#include "pacc/core/validate.hpp"
#include "pacc/sources/hub.hpp"

namespace pacc::sources {

/// Whole-file rejection with one diagnostic per offending line.
class IngestError : public DataError {
 public:
  explicit IngestError(std::vector<Diagnostic> diags) : DataError(summarize(diags)), diagnostics(std::move(diags)) {}
  std::vector<Diagnostic> diagnostics;

 private:
  static std::string summarize(const std::vector<Diagnostic>& d) {
    std::string s = "ingest rejected (" + std::to_string(d.size()) + " problem" + (d.size() == 1 ? "" : "s") + ")";
    for (std::size_t i = 0; i < d.size() && i < 5; ++i) s += "\n  " + d[i].path + ": " + d[i].message;
    return s;
  }
};

struct IngestPaths {
  std::string cases;
  std::string watchlist;  // optional
  std::string registry;   // optional
};

struct LoadSummary {
  std::size_t cases = 0;
  std::size_t watchlist_rows = 0;
  std::size_t watchlisted_companies = 0;
  std::size_t linked_persons = 0;
  std::size_t registry_rows = 0;
  std::size_t addresses = 0;
};

inline WatchlistStore parse_watchlist(std::istream& in, const std::string& file, std::vector<Diagnostic>& diags) {
  WatchlistStore w;
  auto table = read_csv(in, {"company_id", "person_id"}, file, diags);
  for (const auto& [line, f] : table.rows) {
    if (f[0].empty()) {
      diags.push_back({file + ":line " + std::to_string(line), "company_id must not be empty"});
      continue;
    }
    w.add(f[0], f[1]);
  }
  return w;
}

inline RegistryStore parse_registry(std::istream& in, const std::string& file, std::vector<Diagnostic>& diags) {
  RegistryStore r;
  auto table = read_csv(in, {"company_id", "address_id", "member_state"}, file, diags);
  for (const auto& [line, f] : table.rows) {
    std::string where = file + ":line " + std::to_string(line);
    if (f[0].empty() || f[1].empty()) {
      diags.push_back({where, "company_id and address_id must not be empty"});
      continue;
    }
    if (f[2].size() != 2) {
      diags.push_back({where, "member_state must be a two-letter code"});
      continue;
    }
    try {
      r.add({f[0], f[1], f[2]});
    } catch (const DataError& e) {
      diags.push_back({where, e.what()});
    }
  }
  return r;
}

/// Validates every line of a case file. Returns the cases only when the
/// whole file is clean.
inline std::vector<TaxpayerCase> parse_cases(std::istream& in, const std::string& file, const FeatureSchema& schema,
                                             std::optional<int> current_year, std::vector<Diagnostic>& diags) {
  std::vector<TaxpayerCase> cases;
  std::vector<int> lines;
  std::string text;
  int line = 0;
  while (std::getline(in, text)) {
    ++line;
    if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::string where = file + ":line " + std::to_string(line);
    try {
      cases.push_back(case_from_json(Json::parse(text)));
      lines.push_back(line);
    } catch (const Json::exception& e) {
      diags.push_back({where, e.what()});
    } catch (const DataError& e) {
      diags.push_back({where, e.what()});
    }
  }
  std::map<std::string, int> first_seen;
  for (std::size_t i = 0; i < cases.size(); ++i) {
    std::string where = file + ":line " + std::to_string(lines[i]);
    for (const auto& d : validate_case(cases[i], schema, current_year)) {
      diags.push_back({where + ":" + d.path, d.message});
    }
    auto [it, fresh] = first_seen.emplace(cases[i].case_id, lines[i]);
    if (!fresh) {
      diags.push_back({where, "duplicate case_id " + cases[i].case_id + " (first on line " +
                                  std::to_string(it->second) + ")"});
    }
  }
  return cases;
}

/// Loads all files, then commits them to `corpus` and `hub` together. Any
/// problem rejects everything and leaves both untouched.
inline LoadSummary ingest(SourceHub& hub, Corpus& corpus, const IngestPaths& paths, const FeatureSchema& schema) {
  std::vector<Diagnostic> diags;
  auto open = [&](const std::string& path) {
    auto in = std::make_unique<std::ifstream>(path);
    if (!*in) diags.push_back({path, "cannot open file"});
    return in;
  };

  std::vector<TaxpayerCase> cases;
  if (auto in = open(paths.cases); *in) cases = parse_cases(*in, paths.cases, schema, corpus.current_year(), diags);
  std::optional<WatchlistStore> watchlist;
  if (!paths.watchlist.empty()) {
    if (auto in = open(paths.watchlist); *in) watchlist = parse_watchlist(*in, paths.watchlist, diags);
  }
  std::optional<RegistryStore> registry;
  if (!paths.registry.empty()) {
    if (auto in = open(paths.registry); *in) registry = parse_registry(*in, paths.registry, diags);
  }
  if (!diags.empty()) throw IngestError(std::move(diags));

  if (hub.batch_active()) throw MidBatchMutation("cannot ingest during a scoring batch");
  LoadSummary summary;
  summary.cases = cases.size();
  if (watchlist) {
    summary.watchlist_rows = watchlist->rows;
    summary.watchlisted_companies = watchlist->companies.size();
    summary.linked_persons = watchlist->person_companies.size();
    hub.replace_watchlist(std::move(*watchlist));
  }
  if (registry) {
    summary.registry_rows = registry->size();
    summary.addresses = registry->address_count();
    hub.replace_registry(std::move(*registry));
  }
  corpus.cases = std::move(cases);
  return summary;
}

}  // namespace pacc::sources
