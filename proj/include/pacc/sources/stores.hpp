#pragma once

#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "pacc/core/types.hpp"
#include "pacc/core/validate.hpp"

namespace pacc::sources {

/// Companies on the watchlist and the persons linked to them.
struct WatchlistStore {
  std::set<std::string> companies;
  std::map<std::string, std::set<std::string>> person_companies;
  std::size_t rows = 0;

  /// Lists `company_id`; links `person_id` to it when non-empty.
  void add(const std::string& company_id, const std::string& person_id) {
    companies.insert(company_id);
    if (!person_id.empty()) person_companies[person_id].insert(company_id);
    ++rows;
  }

  /// Whether `person` is linked to a watchlisted company other than `self`.
  bool linked_elsewhere(const std::string& person, const std::string& self) const {
    auto it = person_companies.find(person);
    if (it == person_companies.end()) return false;
    for (const auto& company : it->second) {
      if (company != self) return true;
    }
    return false;
  }
};

struct RegistryEntry {
  std::string company_id;
  std::string address_id;
  std::string member_state;

  bool operator==(const RegistryEntry&) const = default;
};

/// Company registry with a reverse address index.
class RegistryStore {
 public:
  /// Throws DataError for a duplicate company id.
  void add(RegistryEntry e) {
    if (entries_.count(e.company_id)) throw DataError("duplicate company id " + e.company_id);
    by_address_[e.address_id].push_back(e.company_id);
    std::string id = e.company_id;
    entries_.emplace(std::move(id), std::move(e));
  }

  std::size_t companies_at(const std::string& address_id) const {
    auto it = by_address_.find(address_id);
    return it == by_address_.end() ? 0 : it->second.size();
  }

  const RegistryEntry* find(const std::string& company_id) const {
    auto it = entries_.find(company_id);
    return it == entries_.end() ? nullptr : &it->second;
  }

  std::size_t size() const { return entries_.size(); }
  std::size_t address_count() const { return by_address_.size(); }
  const std::map<std::string, RegistryEntry>& entries() const { return entries_; }

  /// Reverse index agrees with the forward map.
  bool consistent() const {
    std::size_t total = 0;
    for (const auto& [addr, ids] : by_address_) {
      for (const auto& id : ids) {
        auto it = entries_.find(id);
        if (it == entries_.end() || it->second.address_id != addr) return false;
        ++total;
      }
    }
    return total == entries_.size();
  }

 private:
  std::map<std::string, RegistryEntry> entries_;
  std::map<std::string, std::vector<std::string>> by_address_;
};

// ---------------------------------------------------------------------------
// CSV
// ---------------------------------------------------------------------------

/// Splits one CSV record. Fields may be double-quoted with "" escapes.
inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        field += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        field += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(std::move(field));
      field.clear();
    } else if (c != '\r') {
      field += c;
    }
  }
  out.push_back(std::move(field));
  return out;
}

struct CsvTable {
  std::vector<std::pair<int, std::vector<std::string>>> rows;  // (line number, fields)
};

/// Reads a CSV with a mandatory header equal to `header`. Problems are
/// appended to `diags` with "line N" paths.
inline CsvTable read_csv(std::istream& in, const std::vector<std::string>& header, const std::string& file,
                         std::vector<Diagnostic>& diags) {
  CsvTable table;
  std::string line;
  int line_no = 0;
  bool saw_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    auto fields = split_csv_line(line);
    if (!saw_header) {
      saw_header = true;
      if (fields != header) {
        std::string want;
        for (const auto& h : header) want += (want.empty() ? "" : ",") + h;
        diags.push_back({file + ":line " + std::to_string(line_no), "expected header '" + want + "'"});
        return table;
      }
      continue;
    }
    if (fields.size() != header.size()) {
      diags.push_back({file + ":line " + std::to_string(line_no),
                       "expected " + std::to_string(header.size()) + " fields, got " + std::to_string(fields.size())});
      continue;
    }
    table.rows.emplace_back(line_no, std::move(fields));
  }
  if (!saw_header) diags.push_back({file + ":line 1", "missing header row"});
  return table;
}

}  // namespace pacc::sources
