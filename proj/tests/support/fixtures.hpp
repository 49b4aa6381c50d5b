#pragma once

#include <fstream>
#include <sstream>
#include <string>

#include "pacc/core/json_io.hpp"
#include "pacc/core/types.hpp"

namespace pacc::testing {

inline std::string data_path(const std::string& name) { return std::string(PACC_DATA_DIR) + "/" + name; }

inline const FeatureSchema& schema() {
  static const FeatureSchema s = load_schema(data_path("schema.json"));
  return s;
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Minimal valid missing-trader case.
inline TaxpayerCase make_case(const std::string& id, CaseKind kind = CaseKind::missing_trader) {
  TaxpayerCase c;
  c.case_id = id;
  c.kind = kind;
  c.address_id = "ADDR-" + id;
  c.registered_date = Date{2020, 3, 15};
  c.features["employee_count"] = 10.0;
  return c;
}

}  // namespace pacc::testing
