#pragma once

#include <string>
#include <vector>

#include "pacc/core/digest.hpp"
#include "pacc/dsl/ast.hpp"
#include "pacc/dsl/format.hpp"

namespace pacc::dsl {

enum class LintKind { constant_condition, saturating_contribution, model_rule_without_explanation };
enum class LintSeverity { warning, info };

struct LintWarning {
  std::string rule;
  LintKind kind;
  LintSeverity severity;
  std::string message;
};

/// Hygiene checks over a parsed rule set. Never fails.
inline std::vector<LintWarning> lint_ruleset(const RuleSet& rs) {
  std::vector<LintWarning> out;
  for (const auto& r : rs.rules) {
    References refs;
    collect_references(r.condition, refs);
    if (refs.empty()) {
      out.push_back({r.name, LintKind::constant_condition, LintSeverity::warning,
                     "condition reads no case data and is constant"});
    }
    if (r.contribution >= 1.0) {
      out.push_back({r.name, LintKind::saturating_contribution, LintSeverity::warning,
                     "contribution 1 saturates the score on its own"});
    }
    if (r.source == RuleSource::model_backed && r.explanation.empty()) {
      out.push_back({r.name, LintKind::model_rule_without_explanation, LintSeverity::info,
                     "model-backed rule has no explanation; auditors get the limited-explanation notice"});
    }
  }
  return out;
}

/// Hex SHA-256 of the canonical rule text.
inline std::string ruleset_digest(const RuleSet& rs) { return sha256_hex(format_rules(rs)); }

}  // namespace pacc::dsl
