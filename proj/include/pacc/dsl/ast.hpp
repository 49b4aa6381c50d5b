#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "pacc/core/types.hpp"

namespace pacc::dsl {

struct SourcePos {
  int line = 1;
  int column = 1;
};

enum class ExprKind {
  number,       // numeric literal
  text,         // string literal
  boolean,      // true / false
  feature_ref,  // case.<feature>
  model_ref,    // model.<model_id>
  call,         // source call, optional feature argument
  logical_not,
  negate,
  binary,
};

enum class BinaryOp { logical_or, logical_and, lt, le, gt, ge, eq, ne, add, sub, mul, div };

constexpr std::string_view op_symbol(BinaryOp op) {
  switch (op) {
    case BinaryOp::logical_or: return "or";
    case BinaryOp::logical_and: return "and";
    case BinaryOp::lt: return "<";
    case BinaryOp::le: return "<=";
    case BinaryOp::gt: return ">";
    case BinaryOp::ge: return ">=";
    case BinaryOp::eq: return "==";
    case BinaryOp::ne: return "!=";
    case BinaryOp::add: return "+";
    case BinaryOp::sub: return "-";
    case BinaryOp::mul: return "*";
    case BinaryOp::div: return "/";
  }
  return "?";
}

constexpr bool is_comparison(BinaryOp op) {
  return op == BinaryOp::lt || op == BinaryOp::le || op == BinaryOp::gt || op == BinaryOp::ge ||
         op == BinaryOp::eq || op == BinaryOp::ne;
}

constexpr bool is_arithmetic(BinaryOp op) {
  return op == BinaryOp::add || op == BinaryOp::sub || op == BinaryOp::mul || op == BinaryOp::div;
}

/// Condition expression node. Children are held by value; `pos` is not part
/// of structural equality.
struct Expr {
  ExprKind kind = ExprKind::boolean;
  BinaryOp op = BinaryOp::logical_and;
  double number = 0.0;
  bool flag = false;
  std::string name;  // literal text, feature name, model id or call name
  std::string arg;   // call argument (feature name), empty for nullary calls
  std::vector<Expr> children;
  SourcePos pos;

  bool operator==(const Expr& o) const {
    if (kind != o.kind) return false;
    switch (kind) {
      case ExprKind::number: return number == o.number;
      case ExprKind::text: return name == o.name;
      case ExprKind::boolean: return flag == o.flag;
      case ExprKind::feature_ref:
      case ExprKind::model_ref: return name == o.name;
      case ExprKind::call: return name == o.name && arg == o.arg;
      case ExprKind::logical_not:
      case ExprKind::negate: return children == o.children;
      case ExprKind::binary: return op == o.op && children == o.children;
    }
    return false;
  }

  static Expr number_lit(double v) {
    Expr e;
    e.kind = ExprKind::number;
    e.number = v;
    return e;
  }
  static Expr text_lit(std::string v) {
    Expr e;
    e.kind = ExprKind::text;
    e.name = std::move(v);
    return e;
  }
  static Expr bool_lit(bool v) {
    Expr e;
    e.kind = ExprKind::boolean;
    e.flag = v;
    return e;
  }
  static Expr feature(std::string f) {
    Expr e;
    e.kind = ExprKind::feature_ref;
    e.name = std::move(f);
    return e;
  }
  static Expr model(std::string id) {
    Expr e;
    e.kind = ExprKind::model_ref;
    e.name = std::move(id);
    return e;
  }
  static Expr call(std::string fn, std::string argument = {}) {
    Expr e;
    e.kind = ExprKind::call;
    e.name = std::move(fn);
    e.arg = std::move(argument);
    return e;
  }
  static Expr unary(ExprKind k, Expr operand) {
    Expr e;
    e.kind = k;
    e.children.push_back(std::move(operand));
    return e;
  }
  static Expr binary_op(BinaryOp op, Expr lhs, Expr rhs) {
    Expr e;
    e.kind = ExprKind::binary;
    e.op = op;
    e.children.push_back(std::move(lhs));
    e.children.push_back(std::move(rhs));
    return e;
  }
};

enum class ValueType { number, text, flag };

constexpr std::string_view to_string(ValueType t) {
  switch (t) {
    case ValueType::number: return "number";
    case ValueType::text: return "text";
    case ValueType::flag: return "bool";
  }
  return "?";
}

/// Signature of a source call usable in conditions.
struct CallSignature {
  std::string_view name;
  bool takes_feature = false;
  std::string_view source;  // data source consulted, subject to legal-basis gating
};

inline constexpr CallSignature kCalls[] = {
    {"watchlist_links", false, "watchlist"},
    {"companies_at_address", false, "registry"},
    {"months_since_last_vat_return", false, "vat_filings"},
    {"peer_ratio", true, "peer_stats"},
    {"peer_zscore", true, "peer_stats"},
    {"uid_invalid_count", false, "uid_validation"},
};

inline const CallSignature* find_call(std::string_view name) {
  for (const auto& c : kCalls) {
    if (c.name == name) return &c;
  }
  return nullptr;
}

/// Explanation template: literal text interleaved with `{expr}` placeholders.
struct TemplatePart {
  std::string literal;
  std::optional<Expr> placeholder;

  bool operator==(const TemplatePart&) const = default;
};

enum class RuleSource { expert, model_backed };

struct RuleDef {
  std::string name;
  WeightTier tier = WeightTier::LOW;
  double contribution = 0.1;
  Expr condition;
  std::string explanation;  // raw template text
  std::vector<TemplatePart> explanation_parts;
  RuleSource source = RuleSource::expert;
  SourcePos pos;

  bool operator==(const RuleDef& o) const {
    return name == o.name && tier == o.tier && contribution == o.contribution &&
           condition == o.condition && explanation == o.explanation && source == o.source;
  }
};

struct SynergyDef {
  std::vector<std::string> rule_names;  // sorted, distinct, >= 2
  double bonus = 0.1;

  bool operator==(const SynergyDef&) const = default;
};

struct RuleSet {
  std::optional<CaseKind> kind;  // absent: applies to any case kind
  std::vector<RuleDef> rules;
  std::vector<SynergyDef> synergies;

  bool operator==(const RuleSet&) const = default;

  const RuleDef* find(std::string_view name) const {
    for (const auto& r : rules) {
      if (r.name == name) return &r;
    }
    return nullptr;
  }
};

/// Per-tier contribution used when a rule omits `contribution:`.
struct TierDefaults {
  double low = 0.10;
  double med = 0.30;
  double high = 0.60;

  double for_tier(WeightTier t) const {
    switch (t) {
      case WeightTier::LOW: return low;
      case WeightTier::MED: return med;
      case WeightTier::HIGH: return high;
    }
    return low;
  }
  bool operator==(const TierDefaults&) const = default;
};

/// Collects every feature, model id and call referenced by an expression.
struct References {
  std::set<std::string> features;
  std::set<std::string> models;
  std::set<std::string> calls;  // call names
  std::set<std::string> sources;

  bool empty() const { return features.empty() && models.empty() && calls.empty(); }
};

inline void collect_references(const Expr& e, References& out) {
  switch (e.kind) {
    case ExprKind::feature_ref: out.features.insert(e.name); break;
    case ExprKind::model_ref: out.models.insert(e.name); break;
    case ExprKind::call:
      out.calls.insert(e.name);
      if (const auto* sig = find_call(e.name)) out.sources.insert(std::string(sig->source));
      if (!e.arg.empty()) out.features.insert(e.arg);
      break;
    default: break;
  }
  for (const auto& c : e.children) collect_references(c, out);
}

inline References references_of(const RuleDef& rule) {
  References refs;
  collect_references(rule.condition, refs);
  for (const auto& part : rule.explanation_parts) {
    if (part.placeholder) collect_references(*part.placeholder, refs);
  }
  return refs;
}

}  // namespace pacc::dsl
