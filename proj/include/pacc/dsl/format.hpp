#pragma once

#include <charconv>
#include <string>

#include "pacc/dsl/ast.hpp"

namespace pacc::dsl {

/// Shortest text that reads back to the same double.
inline std::string format_number(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline std::string quote(std::string_view s) {
  std::string out = "\"";
  for (char c : s) {
    switch (c) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      case '\t': out += "\\t"; break;
      case '\r': out += "\\r"; break;
      default: out += c;
    }
  }
  out += '"';
  return out;
}

namespace detail {

// Binding strength, loosest first.
inline int precedence(const Expr& e) {
  switch (e.kind) {
    case ExprKind::binary:
      switch (e.op) {
        case BinaryOp::logical_or: return 1;
        case BinaryOp::logical_and: return 2;
        case BinaryOp::add:
        case BinaryOp::sub: return 5;
        case BinaryOp::mul:
        case BinaryOp::div: return 6;
        default: return 4;  // comparisons
      }
    case ExprKind::logical_not: return 3;
    case ExprKind::negate: return 7;
    default: return 8;
  }
}

inline void write_expr(const Expr& e, std::string& out);

inline void write_child(const Expr& child, bool parens, std::string& out) {
  if (parens) out += '(';
  write_expr(child, out);
  if (parens) out += ')';
}

inline void write_expr(const Expr& e, std::string& out) {
  switch (e.kind) {
    case ExprKind::number: out += format_number(e.number); return;
    case ExprKind::text: out += quote(e.name); return;
    case ExprKind::boolean: out += e.flag ? "true" : "false"; return;
    case ExprKind::feature_ref: out += "case." + e.name; return;
    case ExprKind::model_ref: out += "model." + e.name; return;
    case ExprKind::call: out += e.name + "(" + e.arg + ")"; return;
    case ExprKind::logical_not:
      out += "not ";
      write_child(e.children[0], precedence(e.children[0]) < 3, out);
      return;
    case ExprKind::negate:
      out += "-";
      write_child(e.children[0], precedence(e.children[0]) < 7, out);
      return;
    case ExprKind::binary: {
      int p = precedence(e);
      const Expr& lhs = e.children[0];
      const Expr& rhs = e.children[1];
      // Comparisons are non-associative; the others associate left.
      bool lhs_parens = is_comparison(e.op) ? precedence(lhs) <= p : precedence(lhs) < p;
      bool rhs_parens = precedence(rhs) <= p;
      write_child(lhs, lhs_parens, out);
      out += ' ';
      out += op_symbol(e.op);
      out += ' ';
      write_child(rhs, rhs_parens, out);
      return;
    }
  }
}

}  // namespace detail

inline std::string format_expr(const Expr& e) {
  std::string out;
  detail::write_expr(e, out);
  return out;
}

/// Canonical rule-file text. `parse_rules(format_rules(rs)) == rs`.
inline std::string format_rules(const RuleSet& rs) {
  std::string out;
  if (rs.kind) {
    out += "kind: ";
    out += to_string(*rs.kind);
    out += "\n";
  }
  for (const auto& r : rs.rules) {
    if (!out.empty()) out += "\n";
    out += "rule " + quote(r.name) + " {\n";
    out += "  weight: ";
    out += to_string(r.tier);
    out += "\n  contribution: " + format_number(r.contribution) + "\n";
    out += "  when: " + format_expr(r.condition) + "\n";
    if (!r.explanation.empty()) out += "  explain: " + quote(r.explanation) + "\n";
    if (r.source == RuleSource::model_backed) out += "  source: model\n";
    out += "}\n";
  }
  for (const auto& s : rs.synergies) {
    if (!out.empty()) out += "\n";
    out += "combo {\n  rules: [";
    for (std::size_t i = 0; i < s.rule_names.size(); ++i) {
      if (i) out += ", ";
      out += quote(s.rule_names[i]);
    }
    out += "]\n  bonus: " + format_number(s.bonus) + "\n}\n";
  }
  return out;
}

}  // namespace pacc::dsl
