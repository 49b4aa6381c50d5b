#pragma once

#include <cmath>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include "pacc/dsl/ast.hpp"
#include "pacc/dsl/format.hpp"
#include "pacc/models/trained.hpp"
#include "pacc/sources/hub.hpp"

namespace pacc::engine {

using dsl::BinaryOp;
using dsl::Expr;
using dsl::ExprKind;
using dsl::RuleDef;

/// Parts of the evaluation context shared by every case of a batch.
struct SharedContext {
  const models::TrainedModels* models = nullptr;
  const sources::SourceSnapshot* sources = nullptr;
  std::set<std::string> deactivated;
  YearMonth now{2024, 1};  // calendar month used by filing-history calls
  int clock = 0;           // month index recorded as scored_at
};

/// One case together with the models, source snapshot and rule activation
/// it is scored against.
struct CaseContext {
  const TaxpayerCase* taxpayer = nullptr;
  const SharedContext* shared = nullptr;

  const TaxpayerCase& case_ref() const { return *taxpayer; }
};

/// Concrete value of a condition subexpression.
using Value = std::variant<double, std::string, bool>;

inline std::string format_value(const Value& v) {
  if (const auto* d = std::get_if<double>(&v)) {
    if (std::isfinite(*d) && std::fabs(*d) < 1e15 && *d == std::floor(*d)) {
      return std::to_string(static_cast<long long>(*d));
    }
    return dsl::format_number(*d);
  }
  if (const auto* s = std::get_if<std::string>(&v)) return *s;
  return std::get<bool>(v) ? "true" : "false";
}

/// Result of evaluating an expression: a value, or the first reason it was
/// not applicable.
struct Outcome {
  std::optional<Value> value;
  std::string reason;

  static Outcome of(Value v) { return {std::move(v), {}}; }
  static Outcome na(std::string why) { return {std::nullopt, std::move(why)}; }
  bool ok() const { return value.has_value(); }
};

/// Tree-walking evaluator with strict not-applicable propagation. Every
/// operand is evaluated (no short-circuit), so a rule touching an
/// unavailable input is never decided.
class Evaluator {
 public:
  explicit Evaluator(const CaseContext& ctx, std::map<std::string, std::string>* inputs = nullptr)
      : ctx_(ctx), inputs_(inputs) {}

  Outcome eval(const Expr& e) {
    switch (e.kind) {
      case ExprKind::number: return Outcome::of(e.number);
      case ExprKind::text: return Outcome::of(e.name);
      case ExprKind::boolean: return Outcome::of(e.flag);
      case ExprKind::feature_ref: return record("case." + e.name, feature(e.name));
      case ExprKind::model_ref: return record("model." + e.name, model(e.name));
      case ExprKind::call: return record(e.name + "(" + e.arg + ")", call(e));
      case ExprKind::logical_not: {
        auto x = eval(e.children[0]);
        if (!x.ok()) return x;
        if (!std::holds_alternative<bool>(*x.value)) return Outcome::na("type mismatch in not");
        return Outcome::of(!std::get<bool>(*x.value));
      }
      case ExprKind::negate: {
        auto x = eval(e.children[0]);
        if (!x.ok()) return x;
        if (!std::holds_alternative<double>(*x.value)) return Outcome::na("type mismatch in negation");
        return Outcome::of(-std::get<double>(*x.value));
      }
      case ExprKind::binary: return binary(e);
    }
    return Outcome::na("unknown expression");
  }

 private:
  Outcome record(const std::string& key, Outcome o) {
    if (inputs_ && o.ok()) (*inputs_)[key] = format_value(*o.value);
    return o;
  }

  Outcome feature(const std::string& name) const {
    const FeatureValue& v = ctx_.taxpayer->feature(name);
    if (std::holds_alternative<Missing>(v)) return Outcome::na("missing feature " + name);
    if (const auto* d = std::get_if<double>(&v)) return Outcome::of(*d);
    if (const auto* s = std::get_if<std::string>(&v)) return Outcome::of(*s);
    return Outcome::of(std::get<bool>(v));
  }

  static Outcome from_model(const models::ModelValue& mv) {
    if (const auto* d = std::get_if<double>(&mv)) return Outcome::of(*d);
    return Outcome::na(std::get<models::NotApplicable>(mv).reason);
  }

  Outcome model(const std::string& id) const {
    const auto* m = ctx_.shared->models;
    if (!m) return Outcome::na("no trained models");
    if (id == "company_fraud") return from_model(models::predict_company_fraud(*m, *ctx_.taxpayer));
    if (id == "effectiveness_risk") return from_model(models::effectiveness_risk(*m, *ctx_.taxpayer));
    return Outcome::na("unknown model " + id);
  }

  Outcome call(const Expr& e) const {
    const auto* snap = ctx_.shared->sources;
    if (!snap) return Outcome::na("no data sources");
    const TaxpayerCase& c = *ctx_.taxpayer;
    if (e.name == "watchlist_links") return from_model(sources::watchlist_links(*snap, c));
    if (e.name == "companies_at_address") return from_model(sources::companies_at_address(*snap, c));
    if (e.name == "months_since_last_vat_return") {
      return from_model(sources::months_since_last_vat_return(*snap, c, ctx_.shared->now));
    }
    if (e.name == "uid_invalid_count") return from_model(sources::uid_invalid_count(*snap, c));
    if (e.name == "peer_ratio" || e.name == "peer_zscore") {
      if (auto r = snap->unavailable_reason("peer_stats"); !r.empty()) return Outcome::na(r);
      const auto* m = ctx_.shared->models;
      if (!m || !m->peers || !m->clusters) return Outcome::na("peer statistics unavailable");
      try {
        return from_model(e.name == "peer_ratio" ? models::peer_ratio(*m->peers, *m->clusters, c, e.arg)
                                                 : models::peer_zscore(*m->peers, *m->clusters, c, e.arg));
      } catch (const std::invalid_argument& ex) {
        return Outcome::na(ex.what());
      }
    }
    return Outcome::na("unknown call " + e.name);
  }

  Outcome binary(const Expr& e) {
    // Both sides are evaluated before inspecting either.
    auto l = eval(e.children[0]);
    auto r = eval(e.children[1]);
    if (!l.ok()) return l;
    if (!r.ok()) return r;
    const Value& a = *l.value;
    const Value& b = *r.value;
    switch (e.op) {
      case BinaryOp::logical_and:
      case BinaryOp::logical_or: {
        if (!std::holds_alternative<bool>(a) || !std::holds_alternative<bool>(b)) {
          return Outcome::na("type mismatch in boolean operator");
        }
        bool x = std::get<bool>(a), y = std::get<bool>(b);
        return Outcome::of(e.op == BinaryOp::logical_and ? (x && y) : (x || y));
      }
      case BinaryOp::eq:
      case BinaryOp::ne: {
        if (a.index() != b.index()) return Outcome::na("type mismatch in comparison");
        bool same = a == b;
        return Outcome::of(e.op == BinaryOp::eq ? same : !same);
      }
      default: break;
    }
    if (!std::holds_alternative<double>(a) || !std::holds_alternative<double>(b)) {
      return Outcome::na(std::string("type mismatch in '") + std::string(dsl::op_symbol(e.op)) + "'");
    }
    double x = std::get<double>(a), y = std::get<double>(b);
    switch (e.op) {
      case BinaryOp::lt: return Outcome::of(x < y);
      case BinaryOp::le: return Outcome::of(x <= y);
      case BinaryOp::gt: return Outcome::of(x > y);
      case BinaryOp::ge: return Outcome::of(x >= y);
      case BinaryOp::add: return finite(x + y);
      case BinaryOp::sub: return finite(x - y);
      case BinaryOp::mul: return finite(x * y);
      case BinaryOp::div:
        if (y == 0.0) return Outcome::na("division by zero");
        return finite(x / y);
      default: break;
    }
    return Outcome::na("unknown operator");
  }

  static Outcome finite(double v) {
    if (!std::isfinite(v)) return Outcome::na("arithmetic overflow");
    return Outcome::of(v);
  }

  const CaseContext& ctx_;
  std::map<std::string, std::string>* inputs_;
};

enum class RuleStatus { triggered, not_triggered, not_applicable };

struct TriggeredRule {
  std::string rule_name;
  WeightTier tier = WeightTier::LOW;
  double contribution = 0.0;
  std::string explanation;
  dsl::RuleSource source = dsl::RuleSource::expert;
  std::map<std::string, std::string> inputs_snapshot;

  bool operator==(const TriggeredRule&) const = default;
};

struct RuleEvaluation {
  RuleStatus status = RuleStatus::not_triggered;
  std::optional<TriggeredRule> triggered;
  std::string reason;  // for not_applicable
};

/// Renders the rule's explanation template against the case. Placeholders
/// that cannot be evaluated render as "n/a".
inline std::string render_template(const RuleDef& rule, const CaseContext& ctx,
                                   std::map<std::string, std::string>* inputs) {
  if (rule.explanation_parts.empty()) return rule.explanation;
  std::string out;
  for (const auto& part : rule.explanation_parts) {
    if (!part.placeholder) {
      out += part.literal;
      continue;
    }
    Evaluator ev(ctx, inputs);
    auto o = ev.eval(*part.placeholder);
    out += o.ok() ? format_value(*o.value) : "n/a";
  }
  return out;
}

/// Decides one rule for one case. Total: every failure becomes
/// NOT_APPLICABLE with a reason.
inline RuleEvaluation evaluate_rule(const RuleDef& rule, const CaseContext& ctx, double contribution) {
  RuleEvaluation result;
  Evaluator ev(ctx);
  auto o = ev.eval(rule.condition);
  if (!o.ok()) {
    result.status = RuleStatus::not_applicable;
    result.reason = o.reason;
    return result;
  }
  if (!std::holds_alternative<bool>(*o.value)) {
    result.status = RuleStatus::not_applicable;
    result.reason = "condition is not boolean";
    return result;
  }
  if (!std::get<bool>(*o.value)) return result;

  TriggeredRule t;
  t.rule_name = rule.name;
  t.tier = rule.tier;
  t.contribution = contribution;
  t.source = rule.source;
  Evaluator recorder(ctx, &t.inputs_snapshot);
  recorder.eval(rule.condition);
  t.explanation = render_template(rule, ctx, &t.inputs_snapshot);
  result.status = RuleStatus::triggered;
  result.triggered = std::move(t);
  return result;
}

inline RuleEvaluation evaluate_rule(const RuleDef& rule, const CaseContext& ctx) {
  return evaluate_rule(rule, ctx, rule.contribution);
}

}  // namespace pacc::engine
