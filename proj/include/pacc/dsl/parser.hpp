#pragma once

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "pacc/core/types.hpp"
#include "pacc/dsl/ast.hpp"

namespace pacc::dsl {

struct ParseError {
  int line = 0;
  int column = 0;
  std::string message;

  std::string to_string() const {
    return std::to_string(line) + ":" + std::to_string(column) + ": " + message;
  }
};

/// Either a fully checked RuleSet or the complete list of errors.
struct ParseResult {
  std::optional<RuleSet> rules;
  std::vector<ParseError> errors;

  bool ok() const { return rules.has_value(); }
};

/// Everything a rule file is checked against.
struct CheckContext {
  const FeatureSchema* schema = nullptr;
  std::set<std::string> model_ids;
  TierDefaults defaults;
};

inline std::set<std::string> default_model_ids() { return {"company_fraud", "effectiveness_risk"}; }

namespace detail {

enum class Tok { ident, string, number, punct, end, bad };

struct Token {
  Tok kind = Tok::end;
  std::string text;  // identifier, decoded string, number spelling or punctuation
  double number = 0.0;
  SourcePos pos;
};

class Lexer {
 public:
  explicit Lexer(std::string_view src) : src_(src) {}

  std::vector<Token> run(std::vector<ParseError>& errors) {
    std::vector<Token> out;
    for (;;) {
      skip_space();
      Token t;
      t.pos = {line_, col_};
      if (at_end()) {
        t.kind = Tok::end;
        out.push_back(t);
        return out;
      }
      unsigned char c = static_cast<unsigned char>(peek());
      if (std::isalpha(c) || c == '_') {
        t.kind = Tok::ident;
        while (!at_end() && (std::isalnum(static_cast<unsigned char>(peek())) || peek() == '_')) {
          t.text += advance();
        }
      } else if (std::isdigit(c) || (c == '.' && std::isdigit(static_cast<unsigned char>(peek(1))))) {
        lex_number(t, errors);
      } else if (c == '"') {
        lex_string(t, errors);
      } else {
        lex_punct(t, errors);
      }
      out.push_back(std::move(t));
    }
  }

 private:
  bool at_end() const { return i_ >= src_.size(); }
  char peek(std::size_t ahead = 0) const { return i_ + ahead < src_.size() ? src_[i_ + ahead] : '\0'; }
  char advance() {
    char c = src_[i_++];
    if (c == '\n') {
      ++line_;
      col_ = 1;
    } else {
      ++col_;
    }
    return c;
  }

  void skip_space() {
    while (!at_end()) {
      char c = peek();
      if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
        advance();
      } else if (c == '#') {
        while (!at_end() && peek() != '\n') advance();
      } else {
        return;
      }
    }
  }

  void lex_number(Token& t, std::vector<ParseError>& errors) {
    t.kind = Tok::number;
    std::string spelling;
    auto digits = [&] {
      while (!at_end() && std::isdigit(static_cast<unsigned char>(peek()))) spelling += advance();
    };
    digits();
    if (peek() == '.' && std::isdigit(static_cast<unsigned char>(peek(1)))) {
      spelling += advance();
      digits();
    }
    if ((peek() == 'e' || peek() == 'E') &&
        (std::isdigit(static_cast<unsigned char>(peek(1))) ||
         ((peek(1) == '+' || peek(1) == '-') && std::isdigit(static_cast<unsigned char>(peek(2)))))) {
      spelling += advance();
      if (peek() == '+' || peek() == '-') spelling += advance();
      digits();
    }
    t.text = spelling;
    auto res = std::from_chars(spelling.data(), spelling.data() + spelling.size(), t.number);
    if (res.ec != std::errc() || !std::isfinite(t.number)) {
      t.kind = Tok::bad;
      errors.push_back({t.pos.line, t.pos.column, "number out of range: " + spelling});
    }
  }

  void lex_string(Token& t, std::vector<ParseError>& errors) {
    t.kind = Tok::string;
    advance();  // opening quote
    for (;;) {
      if (at_end()) {
        t.kind = Tok::bad;
        errors.push_back({t.pos.line, t.pos.column, "unterminated string"});
        return;
      }
      char c = advance();
      if (c == '"') return;
      if (c == '\\') {
        if (at_end()) continue;
        char e = advance();
        switch (e) {
          case 'n': t.text += '\n'; break;
          case 't': t.text += '\t'; break;
          case 'r': t.text += '\r'; break;
          case '"': t.text += '"'; break;
          case '\\': t.text += '\\'; break;
          default:
            errors.push_back({line_, col_ - 1, std::string("unknown escape \\") + e});
            t.kind = Tok::bad;
        }
      } else {
        t.text += c;
      }
    }
  }

  void lex_punct(Token& t, std::vector<ParseError>& errors) {
    static constexpr std::string_view two[] = {"<=", ">=", "==", "!="};
    for (auto p : two) {
      if (peek() == p[0] && peek(1) == p[1]) {
        t.kind = Tok::punct;
        t.text = std::string(p);
        advance();
        advance();
        return;
      }
    }
    char c = advance();
    static constexpr std::string_view single = "{}[]():,.+-*/<>";
    if (single.find(c) != std::string_view::npos) {
      t.kind = Tok::punct;
      t.text = std::string(1, c);
      return;
    }
    t.kind = Tok::bad;
    unsigned char u = static_cast<unsigned char>(c);
    std::string shown = (u >= 0x20 && u < 0x7f) ? std::string(1, c) : "\\x" + hex(u);
    errors.push_back({t.pos.line, t.pos.column, "unexpected character '" + shown + "'"});
  }

  static std::string hex(unsigned char u) {
    static constexpr char digits[] = "0123456789abcdef";
    return {digits[u >> 4], digits[u & 15]};
  }

  std::string_view src_;
  std::size_t i_ = 0;
  int line_ = 1;
  int col_ = 1;
};

struct SyntaxError {
  ParseError error;
};

class Parser {
 public:
  static constexpr int kMaxDepth = 200;

  Parser(std::vector<Token> tokens, std::vector<ParseError>& errors)
      : toks_(std::move(tokens)), errors_(errors) {}

  void parse_file(RuleSet& rs) {
    while (cur().kind != Tok::end) {
      try {
        if (is_ident("rule")) {
          rs.rules.push_back(parse_rule());
        } else if (is_ident("combo")) {
          combos_.push_back(parse_combo());
        } else if (is_ident("kind")) {
          parse_kind(rs);
        } else {
          fail("expected 'rule', 'combo' or 'kind'");
        }
      } catch (const SyntaxError& e) {
        errors_.push_back(e.error);
        synchronize();
      }
    }
  }

  struct ComboSyntax {
    std::vector<std::pair<std::string, SourcePos>> names;
    double bonus = 0.0;
    SourcePos pos;
  };

  struct RuleSyntax {
    bool has_contribution = false;
    SourcePos contribution_pos;
    SourcePos explain_pos;
  };

  std::vector<RuleSyntax> rule_syntax;
  std::vector<ComboSyntax> combos_;

  /// Parses a standalone expression (used for template placeholders).
  std::optional<Expr> parse_standalone_expr() {
    try {
      Expr e = parse_expr();
      if (cur().kind != Tok::end) fail("unexpected '" + cur().text + "' after expression");
      return e;
    } catch (const SyntaxError& e) {
      errors_.push_back(e.error);
      return std::nullopt;
    }
  }

 private:
  const Token& cur() const { return toks_[pos_]; }
  const Token& next() const { return toks_[std::min(pos_ + 1, toks_.size() - 1)]; }
  void bump() {
    if (pos_ + 1 < toks_.size()) ++pos_;
  }
  bool is_ident(std::string_view s) const { return cur().kind == Tok::ident && cur().text == s; }
  bool is_punct(std::string_view s) const { return cur().kind == Tok::punct && cur().text == s; }

  [[noreturn]] void fail(const std::string& msg) const { fail_at(cur().pos, msg); }
  [[noreturn]] static void fail_at(SourcePos p, const std::string& msg) {
    throw SyntaxError{{p.line, p.column, msg}};
  }

  std::string describe(const Token& t) const {
    switch (t.kind) {
      case Tok::end: return "end of input";
      case Tok::string: return "string";
      case Tok::number: return "number '" + t.text + "'";
      case Tok::bad: return "invalid token";
      default: return "'" + t.text + "'";
    }
  }

  void expect_punct(std::string_view p) {
    if (!is_punct(p)) fail("expected '" + std::string(p) + "', found " + describe(cur()));
    bump();
  }

  void expect_key(std::string_view key) {
    if (!is_ident(key)) fail("expected '" + std::string(key) + ":', found " + describe(cur()));
    bump();
    expect_punct(":");
  }

  std::string expect_string() {
    if (cur().kind != Tok::string) fail("expected string, found " + describe(cur()));
    std::string s = cur().text;
    bump();
    return s;
  }

  double expect_number() {
    if (cur().kind != Tok::number) fail("expected number, found " + describe(cur()));
    double v = cur().number;
    bump();
    return v;
  }

  // Skip to the next plausible item start.
  void synchronize() {
    bump();
    while (cur().kind != Tok::end) {
      if (is_ident("rule") && next().kind == Tok::string) return;
      if (is_ident("combo") && next().kind == Tok::punct && next().text == "{") return;
      if (is_ident("kind") && next().kind == Tok::punct && next().text == ":") return;
      bump();
    }
  }

  void parse_kind(RuleSet& rs) {
    SourcePos p = cur().pos;
    expect_key("kind");
    if (cur().kind != Tok::ident) fail("expected case kind");
    auto k = parse_case_kind(cur().text);
    if (!k) fail("unknown case kind '" + cur().text + "'");
    if (seen_kind_) fail_at(p, "duplicate 'kind' declaration");
    seen_kind_ = true;
    rs.kind = *k;
    bump();
  }

  RuleDef parse_rule() {
    RuleSyntax syn;
    RuleDef r;
    r.pos = cur().pos;
    bump();  // 'rule'
    r.name = expect_string();
    expect_punct("{");
    std::set<std::string> seen;
    bool has_weight = false;
    bool has_when = false;
    while (!is_punct("}")) {
      if (cur().kind != Tok::ident) fail("expected rule field, found " + describe(cur()));
      std::string key = cur().text;
      SourcePos key_pos = cur().pos;
      if (!seen.insert(key).second) fail("duplicate field '" + key + "'");
      bump();
      expect_punct(":");
      if (key == "weight") {
        if (cur().kind != Tok::ident) fail("expected LOW, MED or HIGH");
        auto tier = parse_tier(cur().text);
        if (!tier) fail("unknown weight '" + cur().text + "' (expected LOW, MED or HIGH)");
        r.tier = *tier;
        has_weight = true;
        bump();
      } else if (key == "contribution") {
        syn.has_contribution = true;
        syn.contribution_pos = cur().pos;
        r.contribution = expect_number();
      } else if (key == "when") {
        r.condition = parse_expr();
        has_when = true;
      } else if (key == "explain") {
        syn.explain_pos = cur().pos;
        r.explanation = expect_string();
      } else if (key == "source") {
        if (is_ident("expert")) {
          r.source = RuleSource::expert;
        } else if (is_ident("model")) {
          r.source = RuleSource::model_backed;
        } else {
          fail("expected 'expert' or 'model'");
        }
        bump();
      } else {
        fail_at(key_pos, "unknown rule field '" + key + "'");
      }
    }
    bump();  // '}'
    if (!has_weight) fail_at(r.pos, "rule \"" + r.name + "\" lacks 'weight:'");
    if (!has_when) fail_at(r.pos, "rule \"" + r.name + "\" lacks 'when:'");
    rule_syntax.push_back(syn);
    return r;
  }

  ComboSyntax parse_combo() {
    ComboSyntax c;
    c.pos = cur().pos;
    bump();  // 'combo'
    expect_punct("{");
    bool has_rules = false;
    bool has_bonus = false;
    while (!is_punct("}")) {
      if (is_ident("rules")) {
        if (has_rules) fail("duplicate field 'rules'");
        has_rules = true;
        expect_key("rules");
        expect_punct("[");
        if (!is_punct("]")) {
          for (;;) {
            SourcePos p = cur().pos;
            c.names.emplace_back(expect_string(), p);
            if (is_punct(",")) {
              bump();
              continue;
            }
            break;
          }
        }
        expect_punct("]");
      } else if (is_ident("bonus")) {
        if (has_bonus) fail("duplicate field 'bonus'");
        has_bonus = true;
        expect_key("bonus");
        c.bonus = expect_number();
      } else {
        fail("expected 'rules:' or 'bonus:' in combo, found " + describe(cur()));
      }
    }
    bump();
    if (!has_rules) fail_at(c.pos, "combo lacks 'rules:'");
    if (!has_bonus) fail_at(c.pos, "combo lacks 'bonus:'");
    return c;
  }

  // expr := or
  Expr parse_expr() { return parse_or(); }

  struct DepthGuard {
    Parser& p;
    explicit DepthGuard(Parser& parser) : p(parser) {
      if (++p.depth_ > kMaxDepth) {
        --p.depth_;
        p.fail("expression nested too deeply");
      }
    }
    ~DepthGuard() { --p.depth_; }
  };

  Expr parse_or() {
    DepthGuard g(*this);
    Expr lhs = parse_and();
    while (is_ident("or")) {
      SourcePos p = cur().pos;
      bump();
      lhs = Expr::binary_op(BinaryOp::logical_or, std::move(lhs), parse_and());
      lhs.pos = p;
    }
    return lhs;
  }

  Expr parse_and() {
    Expr lhs = parse_not();
    while (is_ident("and")) {
      SourcePos p = cur().pos;
      bump();
      lhs = Expr::binary_op(BinaryOp::logical_and, std::move(lhs), parse_not());
      lhs.pos = p;
    }
    return lhs;
  }

  Expr parse_not() {
    if (is_ident("not")) {
      DepthGuard g(*this);
      SourcePos p = cur().pos;
      bump();
      Expr e = Expr::unary(ExprKind::logical_not, parse_not());
      e.pos = p;
      return e;
    }
    return parse_cmp();
  }

  std::optional<BinaryOp> cmp_op() const {
    if (cur().kind != Tok::punct) return std::nullopt;
    const auto& t = cur().text;
    if (t == "<") return BinaryOp::lt;
    if (t == "<=") return BinaryOp::le;
    if (t == ">") return BinaryOp::gt;
    if (t == ">=") return BinaryOp::ge;
    if (t == "==") return BinaryOp::eq;
    if (t == "!=") return BinaryOp::ne;
    return std::nullopt;
  }

  Expr parse_cmp() {
    Expr lhs = parse_add();
    if (auto op = cmp_op()) {
      SourcePos p = cur().pos;
      bump();
      lhs = Expr::binary_op(*op, std::move(lhs), parse_add());
      lhs.pos = p;
      if (cmp_op()) fail("comparisons do not chain; use parentheses");
    }
    return lhs;
  }

  Expr parse_add() {
    Expr lhs = parse_mul();
    while (is_punct("+") || is_punct("-")) {
      BinaryOp op = cur().text == "+" ? BinaryOp::add : BinaryOp::sub;
      SourcePos p = cur().pos;
      bump();
      lhs = Expr::binary_op(op, std::move(lhs), parse_mul());
      lhs.pos = p;
    }
    return lhs;
  }

  Expr parse_mul() {
    Expr lhs = parse_unary();
    while (is_punct("*") || is_punct("/")) {
      BinaryOp op = cur().text == "*" ? BinaryOp::mul : BinaryOp::div;
      SourcePos p = cur().pos;
      bump();
      lhs = Expr::binary_op(op, std::move(lhs), parse_unary());
      lhs.pos = p;
    }
    return lhs;
  }

  Expr parse_unary() {
    if (is_punct("-")) {
      DepthGuard g(*this);
      SourcePos p = cur().pos;
      bump();
      Expr e = Expr::unary(ExprKind::negate, parse_unary());
      e.pos = p;
      return e;
    }
    return parse_primary();
  }

  Expr parse_primary() {
    const Token& t = cur();
    SourcePos p = t.pos;
    Expr e;
    if (t.kind == Tok::number) {
      e = Expr::number_lit(t.number);
      bump();
    } else if (t.kind == Tok::string) {
      e = Expr::text_lit(t.text);
      bump();
    } else if (is_punct("(")) {
      bump();
      e = parse_expr();
      expect_punct(")");
      return e;
    } else if (t.kind == Tok::ident) {
      std::string word = t.text;
      if (word == "true" || word == "false") {
        e = Expr::bool_lit(word == "true");
        bump();
      } else if (word == "case" || word == "model") {
        bump();
        expect_punct(".");
        if (cur().kind != Tok::ident) fail("expected name after '" + word + ".'");
        e = word == "case" ? Expr::feature(cur().text) : Expr::model(cur().text);
        bump();
      } else if (next().kind == Tok::punct && next().text == "(") {
        bump();
        bump();
        std::string arg;
        if (cur().kind == Tok::ident) {
          arg = cur().text;
          bump();
        }
        expect_punct(")");
        e = Expr::call(word, arg);
      } else {
        fail("unexpected identifier '" + word + "' in expression");
      }
    } else {
      fail("expected expression, found " + describe(t));
    }
    e.pos = p;
    return e;
  }

  std::vector<Token> toks_;
  std::size_t pos_ = 0;
  int depth_ = 0;
  bool seen_kind_ = false;
  std::vector<ParseError>& errors_;
};

// ---------------------------------------------------------------------------
// Type checking
// ---------------------------------------------------------------------------

class TypeChecker {
 public:
  TypeChecker(const CheckContext& ctx, std::vector<ParseError>& errors) : ctx_(ctx), errors_(errors) {}

  std::optional<ValueType> check(const Expr& e) {
    switch (e.kind) {
      case ExprKind::number: return ValueType::number;
      case ExprKind::text: return ValueType::text;
      case ExprKind::boolean: return ValueType::flag;
      case ExprKind::feature_ref: {
        auto t = ctx_.schema ? ctx_.schema->type_of(e.name) : std::nullopt;
        if (!t) return error(e, "unknown feature '" + e.name + "'");
        switch (*t) {
          case FeatureType::number: return ValueType::number;
          case FeatureType::text: return ValueType::text;
          case FeatureType::flag: return ValueType::flag;
        }
        return std::nullopt;
      }
      case ExprKind::model_ref:
        if (!ctx_.model_ids.count(e.name)) return error(e, "unknown model '" + e.name + "'");
        return ValueType::number;
      case ExprKind::call: {
        const CallSignature* sig = find_call(e.name);
        if (!sig) return error(e, "unknown call '" + e.name + "()'");
        if (sig->takes_feature) {
          if (e.arg.empty()) return error(e, e.name + "() takes a feature name");
          auto t = ctx_.schema ? ctx_.schema->type_of(e.arg) : std::nullopt;
          if (!t) return error(e, "unknown feature '" + e.arg + "'");
          if (*t != FeatureType::number) return error(e, e.name + "() needs a numeric feature");
        } else if (!e.arg.empty()) {
          return error(e, e.name + "() takes no arguments");
        }
        return ValueType::number;
      }
      case ExprKind::logical_not: {
        auto t = check(e.children[0]);
        if (!t) return std::nullopt;
        if (*t != ValueType::flag) return error(e, "'not' needs bool, got " + std::string(to_string(*t)));
        return ValueType::flag;
      }
      case ExprKind::negate: {
        auto t = check(e.children[0]);
        if (!t) return std::nullopt;
        if (*t != ValueType::number) return error(e, "'-' needs number, got " + std::string(to_string(*t)));
        return ValueType::number;
      }
      case ExprKind::binary: return check_binary(e);
    }
    return std::nullopt;
  }

 private:
  std::optional<ValueType> error(const Expr& e, const std::string& msg) {
    errors_.push_back({e.pos.line, e.pos.column, msg});
    return std::nullopt;
  }

  std::optional<ValueType> check_binary(const Expr& e) {
    auto lhs = check(e.children[0]);
    auto rhs = check(e.children[1]);
    if (!lhs || !rhs) return std::nullopt;
    std::string sym(op_symbol(e.op));
    auto mismatch = [&] {
      return error(e, "type mismatch: " + std::string(to_string(*lhs)) + " " + sym + " " +
                          std::string(to_string(*rhs)));
    };
    if (e.op == BinaryOp::logical_and || e.op == BinaryOp::logical_or) {
      if (*lhs != ValueType::flag || *rhs != ValueType::flag) return mismatch();
      return ValueType::flag;
    }
    if (is_arithmetic(e.op)) {
      if (*lhs != ValueType::number || *rhs != ValueType::number) return mismatch();
      return ValueType::number;
    }
    if (e.op == BinaryOp::eq || e.op == BinaryOp::ne) {
      if (*lhs != *rhs) return mismatch();
      return ValueType::flag;
    }
    if (*lhs != ValueType::number || *rhs != ValueType::number) return mismatch();
    return ValueType::flag;
  }

  const CheckContext& ctx_;
  std::vector<ParseError>& errors_;
};

/// Splits an explanation into literal text and `{expr}` placeholders.
/// `{{` and `}}` stand for literal braces.
inline std::vector<TemplatePart> parse_template(const std::string& text, SourcePos at,
                                                const CheckContext& ctx, std::vector<ParseError>& errors) {
  std::vector<TemplatePart> parts;
  std::string literal;
  auto err = [&](const std::string& msg) { errors.push_back({at.line, at.column, "explain: " + msg}); };
  for (std::size_t i = 0; i < text.size(); ++i) {
    char c = text[i];
    if (c == '{' && i + 1 < text.size() && text[i + 1] == '{') {
      literal += '{';
      ++i;
    } else if (c == '}' && i + 1 < text.size() && text[i + 1] == '}') {
      literal += '}';
      ++i;
    } else if (c == '{') {
      auto close = text.find('}', i + 1);
      if (close == std::string::npos) {
        err("unclosed '{' in template");
        return parts;
      }
      std::string inner = text.substr(i + 1, close - i - 1);
      std::vector<ParseError> local;
      Lexer lexer(inner);
      Parser parser(lexer.run(local), local);
      auto e = local.empty() ? parser.parse_standalone_expr() : std::nullopt;
      if (e && local.empty()) {
        TypeChecker tc(ctx, local);
        tc.check(*e);
      }
      if (!local.empty() || !e) {
        for (const auto& pe : local) err("placeholder {" + inner + "}: " + pe.message);
        if (local.empty()) err("placeholder {" + inner + "} is not an expression");
      } else {
        if (!literal.empty()) parts.push_back({std::move(literal), std::nullopt});
        literal.clear();
        parts.push_back({"", std::move(*e)});
      }
      i = close;
    } else if (c == '}') {
      err("unmatched '}' in template");
      literal += c;
    } else {
      literal += c;
    }
  }
  if (!literal.empty()) parts.push_back({std::move(literal), std::nullopt});
  return parts;
}

}  // namespace detail

/// Parses and type-checks a rule file. Errors are collected across the whole
/// input; on any error no RuleSet is returned.
inline ParseResult parse_rules(std::string_view text, const CheckContext& ctx) {
  ParseResult result;
  std::vector<ParseError>& errors = result.errors;

  detail::Lexer lexer(text);
  auto tokens = lexer.run(errors);
  // Bad tokens already produced errors; drop them so the parser can continue.
  std::vector<detail::Token> clean;
  clean.reserve(tokens.size());
  for (auto& t : tokens) {
    if (t.kind != detail::Tok::bad) clean.push_back(std::move(t));
  }

  RuleSet rs;
  detail::Parser parser(std::move(clean), errors);
  parser.parse_file(rs);

  detail::TypeChecker tc(ctx, errors);
  std::set<std::string> names;
  for (std::size_t i = 0; i < rs.rules.size(); ++i) {
    RuleDef& r = rs.rules[i];
    const auto& syn = parser.rule_syntax[i];
    if (!names.insert(r.name).second) {
      errors.push_back({r.pos.line, r.pos.column, "duplicate rule name \"" + r.name + "\""});
    }
    if (r.name.empty()) errors.push_back({r.pos.line, r.pos.column, "rule name must not be empty"});
    if (!syn.has_contribution) {
      r.contribution = ctx.defaults.for_tier(r.tier);
    } else if (!(r.contribution > 0.0 && r.contribution <= 1.0)) {
      errors.push_back({syn.contribution_pos.line, syn.contribution_pos.column,
                        "contribution must lie in (0, 1]"});
    }
    auto t = tc.check(r.condition);
    if (t && *t != ValueType::flag) {
      errors.push_back({r.condition.pos.line, r.condition.pos.column,
                        "condition must be bool, got " + std::string(to_string(*t))});
    }
    if (r.source == RuleSource::expert && r.explanation.empty()) {
      errors.push_back({r.pos.line, r.pos.column, "expert rule \"" + r.name + "\" needs 'explain:'"});
    }
    r.explanation_parts = detail::parse_template(r.explanation, syn.explain_pos, ctx, errors);
  }

  for (const auto& c : parser.combos_) {
    SynergyDef s;
    s.bonus = c.bonus;
    if (!(c.bonus > 0.0 && c.bonus <= 1.0)) {
      errors.push_back({c.pos.line, c.pos.column, "bonus must lie in (0, 1]"});
    }
    std::set<std::string> uniq;
    for (const auto& [name, p] : c.names) {
      if (!uniq.insert(name).second) {
        errors.push_back({p.line, p.column, "combo lists \"" + name + "\" twice"});
      } else if (!names.count(name)) {
        errors.push_back({p.line, p.column, "combo references unknown rule \"" + name + "\""});
      }
    }
    if (uniq.size() < 2) errors.push_back({c.pos.line, c.pos.column, "combo needs at least two rules"});
    s.rule_names.assign(uniq.begin(), uniq.end());
    rs.synergies.push_back(std::move(s));
  }

  std::stable_sort(errors.begin(), errors.end(), [](const ParseError& a, const ParseError& b) {
    return a.line != b.line ? a.line < b.line : a.column < b.column;
  });
  if (errors.empty()) result.rules = std::move(rs);
  return result;
}

inline ParseResult parse_rules(std::string_view text, const FeatureSchema& schema,
                               const std::set<std::string>& model_ids = default_model_ids(),
                               const TierDefaults& defaults = {}) {
  CheckContext ctx{&schema, model_ids, defaults};
  return parse_rules(text, ctx);
}

}  // namespace pacc::dsl
