#pragma once

#include <cmath>
#include <compare>
#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace pacc {

/// Base class for all errors raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed or inconsistent input data (files, records, requests).
class DataError : public Error {
 public:
  using Error::Error;
};

// ---------------------------------------------------------------------------
// Money
// ---------------------------------------------------------------------------

/// Monetary amount held as integer euro cents.
class Money {
 public:
  constexpr Money() = default;

  static constexpr Money from_cents(std::int64_t cents) { return Money(cents); }

  /// Rounds half away from zero to the nearest cent.
  static Money from_eur(double eur) {
    return Money(static_cast<std::int64_t>(std::llround(eur * 100.0)));
  }

  constexpr std::int64_t cents() const { return cents_; }
  constexpr double eur() const { return static_cast<double>(cents_) / 100.0; }

  /// "1234.50" style decimal rendering.
  std::string to_string() const {
    std::int64_t abs = cents_ < 0 ? -cents_ : cents_;
    std::string out = std::to_string(abs / 100);
    std::int64_t frac = abs % 100;
    out += frac < 10 ? ".0" : ".";
    out += std::to_string(frac);
    return cents_ < 0 ? "-" + out : out;
  }

  constexpr auto operator<=>(const Money&) const = default;

 private:
  constexpr explicit Money(std::int64_t cents) : cents_(cents) {}
  std::int64_t cents_ = 0;
};

// ---------------------------------------------------------------------------
// Calendar
// ---------------------------------------------------------------------------

struct YearMonth {
  int year = 1970;
  int month = 1;  // 1..12

  /// Absolute month number, used for month arithmetic.
  constexpr int ordinal() const { return year * 12 + (month - 1); }
  static constexpr YearMonth from_ordinal(int ord) {
    return YearMonth{ord / 12, ord % 12 + 1};
  }
  constexpr YearMonth plus(int months) const { return from_ordinal(ordinal() + months); }

  constexpr auto operator<=>(const YearMonth&) const = default;
};

struct Date {
  int year = 1970;
  int month = 1;
  int day = 1;

  constexpr YearMonth year_month() const { return YearMonth{year, month}; }
  constexpr auto operator<=>(const Date&) const = default;
};

std::string to_string(const YearMonth& ym);
std::string to_string(const Date& d);
std::optional<YearMonth> parse_year_month(std::string_view text);
std::optional<Date> parse_date(std::string_view text);

// ---------------------------------------------------------------------------
// Scoring primitives
// ---------------------------------------------------------------------------

enum class WeightTier { LOW = 0, MED = 1, HIGH = 2 };

constexpr std::string_view to_string(WeightTier t) {
  switch (t) {
    case WeightTier::LOW: return "LOW";
    case WeightTier::MED: return "MED";
    case WeightTier::HIGH: return "HIGH";
  }
  return "LOW";
}

inline std::optional<WeightTier> parse_tier(std::string_view s) {
  if (s == "LOW") return WeightTier::LOW;
  if (s == "MED") return WeightTier::MED;
  if (s == "HIGH") return WeightTier::HIGH;
  return std::nullopt;
}

/// Integer fraudulence score in [0, 999].
class FraudScore {
 public:
  static constexpr int kMax = 999;

  constexpr FraudScore() = default;
  explicit FraudScore(int value) : value_(value) {
    if (value < 0 || value > kMax) {
      throw std::out_of_range("fraud score out of [0, 999]: " + std::to_string(value));
    }
  }
  constexpr int value() const { return value_; }
  constexpr auto operator<=>(const FraudScore&) const = default;

 private:
  int value_ = 0;
};

// ---------------------------------------------------------------------------
// Case data
// ---------------------------------------------------------------------------

enum class CaseKind { company_audit, missing_trader };

constexpr std::string_view to_string(CaseKind k) {
  return k == CaseKind::company_audit ? "company_audit" : "missing_trader";
}

inline std::optional<CaseKind> parse_case_kind(std::string_view s) {
  if (s == "company_audit") return CaseKind::company_audit;
  if (s == "missing_trader") return CaseKind::missing_trader;
  return std::nullopt;
}

struct Missing {
  constexpr bool operator==(const Missing&) const = default;
};

/// A single feature value; `Missing` is a value of its own, never zero.
using FeatureValue = std::variant<Missing, double, std::string, bool>;

inline bool is_missing(const FeatureValue& v) { return std::holds_alternative<Missing>(v); }

struct AuditOutcome {
  bool audited = true;
  bool fraud_found = false;
  Money back_tax;
  int available_at = 0;  // corpus month index

  bool operator==(const AuditOutcome&) const = default;
};

struct VatReturn {
  YearMonth period;
  bool filed = true;

  bool operator==(const VatReturn&) const = default;
};

struct TaxpayerCase {
  std::string case_id;
  CaseKind kind = CaseKind::company_audit;
  std::map<std::string, FeatureValue> features;
  std::vector<std::string> persons;
  std::string address_id;
  std::vector<VatReturn> vat_returns;
  std::optional<int> last_audited_year;
  Date registered_date;
  std::vector<std::string> trading_partners;
  std::optional<AuditOutcome> outcome;

  bool operator==(const TaxpayerCase&) const = default;

  const FeatureValue& feature(const std::string& name) const {
    static const FeatureValue kMissing{Missing{}};
    auto it = features.find(name);
    return it == features.end() ? kMissing : it->second;
  }

  std::optional<double> number(const std::string& name) const {
    const auto& v = feature(name);
    if (const auto* d = std::get_if<double>(&v)) return *d;
    return std::nullopt;
  }
};

// ---------------------------------------------------------------------------
// Feature schema
// ---------------------------------------------------------------------------

enum class FeatureType { number, text, flag };

constexpr std::string_view to_string(FeatureType t) {
  switch (t) {
    case FeatureType::number: return "number";
    case FeatureType::text: return "text";
    case FeatureType::flag: return "flag";
  }
  return "number";
}

inline std::optional<FeatureType> parse_feature_type(std::string_view s) {
  if (s == "number") return FeatureType::number;
  if (s == "text") return FeatureType::text;
  if (s == "flag") return FeatureType::flag;
  return std::nullopt;
}

struct FeatureSpec {
  FeatureType type = FeatureType::number;
  std::string unit;  // "EUR", "count", "ratio", "months", "" for text/flag
  std::string description;
};

struct FeatureSchema {
  std::map<std::string, FeatureSpec> features;

  bool has(const std::string& name) const { return features.count(name) != 0; }
  std::optional<FeatureType> type_of(const std::string& name) const {
    auto it = features.find(name);
    if (it == features.end()) return std::nullopt;
    return it->second.type;
  }
  std::vector<std::string> numeric_features() const {
    std::vector<std::string> out;
    for (const auto& [name, spec] : features) {
      if (spec.type == FeatureType::number) out.push_back(name);
    }
    return out;
  }
};

// ---------------------------------------------------------------------------
// Corpus clock
// ---------------------------------------------------------------------------

/// Simulated month counter. Advanced only by the simulation driver.
class CorpusClock {
 public:
  constexpr CorpusClock() = default;
  constexpr explicit CorpusClock(int month) : month_(month) {}

  constexpr int now() const { return month_; }
  void advance(int months) {
    if (months < 0) throw std::invalid_argument("clock cannot move backwards");
    month_ += months;
  }

 private:
  int month_ = 0;
};

/// The loaded case corpus plus its calendar anchor.
struct Corpus {
  std::vector<TaxpayerCase> cases;
  YearMonth start{2024, 1};  // calendar month of clock index 0
  CorpusClock clock;

  YearMonth current_month() const { return start.plus(clock.now()); }
  int current_year() const { return current_month().year; }

  const TaxpayerCase* find(const std::string& id) const {
    for (const auto& c : cases) {
      if (c.case_id == id) return &c;
    }
    return nullptr;
  }
};

inline int corpus_clock(const Corpus& corpus) { return corpus.clock.now(); }

// ---------------------------------------------------------------------------
// Calendar text helpers
// ---------------------------------------------------------------------------

namespace detail {
inline std::string pad(int v, int width) {
  std::string s = std::to_string(v);
  while (static_cast<int>(s.size()) < width) s.insert(s.begin(), '0');
  return s;
}

inline std::optional<int> parse_digits(std::string_view s) {
  if (s.empty()) return std::nullopt;
  int v = 0;
  for (char c : s) {
    if (c < '0' || c > '9') return std::nullopt;
    v = v * 10 + (c - '0');
  }
  return v;
}
}  // namespace detail

inline std::string to_string(const YearMonth& ym) {
  return detail::pad(ym.year, 4) + "-" + detail::pad(ym.month, 2);
}

inline std::string to_string(const Date& d) {
  return detail::pad(d.year, 4) + "-" + detail::pad(d.month, 2) + "-" + detail::pad(d.day, 2);
}

inline std::optional<YearMonth> parse_year_month(std::string_view text) {
  if (text.size() != 7 || text[4] != '-') return std::nullopt;
  auto y = detail::parse_digits(text.substr(0, 4));
  auto m = detail::parse_digits(text.substr(5, 2));
  if (!y || !m || *m < 1 || *m > 12) return std::nullopt;
  return YearMonth{*y, *m};
}

inline std::optional<Date> parse_date(std::string_view text) {
  if (text.size() != 10 || text[7] != '-') return std::nullopt;
  auto ym = parse_year_month(text.substr(0, 7));
  auto d = detail::parse_digits(text.substr(8, 2));
  if (!ym || !d || *d < 1 || *d > 31) return std::nullopt;
  return Date{ym->year, ym->month, *d};
}

}  // namespace pacc
