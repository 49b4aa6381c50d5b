#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <ostream>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "pacc/core/random.hpp"
#include "pacc/core/types.hpp"
#include "pacc/sources/stores.hpp"
#include "pacc/synth/truth.hpp"

namespace pacc::synth {

/// Shape of a synthetic corpus. Defaults give 5% fraud, a fifth of the cases
/// on the missing-trader track and four company archetypes.
struct GeneratorConfig {
  int n_cases = 5000;
  double fraud_rate = 0.05;
  int n_archetypes = 4;              // 1..4 legitimate company archetypes
  double missing_trader_share = 0.2;
  int ring_size_min = 3;
  int ring_size_max = 8;
  std::uint64_t seed = 1;
  double noise = 0.10;               // relative spread of archetype features
  double missing_rate = 0.01;        // per optional feature
  double audited_share = 0.5;        // historical audits among honest cases
  double fraud_audited_share = 0.8;  // historical audits among fraud cases
  double history_miss_rate = 0.1;
  YearMonth start{2024, 1};

  /// Throws std::invalid_argument for an infeasible configuration.
  void validate() const {
    if (n_cases < 10) throw std::invalid_argument("n_cases must be >= 10");
    if (!(fraud_rate >= 0.0 && fraud_rate < 1.0)) throw std::invalid_argument("fraud_rate must lie in [0, 1)");
    if (n_archetypes < 1 || n_archetypes > 4) throw std::invalid_argument("n_archetypes must lie in 1..4");
    if (!(missing_trader_share >= 0.0 && missing_trader_share <= 1.0)) {
      throw std::invalid_argument("missing_trader_share must lie in [0, 1]");
    }
    if (ring_size_min < 1 || ring_size_min > ring_size_max) throw std::invalid_argument("bad ring size range");
    if (ring_size_min > n_cases) throw std::invalid_argument("ring size exceeds n_cases");
    if (noise < 0.0 || noise > 0.3) throw std::invalid_argument("noise must lie in [0, 0.3]");
  }
};

struct Archetype {
  const char* name;
  double employees;
  double revenue;
  double personnel;
  double assets;
  double inventory;
  const char* industry;
};

inline constexpr Archetype kArchetypes[] = {
    {"services", 10, 1.0e6, 0.45e6, 0.4e6, 0.02e6, "62.01"},
    {"retail", 25, 5.0e6, 0.8e6, 1.5e6, 1.2e6, "47.11"},
    {"manufacturing", 80, 12.0e6, 3.5e6, 9.0e6, 2.5e6, "25.62"},
    {"construction", 40, 6.0e6, 2.2e6, 2.5e6, 0.3e6, "41.20"},
};

struct GeneratedCorpus {
  Corpus corpus;
  std::vector<std::pair<std::string, std::string>> watchlist;  // (company_id, person_id)
  std::vector<sources::RegistryEntry> registry;
  GroundTruth truth;

  sources::WatchlistStore watchlist_store() const {
    sources::WatchlistStore w;
    for (const auto& [c, p] : watchlist) w.add(c, p);
    return w;
  }
  sources::RegistryStore registry_store() const {
    sources::RegistryStore r;
    for (const auto& e : registry) r.add(e);
    return r;
  }
};

namespace detail {

inline std::string make_id(char prefix, int n) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%c%06d", prefix, n);
  return buf;
}

inline double cents(double eur) { return std::round(eur * 100.0) / 100.0; }

enum class Slot { mt_honest, mt_ring, co_honest, co_low_personnel, co_underreported };

class Builder {
 public:
  explicit Builder(const GeneratorConfig& cfg) : cfg_(cfg), rng_(cfg.seed) {}

  GeneratedCorpus run() {
    cfg_.validate();
    const int n = cfg_.n_cases;
    const int n_mt = static_cast<int>(std::lround(n * cfg_.missing_trader_share));
    const int n_co = n - n_mt;
    const int n_fraud = static_cast<int>(std::lround(n * cfg_.fraud_rate));
    int n_ring = static_cast<int>(std::lround(n_fraud * 0.4));
    int n_low = static_cast<int>(std::lround(n_fraud * 0.3));
    int n_under = n_fraud - n_ring - n_low;
    if (n_mt == 0) {
      n_low += n_ring;
      n_ring = 0;
    }
    if (n_co == 0) {
      n_ring += n_low + n_under;
      n_low = n_under = 0;
    }
    if (n_ring > n_mt || n_low + n_under > n_co) throw std::invalid_argument("fraud counts exceed case counts");

    std::vector<Slot> slots;
    slots.insert(slots.end(), static_cast<std::size_t>(n_mt - n_ring), Slot::mt_honest);
    slots.insert(slots.end(), static_cast<std::size_t>(n_ring), Slot::mt_ring);
    slots.insert(slots.end(), static_cast<std::size_t>(n_co - n_low - n_under), Slot::co_honest);
    slots.insert(slots.end(), static_cast<std::size_t>(n_low), Slot::co_low_personnel);
    slots.insert(slots.end(), static_cast<std::size_t>(n_under), Slot::co_underreported);
    rng_.shuffle(slots);

    out_.corpus.start = cfg_.start;
    build_partner_pool(std::max(50, n_mt / 4));
    build_noise_watchlist(std::max(5, n / 200));

    std::vector<int> ring_members;
    for (int i = 0; i < n; ++i) {
      TaxpayerCase c;
      c.case_id = make_id('C', i + 1);
      TruthEntry t;
      switch (slots[static_cast<std::size_t>(i)]) {
        case Slot::mt_honest: honest_trader(c); break;
        case Slot::mt_ring:
          t = {true, FraudPattern::MT_RING, -1, -1};
          ring_members.push_back(i);
          break;
        case Slot::co_honest: t.archetype = company(c, FraudPattern::NONE); break;
        case Slot::co_low_personnel:
          t = {true, FraudPattern::LOW_PERSONNEL, company(c, FraudPattern::LOW_PERSONNEL), -1};
          break;
        case Slot::co_underreported:
          t = {true, FraudPattern::UNDERREPORTED_TAX, company(c, FraudPattern::UNDERREPORTED_TAX), -1};
          break;
      }
      out_.truth.cases[c.case_id] = t;
      out_.corpus.cases.push_back(std::move(c));
    }
    build_rings(ring_members);
    for (auto& c : out_.corpus.cases) history(c, out_.truth.cases.at(c.case_id));

    std::sort(out_.registry.begin(), out_.registry.end(),
              [](const auto& a, const auto& b) { return a.company_id < b.company_id; });
    std::sort(out_.watchlist.begin(), out_.watchlist.end());
    return std::move(out_);
  }

 private:
  double jitter(double mean) { return mean * std::max(0.05, 1.0 + cfg_.noise * rng_.normal()); }

  std::string new_address() { return make_id('A', ++addresses_); }

  /// Honest companies share addresses in small groups (at most 13).
  std::string honest_address() {
    if (address_left_ == 0) {
      current_address_ = new_address();
      address_left_ = rng_.between(1, 6);
    }
    --address_left_;
    return current_address_;
  }

  void register_case(TaxpayerCase& c, std::string address) {
    c.address_id = address;
    out_.registry.push_back({c.case_id, std::move(address), "AT"});
  }

  void add_persons(TaxpayerCase& c, int count) {
    for (int i = 0; i < count; ++i) c.persons.push_back(make_id('P', ++persons_));
    // A few honest companies share a person with an unrelated watchlisted firm.
    if (rng_.bernoulli(0.01) && !noise_persons_.empty()) {
      c.persons.push_back(noise_persons_[rng_.index(noise_persons_.size())]);
    }
  }

  void set_registration(TaxpayerCase& c, int age_months) {
    YearMonth ym = cfg_.start.plus(-age_months);
    c.registered_date = Date{ym.year, ym.month, rng_.between(1, 28)};
    c.features["company_age_months"] = static_cast<double>(age_months);
  }

  /// Monthly returns from registration (at most `history` months back) up
  /// to `gap` months before the start month.
  void file_returns(TaxpayerCase& c, int age_months, int history, int gap) {
    int first = std::min(age_months, history);
    for (int back = first; back >= std::max(gap, 1); --back) {
      c.vat_returns.push_back({cfg_.start.plus(-back), true});
    }
  }

  void optional_features(TaxpayerCase& c, double cash_ratio, int bank_accounts) {
    c.features["cash_ratio"] =
        rng_.bernoulli(cfg_.missing_rate) ? FeatureValue{Missing{}} : FeatureValue{cents(cash_ratio)};
    c.features["bank_account_count"] = rng_.bernoulli(cfg_.missing_rate)
                                           ? FeatureValue{Missing{}}
                                           : FeatureValue{static_cast<double>(bank_accounts)};
  }

  const char* legal_form() {
    static const char* forms[] = {"GmbH", "AG", "KG", "OG"};
    return forms[rng_.index(4)];
  }

  int company(TaxpayerCase& c, FraudPattern p) {
    c.kind = CaseKind::company_audit;
    int a = static_cast<int>(rng_.index(static_cast<std::uint64_t>(cfg_.n_archetypes)));
    const Archetype& at = kArchetypes[a];
    register_case(c, honest_address());
    add_persons(c, rng_.between(1, 3));
    int age = rng_.between(36, 360);
    set_registration(c, age);
    file_returns(c, age, 12, 1);

    double revenue = jitter(at.revenue);
    double personnel = jitter(at.personnel);
    if (p == FraudPattern::LOW_PERSONNEL) personnel = at.personnel * rng_.uniform(0.35, 0.5);
    double output_tax = 0.2 * revenue * (1.0 + 0.02 * rng_.normal());
    if (p == FraudPattern::UNDERREPORTED_TAX) output_tax *= rng_.uniform(0.4, 0.6);
    double profit = revenue * rng_.normal(0.08, 0.02);
    auto& f = c.features;
    f["employee_count"] = std::max(1.0, std::round(jitter(at.employees)));
    f["revenue_eur"] = cents(revenue);
    f["personnel_cost_eur"] = cents(personnel);
    f["profit_eur"] = cents(profit);
    f["output_tax_eur"] = cents(output_tax);
    f["input_tax_eur"] = cents(0.2 * revenue * rng_.uniform(0.55, 0.8));
    f["total_assets_eur"] = cents(jitter(at.assets));
    f["inventory_eur"] = cents(jitter(at.inventory));
    f["intra_eu_acquisitions_eur"] = cents(revenue * rng_.uniform(0.0, 0.08));
    f["intra_eu_deliveries_eur"] = cents(revenue * rng_.uniform(0.0, 0.08));
    f["reported_tax_base_eur"] = cents(0.1 * revenue);
    f["prior_findings_eur"] = rng_.bernoulli(0.1) ? cents(rng_.uniform(1000.0, 20000.0)) : 0.0;
    f["trading_partner_count"] = static_cast<double>(rng_.between(5, 60));
    f["foreign_partner_count"] = static_cast<double>(rng_.between(0, 5));
    f["vat_refund_claims"] = static_cast<double>(rng_.between(0, 1));
    f["late_filings_count"] = static_cast<double>(rng_.between(0, 1));
    f["director_changes_count"] = static_cast<double>(rng_.between(0, 1));
    optional_features(c, rng_.uniform(0.05, 0.4), rng_.between(1, 4));
    f["industry_code"] = std::string(at.industry);
    f["legal_form"] = std::string(legal_form());
    f["member_state"] = std::string("AT");
    f["has_foreign_director"] = rng_.bernoulli(0.05);
    f["is_group_member"] = rng_.bernoulli(0.2);
    return a;
  }

  void honest_trader(TaxpayerCase& c) {
    static const char* industries[] = {"46.52", "46.90", "46.19", "47.91", "46.43"};
    c.kind = CaseKind::missing_trader;
    register_case(c, honest_address());
    add_persons(c, rng_.between(1, 3));
    int age = rng_.between(12, 300);
    set_registration(c, age);
    // A small share has gone quiet for more than two years.
    int gap = rng_.bernoulli(0.03) ? rng_.between(25, 40) : rng_.between(1, 2);
    if (gap > age) gap = age;
    file_returns(c, age, gap + 24, gap);

    double revenue = std::exp(rng_.normal(std::log(1.5e6), 0.5));
    double acquisitions = revenue * rng_.uniform(0.05, 0.4);
    auto& f = c.features;
    f["employee_count"] = static_cast<double>(rng_.between(1, 40));
    f["revenue_eur"] = cents(revenue);
    f["personnel_cost_eur"] = cents(revenue * rng_.uniform(0.1, 0.3));
    f["profit_eur"] = cents(revenue * rng_.normal(0.05, 0.03));
    f["output_tax_eur"] = cents(0.2 * revenue);
    f["input_tax_eur"] = cents(0.2 * revenue * rng_.uniform(0.55, 0.9));
    f["total_assets_eur"] = cents(revenue * rng_.uniform(0.2, 0.8));
    f["inventory_eur"] = cents(revenue * rng_.uniform(0.05, 0.2));
    f["intra_eu_acquisitions_eur"] = cents(acquisitions);
    f["intra_eu_deliveries_eur"] = cents(acquisitions * rng_.uniform(0.3, 1.2));
    f["reported_tax_base_eur"] = cents(0.1 * revenue);
    f["prior_findings_eur"] = rng_.bernoulli(0.05) ? cents(rng_.uniform(1000.0, 20000.0)) : 0.0;
    int partners = rng_.between(0, 5);
    for (int i = 0; i < partners; ++i) {
      const auto& id = partner_pool_[rng_.index(partner_pool_.size())];
      if (std::find(c.trading_partners.begin(), c.trading_partners.end(), id) == c.trading_partners.end()) {
        c.trading_partners.push_back(id);
      }
    }
    std::sort(c.trading_partners.begin(), c.trading_partners.end());
    f["trading_partner_count"] = static_cast<double>(c.trading_partners.size() + rng_.between(3, 30));
    f["foreign_partner_count"] = static_cast<double>(c.trading_partners.size());
    f["vat_refund_claims"] = static_cast<double>(rng_.between(0, 2));
    f["late_filings_count"] = static_cast<double>(rng_.between(0, 2));
    f["director_changes_count"] = static_cast<double>(rng_.between(0, 1));
    optional_features(c, rng_.uniform(0.05, 0.5), rng_.between(1, 3));
    f["industry_code"] = std::string(industries[rng_.index(5)]);
    f["legal_form"] = std::string(legal_form());
    f["member_state"] = std::string("AT");
    f["has_foreign_director"] = rng_.bernoulli(0.1);
    f["is_group_member"] = rng_.bernoulli(0.1);
  }

  void ring_member(TaxpayerCase& c, const std::string& address, const std::string& ring_person,
                   const std::vector<std::string>& shells) {
    c.kind = CaseKind::missing_trader;
    register_case(c, address);
    c.persons.push_back(ring_person);
    for (int i = rng_.between(0, 1); i > 0; --i) c.persons.push_back(make_id('P', ++persons_));
    int age = rng_.between(3, 18);
    set_registration(c, age);
    file_returns(c, age, 24, rng_.between(4, 8));

    double revenue = rng_.uniform(0.2e6, 1.0e6);
    double acquisitions = rng_.uniform(1.0e6, 5.0e6);
    auto& f = c.features;
    f["employee_count"] = static_cast<double>(rng_.between(0, 3));
    f["revenue_eur"] = cents(revenue);
    f["personnel_cost_eur"] = cents(revenue * rng_.uniform(0.01, 0.05));
    f["profit_eur"] = cents(revenue * rng_.normal(0.01, 0.02));
    f["output_tax_eur"] = cents(0.2 * revenue);
    f["input_tax_eur"] = cents(0.2 * acquisitions * rng_.uniform(1.0, 1.3));
    f["total_assets_eur"] = cents(rng_.uniform(5e3, 40e3));
    f["inventory_eur"] = cents(rng_.uniform(0.0, 5e3));
    f["intra_eu_acquisitions_eur"] = cents(acquisitions);
    f["intra_eu_deliveries_eur"] = cents(acquisitions * rng_.uniform(0.0, 0.1));
    f["reported_tax_base_eur"] = cents(0.2 * acquisitions);
    f["prior_findings_eur"] = 0.0;
    std::vector<std::string> partners = shells;
    rng_.shuffle(partners);
    partners.resize(static_cast<std::size_t>(rng_.between(3, static_cast<int>(partners.size()))));
    for (int i = rng_.between(0, 2); i > 0; --i) partners.push_back(partner_pool_[rng_.index(partner_pool_.size())]);
    std::sort(partners.begin(), partners.end());
    partners.erase(std::unique(partners.begin(), partners.end()), partners.end());
    c.trading_partners = partners;
    f["trading_partner_count"] = static_cast<double>(partners.size() + rng_.between(0, 3));
    f["foreign_partner_count"] = static_cast<double>(partners.size());
    f["vat_refund_claims"] = static_cast<double>(rng_.between(3, 8));
    f["late_filings_count"] = static_cast<double>(rng_.between(2, 6));
    f["director_changes_count"] = static_cast<double>(rng_.between(2, 5));
    optional_features(c, rng_.uniform(0.6, 0.95), rng_.between(3, 6));
    f["industry_code"] = std::string(rng_.bernoulli(0.5) ? "46.52" : "46.90");
    f["legal_form"] = std::string("GmbH");
    f["member_state"] = std::string("AT");
    f["has_foreign_director"] = rng_.bernoulli(0.6);
    f["is_group_member"] = false;
  }

  /// Splits ring slots into rings; every ring shares one address padded with
  /// shell companies to 14..18 registrations and one person linked to a
  /// watchlisted company.
  void build_rings(const std::vector<int>& members) {
    std::size_t pos = 0;
    int ring = 0;
    static const char* states[] = {"DE", "HU", "SK", "CZ", "IT", "SI", "HR", "PL"};
    while (pos < members.size()) {
      int remaining = static_cast<int>(members.size() - pos);
      int size = remaining;
      if (remaining > cfg_.ring_size_max) {
        int hi = std::max(cfg_.ring_size_min, std::min(cfg_.ring_size_max, remaining - cfg_.ring_size_min));
        size = rng_.between(cfg_.ring_size_min, hi);
      }
      std::string address = new_address();
      std::string person = make_id('P', ++persons_);
      std::string watched = make_id('W', ++watched_);
      out_.watchlist.emplace_back(watched, person);
      out_.registry.push_back({watched, make_id('X', ++foreign_addresses_), states[rng_.index(8)]});
      std::vector<std::string> shells;
      for (int i = rng_.between(3, 6); i > 0; --i) {
        std::string id = make_id('G', ++foreign_shells_);
        out_.registry.push_back({id, make_id('X', ++foreign_addresses_), states[rng_.index(8)]});
        out_.truth.uid_valid[id] = false;
        shells.push_back(id);
      }
      for (int k = 0; k < size; ++k) {
        auto& c = out_.corpus.cases[static_cast<std::size_t>(members[pos + static_cast<std::size_t>(k)])];
        ring_member(c, address, person, shells);
        out_.truth.cases.at(c.case_id).ring = ring;
      }
      for (int total = rng_.between(14, 18); total > size; --total) {
        out_.registry.push_back({make_id('S', ++domestic_shells_), address, "AT"});
      }
      pos += static_cast<std::size_t>(size);
      ++ring;
    }
  }

  void build_partner_pool(int size) {
    static const char* states[] = {"DE", "HU", "SK", "CZ", "IT", "SI", "HR", "PL"};
    for (int i = 0; i < size; ++i) {
      std::string id = make_id('F', i + 1);
      out_.registry.push_back({id, make_id('X', ++foreign_addresses_), states[rng_.index(8)]});
      out_.truth.uid_valid[id] = !rng_.bernoulli(0.03);
      partner_pool_.push_back(id);
    }
  }

  void build_noise_watchlist(int count) {
    for (int i = 0; i < count; ++i) {
      std::string watched = make_id('W', ++watched_);
      if (rng_.bernoulli(0.2)) {
        out_.watchlist.emplace_back(watched, "");
        continue;
      }
      std::string person = make_id('P', ++persons_);
      out_.watchlist.emplace_back(watched, person);
      noise_persons_.push_back(person);
    }
  }

  /// Past audits: most fraud cases and half of the honest ones carry a
  /// documented outcome that matured before the first simulated month.
  void history(TaxpayerCase& c, const TruthEntry& t) {
    double p = t.is_fraud ? cfg_.fraud_audited_share : cfg_.audited_share;
    int reg_year = c.registered_date.year;
    if (rng_.bernoulli(p)) {
      c.last_audited_year = std::max(reg_year, cfg_.start.year - rng_.between(1, 3));
      AuditOutcome o;
      o.audited = true;
      o.fraud_found = t.is_fraud && !rng_.bernoulli(cfg_.history_miss_rate);
      if (o.fraud_found) o.back_tax = Money::from_eur(0.25 * c.number("reported_tax_base_eur").value_or(0.0));
      o.available_at = -rng_.between(1, 12);
      c.outcome = o;
    } else if (rng_.bernoulli(0.6)) {
      c.last_audited_year = std::max(reg_year, cfg_.start.year - rng_.between(4, 15));
    }
  }

  GeneratorConfig cfg_;
  Rng rng_;
  GeneratedCorpus out_;
  std::vector<std::string> partner_pool_;
  std::vector<std::string> noise_persons_;
  std::string current_address_;
  int address_left_ = 0;
  int addresses_ = 0;
  int persons_ = 0;
  int watched_ = 0;
  int foreign_addresses_ = 0;
  int foreign_shells_ = 0;
  int domestic_shells_ = 0;
};

}  // namespace detail

/// Labeled synthetic corpus with planted fraud patterns. Deterministic for a
/// fixed configuration.
inline GeneratedCorpus generate_corpus(const GeneratorConfig& cfg) { return detail::Builder(cfg).run(); }

inline void write_watchlist_csv(std::ostream& out, const std::vector<std::pair<std::string, std::string>>& rows) {
  out << "company_id,person_id\n";
  for (const auto& [c, p] : rows) out << c << ',' << p << '\n';
}

inline void write_registry_csv(std::ostream& out, const std::vector<sources::RegistryEntry>& rows) {
  out << "company_id,address_id,member_state\n";
  for (const auto& e : rows) out << e.company_id << ',' << e.address_id << ',' << e.member_state << '\n';
}

}  // namespace pacc::synth
