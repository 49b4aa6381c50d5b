#pragma once

#include <atomic>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <variant>

#include "pacc/core/types.hpp"
#include "pacc/models/common.hpp"
#include "pacc/sources/stores.hpp"
#include "pacc/sources/uid_client.hpp"

namespace pacc::sources {

using models::ModelValue;
using models::NotApplicable;

inline const std::vector<std::string>& source_names() {
  static const std::vector<std::string> names{"watchlist", "registry", "vat_filings", "uid_validation", "peer_stats"};
  return names;
}

/// Thrown when a source is mutated while a scoring batch holds the hub.
class MidBatchMutation : public Error {
 public:
  using Error::Error;
};

/// Immutable view of all external sources. A scoring batch works on one
/// snapshot, so every case in the batch sees the same data.
struct SourceSnapshot {
  WatchlistStore watchlist;
  RegistryStore registry;
  std::map<std::string, UidStatus> uid_results;
  std::set<std::string> loaded;                // sources with data present
  std::map<std::string, bool> legal_basis;     // missing entry: permitted
  std::uint64_t version = 0;

  bool permitted(const std::string& source) const {
    auto it = legal_basis.find(source);
    return it == legal_basis.end() || it->second;
  }

  /// Reason the source cannot be queried, or empty when it can.
  std::string unavailable_reason(const std::string& source) const {
    if (!permitted(source)) return "no legal basis for source " + source;
    if (source == "vat_filings" || source == "peer_stats") return {};
    if (!loaded.count(source)) return "source " + source + " unavailable";
    return {};
  }
};

/// Owns the current snapshot and the UID client. Mutations replace the
/// snapshot (copy on write) and are refused while a batch is running.
class SourceHub {
 public:
  class BatchGuard {
   public:
    explicit BatchGuard(SourceHub& hub) : hub_(&hub) { ++hub_->active_batches_; }
    BatchGuard(BatchGuard&& o) noexcept : hub_(std::exchange(o.hub_, nullptr)) {}
    BatchGuard(const BatchGuard&) = delete;
    BatchGuard& operator=(const BatchGuard&) = delete;
    BatchGuard& operator=(BatchGuard&&) = delete;
    ~BatchGuard() {
      if (hub_) --hub_->active_batches_;
    }

   private:
    SourceHub* hub_;
  };

  explicit SourceHub(int uid_quota = 100) : current_(std::make_shared<SourceSnapshot>()), uid_(uid_quota) {}

  std::shared_ptr<const SourceSnapshot> snapshot() const {
    std::lock_guard lock(mu_);
    return current_;
  }

  BatchGuard begin_batch() { return BatchGuard(*this); }
  bool batch_active() const { return active_batches_.load() > 0; }

  void replace_watchlist(WatchlistStore w) {
    mutate([&](SourceSnapshot& s) {
      s.watchlist = std::move(w);
      s.loaded.insert("watchlist");
    });
  }
  void replace_registry(RegistryStore r) {
    mutate([&](SourceSnapshot& s) {
      s.registry = std::move(r);
      s.loaded.insert("registry");
    });
  }
  void set_legal_basis(const std::string& source, bool permitted) {
    mutate([&](SourceSnapshot& s) { s.legal_basis[source] = permitted; });
  }

  /// UID client for enqueueing checks. Call `publish_uid_results` after a
  /// validation day to make results visible to scoring.
  UidValidationClient& uid_client() { return uid_; }
  const UidValidationClient& uid_client() const { return uid_; }
  void publish_uid_results() {
    mutate([&](SourceSnapshot& s) {
      s.uid_results = uid_.results();
      s.loaded.insert("uid_validation");
    });
  }

  /// Runs one validation day and publishes the results.
  std::vector<UidValidationClient::Processed> run_validation_day(
      const std::function<bool(const std::string&)>& oracle) {
    if (batch_active()) throw MidBatchMutation("cannot run UID validation during a scoring batch");
    auto out = uid_.run_validation_day(oracle);
    publish_uid_results();
    return out;
  }

 private:
  template <class F>
  void mutate(F&& f) {
    if (batch_active()) throw MidBatchMutation("sources cannot change during a scoring batch");
    std::lock_guard lock(mu_);
    auto next = std::make_shared<SourceSnapshot>(*current_);
    f(*next);
    ++next->version;
    current_ = std::move(next);
  }

  mutable std::mutex mu_;
  std::shared_ptr<const SourceSnapshot> current_;
  UidValidationClient uid_;
  std::atomic<int> active_batches_{0};
};

// ---------------------------------------------------------------------------
// Source operations used by rule conditions
// ---------------------------------------------------------------------------

/// Number of the case's persons linked to a watchlisted company other than
/// the case's own company.
inline ModelValue watchlist_links(const SourceSnapshot& s, const TaxpayerCase& c) {
  if (auto r = s.unavailable_reason("watchlist"); !r.empty()) return NotApplicable{r};
  std::set<std::string> persons(c.persons.begin(), c.persons.end());
  int n = 0;
  for (const auto& p : persons) {
    if (s.watchlist.linked_elsewhere(p, c.case_id)) ++n;
  }
  return static_cast<double>(n);
}

/// Registered companies sharing the case's address, the case included if it
/// is registered there.
inline ModelValue companies_at_address(const SourceSnapshot& s, const TaxpayerCase& c) {
  if (auto r = s.unavailable_reason("registry"); !r.empty()) return NotApplicable{r};
  if (c.address_id.empty()) return NotApplicable{"case has no address"};
  return static_cast<double>(s.registry.companies_at(c.address_id));
}

/// Whole months since the latest filed VAT return period. A company that has
/// never filed counts from its registration; one younger than a month is
/// NOT_APPLICABLE.
inline ModelValue filing_gap_months(const TaxpayerCase& c, YearMonth now) {
  std::optional<int> last;
  for (const auto& v : c.vat_returns) {
    if (v.filed && (!last || v.period.ordinal() > *last)) last = v.period.ordinal();
  }
  if (last) return static_cast<double>(std::max(0, now.ordinal() - *last));
  int age = now.ordinal() - c.registered_date.year_month().ordinal();
  if (age < 1) return NotApplicable{"company registered less than a month ago"};
  return static_cast<double>(age);
}

/// `filing_gap_months` behind the legal-basis gate of the filing history.
inline ModelValue months_since_last_vat_return(const SourceSnapshot& s, const TaxpayerCase& c, YearMonth now) {
  if (auto r = s.unavailable_reason("vat_filings"); !r.empty()) return NotApplicable{r};
  return filing_gap_months(c, now);
}

/// Trading partners whose UID validation came back invalid. Pending checks
/// count as not invalid.
inline ModelValue uid_invalid_count(const SourceSnapshot& s, const TaxpayerCase& c) {
  if (!s.permitted("uid_validation")) return NotApplicable{"no legal basis for source uid_validation"};
  int n = 0;
  for (const auto& p : c.trading_partners) {
    auto it = s.uid_results.find(p);
    if (it != s.uid_results.end() && it->second == UidStatus::invalid) ++n;
  }
  return static_cast<double>(n);
}

}  // namespace pacc::sources
