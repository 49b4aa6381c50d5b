#pragma once

#include <functional>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace pacc::sources {

enum class UidStatus { pending, valid, invalid };

constexpr std::string_view to_string(UidStatus s) {
  switch (s) {
    case UidStatus::pending: return "pending";
    case UidStatus::valid: return "valid";
    case UidStatus::invalid: return "invalid";
  }
  return "pending";
}

inline std::optional<UidStatus> parse_uid_status(std::string_view s) {
  if (s == "pending") return UidStatus::pending;
  if (s == "valid") return UidStatus::valid;
  if (s == "invalid") return UidStatus::invalid;
  return std::nullopt;
}

/// Quota-limited cross-border UID validation. Each member state accepts at
/// most `quota` checks per simulated day; queued checks are served by
/// priority score (descending), then UID (ascending).
class UidValidationClient {
 public:
  struct Processed {
    std::string state;
    std::string uid;
    UidStatus status;
  };

  explicit UidValidationClient(int quota = 100) : quota_(quota) {
    if (quota < 1) throw std::invalid_argument("UID quota must be >= 1");
  }

  /// Idempotent per (state, uid): returns false if the pair was seen before.
  bool enqueue(const std::string& state, const std::string& uid, int priority_score) {
    if (!seen_.insert({state, uid}).second) return false;
    queues_[state].insert({priority_score, uid});
    results_[uid] = UidStatus::pending;
    return true;
  }

  /// Serves up to `quota` queued checks per state, asking `oracle` whether
  /// each UID is valid. Leftovers stay queued for the next day.
  std::vector<Processed> run_validation_day(const std::function<bool(const std::string&)>& oracle) {
    std::vector<Processed> out;
    std::map<std::string, int> today;
    for (auto& [state, queue] : queues_) {
      int done = 0;
      while (!queue.empty() && done < quota_) {
        auto it = queue.begin();
        UidStatus s = oracle(it->uid) ? UidStatus::valid : UidStatus::invalid;
        results_[it->uid] = s;
        out.push_back({state, it->uid, s});
        queue.erase(it);
        ++done;
      }
      if (done > 0) today[state] = done;
    }
    day_log_.push_back(std::move(today));
    ++day_;
    return out;
  }

  UidStatus status(const std::string& uid) const {
    auto it = results_.find(uid);
    return it == results_.end() ? UidStatus::pending : it->second;
  }
  bool known(const std::string& uid) const { return results_.count(uid) != 0; }

  std::size_t pending(const std::string& state) const {
    auto it = queues_.find(state);
    return it == queues_.end() ? 0 : it->second.size();
  }
  std::size_t pending() const {
    std::size_t n = 0;
    for (const auto& [_, q] : queues_) n += q.size();
    return n;
  }

  int quota() const { return quota_; }
  int day() const { return day_; }
  /// Per finished day: validations performed per state.
  const std::vector<std::map<std::string, int>>& day_log() const { return day_log_; }
  const std::map<std::string, UidStatus>& results() const { return results_; }

  /// Queue contents in service order, for persistence.
  struct QueuedCheck {
    std::string state;
    std::string uid;
    int priority = 0;
  };
  std::vector<QueuedCheck> queued() const {
    std::vector<QueuedCheck> out;
    for (const auto& [state, q] : queues_) {
      for (const auto& e : q) out.push_back({state, e.uid, e.priority});
    }
    return out;
  }

  /// Rebuilds a client from persisted parts.
  void restore(const std::vector<QueuedCheck>& queued, const std::map<std::string, UidStatus>& results,
               const std::set<std::pair<std::string, std::string>>& seen, int day) {
    queues_.clear();
    for (const auto& q : queued) queues_[q.state].insert({q.priority, q.uid});
    results_ = results;
    seen_ = seen;
    day_ = day;
  }
  const std::set<std::pair<std::string, std::string>>& seen() const { return seen_; }

 private:
  struct Entry {
    int priority;
    std::string uid;
    bool operator<(const Entry& o) const { return priority != o.priority ? priority > o.priority : uid < o.uid; }
  };

  int quota_;
  int day_ = 0;
  std::map<std::string, std::set<Entry>> queues_;
  std::set<std::pair<std::string, std::string>> seen_;
  std::map<std::string, UidStatus> results_;
  std::vector<std::map<std::string, int>> day_log_;
};

}  // namespace pacc::sources
