#pragma once

#include <bhsim/profile.hpp>
#include <bhsim/types.hpp>

#include <cstdint>
#include <optional>
#include <vector>

namespace bhsim {

struct BstEntry {
  std::uint32_t tag = 0;
  BranchOutcome last_outcome;
  bool biased = true;

  bool operator==(const BstEntry&) const = default;
};

struct BiasVerdict {
  bool biased = true;
  bool operator==(const BiasVerdict&) const = default;
};

struct BstEviction {
  std::uint32_t index = 0;
  BstEntry victim;
};

/// Branch status table: one tagged occupant per slot, newest wins.
class BstTable {
 public:
  explicit BstTable(const MicroarchProfile& profile);

  std::uint32_t index(Addr addr) const;
  std::uint32_t tag(Addr addr, ContextId ctx = 0) const;

  /// Bias classification followed by write-back of the new record.
  BiasVerdict classify_and_update(Addr addr, BranchOutcome outcome,
                                  ContextId ctx = 0);
  /// The verdict classify_and_update would return, without side effects.
  BiasVerdict peek(Addr addr, BranchOutcome outcome, ContextId ctx = 0) const;

  /// Eviction rules: indirects always, conditionals only when taken; a
  /// different-tag occupant of the slot is removed.
  std::optional<BstEviction> maybe_evict(BranchKind kind, Addr addr,
                                         bool taken, ContextId ctx = 0);

  /// Two classify_and_update calls; returns the second verdict.
  BiasVerdict prime_nonbiased(Addr addr, BranchOutcome first,
                              BranchOutcome second, ContextId ctx = 0);

  const std::optional<BstEntry>& slot(std::uint32_t index) const {
    return slots_[index];
  }
  std::optional<BstEntry> lookup(Addr addr, ContextId ctx = 0) const;
  std::size_t size() const { return slots_.size(); }
  std::size_t occupied() const;
  void clear();

 private:
  const MicroarchProfile* profile_;
  std::uint32_t mask_;
  std::vector<std::optional<BstEntry>> slots_;
};

}  // namespace bhsim
