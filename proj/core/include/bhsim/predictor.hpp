#pragma once

#include <bhsim/bst.hpp>
#include <bhsim/history.hpp>
#include <bhsim/profile.hpp>
#include <bhsim/types.hpp>

#include <cstdint>
#include <optional>
#include <vector>

namespace bhsim {

struct Prediction {
  bool valid = false;
  BranchOutcome outcome;  // meaningful only when valid
  int provider = -1;      // table index, -1 when no prediction
  bool recorded = false;  // some hit entry has seen this branch taken

  /// Direction the frontend follows: NoPrediction falls through.
  bool taken() const { return valid && outcome.kind != BranchOutcome::Kind::NotTaken; }
};

struct PredictorEntry {
  std::uint32_t tag = 0;
  bool holds_target = false;
  std::uint8_t counter = 0;  // 0..3, taken when >= 2
  Addr target = 0;
  std::vector<Addr> aliases;  // distinct congruent PCs that hit this entry
  std::uint64_t pressure_history = 0;
  bool seen_taken = false;

  bool operator==(const PredictorEntry&) const = default;
};

struct ResolveResult {
  bool mispredicted = false;
  bool evicted = false;
  std::vector<int> allocated;  // table indices
};

/// TAGE-style ladder of direct-mapped tagged tables. Table 0 is indexed by
/// PC only; table i > 0 also hashes the low tage_history_lengths[i] bits of
/// the history.
class PredictorState {
 public:
  static constexpr unsigned kSets = 1024;

  explicit PredictorState(const MicroarchProfile& profile);

  std::size_t table_count() const { return tables_.size(); }

  Prediction predict(BranchKind kind, Addr pc, const HistoryValue& h,
                     ContextId ctx = 0) const;

  ResolveResult resolve(BranchKind kind, Addr pc, const HistoryValue& h,
                        BranchOutcome actual, const Prediction& predicted,
                        ContextId ctx = 0);

  /// Removes every entry hit by (pc, h); returns how many were removed.
  std::size_t evict_for_test(BranchKind kind, Addr pc, const HistoryValue& h,
                             ContextId ctx = 0);

  void flush();

  /// The entry (pc, h) hits in `table`, if any.
  const PredictorEntry* find(int table, BranchKind kind, Addr pc,
                             const HistoryValue& h, ContextId ctx = 0) const;
  std::size_t occupancy(int table) const;

  /// Calls f(table, set, entry) for every valid entry.
  template <class F>
  void for_each_entry(F&& f) const {
    for (int t = 0; t < static_cast<int>(tables_.size()); ++t) {
      for (std::uint32_t i = 0; i < tables_[t].size(); ++i) {
        if (tables_[t][i].entry) f(t, i, *tables_[t][i].entry);
      }
    }
  }

 private:
  struct Slot {
    std::uint32_t index;
    std::uint32_t tag;
  };
  Slot slot(int table, Addr pc, const HistoryValue& h, ContextId ctx) const;
  PredictorEntry* hit(int table, BranchKind kind, Addr pc,
                      const HistoryValue& h, ContextId ctx);
  void allocate(int table, BranchKind kind, Addr pc, const HistoryValue& h,
                BranchOutcome actual, ContextId ctx);
  bool counts_pressure(int table, std::uint64_t pressure_history,
                       const HistoryValue& h) const;

  // Congruent PCs of an evicted entry. While the class stays over the
  // threshold, allocations for the same tag are refused.
  struct PressureRecord {
    std::uint32_t tag = 0;
    bool holds_target = false;
    std::vector<Addr> aliases;
    std::uint64_t pressure_history = 0;
  };
  struct Cell {
    std::optional<PredictorEntry> entry;
    std::optional<PressureRecord> pressure;
  };

  const MicroarchProfile* profile_;
  std::vector<std::vector<Cell>> tables_;
};

enum class MitigationEvent { UserContextSwitch, PrivilegeSwitch };

/// Routes a context-switch event to the structures the profile's
/// mitigations clear. Returns true when anything was cleared.
bool apply_flush(const MicroarchProfile& profile, MitigationEvent event,
                 PredictorState& predictor, BstTable* bst,
                 HistoryState& history);

}  // namespace bhsim
