#include <bhsim/predictor.hpp>

#include <algorithm>

namespace bhsim {

namespace {

std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Bits [19:2]: congruent addresses that differ only above bit 19 share
// both index and tag.
std::uint32_t pc_key(Addr pc) {
  return static_cast<std::uint32_t>(pc >> 2) & 0x3FFFF;
}

bool kind_matches(const PredictorEntry& e, BranchKind kind) {
  return e.holds_target == predicts_target(kind);
}

std::uint64_t full_hash(const HistoryValue& h) {
  return h.prefix_hash(h.width());
}

}  // namespace

PredictorState::PredictorState(const MicroarchProfile& profile)
    : profile_(&profile),
      tables_(profile.tage_history_lengths.size(), std::vector<Cell>(kSets)) {}

PredictorState::Slot PredictorState::slot(int table, Addr pc,
                                          const HistoryValue& h,
                                          ContextId ctx) const {
  const std::uint32_t k = pc_key(pc);
  std::uint32_t index = (k ^ (k >> 10)) & (kSets - 1);
  std::uint32_t tag = (k >> 8) & 0x3FF;
  if (table > 0) {
    const unsigned len = profile_->tage_history_lengths[table];
    const std::uint64_t hh =
        splitmix(h.prefix_hash(len) ^ static_cast<std::uint64_t>(table));
    index ^= static_cast<std::uint32_t>(hh) & (kSets - 1);
    tag ^= static_cast<std::uint32_t>(hh >> 20) & 0x3FF;
  }
  if (profile_->mitigations.context_tagging) {
    tag ^= (ctx * 0x2B5u) & 0x3FF;
  }
  return {index, tag};
}

const PredictorEntry* PredictorState::find(int table, BranchKind kind, Addr pc,
                                           const HistoryValue& h,
                                           ContextId ctx) const {
  const Slot s = slot(table, pc, h, ctx);
  const auto& e = tables_[table][s.index].entry;
  if (e && e->tag == s.tag && kind_matches(*e, kind)) return &*e;
  return nullptr;
}

PredictorEntry* PredictorState::hit(int table, BranchKind kind, Addr pc,
                                    const HistoryValue& h, ContextId ctx) {
  return const_cast<PredictorEntry*>(find(table, kind, pc, h, ctx));
}

Prediction PredictorState::predict(BranchKind kind, Addr pc,
                                   const HistoryValue& h,
                                   ContextId ctx) const {
  Prediction p;
  const PredictorEntry* provider = nullptr;
  for (int t = 0; t < static_cast<int>(tables_.size()); ++t) {
    const PredictorEntry* e = find(t, kind, pc, h, ctx);
    if (!e) continue;
    p.recorded = p.recorded || e->seen_taken;
    if (t > 0 || profile_->fallback_to_t0) {
      provider = e;
      p.provider = t;
    }
  }
  if (provider) {
    p.valid = true;
    p.outcome = provider->holds_target
                    ? BranchOutcome::to(provider->target)
                    : BranchOutcome::direction(provider->counter >= 2);
  }
  return p;
}

bool PredictorState::counts_pressure(int table,
                                     std::uint64_t pressure_history,
                                     const HistoryValue& h) const {
  return table > 0 || profile_->pc_indexed_pressure ||
         pressure_history == full_hash(h);
}

void PredictorState::allocate(int table, BranchKind kind, Addr pc,
                              const HistoryValue& h, BranchOutcome actual,
                              ContextId ctx) {
  const Slot s = slot(table, pc, h, ctx);
  Cell& cell = tables_[table][s.index];
  if (auto& rec = cell.pressure;
      rec && rec->tag == s.tag && rec->holds_target == predicts_target(kind)) {
    if (counts_pressure(table, rec->pressure_history, h) &&
        std::find(rec->aliases.begin(), rec->aliases.end(), pc) ==
            rec->aliases.end()) {
      rec->aliases.push_back(pc);
    }
    if (rec->aliases.size() - 1 >= profile_->btb_evict_threshold) return;
  }
  PredictorEntry e;
  e.tag = s.tag;
  e.holds_target = predicts_target(kind);
  if (e.holds_target) {
    e.target = actual.target;
  } else {
    e.counter = actual.kind == BranchOutcome::Kind::NotTaken ? 1 : 2;
  }
  e.aliases = {pc};
  e.pressure_history = full_hash(h);
  e.seen_taken = actual.kind != BranchOutcome::Kind::NotTaken;
  cell.entry = std::move(e);
  cell.pressure.reset();
}

ResolveResult PredictorState::resolve(BranchKind kind, Addr pc,
                                      const HistoryValue& h,
                                      BranchOutcome actual,
                                      const Prediction& predicted,
                                      ContextId ctx) {
  ResolveResult r;
  const bool actual_taken = actual.kind != BranchOutcome::Kind::NotTaken;
  if (predicts_target(kind)) {
    r.mispredicted = !predicted.valid || predicted.outcome != actual;
  } else {
    r.mispredicted = predicted.taken() != actual_taken;
  }

  const int n = static_cast<int>(tables_.size());
  std::vector<PredictorEntry*> hits(n, nullptr);
  std::vector<bool> counted(n, false);
  bool over_threshold = false;
  for (int t = 0; t < n; ++t) {
    PredictorEntry* e = hit(t, kind, pc, h, ctx);
    if (!e) continue;
    hits[t] = e;
    if (!counts_pressure(t, e->pressure_history, h)) continue;
    counted[t] = true;
    if (std::find(e->aliases.begin(), e->aliases.end(), pc) ==
        e->aliases.end()) {
      e->aliases.push_back(pc);
    }
    if (e->aliases.size() - 1 >= profile_->btb_evict_threshold) {
      over_threshold = true;
    }
  }

  // Too many congruent branches share the entry: every entry under that
  // pressure is evicted and nothing is installed in its place.
  if (over_threshold) {
    for (int t = 0; t < n; ++t) {
      if (!counted[t]) continue;
      Cell& cell = tables_[t][slot(t, pc, h, ctx).index];
      cell.pressure = PressureRecord{cell.entry->tag, cell.entry->holds_target,
                                     cell.entry->aliases,
                                     cell.entry->pressure_history};
      cell.entry.reset();
    }
    r.evicted = true;
    return r;
  }

  int provider = -1;
  for (int t = n - 1; t >= 0; --t) {
    if (hits[t] && (t > 0 || profile_->fallback_to_t0)) {
      provider = t;
      break;
    }
  }
  // A T0 entry trained under another history only lends its prediction; the
  // branch does not own it and leaves its state alone.
  if (provider > 0 || (provider == 0 && counted[0])) {
    PredictorEntry& e = *hits[provider];
    if (e.holds_target) {
      e.target = actual.target;
    } else if (actual_taken) {
      e.counter = static_cast<std::uint8_t>(std::min(3, e.counter + 1));
    } else {
      e.counter = static_cast<std::uint8_t>(std::max(0, e.counter - 1));
    }
  }
  for (auto* e : hits) {
    if (e && actual_taken) e->seen_taken = true;
  }

  if (provider < 0) {
    if (!hits[0]) {
      allocate(0, kind, pc, h, actual, ctx);
      r.allocated.push_back(0);
    }
    if (!profile_->fallback_to_t0 && n > 1 && !hits[1]) {
      allocate(1, kind, pc, h, actual, ctx);
      r.allocated.push_back(1);
    }
  } else if (r.mispredicted && provider + 1 < n) {
    allocate(provider + 1, kind, pc, h, actual, ctx);
    r.allocated.push_back(provider + 1);
  }
  return r;
}

std::size_t PredictorState::evict_for_test(BranchKind kind, Addr pc,
                                           const HistoryValue& h,
                                           ContextId ctx) {
  std::size_t removed = 0;
  for (int t = 0; t < static_cast<int>(tables_.size()); ++t) {
    if (find(t, kind, pc, h, ctx)) {
      tables_[t][slot(t, pc, h, ctx).index].entry.reset();
      ++removed;
    }
  }
  return removed;
}

void PredictorState::flush() {
  for (auto& table : tables_) {
    for (auto& c : table) c = Cell{};
  }
}

std::size_t PredictorState::occupancy(int table) const {
  std::size_t n = 0;
  for (const auto& c : tables_[table]) n += c.entry.has_value();
  return n;
}

bool apply_flush(const MicroarchProfile& profile, MitigationEvent event,
                 PredictorState& predictor, BstTable* bst,
                 HistoryState& history) {
  const auto& m = profile.mitigations;
  switch (event) {
    case MitigationEvent::UserContextSwitch:
      if (!m.bpu_flush_on_context_switch) return false;
      predictor.flush();
      if (bst) bst->clear();
      return true;
    case MitigationEvent::PrivilegeSwitch:
      if (!m.bhb_clear_on_privilege_switch) return false;
      history.clear();
      return true;
  }
  return false;
}

}  // namespace bhsim
