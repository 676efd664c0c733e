#include <bhsim/bst.hpp>

namespace bhsim {

BstTable::BstTable(const MicroarchProfile& profile)
    : profile_(&profile),
      mask_(profile.bst_entries - 1),
      slots_(profile.bst_entries) {}

std::uint32_t BstTable::index(Addr addr) const {
  return static_cast<std::uint32_t>(addr >> profile_->bst_index_lo) & mask_;
}

std::uint32_t BstTable::tag(Addr addr, ContextId ctx) const {
  std::uint32_t upper =
      static_cast<std::uint32_t>(addr) >> (profile_->bst_index_hi + 1);
  std::uint32_t t = 0;
  for (; upper != 0; upper >>= 12) t ^= upper & 0xFFF;
  t ^= index(addr) & 0xFFF;
  if (profile_->mitigations.context_tagging) t ^= (ctx * 0x9E5u) & 0xFFF;
  return t;
}

std::optional<BstEntry> BstTable::lookup(Addr addr, ContextId ctx) const {
  const auto& s = slots_[index(addr)];
  if (s && s->tag == tag(addr, ctx)) return s;
  return std::nullopt;
}

BiasVerdict BstTable::peek(Addr addr, BranchOutcome outcome,
                           ContextId ctx) const {
  auto rec = lookup(addr, ctx);
  if (!rec) return {true};
  if (rec->biased) return {rec->last_outcome == outcome};
  return {false};
}

BiasVerdict BstTable::classify_and_update(Addr addr, BranchOutcome outcome,
                                          ContextId ctx) {
  const BiasVerdict v = peek(addr, outcome, ctx);
  slots_[index(addr)] = BstEntry{tag(addr, ctx), outcome, v.biased};
  return v;
}

std::optional<BstEviction> BstTable::maybe_evict(BranchKind kind, Addr addr,
                                                 bool taken, ContextId ctx) {
  const bool triggers = kind == BranchKind::Indirect ||
                        (kind == BranchKind::Conditional && taken);
  if (!triggers) return std::nullopt;
  auto& s = slots_[index(addr)];
  if (!s || s->tag == tag(addr, ctx)) return std::nullopt;
  BstEviction ev{index(addr), *s};
  s.reset();
  return ev;
}

BiasVerdict BstTable::prime_nonbiased(Addr addr, BranchOutcome first,
                                      BranchOutcome second, ContextId ctx) {
  classify_and_update(addr, first, ctx);
  return classify_and_update(addr, second, ctx);
}

std::size_t BstTable::occupied() const {
  std::size_t n = 0;
  for (const auto& s : slots_) n += s.has_value();
  return n;
}

void BstTable::clear() {
  for (auto& s : slots_) s.reset();
}

}  // namespace bhsim
