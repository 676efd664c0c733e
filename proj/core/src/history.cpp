#include <bhsim/history.hpp>

#include <algorithm>
#include <cstdio>

namespace bhsim {

namespace {

std::uint64_t mix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

HistoryValue::HistoryValue(unsigned width)
    : width_(width), words_((width + 63) / 64, 0) {}

bool HistoryValue::bit(unsigned i) const {
  if (i >= width_) return false;
  return (words_[i / 64] >> (i % 64)) & 1;
}

void HistoryValue::xor_bits(unsigned offset, std::uint64_t bits,
                            unsigned count) {
  for (unsigned i = 0; i < count; ++i) {
    const unsigned pos = offset + i;
    if (pos >= width_) break;
    if ((bits >> i) & 1) words_[pos / 64] ^= 1ULL << (pos % 64);
  }
}

void HistoryValue::shift_in(std::uint64_t bits, unsigned count,
                            unsigned keep) {
  if (count > 0) {
    for (std::size_t w = words_.size(); w-- > 0;) {
      std::uint64_t hi = count == 64 ? 0 : words_[w] << count;
      if (w > 0) hi |= count == 64 ? words_[w - 1] : words_[w - 1] >> (64 - count);
      words_[w] = hi;
    }
    if (!words_.empty()) {
      words_[0] |= count == 64 ? bits : bits & ((1ULL << count) - 1);
    }
  }
  keep = std::min(keep, width_);
  for (std::size_t w = 0; w < words_.size(); ++w) {
    const unsigned lo = static_cast<unsigned>(w * 64);
    if (lo >= keep) {
      words_[w] = 0;
    } else if (keep - lo < 64) {
      words_[w] &= (1ULL << (keep - lo)) - 1;
    }
  }
}

HistoryValue& HistoryValue::operator^=(const HistoryValue& other) {
  for (std::size_t w = 0; w < words_.size() && w < other.words_.size(); ++w) {
    words_[w] ^= other.words_[w];
  }
  return *this;
}

std::uint64_t HistoryValue::prefix_hash(unsigned bits) const {
  std::uint64_t h = mix(bits);
  for (unsigned w = 0; w * 64 < bits && w < words_.size(); ++w) {
    std::uint64_t word = words_[w];
    const unsigned remaining = bits - w * 64;
    if (remaining < 64) word &= (1ULL << remaining) - 1;
    h = mix(h ^ word);
  }
  return h;
}

std::string HistoryValue::hex() const {
  const unsigned nibbles = width_ == 0 ? 1 : (width_ + 3) / 4;
  std::string out = "0x";
  for (unsigned n = nibbles; n-- > 0;) {
    unsigned v = 0;
    for (unsigned b = 0; b < 4; ++b) v |= unsigned(bit(n * 4 + b)) << b;
    out += "0123456789abcdef"[v];
  }
  return out;
}

unsigned footprint_of(const MicroarchProfile& profile, Addr pc, Addr target) {
  const unsigned mask = (1u << profile.phr_footprint_bits) - 1;
  auto fp = static_cast<unsigned>(profile.phr_source_bits.extract(target));
  if (!profile.hybrid()) fp ^= static_cast<unsigned>((pc >> 2) & 0x3);
  return fp & mask;
}

HistoryState::HistoryState(const MicroarchProfile& profile)
    : profile_(&profile),
      phr_value_(profile.history_bits()),
      bhb_value_(profile.history_bits()) {}

void HistoryState::push_footprint(unsigned footprint) {
  const unsigned w = profile_->phr_footprint_bits;
  const unsigned fp = footprint & ((1u << w) - 1);
  phr_.push_back(fp);
  while (phr_.size() > profile_->phr_capacity) phr_.pop_front();
  phr_value_.shift_in(fp, w, profile_->phr_capacity * w);
}

void HistoryState::push_outcome(bool taken) {
  if (profile_->bhb_capacity == 0) return;
  bhb_.push_back(taken);
  while (bhb_.size() > profile_->bhb_capacity) bhb_.pop_front();
  bhb_value_.shift_in(taken ? 1 : 0, 1, profile_->bhb_capacity);
}

void HistoryState::update(const HistoryUpdate& u, bool speculative) {
  if (speculative && stack_.empty()) {
    throw ContractViolation("speculative history update without checkpoint");
  }
  const auto& p = *profile_;
  const bool skip_biased =
      p.bias_free_enabled && u.kind == BranchKind::Indirect && u.biased;

  if (!p.hybrid()) {
    if (u.kind == BranchKind::Svc || !u.taken || skip_biased) return;
    push_footprint(footprint_of(p, u.pc, u.target));
    return;
  }

  switch (u.kind) {
    case BranchKind::Conditional:
      if (u.recorded || u.taken) push_outcome(u.taken);
      if (p.conditional_updates_phr && u.taken) {
        push_footprint(footprint_of(p, u.pc, u.target));
      }
      break;
    case BranchKind::Indirect:
      if (u.taken && !skip_biased) {
        push_footprint(footprint_of(p, u.pc, u.target));
      }
      break;
    case BranchKind::DirectUnconditional:
    case BranchKind::Call:
      if (p.conditional_updates_phr) {
        push_footprint(footprint_of(p, u.pc, u.target));
      }
      break;
    case BranchKind::Return:
    case BranchKind::Svc:
      break;
  }
}

HistoryValue HistoryState::read() const {
  HistoryValue v = phr_value_;
  if (!bhb_.empty()) v ^= bhb_value_;
  return v;
}

CheckpointToken HistoryState::checkpoint() {
  stack_.push_back({next_id_, phr_, bhb_, phr_value_, bhb_value_});
  return {next_id_++};
}

void HistoryState::rollback(CheckpointToken token) {
  if (stack_.empty() || stack_.back().id != token.id) {
    throw ContractViolation("rollback with stale or out-of-order token");
  }
  phr_ = std::move(stack_.back().phr);
  bhb_ = std::move(stack_.back().bhb);
  phr_value_ = std::move(stack_.back().phr_value);
  bhb_value_ = std::move(stack_.back().bhb_value);
  stack_.pop_back();
}

void HistoryState::commit(CheckpointToken token) {
  if (stack_.empty() || stack_.back().id != token.id) {
    throw ContractViolation("commit with stale or out-of-order token");
  }
  stack_.pop_back();
}

void HistoryState::clear() {
  phr_.clear();
  bhb_.clear();
  phr_value_ = HistoryValue(profile_->history_bits());
  bhb_value_ = HistoryValue(profile_->history_bits());
}

}  // namespace bhsim
