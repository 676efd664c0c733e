#pragma once

#include <bhsim/profile.hpp>
#include <bhsim/types.hpp>

#include <cstdint>
#include <deque>
#include <string>
#include <vector>

namespace bhsim {

/// Fixed-width bit vector read out of the global history. Bit 0 holds the
/// newest information.
class HistoryValue {
 public:
  HistoryValue() = default;
  explicit HistoryValue(unsigned width);

  unsigned width() const { return width_; }
  const std::vector<std::uint64_t>& words() const { return words_; }

  bool bit(unsigned i) const;
  /// XORs `bits` (width `count` <= 64) in at bit offset `offset`.
  void xor_bits(unsigned offset, std::uint64_t bits, unsigned count);
  /// Shifts left by `count` (<= 64), ORs `bits` into the vacated low bits
  /// and clears everything at or above bit `keep`.
  void shift_in(std::uint64_t bits, unsigned count, unsigned keep);
  HistoryValue& operator^=(const HistoryValue& other);
  /// Low 64 bits; convenient for narrow histories.
  std::uint64_t low64() const { return words_.empty() ? 0 : words_[0]; }

  /// Hash of the low `bits` bits; 0 bits hashes to a constant.
  std::uint64_t prefix_hash(unsigned bits) const;
  /// Most-significant digit first, width rounded up to whole nibbles.
  std::string hex() const;

  bool operator==(const HistoryValue&) const = default;

 private:
  unsigned width_ = 0;
  std::vector<std::uint64_t> words_;
};

/// Footprint of a taken branch. Hybrid: target bits in the profile's source
/// range. Pure PHR: target[5:2] XOR pc[3:2].
unsigned footprint_of(const MicroarchProfile& profile, Addr pc, Addr target);

struct HistoryUpdate {
  BranchKind kind = BranchKind::Conditional;
  Addr pc = 0;
  bool taken = false;
  Addr target = 0;      // next PC when taken
  bool biased = false;  // BST verdict; only consulted for indirects
  bool recorded = true; // conditional has been seen taken before (hybrid)
};

struct CheckpointToken {
  std::uint64_t id = 0;
};

class HistoryState {
 public:
  explicit HistoryState(const MicroarchProfile& profile);

  /// Speculative updates require an open checkpoint.
  void update(const HistoryUpdate& u, bool speculative);
  void push_footprint(unsigned footprint);
  void push_outcome(bool taken);

  HistoryValue read() const;

  CheckpointToken checkpoint();
  /// Restores the snapshot for `token`, which must be the innermost one.
  void rollback(CheckpointToken token);
  /// Drops the innermost checkpoint keeping the current state.
  void commit(CheckpointToken token);
  std::size_t open_checkpoints() const { return stack_.size(); }

  void clear();

  /// Oldest first.
  const std::deque<unsigned>& phr() const { return phr_; }
  const std::deque<bool>& bhb() const { return bhb_; }

  /// Compares history contents, ignoring checkpoints.
  bool same_contents(const HistoryState& other) const {
    return phr_ == other.phr_ && bhb_ == other.bhb_;
  }

 private:
  struct Snapshot {
    std::uint64_t id;
    std::deque<unsigned> phr;
    std::deque<bool> bhb;
    HistoryValue phr_value;
    HistoryValue bhb_value;
  };

  const MicroarchProfile* profile_;
  std::deque<unsigned> phr_;
  std::deque<bool> bhb_;
  // read() kept up to date incrementally.
  HistoryValue phr_value_;
  HistoryValue bhb_value_;
  std::vector<Snapshot> stack_;
  std::uint64_t next_id_ = 1;
};

}  // namespace bhsim
