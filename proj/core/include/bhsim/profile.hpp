#pragma once

#include <bhsim/types.hpp>

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace bhsim {

enum class HistoryKind {
  PurePhr,       // unified path history of taken-branch footprints
  HybridBhbPhr,  // canonical 1-bit BHB and a footprint PHR, XOR'd on read
};

std::string_view to_string(HistoryKind kind);

struct MitigationSet {
  bool bhb_clear_on_privilege_switch = false;
  bool bpu_flush_on_context_switch = false;
  bool context_tagging = false;

  bool operator==(const MitigationSet&) const = default;
};

/// Inclusive bit range [hi:lo] of an address.
struct BitRange {
  unsigned hi = 0;
  unsigned lo = 0;

  unsigned width() const { return hi - lo + 1; }
  std::uint64_t extract(std::uint64_t value) const {
    const unsigned w = width();
    const std::uint64_t mask = w >= 64 ? ~0ULL : ((1ULL << w) - 1);
    return (value >> lo) & mask;
  }

  bool operator==(const BitRange&) const = default;
};

/// Every tunable parameter of one modeled core. Immutable once loaded.
struct MicroarchProfile {
  std::string name;
  HistoryKind history_kind = HistoryKind::PurePhr;
  unsigned phr_capacity = 0;
  unsigned bhb_capacity = 0;
  unsigned phr_footprint_bits = 0;
  BitRange phr_source_bits;
  bool conditional_updates_phr = false;
  bool bias_free_enabled = false;
  unsigned bst_entries = 0;
  unsigned bst_index_lo = 0;
  unsigned bst_index_hi = 0;
  unsigned btb_evict_threshold = 1;
  std::vector<unsigned> tage_history_lengths;
  bool fallback_to_t0 = true;
  // Congruent aliases add eviction pressure on the PC-indexed base table
  // even when their history differs from the resident entry's.
  bool pc_indexed_pressure = false;
  long speculation_window_budget = 0;
  MitigationSet mitigations;
  // Field names whose values are extrapolated rather than measured.
  std::vector<std::string> assumed;

  bool operator==(const MicroarchProfile&) const = default;

  bool hybrid() const { return history_kind == HistoryKind::HybridBhbPhr; }
  /// Width in bits of the value produced by reading the global history.
  unsigned history_bits() const;
  bool is_assumed(std::string_view field) const;
};

/// Throws ConfigError naming the first violated field.
void validate(const MicroarchProfile& profile);

/// Parses and validates the `[profile]` document format.
MicroarchProfile load_profile(std::string_view text);

std::string serialize_profile(const MicroarchProfile& profile);

/// The six built-in cores: cortex-a72, cortex-a76, cortex-a78ae, zen4,
/// gracemont, redwood-cove.
const std::vector<MicroarchProfile>& builtin_profiles();

std::optional<MicroarchProfile> find_builtin_profile(std::string_view name);

/// Resolves a built-in name, or else reads and parses the file at `ref`.
MicroarchProfile resolve_profile(std::string_view ref);

std::string read_text_file(const std::string& path);

}  // namespace bhsim
