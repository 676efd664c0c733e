#include <bhsim/profile.hpp>

#include <bhsim/config_text.hpp>

#include <algorithm>
#include <fstream>
#include <sstream>

namespace bhsim {

std::string_view to_string(HistoryKind kind) {
  return kind == HistoryKind::PurePhr ? "pure_phr" : "hybrid_bhb_phr";
}

unsigned MicroarchProfile::history_bits() const {
  const unsigned phr_bits = phr_capacity * phr_footprint_bits;
  if (!hybrid()) return phr_bits;
  return std::max(phr_bits, bhb_capacity);
}

bool MicroarchProfile::is_assumed(std::string_view field) const {
  return std::find(assumed.begin(), assumed.end(), field) != assumed.end();
}

void validate(const MicroarchProfile& p) {
  if (p.name.empty()) throw ConfigError("name", "must not be empty");
  if (p.phr_capacity == 0) throw ConfigError("phr_capacity", "must be > 0");
  if (p.phr_footprint_bits == 0 || p.phr_footprint_bits > 16) {
    throw ConfigError("phr_footprint_bits", "must be in [1, 16]");
  }
  if (p.phr_source_bits.hi < p.phr_source_bits.lo ||
      p.phr_source_bits.hi >= 64) {
    throw ConfigError("phr_source_bits", "expected hi:lo with hi >= lo");
  }
  if (p.phr_source_bits.width() != p.phr_footprint_bits) {
    throw ConfigError("phr_source_bits",
                      "width must equal phr_footprint_bits");
  }
  if (p.hybrid()) {
    if (p.bhb_capacity == 0) {
      throw ConfigError("bhb_capacity", "must be > 0 for hybrid_bhb_phr");
    }
    if (p.bhb_capacity > 64) {
      throw ConfigError("bhb_capacity", "must be <= 64");
    }
    if (p.phr_capacity * p.phr_footprint_bits > 64) {
      throw ConfigError("phr_capacity",
                        "hybrid PHR must fit in 64 bits (capacity * footprint)");
    }
  }
  if (p.bst_index_hi <= p.bst_index_lo) {
    throw ConfigError("bst_index_hi", "must be greater than bst_index_lo");
  }
  if (p.bst_index_hi >= 32) {
    throw ConfigError("bst_index_hi", "must be < 32");
  }
  const unsigned index_width = p.bst_index_hi - p.bst_index_lo + 1;
  if ((1ULL << index_width) != p.bst_entries) {
    throw ConfigError("bst_entries",
                      "must equal 2^(bst_index_hi - bst_index_lo + 1) = " +
                          std::to_string(1ULL << index_width));
  }
  if (p.btb_evict_threshold < 1) {
    throw ConfigError("btb_evict_threshold", "must be >= 1");
  }
  const auto& lengths = p.tage_history_lengths;
  if (lengths.empty() || lengths.front() != 0) {
    throw ConfigError("tage_history_lengths", "first element must be 0 (T0)");
  }
  for (std::size_t i = 1; i < lengths.size(); ++i) {
    if (lengths[i] <= lengths[i - 1]) {
      throw ConfigError("tage_history_lengths", "must be strictly increasing");
    }
  }
  if (lengths.back() > p.history_bits()) {
    throw ConfigError("tage_history_lengths",
                      "longest table exceeds history width of " +
                          std::to_string(p.history_bits()) + " bits");
  }
  if (p.speculation_window_budget <= 0) {
    throw ConfigError("speculation_window_budget", "must be > 0");
  }
}

namespace {

BitRange parse_range(const std::string& field, const config::Value& v) {
  auto colon = v.text.find(':');
  if (colon == std::string::npos) {
    throw ConfigError(field, "expected 'hi:lo', got '" + v.text + "'", v.line);
  }
  BitRange r;
  r.hi = static_cast<unsigned>(
      config::parse_uint(field, {v.text.substr(0, colon), v.line}));
  r.lo = static_cast<unsigned>(
      config::parse_uint(field, {v.text.substr(colon + 1), v.line}));
  return r;
}

}  // namespace

MicroarchProfile load_profile(std::string_view text) {
  auto doc = config::parse(text);
  MicroarchProfile p;

  auto req = [&](std::string_view key) -> config::Value {
    const std::string full = "profile." + std::string(key);
    auto v = doc.take(full);
    if (!v) throw ConfigError(std::string(key), "missing required field");
    return *v;
  };
  auto u = [&](std::string_view key) {
    return static_cast<unsigned>(config::parse_uint(std::string(key), req(key)));
  };
  auto b = [&](std::string_view key) {
    return config::parse_bool(std::string(key), req(key));
  };

  p.name = req("name").text;
  {
    auto v = req("history_kind");
    if (v.text == "pure_phr") {
      p.history_kind = HistoryKind::PurePhr;
    } else if (v.text == "hybrid_bhb_phr") {
      p.history_kind = HistoryKind::HybridBhbPhr;
    } else {
      throw ConfigError("history_kind",
                        "expected pure_phr or hybrid_bhb_phr, got '" + v.text +
                            "'",
                        v.line);
    }
  }
  p.phr_capacity = u("phr_capacity");
  p.bhb_capacity = u("bhb_capacity");
  p.phr_footprint_bits = u("phr_footprint_bits");
  p.phr_source_bits = parse_range("phr_source_bits", req("phr_source_bits"));
  p.conditional_updates_phr = b("conditional_updates_phr");
  p.bias_free_enabled = b("bias_free_enabled");
  p.bst_entries = u("bst_entries");
  p.bst_index_lo = u("bst_index_lo");
  p.bst_index_hi = u("bst_index_hi");
  p.btb_evict_threshold = u("btb_evict_threshold");
  for (auto len : config::parse_uint_list("tage_history_lengths",
                                          req("tage_history_lengths"))) {
    p.tage_history_lengths.push_back(static_cast<unsigned>(len));
  }
  p.fallback_to_t0 = b("fallback_to_t0");
  p.pc_indexed_pressure = b("pc_indexed_pressure");
  p.speculation_window_budget =
      static_cast<long>(config::parse_uint("speculation_window_budget",
                                           req("speculation_window_budget")));
  if (auto v = doc.take("profile.assumed")) {
    p.assumed = config::parse_string_list(*v);
  }

  auto opt_b = [&](std::string_view key, bool& out) {
    const std::string full = "profile.mitigations." + std::string(key);
    if (auto v = doc.take(full)) out = config::parse_bool(full, *v);
  };
  opt_b("bhb_clear_on_privilege_switch",
        p.mitigations.bhb_clear_on_privilege_switch);
  opt_b("bpu_flush_on_context_switch",
        p.mitigations.bpu_flush_on_context_switch);
  opt_b("context_tagging", p.mitigations.context_tagging);

  doc.reject_unknown("");
  validate(p);
  return p;
}

std::string serialize_profile(const MicroarchProfile& p) {
  std::ostringstream os;
  std::vector<std::uint64_t> lengths(p.tage_history_lengths.begin(),
                                     p.tage_history_lengths.end());
  os << "[profile]\n"
     << "name = " << p.name << "\n"
     << "history_kind = " << to_string(p.history_kind) << "\n"
     << "phr_capacity = " << p.phr_capacity << "\n"
     << "bhb_capacity = " << p.bhb_capacity << "\n"
     << "phr_footprint_bits = " << p.phr_footprint_bits << "\n"
     << "phr_source_bits = " << p.phr_source_bits.hi << ":"
     << p.phr_source_bits.lo << "\n"
     << "conditional_updates_phr = "
     << config::format_bool(p.conditional_updates_phr) << "\n"
     << "bias_free_enabled = " << config::format_bool(p.bias_free_enabled)
     << "\n"
     << "bst_entries = " << p.bst_entries << "\n"
     << "bst_index_lo = " << p.bst_index_lo << "\n"
     << "bst_index_hi = " << p.bst_index_hi << "\n"
     << "btb_evict_threshold = " << p.btb_evict_threshold << "\n"
     << "tage_history_lengths = " << config::format_list(lengths, false)
     << "\n"
     << "fallback_to_t0 = " << config::format_bool(p.fallback_to_t0) << "\n"
     << "pc_indexed_pressure = " << config::format_bool(p.pc_indexed_pressure)
     << "\n"
     << "speculation_window_budget = " << p.speculation_window_budget << "\n";
  if (!p.assumed.empty()) {
    os << "assumed = ";
    for (std::size_t i = 0; i < p.assumed.size(); ++i) {
      os << (i ? ", " : "") << p.assumed[i];
    }
    os << "\n";
  }
  os << "\n[profile.mitigations]\n"
     << "bhb_clear_on_privilege_switch = "
     << config::format_bool(p.mitigations.bhb_clear_on_privilege_switch)
     << "\n"
     << "bpu_flush_on_context_switch = "
     << config::format_bool(p.mitigations.bpu_flush_on_context_switch) << "\n"
     << "context_tagging = "
     << config::format_bool(p.mitigations.context_tagging) << "\n";
  return os.str();
}

namespace {

MicroarchProfile make_pure_phr(std::string name, unsigned capacity,
                               unsigned threshold,
                               std::vector<unsigned> lengths) {
  MicroarchProfile p;
  p.name = std::move(name);
  p.history_kind = HistoryKind::PurePhr;
  p.phr_capacity = capacity;
  p.bhb_capacity = 0;
  p.phr_footprint_bits = 4;
  p.phr_source_bits = {5, 2};
  p.conditional_updates_phr = true;
  p.bias_free_enabled = false;
  p.bst_entries = 4096;
  p.bst_index_lo = 4;
  p.bst_index_hi = 15;
  p.btb_evict_threshold = threshold;
  p.tage_history_lengths = std::move(lengths);
  p.fallback_to_t0 = true;
  p.pc_indexed_pressure = false;
  p.speculation_window_budget = 128;
  p.assumed = {"phr_footprint_bits", "phr_source_bits", "bst_entries",
               "bst_index_lo", "bst_index_hi", "tage_history_lengths",
               "speculation_window_budget"};
  return p;
}

MicroarchProfile make_hybrid(std::string name) {
  MicroarchProfile p;
  p.name = std::move(name);
  p.history_kind = HistoryKind::HybridBhbPhr;
  p.phr_capacity = 4;
  p.bhb_capacity = 8;
  p.phr_footprint_bits = 2;
  p.phr_source_bits = {5, 4};
  p.bst_entries = 4096;
  p.bst_index_lo = 4;
  p.bst_index_hi = 15;
  p.tage_history_lengths = {0, 4, 8};
  p.speculation_window_budget = 128;
  return p;
}

std::vector<MicroarchProfile> make_builtins() {
  std::vector<MicroarchProfile> out;

  auto a72 = make_hybrid("cortex-a72");
  a72.conditional_updates_phr = false;
  a72.bias_free_enabled = true;
  a72.btb_evict_threshold = 2;
  a72.fallback_to_t0 = false;
  a72.assumed = {"tage_history_lengths", "speculation_window_budget"};
  out.push_back(a72);

  out.push_back(make_pure_phr("cortex-a76", 48, 4, {0, 16, 64, 192}));
  out.back().assumed.push_back("pc_indexed_pressure");

  auto a78 = make_pure_phr("cortex-a78ae", 64, 5, {0, 16, 64, 256});
  a78.pc_indexed_pressure = true;
  out.push_back(a78);

  auto zen4 = make_hybrid("zen4");
  zen4.conditional_updates_phr = true;
  zen4.bias_free_enabled = false;
  zen4.btb_evict_threshold = 16;
  zen4.fallback_to_t0 = true;
  zen4.assumed = {"phr_capacity", "bhb_capacity", "phr_footprint_bits",
                  "phr_source_bits", "bst_entries", "bst_index_lo",
                  "bst_index_hi", "tage_history_lengths",
                  "speculation_window_budget"};
  out.push_back(zen4);

  // No reverting behaviour was observed on the Intel cores; the threshold is
  // set beyond any congruent-alias count exercised by the scenarios.
  auto gracemont = make_pure_phr("gracemont", 64, 64, {0, 16, 64, 256});
  gracemont.assumed.insert(gracemont.assumed.end(),
                           {"history_kind", "phr_capacity",
                            "btb_evict_threshold"});
  out.push_back(gracemont);

  auto redwood = make_pure_phr("redwood-cove", 194, 64, {0, 16, 64, 776});
  redwood.assumed.insert(redwood.assumed.end(),
                         {"history_kind", "phr_capacity",
                          "btb_evict_threshold"});
  out.push_back(redwood);

  for (const auto& p : out) validate(p);
  return out;
}

}  // namespace

const std::vector<MicroarchProfile>& builtin_profiles() {
  static const std::vector<MicroarchProfile> profiles = make_builtins();
  return profiles;
}

std::optional<MicroarchProfile> find_builtin_profile(std::string_view name) {
  for (const auto& p : builtin_profiles()) {
    if (p.name == name) return p;
  }
  return std::nullopt;
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("", "cannot open '" + path + "'");
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

MicroarchProfile resolve_profile(std::string_view ref) {
  if (auto p = find_builtin_profile(ref)) return *p;
  return load_profile(read_text_file(std::string(ref)));
}

}  // namespace bhsim
