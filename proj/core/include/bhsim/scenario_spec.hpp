#pragma once

#include <bhsim/profile.hpp>
#include <bhsim/types.hpp>

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace bhsim {

enum class ScenarioId {
  BiasScope,
  SpectreBse,
  SpectreBhsMistrain,
  SpectreBhsEvict,
  Chimera,
  ThresholdSweep,
  WindowSweep,
};

/// Canonical names: biasscope, spectre-bse, spectre-bhs-mistrain,
/// spectre-bhs-evict, chimera, threshold-sweep, window-sweep.
std::string_view to_string(ScenarioId id);
std::optional<ScenarioId> parse_scenario_id(std::string_view name);
const std::vector<ScenarioId>& all_scenario_ids();
bool is_sweep(ScenarioId id);

/// How the scenario crosses from the training flows into the attack flow.
enum class Crossing { None, UserSwitch, Syscall };
std::string_view to_string(Crossing c);

struct ScenarioParams {
  unsigned training_rounds = 4;
  bool perform_eviction = true;
  Crossing crossing = Crossing::None;
  bool barrier = false;
  unsigned prefix_nops = 0;
  unsigned mistrain_snippets = 1;
  std::uint8_t secret = 0xB2;
  bool shuffle = true;
  unsigned k_max = 0;  // threshold sweep; 0 = max(8, threshold + 2)
  std::vector<std::uint64_t> prefix_values;  // window sweep; empty = default
  bool speculation = true;

  bool operator==(const ScenarioParams&) const = default;
};

/// Declarative description of one experiment. Addresses are grouped by
/// role; the roles each scenario needs are listed by `required_roles`.
struct ScenarioSpec {
  ScenarioId id = ScenarioId::SpectreBse;
  std::string profile;
  unsigned trials = 1000;
  double noise = 0.0;
  std::uint64_t seed = 0x5eed'b4a5'0000'0001ULL;
  std::map<std::string, std::vector<Addr>> addresses;
  ScenarioParams params;

  bool operator==(const ScenarioSpec&) const = default;

  const std::vector<Addr>& role(const std::string& name) const;
  Addr one(const std::string& name, std::size_t i = 0) const;
  bool has(const std::string& name) const;
};

/// Address roles that hold branch PCs (checked for distinctness).
const std::vector<std::string>& branch_roles();
std::vector<std::string> required_roles(ScenarioId id,
                                        const MicroarchProfile& profile);

/// Default addresses for `id` laid out for `profile`'s footprint function.
ScenarioSpec default_scenario(ScenarioId id, const MicroarchProfile& profile);

/// Fills planner addresses when none were given, then checks completeness
/// and invariants. Throws ConfigError naming the offending field.
ScenarioSpec validate_scenario(ScenarioSpec spec,
                               const MicroarchProfile& profile);

/// `[scenario]`, `[scenario.addresses]`, `[scenario.params]` document.
ScenarioSpec load_scenario(std::string_view text);
std::string serialize_scenario(const ScenarioSpec& spec);

/// Built-in scenario name or a path to a scenario file.
ScenarioSpec resolve_scenario(std::string_view ref);

}  // namespace bhsim
