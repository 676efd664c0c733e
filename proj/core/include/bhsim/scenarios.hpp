#pragma once

#include <bhsim/engine.hpp>
#include <bhsim/history.hpp>
#include <bhsim/profile.hpp>
#include <bhsim/scenario_spec.hpp>

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace bhsim {

enum class ResultStatus { Ok, StructuralFailure, Unsupported };
std::string_view to_string(ResultStatus s);

struct TrialRecord {
  unsigned trial = 0;
  bool success = false;
  std::optional<Addr> speculated;   // Bi_pred's speculated target, or the
                                    // speculative load address (Chimera)
  std::optional<Addr> architectural;
  bool history_collision = false;   // BSE: attack history equals F_A's
  std::uint8_t decoded = 0;         // BiasScope
  bool noise_injected = false;
  bool secret_committed = false;    // architectural read of the secret
};

struct ThresholdPoint {
  unsigned k = 0;
  bool init_taken = false;
  bool matching_history = true;
  bool predicted_taken = false;
};

struct WindowPoint {
  unsigned prefix_n = 0;
  bool leak_observed = false;
};

/// Bi_pred's history in F_A, in F_B, and in an F_A-shaped flow run after
/// Bx_prime's predictor entries were evicted.
struct NotRecordedProbe {
  HistoryValue flow_a;
  HistoryValue flow_b;
  HistoryValue after_eviction;
};

struct ChimeraChecks {
  bool shuffle_never_taken = true;
  bool t0_unchanged = true;
};

struct ScenarioResult {
  ScenarioId id = ScenarioId::SpectreBse;
  std::string profile;
  ResultStatus status = ResultStatus::Ok;
  std::string reason;
  std::uint64_t seed = 0;
  double noise = 0.0;
  unsigned trials = 0;
  unsigned successes = 0;
  double success_rate = 0.0;
  std::vector<TrialRecord> per_trial;

  // BiasScope
  std::uint8_t secret = 0;
  std::array<unsigned, 8> bit_errors{};  // index 0 = most significant bit
  double error_rate = 0.0;               // over all decoded bits

  std::vector<ThresholdPoint> threshold_curve;
  std::vector<WindowPoint> window_curve;
  bool window_barrier = false;

  std::optional<NotRecordedProbe> not_recorded;
  std::optional<ChimeraChecks> chimera;
  bool architectural_safety = true;
};

/// Runs `spec` (validated against `profile`) with trials spread over
/// `jobs` threads; the result does not depend on `jobs`.
ScenarioResult run_scenario(const ScenarioSpec& spec,
                            const MicroarchProfile& profile,
                            unsigned jobs = 1);

ScenarioResult run_biasscope(const ScenarioSpec& spec,
                             const MicroarchProfile& profile,
                             unsigned jobs = 1);
ScenarioResult run_spectre_bse(const ScenarioSpec& spec,
                               const MicroarchProfile& profile,
                               unsigned jobs = 1);
ScenarioResult run_spectre_bhs(const ScenarioSpec& spec,
                               const MicroarchProfile& profile,
                               bool evict_variant, unsigned jobs = 1);
ScenarioResult run_chimera(const ScenarioSpec& spec,
                           const MicroarchProfile& profile,
                           unsigned jobs = 1);
ScenarioResult run_threshold_sweep(const ScenarioSpec& spec,
                                   const MicroarchProfile& profile);
ScenarioResult run_window_sweep(const ScenarioSpec& spec,
                                const MicroarchProfile& profile);

/// Predicted direction of a victim conditional after 32 training runs with
/// `init_taken` and one run of each of `k` taken congruent aliases.
bool threshold_probe(const ScenarioSpec& spec, const MicroarchProfile& profile,
                     unsigned k, bool init_taken, bool matching_history);

/// The named flows of trial 0, in execution order, for inspection.
std::vector<std::pair<std::string, TraceProgram>> scenario_flows(
    const ScenarioSpec& spec, const MicroarchProfile& profile);

/// Per-trial seed derived from the scenario seed.
std::uint64_t trial_seed(std::uint64_t seed, unsigned trial);

}  // namespace bhsim
