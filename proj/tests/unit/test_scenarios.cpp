#include <bhsim/bst.hpp>
#include <bhsim/scenario_spec.hpp>
#include <bhsim/scenarios.hpp>

#include <doctest.h>

#include <set>

using namespace bhsim;

namespace {

MicroarchProfile builtin(const char* name) { return *find_builtin_profile(name); }

ScenarioSpec small(ScenarioId id, const MicroarchProfile& p, unsigned trials = 8) {
  auto s = default_scenario(id, p);
  s.trials = trials;
  return s;
}

}  // namespace

TEST_CASE("scenario names round trip") {
  for (ScenarioId id : all_scenario_ids()) {
    CHECK(parse_scenario_id(to_string(id)) == id);
  }
  CHECK_FALSE(parse_scenario_id("spectre-v1"));
  CHECK(is_sweep(ScenarioId::ThresholdSweep));
  CHECK(is_sweep(ScenarioId::WindowSweep));
  CHECK_FALSE(is_sweep(ScenarioId::Chimera));
}

TEST_CASE("planner output satisfies validation for every profile") {
  for (const auto& p : builtin_profiles()) {
    for (ScenarioId id : all_scenario_ids()) {
      CAPTURE(p.name);
      CAPTURE(to_string(id));
      const auto s = validate_scenario(default_scenario(id, p), p);
      for (const auto& role : required_roles(id, p)) CHECK(s.has(role));
    }
  }
}

TEST_CASE("eviction addresses share the BST index but not the tag") {
  const auto p = builtin("cortex-a72");
  const auto s = validate_scenario(default_scenario(ScenarioId::SpectreBse, p), p);
  BstTable t(p);
  for (std::size_t i = 0; i < s.role("b_ev").size(); ++i) {
    const Addr victim = s.one("b_ev", i);
    const Addr evictor = s.one("evictors", i);
    CHECK(t.index(victim) == t.index(evictor));
    CHECK(t.tag(victim) != t.tag(evictor));
  }
}

TEST_CASE("scenario files round trip and reject bad input") {
  const auto p = builtin("cortex-a76");
  auto s = validate_scenario(default_scenario(ScenarioId::SpectreBhsMistrain, p), p);
  s.params.barrier = true;
  s.noise = 0.05;
  CHECK(load_scenario(serialize_scenario(s)) == s);

  auto missing = s;
  missing.addresses.erase("bi_pred");
  CHECK_THROWS_AS(validate_scenario(missing, p), ConfigError);

  auto dup = s;
  dup.addresses["bx_prime"] = {s.one("bi_pred")};
  CHECK_THROWS_AS(validate_scenario(dup, p), ConfigError);

  CHECK_THROWS_AS(load_scenario("[scenario]\nid = nope\n"), ConfigError);
  CHECK_THROWS_AS(resolve_scenario("/nonexistent.scn"), ConfigError);
  CHECK(resolve_scenario("chimera").id == ScenarioId::Chimera);
}

TEST_CASE("trial seeds are distinct and stable") {
  std::set<std::uint64_t> seen;
  for (unsigned t = 0; t < 1000; ++t) seen.insert(trial_seed(42, t));
  CHECK(seen.size() == 1000);
  CHECK(trial_seed(42, 7) == trial_seed(42, 7));
  CHECK(trial_seed(42, 7) != trial_seed(43, 7));
}

TEST_CASE("results do not depend on the worker count") {
  const auto p = builtin("cortex-a72");
  auto s = small(ScenarioId::BiasScope, p, 40);
  s.noise = 0.05;
  const auto a = run_scenario(s, p, 1);
  const auto b = run_scenario(s, p, 4);
  CHECK(a.successes == b.successes);
  CHECK(a.bit_errors == b.bit_errors);
  REQUIRE(a.per_trial.size() == b.per_trial.size());
  for (std::size_t i = 0; i < a.per_trial.size(); ++i) {
    CHECK(a.per_trial[i].decoded == b.per_trial[i].decoded);
    CHECK(a.per_trial[i].noise_injected == b.per_trial[i].noise_injected);
  }
}

TEST_CASE("status per profile capability") {
  const auto a72 = builtin("cortex-a72");
  const auto a76 = builtin("cortex-a76");
  CHECK(run_scenario(small(ScenarioId::Chimera, a72), a72).status ==
        ResultStatus::StructuralFailure);
  CHECK(run_scenario(small(ScenarioId::BiasScope, a76), a76).status ==
        ResultStatus::Unsupported);
  CHECK(run_scenario(small(ScenarioId::SpectreBse, a76), a76).status ==
        ResultStatus::StructuralFailure);
  const auto evict = run_scenario(small(ScenarioId::SpectreBhsEvict, a72), a72);
  CHECK(evict.status == ResultStatus::Unsupported);
  CHECK(evict.not_recorded);
}

TEST_CASE("flows of trial 0 are valid traces") {
  for (const auto& p : builtin_profiles()) {
    for (ScenarioId id : all_scenario_ids()) {
      CAPTURE(p.name);
      CAPTURE(to_string(id));
      const auto s = validate_scenario(default_scenario(id, p), p);
      const auto flows = scenario_flows(s, p);
      CHECK_FALSE(flows.empty());
      for (const auto& f : flows) CHECK_NOTHROW(validate_trace(f.second));
    }
  }
}

TEST_CASE("no scenario reads the secret architecturally") {
  for (const auto& p : builtin_profiles()) {
    for (ScenarioId id : all_scenario_ids()) {
      if (is_sweep(id)) continue;
      CAPTURE(p.name);
      CAPTURE(to_string(id));
      const auto r = run_scenario(small(id, p, 4), p);
      CHECK(r.architectural_safety);
    }
  }
}
