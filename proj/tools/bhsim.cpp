#include <bhsim/profile.hpp>
#include <bhsim/report.hpp>
#include <bhsim/scenario_spec.hpp>
#include <bhsim/scenarios.hpp>
#include <bhsim/trace.hpp>

#include <CLI11.hpp>

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>

namespace {

using namespace bhsim;

constexpr int kExitOk = 0;
constexpr int kExitScenarioFailure = 1;
constexpr int kExitConfig = 2;
constexpr int kExitIo = 3;

struct Manifest {
  std::string profile;
  std::string scenario;
  std::optional<unsigned> trials;
  std::optional<std::string> seed;
  std::optional<double> noise;
  std::string out;
  unsigned jobs = 1;
  std::string format = "both";
  std::optional<std::string> crossing;
  bool barrier = false;
  std::vector<std::string> mitigations;
  bool brief = false;
};

std::string default_out_dir() {
  if (const char* env = std::getenv("BHSIM_OUT_DIR"); env && *env) return env;
  return "bhsim-out";
}

std::uint64_t parse_seed(const std::string& text) {
  try {
    std::size_t used = 0;
    const auto v = std::stoull(text, &used, 0);
    if (used == text.size()) return v;
  } catch (const std::exception&) {
  }
  throw ConfigError("--seed", "not an integer: " + text);
}

void apply_mitigation(MicroarchProfile& p, const std::string& name) {
  if (name == "bpu-flush") {
    p.mitigations.bpu_flush_on_context_switch = true;
  } else if (name == "bhb-clear") {
    p.mitigations.bhb_clear_on_privilege_switch = true;
  } else if (name == "context-tagging") {
    p.mitigations.context_tagging = true;
  } else {
    throw ConfigError("--mitigate", "unknown mitigation " + name);
  }
}

Crossing parse_crossing(const std::string& name) {
  for (Crossing c : {Crossing::None, Crossing::UserSwitch, Crossing::Syscall}) {
    if (to_string(c) == name) return c;
  }
  throw ConfigError("--crossing",
                    "expected none, user or syscall, got " + name);
}

// Scenario from the manifest with command-line overrides applied, and the
// profile it runs on.
std::pair<ScenarioSpec, MicroarchProfile> resolve(const Manifest& m) {
  ScenarioSpec spec = resolve_scenario(m.scenario);
  const std::string profile_ref = m.profile.empty() ? spec.profile : m.profile;
  if (profile_ref.empty()) {
    throw ConfigError("--profile",
                      "no profile given and the scenario names none");
  }
  MicroarchProfile profile = resolve_profile(profile_ref);
  for (const auto& name : m.mitigations) apply_mitigation(profile, name);
  validate(profile);
  spec.profile = profile.name;
  if (m.trials) spec.trials = *m.trials;
  if (m.seed) spec.seed = parse_seed(*m.seed);
  if (m.noise) spec.noise = *m.noise;
  if (m.crossing) spec.params.crossing = parse_crossing(*m.crossing);
  if (m.barrier) spec.params.barrier = true;
  return {std::move(spec), std::move(profile)};
}

ReportFormat parse_format(const std::string& f) {
  if (f == "json") return ReportFormat::Json;
  if (f == "csv") return ReportFormat::Csv;
  return ReportFormat::Both;
}

int run(const Manifest& m, bool sweep_only) {
  auto [spec, profile] = resolve(m);
  if (sweep_only && !is_sweep(spec.id)) {
    throw ConfigError("--scenario", std::string(to_string(spec.id)) +
                                        " is not a sweep scenario");
  }
  const ScenarioResult result = run_scenario(spec, profile, m.jobs);
  const std::string dir = m.out.empty() ? default_out_dir() : m.out;
  ReportOptions opts;
  opts.include_trials = !m.brief;
  emit_report(result, parse_format(m.format), dir, opts);
  std::cout << summary_text(result);
  return result.status == ResultStatus::Ok ? kExitOk : kExitScenarioFailure;
}

int list_profiles(bool verbose) {
  for (const auto& p : builtin_profiles()) {
    std::cout << p.name;
    if (verbose) {
      std::cout << "  " << to_string(p.history_kind)
                << " threshold=" << p.btb_evict_threshold
                << (p.bias_free_enabled ? " bias-free" : "")
                << (p.fallback_to_t0 ? " t0-fallback" : "");
    }
    std::cout << "\n";
  }
  return kExitOk;
}

int dump_trace(const Manifest& m, const std::string& state_path) {
  auto [spec, profile] = resolve(m);
  spec = validate_scenario(spec, profile);
  const auto flows = scenario_flows(spec, profile);
  std::ostream* out = &std::cout;
  std::ofstream file;
  if (!m.out.empty()) {
    file.open(m.out, std::ios::binary | std::ios::trunc);
    if (!file) throw ReportError(m.out, "cannot open for writing");
    out = &file;
  }
  for (const auto& [name, trace] : flows) {
    *out << "# flow " << name << "\n" << format_trace(trace) << "\n";
  }
  if (!state_path.empty()) {
    Simulator sim(profile, EngineOptions{spec.params.speculation});
    for (const auto& flow : flows) sim.run(flow.second);
    std::ofstream st(state_path, std::ios::binary | std::ios::trunc);
    if (!st) throw ReportError(state_path, "cannot open for writing");
    st << state_json(sim);
  }
  return kExitOk;
}

void add_common(CLI::App* cmd, Manifest& m, bool scenario_required) {
  cmd->add_option("--profile,-p", m.profile,
                  "Built-in profile name or profile file");
  auto* sc = cmd->add_option("--scenario,-s", m.scenario,
                             "Built-in scenario name or scenario file");
  if (scenario_required) sc->required();
  cmd->add_option("--crossing", m.crossing,
                  "Context crossing in the attack loop: none, user, syscall");
  cmd->add_flag("--barrier", m.barrier,
                "Place a speculation barrier before the victim branch");
  cmd->add_option("--mitigate", m.mitigations,
                  "Enable a mitigation: bpu-flush, bhb-clear, context-tagging");
}

void add_run_options(CLI::App* cmd, Manifest& m) {
  cmd->add_option("--trials,-n", m.trials, "Trial count override");
  cmd->add_option("--seed", m.seed, "Seed override (decimal or 0x hex)");
  cmd->add_option("--noise", m.noise, "Noise probability per trial")
      ->check(CLI::Range(0.0, 1.0));
  cmd->add_option("--out,-o", m.out,
                  "Output directory (default $BHSIM_OUT_DIR or ./bhsim-out)");
  cmd->add_option("--jobs,-j", m.jobs, "Worker threads")
      ->check(CLI::Range(1u, 1024u));
  cmd->add_option("--format", m.format, "Report files to write")
      ->check(CLI::IsMember({"json", "csv", "both"}));
  cmd->add_flag("--brief", m.brief, "Omit per-trial records from result.json");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Branch history speculation simulator"};
  app.require_subcommand(1);

  Manifest m;
  auto* run_cmd = app.add_subcommand("run", "Run one scenario");
  add_common(run_cmd, m, true);
  add_run_options(run_cmd, m);

  auto* sweep_cmd = app.add_subcommand("sweep", "Run a threshold or window sweep");
  m.scenario = "threshold-sweep";
  add_common(sweep_cmd, m, false);
  add_run_options(sweep_cmd, m);

  bool verbose = false;
  auto* list_cmd = app.add_subcommand("list-profiles", "List built-in profiles");
  list_cmd->add_flag("--verbose,-v", verbose, "Show key parameters");

  std::string state_path;
  auto* dump_cmd = app.add_subcommand("dump-trace",
                                      "Print the generated traces of trial 0");
  add_common(dump_cmd, m, true);
  dump_cmd->add_option("--out,-o", m.out, "Write traces to this file");
  dump_cmd->add_option("--state", state_path,
                       "Also write predictor/BST contents after the flows");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*run_cmd) return run(m, false);
    if (*sweep_cmd) return run(m, true);
    if (*list_cmd) return list_profiles(verbose);
    if (*dump_cmd) return dump_trace(m, state_path);
  } catch (const ConfigError& e) {
    std::cerr << "bhsim: config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const ReportError& e) {
    std::cerr << "bhsim: " << e.what() << "\n";
    return kExitIo;
  }
  return kExitOk;
}
