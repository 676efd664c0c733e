#include <bhsim/scenarios.hpp>

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <thread>

namespace bhsim {

std::string_view to_string(ResultStatus s) {
  switch (s) {
    case ResultStatus::Ok: return "ok";
    case ResultStatus::StructuralFailure: return "structural_failure";
    case ResultStatus::Unsupported: return "unsupported";
  }
  return "?";
}

std::uint64_t trial_seed(std::uint64_t seed, unsigned trial) {
  std::uint64_t x = seed ^ (0x9e3779b97f4a7c15ULL * (trial + 1ULL));
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

namespace {

constexpr int kParams = 1;  // register holding Chimera's params pointer
constexpr unsigned kVictimTraining = 32;
constexpr std::uint8_t kBhbPattern = 0xB2;

// A conditional whose taken target is the very next instruction lands on
// this label either way.
Addr fallthrough(Addr pc) { return pc + 0x20; }
// Branches placed inside a labeled block.
Addr block_pc(Addr label, unsigned i = 0) { return label + 8 + 4 * i; }

struct Flow {
  std::string name;
  TraceProgram trace;
};

/// Trace fragments shared by every scenario.
class Fragments {
 public:
  Fragments(const ScenarioSpec& s, const MicroarchProfile& p) : s_(s), p_(p) {}

  // Fills the canonical BHB with a fixed pattern (hybrid only).
  void bhb_pattern(TraceBuilder& b, bool all_taken = false) const {
    if (!p_.hybrid() || !s_.has("bh_cond")) return;
    const auto& conds = s_.role("bh_cond");
    for (std::size_t j = 0; j < conds.size(); ++j) {
      const bool bit = all_taken || ((kBhbPattern >> (7 - j % 8)) & 1);
      b.cond(conds[j], bit, fallthrough(conds[j]))
          .label(fallthrough(conds[j]));
    }
  }

  // Sets BHB (hybrid) and PHR to a fixed value.
  void populate(TraceBuilder& b, bool alt_targets = false,
                bool all_taken = false) const {
    bhb_pattern(b, all_taken);
    const auto& bh = s_.role("bh");
    const auto& targets = s_.role(alt_targets ? "bh_alt" : "bh_targets");
    for (std::size_t i = 0; i < bh.size(); ++i) {
      if (p_.hybrid()) {
        b.indirect(bh[i], targets[i]);
      } else {
        b.jump(bh[i], targets[i]);
      }
      b.label(targets[i]);
    }
  }

  // One-time preparation: records every BHB conditional as taken and makes
  // the populate indirects non-biased.
  std::optional<Flow> prime() const {
    if (!p_.hybrid()) return std::nullopt;
    TraceBuilder b;
    populate(b, true, true);
    populate(b);
    b.halt();
    return Flow{"prime", b.build()};
  }

  // A single conditional, preceded by populate, optionally shifted onto a
  // different history first.
  TraceProgram lone_conditional(Addr pc, bool taken, bool shift = false) const {
    TraceBuilder b;
    populate(b);
    if (shift) {
      const Addr sh = s_.one("history_shifter");
      b.cond(sh, true, fallthrough(sh)).label(fallthrough(sh));
    }
    b.cond(pc, taken, fallthrough(pc)).label(fallthrough(pc)).halt();
    return b.build();
  }

  static void context(TraceBuilder& b, Crossing c, ContextId ctx) {
    if (c == Crossing::UserSwitch) b.context_switch(ctx, SwitchKind::User);
    if (c == Crossing::Syscall) b.context_switch(ctx, SwitchKind::Syscall);
  }

 private:
  const ScenarioSpec& s_;
  const MicroarchProfile& p_;
};

/// Fans trials out over `jobs` threads; results are stored by index.
template <class Fn>
std::vector<TrialRecord> run_trials(unsigned trials, unsigned jobs, Fn fn) {
  std::vector<TrialRecord> out(trials);
  jobs = std::max(1u, std::min(jobs, trials));
  std::atomic<unsigned> next{0};
  std::exception_ptr error;
  std::mutex error_mu;
  auto worker = [&] {
    for (unsigned t = next++; t < trials; t = next++) {
      try {
        out[t] = fn(t);
        out[t].trial = t;
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mu);
        if (!error) error = std::current_exception();
        next = trials;
      }
    }
  };
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned j = 0; j < jobs; ++j) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  if (error) std::rethrow_exception(error);
  return out;
}

ScenarioResult base_result(const ScenarioSpec& spec,
                           const MicroarchProfile& profile) {
  ScenarioResult r;
  r.id = spec.id;
  r.profile = profile.name;
  r.seed = spec.seed;
  r.noise = spec.noise;
  r.trials = spec.trials;
  return r;
}

void tally(ScenarioResult& r) {
  r.successes = 0;
  for (const auto& t : r.per_trial) {
    r.successes += t.success;
    if (t.secret_committed) r.architectural_safety = false;
  }
  r.trials = static_cast<unsigned>(r.per_trial.size());
  r.success_rate = r.trials ? static_cast<double>(r.successes) / r.trials : 0.0;
}

// Target the frontend speculated for `pc`'s window, if it opened one.
std::optional<Addr> speculated_target(const ExecutionReport& rep, Addr pc) {
  for (const auto& b : rep.branches) {
    if (b.pc == pc && b.opened_window && b.prediction.valid &&
        b.prediction.outcome.kind == BranchOutcome::Kind::Target) {
      return b.prediction.outcome.target;
    }
  }
  return std::nullopt;
}

std::optional<Addr> architectural_target(const ExecutionReport& rep, Addr pc) {
  auto c = rep.committed(pc);
  if (c.empty()) return std::nullopt;
  return c.back()->actual.target;
}

std::optional<HistoryValue> committed_history(const ExecutionReport& rep,
                                              Addr pc) {
  auto c = rep.committed(pc);
  if (c.empty()) return std::nullopt;
  return c.back()->history;
}

EngineOptions engine_options(const ScenarioSpec& spec) {
  EngineOptions o;
  o.speculation = spec.params.speculation;
  return o;
}

}  // namespace

// ---------------------------------------------------------------- Spectre-BSE

namespace {

struct BseFlows {
  std::vector<Flow> flows;
  bool noise = false;
};

TraceProgram bse_flow(const ScenarioSpec& s, const MicroarchProfile& p,
                      bool flow_b, bool attack) {
  Fragments f(s, p);
  TraceBuilder b;
  if (attack) {
    Fragments::context(b, s.params.crossing, 1);
    b.flush(s.one("ptr_line")).flush(s.one("leak_line"));
  }
  f.bhb_pattern(b);
  const auto& bh = s.role("bh");
  const auto& targets = s.role(flow_b ? "bh_targets_b" : "bh_targets");
  for (std::size_t i = 0; i < bh.size(); ++i) {
    b.indirect(bh[i], targets[i]).label(targets[i]);
  }
  const Addr t_leak = s.one("t_leak");
  const Addr t_safe = s.one("t_safe");
  const Addr done = s.one("done");
  b.indirect(s.one("bi_pred"), flow_b ? t_safe : t_leak, {s.one("ptr_line")})
      .label(t_leak)
      .load(s.one("leak_line"))
      .jump(block_pc(t_leak), done)
      .label(t_safe)
      .nop()
      .jump(block_pc(t_safe), done)
      .label(done);
  if (attack) b.probe(s.one("leak_line"));
  b.halt();
  return b.build();
}

BseFlows bse_plan(const ScenarioSpec& s, const MicroarchProfile& p,
                  std::mt19937_64& rng) {
  BseFlows out;
  Fragments f(s, p);
  if (p.hybrid()) {
    TraceBuilder b;
    f.bhb_pattern(b, true);
    b.halt();
    out.flows.push_back({"prime", b.build()});
  }
  for (unsigned r = 0; r < s.params.training_rounds; ++r) {
    out.flows.push_back({"train_a", bse_flow(s, p, false, false)});
    out.flows.push_back({"train_b", bse_flow(s, p, true, false)});
  }
  out.flows.push_back({"train_a", bse_flow(s, p, false, false)});
  if (s.params.perform_eviction) {
    TraceBuilder b;
    for (Addr e : s.role("evictors")) {
      b.cond(e, true, fallthrough(e)).label(fallthrough(e));
    }
    b.halt();
    out.flows.push_back({"evict", b.build()});
  }
  Flow attack{"attack", bse_flow(s, p, true, true)};
  out.noise = inject_noise(attack.trace, s.noise, rng, s.role("b_ev"));
  out.flows.push_back(std::move(attack));
  return out;
}

TrialRecord bse_trial(const ScenarioSpec& s, const MicroarchProfile& p,
                      unsigned trial) {
  std::mt19937_64 rng(trial_seed(s.seed, trial));
  auto plan = bse_plan(s, p, rng);
  Simulator sim(p, engine_options(s));
  const Addr bi_pred = s.one("bi_pred");
  std::optional<HistoryValue> flow_a;
  TrialRecord t;
  t.noise_injected = plan.noise;
  for (const auto& flow : plan.flows) {
    auto rep = sim.run(flow.trace);
    if (flow.name == "train_a") flow_a = committed_history(rep, bi_pred);
    if (flow.name != "attack") continue;
    const auto attack_h = committed_history(rep, bi_pred);
    t.history_collision = flow_a && attack_h && *flow_a == *attack_h;
    t.speculated = speculated_target(rep, bi_pred);
    t.architectural = architectural_target(rep, bi_pred);
    const bool hit =
        rep.probe_latency(s.one("leak_line")) == CacheModel::kHitLatency;
    t.success = hit && t.architectural == s.one("t_safe");
    t.secret_committed = rep.committed_load(s.one("leak_line"));
  }
  return t;
}

}  // namespace

ScenarioResult run_spectre_bse(const ScenarioSpec& spec_in,
                               const MicroarchProfile& profile,
                               unsigned jobs) {
  const ScenarioSpec spec = validate_scenario(spec_in, profile);
  ScenarioResult r = base_result(spec, profile);
  r.per_trial = run_trials(spec.trials, jobs, [&](unsigned t) {
    return bse_trial(spec, profile, t);
  });
  tally(r);
  const bool any_collision =
      std::any_of(r.per_trial.begin(), r.per_trial.end(),
                  [](const TrialRecord& t) { return t.history_collision; });
  if (!any_collision) {
    r.status = ResultStatus::StructuralFailure;
    r.reason = profile.bias_free_enabled
                   ? "no trial produced a history collision for Bi_pred"
                   : "profile has no bias-free filtering; evicting B_ev "
                     "does not drop its footprint";
  }
  return r;
}

// ------------------------------------------------------------------ BiasScope

namespace {

constexpr unsigned kChannels = 8;

bool secret_bit(std::uint8_t secret, unsigned j) {
  return (secret >> (7 - j)) & 1;
}

TraceProgram biasscope_flow(const ScenarioSpec& s, const MicroarchProfile& p,
                            unsigned j, bool flow_b, bool observe) {
  Fragments f(s, p);
  TraceBuilder b;
  const Addr line_primary = s.one("line_primary", j);
  const Addr line_alt = s.one("line_alt", j);
  if (observe) {
    b.flush(s.one("ptr_line")).flush(line_primary).flush(line_alt);
  }
  f.populate(b);
  if (flow_b) {
    const Addr t = s.one("bx_prime_targets", j);
    b.indirect(s.one("bx_prime", j), t).label(t);
  }
  const Addr t_primary = s.one("t_primary", j);
  const Addr t_alt = s.one("t_alt", j);
  const Addr done = s.one("done");
  b.indirect(s.one("bi_pred", j), flow_b ? t_alt : t_primary,
             {s.one("ptr_line")})
      .label(t_primary)
      .load(line_primary)
      .jump(block_pc(t_primary), done)
      .label(t_alt)
      .load(line_alt)
      .jump(block_pc(t_alt), done)
      .label(done)
      .halt();
  return b.build();
}

struct BiasScopePlan {
  std::vector<Flow> flows;
  std::array<bool, kChannels> noise{};
};

BiasScopePlan biasscope_plan(const ScenarioSpec& s, const MicroarchProfile& p,
                             std::mt19937_64& rng) {
  BiasScopePlan out;
  Fragments f(s, p);
  {
    TraceBuilder b;
    if (p.hybrid()) {
      f.populate(b, true, true);
      f.populate(b);
    }
    for (unsigned j = 0; j < kChannels; ++j) {
      const Addr alt = s.one("bx_prime_alt", j);
      const Addr tgt = s.one("bx_prime_targets", j);
      b.indirect(s.one("bx_prime", j), alt).label(alt);
      b.indirect(s.one("bx_prime", j), tgt).label(tgt);
    }
    b.halt();
    out.flows.push_back({"prime", b.build()});
  }
  for (unsigned r = 0; r < s.params.training_rounds; ++r) {
    for (unsigned j = 0; j < kChannels; ++j) {
      out.flows.push_back({"train_a", biasscope_flow(s, p, j, false, false)});
      out.flows.push_back({"train_b", biasscope_flow(s, p, j, true, false)});
    }
  }

  TraceBuilder victim;
  Fragments::context(victim, s.params.crossing, 1);
  for (unsigned j = 0; j < kChannels; ++j) {
    TraceBuilder seg;
    const Addr sender = s.one("bx_evict", j);
    seg.cond(sender, secret_bit(s.params.secret, j), fallthrough(sender))
        .label(fallthrough(sender));
    TraceProgram prog = seg.build();
    out.noise[j] = inject_noise(prog, s.noise, rng, {s.one("bx_prime", j)});
    victim.append(prog);
  }
  Fragments::context(victim, s.params.crossing, 0);
  victim.halt();
  out.flows.push_back({"victim", victim.build()});

  for (unsigned j = 0; j < kChannels; ++j) {
    out.flows.push_back({"observe_a", biasscope_flow(s, p, j, false, true)});
    out.flows.push_back({"observe_b", biasscope_flow(s, p, j, true, true)});
  }
  return out;
}

TrialRecord biasscope_trial(const ScenarioSpec& s, const MicroarchProfile& p,
                            unsigned trial) {
  std::mt19937_64 rng(trial_seed(s.seed, trial));
  auto plan = biasscope_plan(s, p, rng);
  Simulator sim(p, engine_options(s));
  TrialRecord t;
  unsigned channel = 0;
  for (const auto& flow : plan.flows) {
    auto rep = sim.run(flow.trace);
    if (flow.name != "observe_b") continue;
    const bool one = rep.speculative_load(s.one("line_primary", channel));
    if (one) t.decoded |= static_cast<std::uint8_t>(0x80u >> channel);
    ++channel;
  }
  t.noise_injected = std::any_of(plan.noise.begin(), plan.noise.end(),
                                 [](bool b) { return b; });
  t.success = t.decoded == s.params.secret;
  return t;
}

}  // namespace

ScenarioResult run_biasscope(const ScenarioSpec& spec_in,
                             const MicroarchProfile& profile, unsigned jobs) {
  const ScenarioSpec spec = validate_scenario(spec_in, profile);
  ScenarioResult r = base_result(spec, profile);
  r.secret = spec.params.secret;
  if (!profile.bias_free_enabled) {
    r.status = ResultStatus::Unsupported;
    r.reason = "profile has no bias-free branch status table";
    return r;
  }
  r.per_trial = run_trials(spec.trials, jobs, [&](unsigned t) {
    return biasscope_trial(spec, profile, t);
  });
  tally(r);
  unsigned errors = 0;
  for (const auto& t : r.per_trial) {
    for (unsigned j = 0; j < kChannels; ++j) {
      if (secret_bit(t.decoded, j) != secret_bit(r.secret, j)) {
        ++r.bit_errors[j];
        ++errors;
      }
    }
  }
  r.error_rate = r.trials ? static_cast<double>(errors) / (8.0 * r.trials) : 0.0;
  return r;
}

// ---------------------------------------------------------------- Spectre-BHS

namespace {

TraceProgram bhs_flow(const ScenarioSpec& s, const MicroarchProfile& p,
                      bool flow_b, bool attack, bool barrier) {
  Fragments f(s, p);
  TraceBuilder b;
  const Addr flag = s.one("flag_line");
  const Addr ptr = s.one("ptr_line");
  const Addr leak = s.one("leak_line");
  if (attack) b.flush(flag).flush(ptr).flush(leak);
  f.populate(b);
  const Addr prime = s.one("bx_prime");
  b.cond(prime, flow_b, fallthrough(prime), {flag}).label(fallthrough(prime));
  if (barrier) b.barrier();
  const Addr t_leak = s.one("t_leak");
  const Addr t_safe = s.one("t_safe");
  const Addr done = s.one("done");
  b.indirect(s.one("bi_pred"), flow_b ? t_safe : t_leak, {ptr})
      .label(t_leak)
      .nop(s.params.prefix_nops)
      .load(leak)
      .jump(block_pc(t_leak), done)
      .label(t_safe)
      .nop()
      .jump(block_pc(t_safe), done)
      .label(done);
  if (attack) b.probe(leak);
  b.halt();
  return b.build();
}

struct BhsPlan {
  std::vector<Flow> setup;  // preparation, training, mistrain/evict
  Flow attack;
  bool noise = false;
};

BhsPlan bhs_plan(const ScenarioSpec& s, const MicroarchProfile& p,
                 bool evict_variant, std::mt19937_64& rng) {
  BhsPlan out;
  Fragments f(s, p);
  if (auto pr = f.prime()) out.setup.push_back(*pr);
  const bool barrier = s.params.barrier;
  for (unsigned r = 0; r < s.params.training_rounds; ++r) {
    out.setup.push_back({"train_a", bhs_flow(s, p, false, false, barrier)});
    out.setup.push_back({"train_b", bhs_flow(s, p, true, false, barrier)});
  }
  const auto& aliases = s.role("aliases");
  const unsigned n = evict_variant ? p.btb_evict_threshold
                                   : s.params.mistrain_snippets;
  for (unsigned k = 0; k < n && k < aliases.size(); ++k) {
    out.setup.push_back({evict_variant ? "evict" : "mistrain",
                         f.lone_conditional(aliases[k], evict_variant)});
  }
  out.attack = {"attack", bhs_flow(s, p, true, true, barrier)};
  out.noise = inject_noise(out.attack.trace, s.noise, rng, {s.one("bx_prime")});
  return out;
}

struct BhsTrial {
  TrialRecord record;
  std::optional<NotRecordedProbe> not_recorded;
};

BhsTrial bhs_trial(const ScenarioSpec& s, const MicroarchProfile& p,
                   bool evict_variant, unsigned trial, bool probe_nr) {
  std::mt19937_64 rng(trial_seed(s.seed, trial));
  auto plan = bhs_plan(s, p, evict_variant, rng);
  Simulator sim(p, engine_options(s));
  const Addr bi_pred = s.one("bi_pred");
  BhsTrial out;
  std::optional<HistoryValue> ha, hb;
  for (const auto& flow : plan.setup) {
    auto rep = sim.run(flow.trace);
    if (flow.name == "train_a") ha = committed_history(rep, bi_pred);
    if (flow.name == "train_b") hb = committed_history(rep, bi_pred);
  }
  if (probe_nr && ha && hb) {
    // Replica of the post-eviction state running the not-taken flow with a
    // barrier, so Bi_pred binds to committed history only.
    Simulator replica = sim;
    auto rep = replica.run(bhs_flow(s, p, false, false, true));
    if (auto h = committed_history(rep, bi_pred)) {
      out.not_recorded = NotRecordedProbe{*ha, *hb, *h};
    }
  }
  auto rep = sim.run(plan.attack.trace);
  auto& t = out.record;
  t.noise_injected = plan.noise;
  t.speculated = speculated_target(rep, bi_pred);
  t.architectural = architectural_target(rep, bi_pred);
  const Addr leak = s.one("leak_line");
  const bool hit = rep.probe_latency(leak) == CacheModel::kHitLatency;
  t.success = rep.speculative_load(leak) && hit &&
              t.architectural == s.one("t_safe");
  t.secret_committed = rep.committed_load(leak);
  return out;
}

}  // namespace

ScenarioResult run_spectre_bhs(const ScenarioSpec& spec_in,
                               const MicroarchProfile& profile,
                               bool evict_variant, unsigned jobs) {
  ScenarioSpec adjusted = spec_in;
  adjusted.id = evict_variant ? ScenarioId::SpectreBhsEvict
                              : ScenarioId::SpectreBhsMistrain;
  const ScenarioSpec spec = validate_scenario(adjusted, profile);
  ScenarioResult r = base_result(spec, profile);
  const bool unsupported = evict_variant && profile.hybrid();
  if (unsupported) {
    r.not_recorded = bhs_trial(spec, profile, true, 0, true).not_recorded;
  }
  r.per_trial = run_trials(spec.trials, jobs, [&](unsigned t) {
    return bhs_trial(spec, profile, evict_variant, t, false).record;
  });
  tally(r);
  if (unsupported) {
    r.status = ResultStatus::Unsupported;
    r.reason =
        "evicting a previously taken conditional leaves it in the "
        "not-recorded state on a canonical BHB, so the omitted outcome does "
        "not reproduce F_A's history";
  }
  return r;
}

// ---------------------------------------------------------------- Window sweep

namespace {

std::vector<std::uint64_t> default_prefixes(long budget) {
  const auto b = static_cast<std::uint64_t>(budget);
  std::vector<std::uint64_t> v = {0, 1, 50, 100, b - 1, b, b + 1,
                                  b + b / 2, 2 * b};
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
  return v;
}

}  // namespace

ScenarioResult run_window_sweep(const ScenarioSpec& spec_in,
                                const MicroarchProfile& profile) {
  const ScenarioSpec spec = validate_scenario(spec_in, profile);
  ScenarioResult r = base_result(spec, profile);
  r.window_barrier = spec.params.barrier;
  // The evict form needs a path history; canonical-BHB cores fall back to
  // the mistrain form, which opens the same window.
  const bool evict = !profile.hybrid();
  auto prefixes = spec.params.prefix_values;
  if (prefixes.empty()) prefixes = default_prefixes(profile.speculation_window_budget);
  for (auto n : prefixes) {
    ScenarioSpec point = spec;
    point.params.prefix_nops = static_cast<unsigned>(n);
    const auto t = bhs_trial(point, profile, evict, 0, false).record;
    r.window_curve.push_back({static_cast<unsigned>(n), t.success});
    if (t.secret_committed) r.architectural_safety = false;
  }
  r.trials = static_cast<unsigned>(r.window_curve.size());
  r.successes = static_cast<unsigned>(
      std::count_if(r.window_curve.begin(), r.window_curve.end(),
                    [](const WindowPoint& w) { return w.leak_observed; }));
  r.success_rate = r.trials ? double(r.successes) / r.trials : 0.0;
  return r;
}

// -------------------------------------------------------------------- Chimera

namespace {

enum class ChimeraFlow { TrainA, TrainB, Attack };

struct ChimeraOutcomes {
  bool l2, l3, l5, l7, l8, l10;
};

ChimeraOutcomes chimera_outcomes(ChimeraFlow flow, bool shuffle) {
  switch (flow) {
    case ChimeraFlow::TrainA: return {false, true, true, false, false, true};
    case ChimeraFlow::TrainB: return {true, false, false, false, true, false};
    case ChimeraFlow::Attack: return {false, false, false, shuffle, true, true};
  }
  return {};
}

TraceProgram chimera_flow(const ScenarioSpec& s, const MicroarchProfile& p,
                          ChimeraFlow flow) {
  Fragments f(s, p);
  const auto o = chimera_outcomes(flow, s.params.shuffle);
  const auto& br = s.role("chimera_branches");  // L2 L3 L5 L8 L10
  const auto& lb = s.role("chimera_labels");    // L4 L5 L7 L8 L10 END
  const auto& fl = s.role("flag_lines");        // take_sc set_ptr esc shuffle
  const Addr take_sc = fl[0], set_ptr = fl[1], esc = fl[2], shuffle = fl[3];

  TraceBuilder b;
  if (flow == ChimeraFlow::Attack) b.flush(set_ptr).flush(esc);
  f.populate(b);
  b.mov(kParams, s.one("legit"))
      .cond(br[0], o.l2, lb[3], {take_sc})
      .cond(br[1], o.l3, lb[0], {set_ptr})
      .jump(s.one("chimera_jump"), lb[1])
      .label(lb[0])
      .mov(kParams, s.one("secret"))
      .label(lb[1])
      .cond(br[2], o.l5, lb[2], {set_ptr, esc})
      .halt()
      .label(lb[2])
      .cond(s.one("shuffle_branch"), o.l7, lb[3], {shuffle})
      .nop()
      .label(lb[3])
      .cond(br[3], o.l8, lb[4], {esc})
      .halt()
      .label(lb[4])
      .cond(br[4], o.l10, lb[5], {set_ptr})
      .load_reg(kParams)
      .label(lb[5])
      .halt();
  return b.build();
}

std::vector<Flow> chimera_plan(const ScenarioSpec& s,
                               const MicroarchProfile& p) {
  std::vector<Flow> out;
  Fragments f(s, p);
  {
    TraceBuilder warm;
    if (p.hybrid()) {
      f.populate(warm, true, true);
      f.populate(warm);
    }
    for (Addr a : s.role("flag_lines")) warm.load(a);
    warm.halt();
    out.push_back({"prime", warm.build()});
  }
  for (unsigned r = 0; r < s.params.training_rounds; ++r) {
    out.push_back({"train_b", chimera_flow(s, p, ChimeraFlow::TrainB)});
  }
  for (unsigned r = 0; r < s.params.training_rounds; ++r) {
    out.push_back({"train_a", chimera_flow(s, p, ChimeraFlow::TrainA)});
  }
  out.push_back({"attack", chimera_flow(s, p, ChimeraFlow::Attack)});
  return out;
}

struct ChimeraTrial {
  TrialRecord record;
  ChimeraChecks checks;
};

std::optional<PredictorEntry> t0_entry(const PredictorState& pred,
                                       const MicroarchProfile& p, Addr pc) {
  const HistoryValue any(p.history_bits());
  if (const auto* e = pred.find(0, BranchKind::Conditional, pc, any)) return *e;
  return std::nullopt;
}

ChimeraTrial chimera_trial(const ScenarioSpec& s, const MicroarchProfile& p,
                           unsigned trial) {
  std::mt19937_64 rng(trial_seed(s.seed, trial));
  auto flows = chimera_plan(s, p);
  inject_noise(flows.back().trace, s.noise, rng, {s.one("shuffle_branch")});
  Simulator sim(p, engine_options(s));
  const Addr secret = s.one("secret");
  const Addr l8 = s.one("chimera_branches", 3);
  const Addr l10 = s.one("chimera_branches", 4);
  ChimeraTrial out;
  auto& t = out.record;
  for (const auto& flow : flows) {
    std::optional<PredictorEntry> pre8, pre10;
    const bool attack = flow.name == "attack";
    if (attack) {
      pre8 = t0_entry(sim.predictor(), p, l8);
      pre10 = t0_entry(sim.predictor(), p, l10);
    }
    auto rep = sim.run(flow.trace);
    if (rep.committed_load(secret)) t.secret_committed = true;
    if (!attack) continue;
    t.success = rep.speculative_load(secret);
    for (const auto& l : rep.loads) {
      if (l.speculative && (line_of(l.addr) == line_of(secret) ||
                            line_of(l.addr) == line_of(s.one("legit")))) {
        t.speculated = l.addr;
        break;
      }
    }
    out.checks.t0_unchanged = pre8 == t0_entry(sim.predictor(), p, l8) &&
                              pre10 == t0_entry(sim.predictor(), p, l10);
  }
  const Addr l7 = s.one("shuffle_branch");
  sim.predictor().for_each_entry(
      [&](int, std::uint32_t, const PredictorEntry& e) {
        const bool is_l7 = std::find(e.aliases.begin(), e.aliases.end(),
                                     l7) != e.aliases.end();
        if (is_l7 && e.seen_taken) out.checks.shuffle_never_taken = false;
      });
  return out;
}

}  // namespace

ScenarioResult run_chimera(const ScenarioSpec& spec_in,
                           const MicroarchProfile& profile, unsigned jobs) {
  const ScenarioSpec spec = validate_scenario(spec_in, profile);
  ScenarioResult r = base_result(spec, profile);
  std::vector<ChimeraChecks> checks(spec.trials);
  r.per_trial = run_trials(spec.trials, jobs, [&](unsigned t) {
    auto res = chimera_trial(spec, profile, t);
    checks[t] = res.checks;
    return res.record;
  });
  tally(r);
  ChimeraChecks all;
  for (const auto& c : checks) {
    all.shuffle_never_taken = all.shuffle_never_taken && c.shuffle_never_taken;
    all.t0_unchanged = all.t0_unchanged && c.t0_unchanged;
  }
  r.chimera = all;
  if (!profile.fallback_to_t0) {
    r.status = ResultStatus::StructuralFailure;
    r.reason = "profile has no T0 fallback; lines 8 and 10 get no prediction "
               "under the shuffled history";
  }
  return r;
}

// ------------------------------------------------------------ Threshold sweep

namespace {

std::vector<Flow> threshold_plan(const ScenarioSpec& s,
                                 const MicroarchProfile& p, unsigned k,
                                 bool init_taken, bool matching) {
  Fragments f(s, p);
  std::vector<Flow> out;
  if (auto pr = f.prime()) out.push_back(*pr);
  const Addr victim = s.one("victim");
  for (unsigned i = 0; i < kVictimTraining; ++i) {
    out.push_back({"train", f.lone_conditional(victim, init_taken)});
  }
  const auto& aliases = s.role("aliases");
  for (unsigned i = 0; i < k && i < aliases.size(); ++i) {
    out.push_back({"mistrain", f.lone_conditional(aliases[i], true, !matching)});
  }
  out.push_back({"victim", f.lone_conditional(victim, init_taken)});
  return out;
}

}  // namespace

bool threshold_probe(const ScenarioSpec& spec, const MicroarchProfile& profile,
                     unsigned k, bool init_taken, bool matching_history) {
  Simulator sim(profile, engine_options(spec));
  const Addr victim = spec.one("victim");
  bool taken = false;
  for (const auto& flow :
       threshold_plan(spec, profile, k, init_taken, matching_history)) {
    auto rep = sim.run(flow.trace);
    if (flow.name == "victim") {
      taken = rep.committed(victim).back()->prediction.taken();
    }
  }
  return taken;
}

ScenarioResult run_threshold_sweep(const ScenarioSpec& spec_in,
                                   const MicroarchProfile& profile) {
  const ScenarioSpec spec = validate_scenario(spec_in, profile);
  ScenarioResult r = base_result(spec, profile);
  for (bool init_taken : {false, true}) {
    for (bool matching : {true, false}) {
      for (unsigned k = 0; k <= spec.params.k_max; ++k) {
        r.threshold_curve.push_back(
            {k, init_taken, matching,
             threshold_probe(spec, profile, k, init_taken, matching)});
      }
    }
  }
  r.trials = static_cast<unsigned>(r.threshold_curve.size());
  return r;
}

// ------------------------------------------------------------------ Dispatch

ScenarioResult run_scenario(const ScenarioSpec& spec,
                            const MicroarchProfile& profile, unsigned jobs) {
  switch (spec.id) {
    case ScenarioId::BiasScope: return run_biasscope(spec, profile, jobs);
    case ScenarioId::SpectreBse: return run_spectre_bse(spec, profile, jobs);
    case ScenarioId::SpectreBhsMistrain:
      return run_spectre_bhs(spec, profile, false, jobs);
    case ScenarioId::SpectreBhsEvict:
      return run_spectre_bhs(spec, profile, true, jobs);
    case ScenarioId::Chimera: return run_chimera(spec, profile, jobs);
    case ScenarioId::ThresholdSweep:
      return run_threshold_sweep(spec, profile);
    case ScenarioId::WindowSweep: return run_window_sweep(spec, profile);
  }
  throw ConfigError("id", "unknown scenario");
}

std::vector<std::pair<std::string, TraceProgram>> scenario_flows(
    const ScenarioSpec& spec_in, const MicroarchProfile& profile) {
  const ScenarioSpec spec = validate_scenario(spec_in, profile);
  std::mt19937_64 rng(trial_seed(spec.seed, 0));
  std::vector<Flow> flows;
  switch (spec.id) {
    case ScenarioId::BiasScope:
      flows = biasscope_plan(spec, profile, rng).flows;
      break;
    case ScenarioId::SpectreBse:
      flows = bse_plan(spec, profile, rng).flows;
      break;
    case ScenarioId::SpectreBhsMistrain:
    case ScenarioId::SpectreBhsEvict:
    case ScenarioId::WindowSweep: {
      const bool evict = spec.id == ScenarioId::SpectreBhsEvict ||
                         (spec.id == ScenarioId::WindowSweep && !profile.hybrid());
      auto plan = bhs_plan(spec, profile, evict, rng);
      flows = plan.setup;
      flows.push_back(plan.attack);
      break;
    }
    case ScenarioId::Chimera:
      flows = chimera_plan(spec, profile);
      break;
    case ScenarioId::ThresholdSweep:
      flows = threshold_plan(spec, profile, spec.params.k_max, false, true);
      break;
  }
  std::vector<std::pair<std::string, TraceProgram>> out;
  for (auto& f : flows) out.emplace_back(std::move(f.name), std::move(f.trace));
  return out;
}

}  // namespace bhsim
