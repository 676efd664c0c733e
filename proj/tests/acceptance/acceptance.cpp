// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails. Expected values come from oracles written here, not from
// the library under test.

#include <bhsim/bst.hpp>
#include <bhsim/history.hpp>
#include <bhsim/report.hpp>
#include <bhsim/scenarios.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <deque>
#include <functional>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

using namespace bhsim;

namespace {

struct Verdict {
  bool pass = true;
  std::ostringstream detail;

  void expect(bool ok, const std::string& what) {
    if (ok) return;
    if (pass) detail << what;
    else if (detail.tellp() < 400) detail << "; " << what;
    pass = false;
  }
};

MicroarchProfile builtin(const char* name) { return *find_builtin_profile(name); }

ScenarioSpec spec_for(ScenarioId id, const MicroarchProfile& p, unsigned trials) {
  auto s = default_scenario(id, p);
  s.trials = trials;
  return s;
}

std::string rate(const ScenarioResult& r) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s rate=%.4f", r.profile.c_str(), r.success_rate);
  return buf;
}

// ------------------------------------------------------------ 1

// Bias classification written directly from its definition, over an ideal
// table where every branch has its own record.
struct ReferenceBias {
  struct Rec {
    BranchOutcome outcome;
    bool biased;
  };
  std::map<Addr, Rec> recs;

  bool classify(Addr a, BranchOutcome o) {
    bool biased;
    auto it = recs.find(a);
    if (it == recs.end()) {
      biased = true;
    } else if (it->second.biased) {
      biased = it->second.outcome == o;
    } else {
      biased = false;
    }
    recs[a] = {o, biased};
    return biased;
  }
};

void bias_classification(Verdict& v) {
  const auto p = builtin("cortex-a72");
  const BranchOutcome T = BranchOutcome::taken(), N = BranchOutcome::not_taken();
  constexpr Addr a = 0x12340;

  // States: miss, biased-T, biased-NT, non-biased; each against T and NT.
  const std::vector<std::vector<BranchOutcome>> setups = {{}, {T}, {N}, {T, N}};
  const bool expected[4][2] = {{true, true}, {true, false}, {false, true},
                               {false, false}};
  int cases = 0;
  for (int s = 0; s < 4; ++s) {
    for (int o = 0; o < 2; ++o) {
      BstTable t(p);
      for (const auto& out : setups[s]) t.classify_and_update(a, out);
      const BranchOutcome outcome = o == 0 ? T : N;
      const bool got = t.classify_and_update(a, outcome).biased;
      const auto rec = t.lookup(a);
      v.expect(got == expected[s][o], "truth table state " + std::to_string(s));
      v.expect(rec && rec->last_outcome == outcome && rec->biased == got,
               "write-back state " + std::to_string(s));
      ++cases;
    }
  }

  std::mt19937_64 rng(0xB1A5);
  const Addr branches[] = {0x12340, 0x5670, 0xABC0, 0x40000, 0x1FFF0};
  const BranchOutcome outcomes[] = {T, N, BranchOutcome::to(0x1000),
                                    BranchOutcome::to(0x2000)};
  long steps = 0;
  for (int seq = 0; seq < 10000; ++seq) {
    BstTable t(p);
    ReferenceBias ref;
    const int len = 1 + static_cast<int>(rng() % 24);
    for (int i = 0; i < len; ++i, ++steps) {
      const Addr b = branches[rng() % 5];
      const auto o = outcomes[rng() % 4];
      if (t.classify_and_update(b, o).biased != ref.classify(b, o)) {
        v.expect(false, "sequence " + std::to_string(seq) + " diverged");
        return;
      }
    }
  }
  v.detail << cases << " cases, 10000 sequences, " << steps << " steps";
}

// ------------------------------------------------------------ 2

HistoryValue window_oracle(const MicroarchProfile& p,
                           const std::deque<unsigned>& fps,
                           const std::deque<bool>& outcomes) {
  HistoryValue h(p.history_bits());
  const std::size_t nf = std::min<std::size_t>(fps.size(), p.phr_capacity);
  for (std::size_t lane = 0; lane < nf; ++lane) {
    h.xor_bits(static_cast<unsigned>(lane * p.phr_footprint_bits),
               fps[fps.size() - 1 - lane], p.phr_footprint_bits);
  }
  const std::size_t nb = std::min<std::size_t>(outcomes.size(), p.bhb_capacity);
  for (std::size_t i = 0; i < nb; ++i) {
    h.xor_bits(static_cast<unsigned>(i), outcomes[outcomes.size() - 1 - i], 1);
  }
  return h;
}

void history_properties(Verdict& v) {
  std::mt19937_64 rng(0x415);
  for (const auto& p : builtin_profiles()) {
    HistoryState h(p);
    std::deque<unsigned> fps;
    std::deque<bool> outs;
    for (int i = 0; i < 2000; ++i) {
      if (p.hybrid() && (rng() & 1)) {
        const bool o = rng() & 1;
        h.push_outcome(o);
        outs.push_back(o);
      } else {
        const unsigned fp = rng() & ((1u << p.phr_footprint_bits) - 1);
        h.push_footprint(fp);
        fps.push_back(fp);
      }
      if (h.phr().size() > p.phr_capacity || h.bhb().size() > p.bhb_capacity) {
        v.expect(false, p.name + " capacity exceeded");
        return;
      }
      if (!(h.read() == window_oracle(p, fps, outs))) {
        v.expect(false, p.name + " sliding window mismatch at step " +
                            std::to_string(i));
        return;
      }
    }

    // Random nested checkpoint/rollback/commit sequences.
    for (int round = 0; round < 300; ++round) {
      std::vector<std::pair<CheckpointToken, HistoryState>> open;
      const int depth = 1 + static_cast<int>(rng() % 5);
      for (int d = 0; d < depth; ++d) {
        HistoryState snap = h;
        open.emplace_back(h.checkpoint(), std::move(snap));
        for (int k = 0, n = static_cast<int>(rng() % 12); k < n; ++k) {
          HistoryUpdate u;
          u.kind = static_cast<BranchKind>(rng() % 6);
          u.pc = 0x400000 + 4 * (rng() % 256);
          u.taken = rng() & 1;
          u.target = rng() & 0xFFFF0;
          u.biased = rng() & 1;
          u.recorded = rng() & 1;
          h.update(u, true);
        }
      }
      while (!open.empty()) {
        if (rng() % 4 == 0 && open.size() > 1) {
          h.commit(open.back().first);
          open.pop_back();
          continue;
        }
        h.rollback(open.back().first);
        if (!h.same_contents(open.back().second)) {
          v.expect(false, p.name + " rollback not total");
          return;
        }
        open.pop_back();
      }
      v.expect(h.open_checkpoints() == 0, p.name + " checkpoints leaked");
      h.push_footprint(static_cast<unsigned>(rng()));
    }
  }

  // Footprints A..E vs B..E with the newest omitted, capacity 4.
  const auto p = builtin("cortex-a72");
  v.expect(p.phr_capacity == 4, "A72 capacity is not 4");
  auto indirect = [](Addr pc, Addr target, bool biased) {
    HistoryUpdate u;
    u.kind = BranchKind::Indirect;
    u.pc = pc;
    u.taken = true;
    u.target = target;
    u.biased = biased;
    return u;
  };
  const Addr target[6] = {0x00, 0x10, 0x20, 0x30, 0x40, 0x50};
  HistoryState fa(p), fb(p), nominal(p);
  for (int i = 0; i < 5; ++i) fa.update(indirect(0x400000 + 4 * i, target[i], false), false);
  for (int i = 1; i < 6; ++i) {
    fb.update(indirect(0x400000 + 4 * i, target[i], i == 5), false);
    nominal.update(indirect(0x400000 + 4 * i, target[i], false), false);
  }
  v.expect(fa.read() == fb.read(), "omission does not collide");
  v.expect(!(fa.read() == nominal.read()), "nominal flow collides");
  v.detail << "6 profiles x 2000 pushes, 1800 rollback rounds, collision "
           << fa.read().hex() << " == " << fb.read().hex();
}

// ------------------------------------------------------------ 3

// Predicted direction after K congruent taken aliases, as measured per
// profile. Rows: initial bias of the victim x whether the aliases run with
// the victim's history (BH) or a different one (PC).
struct ThresholdExpectation {
  const char* profile;
  unsigned threshold;
  bool pc_taken_row_reverts;
};

bool expected_direction(const ThresholdExpectation& e, bool init_taken,
                        bool matching, unsigned k) {
  if (k >= e.threshold) {
    return !matching && init_taken && !e.pc_taken_row_reverts;
  }
  if (!matching) return init_taken;
  return init_taken || k >= 1;
}

void threshold_shape(Verdict& v) {
  const ThresholdExpectation table[] = {{"cortex-a72", 2, false},
                                        {"cortex-a76", 4, false},
                                        {"cortex-a78ae", 5, true},
                                        {"zen4", 16, false}};
  unsigned points = 0;
  for (const auto& e : table) {
    const auto p = builtin(e.profile);
    v.expect(p.btb_evict_threshold == e.threshold,
             std::string(e.profile) + " threshold");
    auto s = spec_for(ScenarioId::ThresholdSweep, p, 1);
    v.expect(s.params.k_max >= e.threshold + 1,
             std::string(e.profile) + " default sweep too short");
    const auto r = run_scenario(s, p);
    v.expect(r.threshold_curve.size() == 4 * (s.params.k_max + 1),
             std::string(e.profile) + " curve size");
    for (const auto& pt : r.threshold_curve) {
      ++points;
      if (pt.predicted_taken !=
          expected_direction(e, pt.init_taken, pt.matching_history, pt.k)) {
        v.expect(false, std::string(e.profile) + " K=" + std::to_string(pt.k) +
                            (pt.init_taken ? " T " : " NT ") +
                            (pt.matching_history ? "BH" : "PC"));
      }
    }
  }
  v.detail << points << " points match";
}

// ------------------------------------------------------------ 4

void bse(Verdict& v) {
  const auto base = builtin("cortex-a72");
  const auto run = [](MicroarchProfile p, Crossing c) {
    auto s = spec_for(ScenarioId::SpectreBse, p, 1000);
    s.params.crossing = c;
    return run_scenario(s, p, 4);
  };
  const auto plain = run(base, Crossing::None);
  v.expect(plain.success_rate == 1.0, "noiseless " + rate(plain));
  bool collisions = true;
  for (const auto& t : plain.per_trial) collisions = collisions && t.history_collision;
  v.expect(collisions, "attack history differs from F_A in some trial");

  auto flush = base;
  flush.mitigations.bpu_flush_on_context_switch = true;
  const auto flushed = run(flush, Crossing::UserSwitch);
  v.expect(flushed.success_rate == 0.0, "bpu flush + user switch " + rate(flushed));
  const auto syscall = run(flush, Crossing::Syscall);
  v.expect(syscall.success_rate == 1.0, "bpu flush + syscall " + rate(syscall));

  auto clear = base;
  clear.mitigations.bhb_clear_on_privilege_switch = true;
  const auto cleared = run(clear, Crossing::Syscall);
  v.expect(cleared.success_rate == 1.0, "bhb clear " + rate(cleared));

  v.expect(plain.architectural_safety && flushed.architectural_safety &&
               cleared.architectural_safety,
           "architectural read of the secret");
  v.detail << "plain " << plain.success_rate << ", flush " << flushed.success_rate
           << ", flush/syscall " << syscall.success_rate << ", bhb-clear "
           << cleared.success_rate;
}

// ------------------------------------------------------------ 5

void biasscope(Verdict& v) {
  const auto p = builtin("cortex-a72");
  auto s = spec_for(ScenarioId::BiasScope, p, 1000);
  const auto clean = run_scenario(s, p, 4);
  unsigned clean_errors = 0;
  for (unsigned e : clean.bit_errors) clean_errors += e;
  v.expect(clean_errors == 0 && clean.success_rate == 1.0, "noiseless errors");
  v.detail << "noiseless errors " << clean_errors;

  // A noise event lands on the channel's primed record. It only flips the
  // bit when the sender would have left the record in place (bit 0).
  for (double noise : {0.01, 0.05}) {
    s.noise = noise;
    const auto r = run_scenario(s, p, 4);
    for (unsigned j = 0; j < 8; ++j) {
      const bool bit = (s.params.secret >> (7 - j)) & 1;
      const double q = bit ? 0.0 : noise;
      const double n = s.trials;
      const double mean = n * q;
      const double sigma = std::sqrt(n * q * (1 - q));
      const double got = r.bit_errors[j];
      v.expect(std::fabs(got - mean) <= 3 * sigma,
               "p=" + std::to_string(noise) + " bit " + std::to_string(j) +
                   " errors " + std::to_string(r.bit_errors[j]));
    }
    v.detail << ", p=" << noise << " errors";
    for (unsigned e : r.bit_errors) v.detail << ' ' << e;
  }
}

// ------------------------------------------------------------ 6

void bhs(Verdict& v) {
  for (const auto& p : builtin_profiles()) {
    for (bool barrier : {false, true}) {
      auto m = spec_for(ScenarioId::SpectreBhsMistrain, p, 500);
      m.params.barrier = barrier;
      const auto rm = run_scenario(m, p, 4);
      auto e = spec_for(ScenarioId::SpectreBhsEvict, p, 500);
      e.params.barrier = barrier;
      const auto re = run_scenario(e, p, 4);
      const double want = barrier ? 0.0 : 1.0;
      v.expect(rm.status == ResultStatus::Ok && rm.success_rate == want,
               "mistrain " + rate(rm));
      if (p.hybrid()) {
        v.expect(re.status == ResultStatus::Unsupported, "evict status " + p.name);
        v.expect(!barrier || re.success_rate == 0.0, "evict barrier " + rate(re));
      } else {
        v.expect(re.status == ResultStatus::Ok && re.success_rate == want,
                 "evict " + rate(re));
      }
    }
  }
  v.detail << "6 profiles x {mistrain, evict} x {no barrier, barrier}";
}

// ------------------------------------------------------------ 7

void window(Verdict& v) {
  for (const auto& p : builtin_profiles()) {
    const auto r = run_scenario(spec_for(ScenarioId::WindowSweep, p, 1), p);
    const unsigned budget = p.speculation_window_budget;
    bool saw_100 = false, saw_over = false, closed = false;
    for (const auto& pt : r.window_curve) {
      v.expect(pt.leak_observed == (pt.prefix_n <= budget),
               p.name + " n=" + std::to_string(pt.prefix_n));
      v.expect(!(closed && pt.leak_observed), p.name + " not monotone");
      closed = closed || !pt.leak_observed;
      saw_100 = saw_100 || pt.prefix_n == 100;
      saw_over = saw_over || pt.prefix_n > budget;
    }
    v.expect(saw_100 && saw_over, p.name + " sweep misses required points");
  }
  v.detail << "leak iff n <= budget on 6 profiles";
}

// ------------------------------------------------------------ 8

void chimera(Verdict& v) {
  const char* supported[] = {"cortex-a76", "cortex-a78ae", "zen4", "gracemont",
                             "redwood-cove"};
  unsigned trials = 0;
  for (const char* name : supported) {
    const auto p = builtin(name);
    const auto s = validate_scenario(spec_for(ScenarioId::Chimera, p, 2000), p);
    const auto r = run_scenario(s, p, 4);
    trials += r.trials;
    v.expect(r.status == ResultStatus::Ok && r.success_rate == 1.0, rate(r));
    bool at_secret = true;
    for (const auto& t : r.per_trial) {
      at_secret = at_secret && t.speculated && line_of(*t.speculated) ==
                                                   line_of(s.one("secret"));
    }
    v.expect(at_secret, std::string(name) + " speculative load not at secret");
    v.expect(r.chimera && r.chimera->shuffle_never_taken && r.chimera->t0_unchanged,
             std::string(name) + " predictor state checks");
    v.expect(r.architectural_safety, std::string(name) + " committed secret read");
  }
  const auto a72 = builtin("cortex-a72");
  const auto r = run_scenario(spec_for(ScenarioId::Chimera, a72, 100), a72);
  v.expect(r.status == ResultStatus::StructuralFailure, "A72 not a structural failure");
  v.expect(r.architectural_safety, "A72 committed secret read");
  v.detail << trials << " trials on 5 profiles, A72 " << to_string(r.status);
}

// ------------------------------------------------------------ 9

void not_recorded(Verdict& v) {
  for (const auto& p : builtin_profiles()) {
    if (!p.hybrid()) continue;
    const auto r = run_scenario(spec_for(ScenarioId::SpectreBhsEvict, p, 1), p);
    if (!r.not_recorded) {
      v.expect(false, p.name + " no probe");
      continue;
    }
    const auto& nr = *r.not_recorded;
    v.expect(!(nr.flow_a == nr.flow_b), p.name + " F_A == F_B");
    v.expect(!(nr.after_eviction == nr.flow_a), p.name + " NR == F_A");
    v.expect(!(nr.after_eviction == nr.flow_b), p.name + " NR == F_B");
    v.detail << p.name << " A=" << nr.flow_a.hex() << " B=" << nr.flow_b.hex()
             << " NR=" << nr.after_eviction.hex() << "  ";
  }
}

// ------------------------------------------------------------ 10

void determinism(Verdict& v) {
  struct Case {
    const char* profile;
    ScenarioId id;
    double noise;
  };
  const Case cases[] = {{"cortex-a72", ScenarioId::SpectreBse, 0.0},
                        {"cortex-a72", ScenarioId::BiasScope, 0.05},
                        {"cortex-a76", ScenarioId::Chimera, 0.05},
                        {"zen4", ScenarioId::SpectreBhsMistrain, 0.01}};
  for (const auto& c : cases) {
    const auto p = builtin(c.profile);
    auto s = spec_for(c.id, p, 500);
    s.noise = c.noise;
    s.seed = 0x1234'5678;
    const auto one = result_json(run_scenario(s, p, 1));
    const auto eight = result_json(run_scenario(s, p, 8));
    v.expect(one == eight, std::string(c.profile) + " " +
                               std::string(to_string(c.id)) + " differs");
  }
  v.detail << "4 manifests byte-identical at jobs 1 and 8";
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<void(Verdict&)>>> criteria = {
      {"bias-classification-oracle", bias_classification},
      {"history-properties", history_properties},
      {"threshold-sweep-shape", threshold_shape},
      {"spectre-bse-and-mitigations", bse},
      {"biasscope-decoding", biasscope},
      {"spectre-bhs-variants", bhs},
      {"window-budget-step", window},
      {"chimera", chimera},
      {"not-recorded-history", not_recorded},
      {"determinism", determinism},
  };
  int failed = 0;
  int index = 0;
  for (const auto& [name, fn] : criteria) {
    ++index;
    Verdict v;
    const auto start = std::chrono::steady_clock::now();
    try {
      fn(v);
    } catch (const std::exception& e) {
      v.expect(false, std::string("exception: ") + e.what());
    }
    const double secs = std::chrono::duration<double>(
                            std::chrono::steady_clock::now() - start).count();
    std::printf("%s %2d %-28s %6.2fs  %s\n", v.pass ? "PASS" : "FAIL", index,
                name, secs, v.detail.str().c_str());
    failed += !v.pass;
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed,
              criteria.size());
  return failed ? 1 : 0;
}
