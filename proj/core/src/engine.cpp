#include <bhsim/engine.hpp>

#include <algorithm>

namespace bhsim {

namespace {

constexpr std::uint64_t kFnvOffset = 0xcbf29ce484222325ULL;
constexpr std::uint64_t kFnvPrime = 0x100000001b3ULL;

void fnv(std::uint64_t& h, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) {
    h ^= (v >> (i * 8)) & 0xFF;
    h *= kFnvPrime;
  }
}

}  // namespace

unsigned ExecutionReport::probe_latency(Addr addr) const {
  for (auto it = probes.rbegin(); it != probes.rend(); ++it) {
    if (line_of(it->addr) == line_of(addr)) return it->latency;
  }
  throw ContractViolation("address was never probed");
}

bool ExecutionReport::speculative_load(Addr addr) const {
  return std::any_of(loads.begin(), loads.end(), [&](const LoadEvent& l) {
    return l.speculative && line_of(l.addr) == line_of(addr);
  });
}

bool ExecutionReport::committed_load(Addr addr) const {
  return std::any_of(loads.begin(), loads.end(), [&](const LoadEvent& l) {
    return !l.speculative && line_of(l.addr) == line_of(addr);
  });
}

std::vector<const BranchEvent*> ExecutionReport::committed(Addr pc) const {
  std::vector<const BranchEvent*> out;
  for (const auto& b : branches) {
    if (!b.speculative && b.pc == pc) out.push_back(&b);
  }
  return out;
}

struct Simulator::Window {
  long used = 0;
  int depth = 1;
  Registers regs{};
  std::vector<CheckpointToken> nested;
  std::size_t event = 0;
};

Simulator::Simulator(const MicroarchProfile& profile, EngineOptions opts)
    : profile_(&profile),
      opts_(opts),
      predictor_(profile),
      history_(profile) {
  if (profile.speculation_window_budget <= 0) {
    throw ConfigError("speculation_window_budget", "must be > 0");
  }
  if (profile.bias_free_enabled) bst_.emplace(profile);
}

std::optional<std::size_t> Simulator::label_index(Addr addr,
                                                  std::size_t from) const {
  auto it = labels_.find(addr);
  if (it == labels_.end()) return std::nullopt;
  const auto& v = it->second;
  auto pos = std::upper_bound(v.begin(), v.end(), from);
  return pos != v.end() ? *pos : v.front();
}

BranchOutcome Simulator::actual_outcome(const Step& s) const {
  if (s.branch == BranchKind::Conditional) {
    return BranchOutcome::direction(s.taken);
  }
  return BranchOutcome::to(s.target);
}

bool Simulator::biased_for(const Step& s, BranchOutcome outcome, bool commit) {
  if (!bst_ || s.branch != BranchKind::Indirect) return false;
  if (commit) {
    bst_->maybe_evict(s.branch, s.pc, true, context_);
    return bst_->classify_and_update(s.pc, outcome, context_).biased;
  }
  return bst_->peek(s.pc, outcome, context_).biased;
}

std::optional<std::size_t> Simulator::predicted_path(
    const Step& s, std::size_t index, const Prediction& pred,
    BranchOutcome& spec_outcome) const {
  switch (s.branch) {
    case BranchKind::Conditional:
      spec_outcome = BranchOutcome::direction(pred.taken());
      if (!pred.taken()) return index + 1;
      return label_index(s.target, index);
    case BranchKind::Indirect:
    case BranchKind::Return:
      if (!pred.valid) return std::nullopt;
      spec_outcome = pred.outcome;
      return label_index(pred.outcome.target, index);
    default:
      spec_outcome = BranchOutcome::to(s.target);
      return label_index(s.target, index);
  }
}

void Simulator::commit_branch(const Step& s, const HistoryValue& h,
                              const Prediction& pred,
                              ExecutionReport& report) {
  const BranchOutcome actual = actual_outcome(s);
  bool biased = false;
  if (bst_ && s.branch == BranchKind::Conditional) {
    bst_->maybe_evict(s.branch, s.pc, s.taken, context_);
  } else {
    biased = biased_for(s, actual, true);
  }
  history_.update({s.branch, s.pc, s.taken, s.target, biased, pred.recorded},
                  false);
  predictor_.resolve(s.branch, s.pc, h, actual, pred, context_);

  fnv(report.digest, s.pc);
  fnv(report.digest, s.taken ? s.target : 0);
}

void Simulator::speculate(const TraceProgram& program, std::size_t index,
                          Window& w, ExecutionReport& report) {
  const long budget = profile_->speculation_window_budget;
  const auto& steps = program.steps;
  while (index < steps.size()) {
    const Step& s = steps[index];
    switch (s.kind) {
      case StepKind::Label:
        ++index;
        continue;
      case StepKind::Nop:
        if (w.used + static_cast<long>(s.count) - 1 > budget) return;
        w.used += s.count;
        report.windows[w.event].instructions = w.used;
        ++index;
        continue;
      case StepKind::Mov:
      case StepKind::Load:
      case StepKind::Flush:
      case StepKind::Probe: {
        if (w.used > budget) return;
        ++w.used;
        report.windows[w.event].instructions = w.used;
        if (s.kind == StepKind::Mov) {
          w.regs[s.reg] = s.addr;
        } else if (s.kind == StepKind::Load) {
          const Addr a = s.reg >= 0 ? w.regs[s.reg] : s.addr;
          cache_.insert(a);
          report.loads.push_back({a, true});
          report.windows[w.event].loads.push_back(a);
        }
        ++index;
        continue;
      }
      case StepKind::Barrier:
      case StepKind::ContextSwitch:
      case StepKind::Halt:
        return;
      case StepKind::Branch:
        break;
    }

    const HistoryValue h = history_.read();
    const Prediction pred = predictor_.predict(s.branch, s.pc, h, context_);
    BranchEvent ev;
    ev.pc = s.pc;
    ev.kind = s.branch;
    ev.actual = actual_outcome(s);
    ev.prediction = pred;
    ev.history = h;
    ev.speculative = true;
    ev.rolled_back = true;
    ev.depth = w.depth;

    const bool resolved = std::all_of(
        s.operands.begin(), s.operands.end(),
        [&](Addr a) { return cache_.contains(a); });
    std::optional<std::size_t> next;
    BranchOutcome outcome;
    if (resolved) {
      outcome = ev.actual;
      next = s.taken ? label_index(s.target, index) : std::optional(index + 1);
    } else {
      if (w.depth >= opts_.max_depth) {
        report.branches.push_back(std::move(ev));
        return;
      }
      w.nested.push_back(history_.checkpoint());
      ++w.depth;
      ev.opened_window = true;
      next = predicted_path(s, index, pred, outcome);
    }
    report.branches.push_back(std::move(ev));
    if (!next) return;

    const bool taken = outcome.kind != BranchOutcome::Kind::NotTaken;
    const Addr target =
        outcome.kind == BranchOutcome::Kind::Target ? outcome.target : s.target;
    history_.update(
        {s.branch, s.pc, taken, target, biased_for(s, outcome, false),
         pred.recorded},
        true);
    index = *next;
  }
}

ExecutionReport Simulator::run(const TraceProgram& program) {
  validate_trace(program);
  labels_.clear();
  for (std::size_t i = 0; i < program.steps.size(); ++i) {
    if (program.steps[i].kind == StepKind::Label) {
      labels_[program.steps[i].addr].push_back(i);
    }
  }

  ExecutionReport report;
  report.digest = kFnvOffset;
  const auto& steps = program.steps;
  std::size_t i = 0;
  while (i < steps.size()) {
    const Step& s = steps[i];
    switch (s.kind) {
      case StepKind::Label:
      case StepKind::Nop:
      case StepKind::Barrier:
        ++i;
        continue;
      case StepKind::Mov:
        regs_[s.reg] = s.addr;
        ++i;
        continue;
      case StepKind::Load: {
        const Addr a = s.reg >= 0 ? regs_[s.reg] : s.addr;
        cache_.insert(a);
        report.loads.push_back({a, false});
        fnv(report.digest, a);
        ++i;
        continue;
      }
      case StepKind::Flush:
        cache_.flush(s.addr);
        ++i;
        continue;
      case StepKind::Probe: {
        const bool hit = cache_.contains(s.addr);
        report.probes.push_back(
            {s.addr, hit,
             hit ? CacheModel::kHitLatency : CacheModel::kMissLatency});
        cache_.insert(s.addr);
        ++i;
        continue;
      }
      case StepKind::ContextSwitch:
        context_ = s.context;
        apply_flush(*profile_,
                    s.switch_kind == SwitchKind::User
                        ? MitigationEvent::UserContextSwitch
                        : MitigationEvent::PrivilegeSwitch,
                    predictor_, bst(), history_);
        ++i;
        continue;
      case StepKind::Halt:
        report.halted = true;
        i = steps.size();
        continue;
      case StepKind::Branch:
        break;
    }

    const HistoryValue h = history_.read();
    const Prediction pred = predictor_.predict(s.branch, s.pc, h, context_);
    const bool miss = std::any_of(s.operands.begin(), s.operands.end(),
                                  [&](Addr a) { return !cache_.contains(a); });
    bool opened = false;
    if (opts_.speculation && miss) {
      opened = true;
      WindowEvent we;
      we.pc = s.pc;
      report.windows.push_back(we);
      const std::size_t wi = report.windows.size() - 1;

      const CheckpointToken tok = history_.checkpoint();
      BranchOutcome outcome;
      const auto next = predicted_path(s, i, pred, outcome);
      if (next) {
        auto& wev = report.windows[wi];
        wev.followed_prediction = pred.valid;
        if (steps[*next].kind == StepKind::Label) {
          wev.speculated_target = steps[*next].addr;
        }
        wev.mispredicted = outcome != actual_outcome(s);
        const bool taken = outcome.kind != BranchOutcome::Kind::NotTaken;
        const Addr target = outcome.kind == BranchOutcome::Kind::Target
                                ? outcome.target
                                : s.target;
        history_.update({s.branch, s.pc, taken, target,
                         biased_for(s, outcome, false), pred.recorded},
                        true);
        Window w;
        w.regs = regs_;
        w.event = wi;
        speculate(program, *next, w, report);
        for (auto it = w.nested.rbegin(); it != w.nested.rend(); ++it) {
          history_.rollback(*it);
        }
      } else {
        report.windows[wi].stalled = true;
      }
      history_.rollback(tok);
      for (Addr a : s.operands) cache_.insert(a);
    }

    BranchEvent ev;
    ev.pc = s.pc;
    ev.kind = s.branch;
    ev.actual = actual_outcome(s);
    ev.prediction = pred;
    ev.history = h;
    ev.opened_window = opened;
    commit_branch(s, h, pred, report);
    report.branches.push_back(std::move(ev));

    if (s.taken) {
      i = *label_index(s.target, i);
    } else {
      ++i;
    }
  }
  for (Addr r : regs_) fnv(report.digest, r);
  return report;
}

double unit_random(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

bool inject_noise(TraceProgram& program, double p, std::mt19937_64& rng,
                  const std::vector<Addr>& contended) {
  if (contended.empty() || !(unit_random(rng) < p)) return false;
  const Addr base = contended[rng() % contended.size()];
  const Addr k = 1 + rng() % 0xFF;
  const Addr pc = base + (k << 16);
  const Addr target = pc + 0x20;
  const std::size_t pos = rng() % (program.steps.size() + 1);

  TraceBuilder b;
  b.cond(pc, true, target).label(target);
  const auto& ins = b.program().steps;
  program.steps.insert(program.steps.begin() + static_cast<long>(pos),
                       ins.begin(), ins.end());
  return true;
}

}  // namespace bhsim
