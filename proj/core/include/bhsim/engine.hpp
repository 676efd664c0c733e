#pragma once

#include <bhsim/bst.hpp>
#include <bhsim/history.hpp>
#include <bhsim/predictor.hpp>
#include <bhsim/profile.hpp>
#include <bhsim/trace.hpp>

#include <array>
#include <cstdint>
#include <optional>
#include <random>
#include <set>
#include <unordered_map>
#include <vector>

namespace bhsim {

inline constexpr Addr kLineBytes = 64;
inline constexpr Addr line_of(Addr a) { return a & ~(kLineBytes - 1); }

class CacheModel {
 public:
  static constexpr unsigned kHitLatency = 40;
  static constexpr unsigned kMissLatency = 200;

  bool contains(Addr addr) const { return lines_.count(line_of(addr)) != 0; }
  void insert(Addr addr) { lines_.insert(line_of(addr)); }
  void flush(Addr addr) { lines_.erase(line_of(addr)); }
  void clear() { lines_.clear(); }
  std::size_t size() const { return lines_.size(); }

 private:
  std::set<Addr> lines_;
};

struct BranchEvent {
  Addr pc = 0;
  BranchKind kind = BranchKind::Conditional;
  BranchOutcome actual;
  Prediction prediction;
  HistoryValue history;  // value the prediction was made with
  bool speculative = false;   // executed inside a window
  bool rolled_back = false;   // its effects were discarded
  bool opened_window = false;
  int depth = 0;              // window nesting level at fetch
};

struct ProbeEvent {
  Addr addr = 0;
  bool hit = false;
  unsigned latency = 0;
};

struct LoadEvent {
  Addr addr = 0;
  bool speculative = false;
};

struct WindowEvent {
  Addr pc = 0;                   // branch that opened the window
  bool followed_prediction = false;
  std::optional<Addr> speculated_target;  // label the window started at
  bool mispredicted = false;
  long instructions = 0;         // non-branch instructions issued
  bool stalled = false;          // no usable prediction
  std::vector<Addr> loads;
};

struct ExecutionReport {
  std::vector<BranchEvent> branches;
  std::vector<ProbeEvent> probes;
  std::vector<LoadEvent> loads;
  std::vector<WindowEvent> windows;
  std::uint64_t digest = 0;
  bool halted = false;

  /// Latency of the last probe of `addr`'s line. Throws ContractViolation
  /// if it was never probed.
  unsigned probe_latency(Addr addr) const;
  bool speculative_load(Addr addr) const;
  bool committed_load(Addr addr) const;
  /// Committed (non-speculative) events for `pc`, oldest first.
  std::vector<const BranchEvent*> committed(Addr pc) const;
};

struct EngineOptions {
  bool speculation = true;
  int max_depth = 4;
};

/// One logical core: predictor, BST, history, and data cache persist across
/// run() calls so that consecutive flows share microarchitectural state.
class Simulator {
 public:
  explicit Simulator(const MicroarchProfile& profile, EngineOptions opts = {});

  ExecutionReport run(const TraceProgram& program);

  const MicroarchProfile& profile() const { return *profile_; }
  PredictorState& predictor() { return predictor_; }
  const PredictorState& predictor() const { return predictor_; }
  BstTable* bst() { return bst_ ? &*bst_ : nullptr; }
  const BstTable* bst() const { return bst_ ? &*bst_ : nullptr; }
  HistoryState& history() { return history_; }
  CacheModel& cache() { return cache_; }
  ContextId context() const { return context_; }

 private:
  using Registers = std::array<Addr, kRegisterCount>;
  struct Window;

  void commit_branch(const Step& s, const HistoryValue& h,
                     const Prediction& pred, ExecutionReport& report);
  void speculate(const TraceProgram& program, std::size_t index, Window& w,
                 ExecutionReport& report);
  // Chooses where a window continues after a branch predicted `pred`.
  // Returns the next step index, or nothing when the frontend stalls.
  std::optional<std::size_t> predicted_path(const Step& s, std::size_t index,
                                            const Prediction& pred,
                                            BranchOutcome& spec_outcome) const;
  std::optional<std::size_t> label_index(Addr addr, std::size_t from) const;
  BranchOutcome actual_outcome(const Step& s) const;
  bool biased_for(const Step& s, BranchOutcome outcome, bool commit);

  const MicroarchProfile* profile_;
  EngineOptions opts_;
  PredictorState predictor_;
  std::optional<BstTable> bst_;
  HistoryState history_;
  CacheModel cache_;
  ContextId context_ = 0;
  Registers regs_{};
  std::unordered_map<Addr, std::vector<std::size_t>> labels_;
};

/// With probability p, inserts one taken conditional whose PC aliases one
/// of `contended` in the BST index bits but not in the tag, followed by its
/// target label, at a uniformly random position. Returns whether an event
/// was inserted.
bool inject_noise(TraceProgram& program, double p, std::mt19937_64& rng,
                  const std::vector<Addr>& contended);

/// Uniform double in [0, 1) from the top 53 bits.
double unit_random(std::mt19937_64& rng);

}  // namespace bhsim
