#pragma once

#include <bhsim/types.hpp>

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace bhsim {

enum class StepKind {
  Label,
  Branch,
  Nop,
  Load,
  Flush,
  Barrier,
  Probe,
  ContextSwitch,
  Mov,
  Halt,
};

enum class SwitchKind { User, Syscall };

inline constexpr int kRegisterCount = 8;

struct Step {
  StepKind kind = StepKind::Nop;
  Addr addr = 0;     // label, load/flush/probe line, or MOV immediate
  int reg = -1;      // LOAD [reg] source or MOV destination
  unsigned count = 1;  // NOP block length

  // Branch fields. `target` is a label address; not-taken conditionals
  // fall through to the next step.
  BranchKind branch = BranchKind::Conditional;
  Addr pc = 0;
  bool taken = true;
  Addr target = 0;
  std::vector<Addr> operands;

  ContextId context = 0;
  SwitchKind switch_kind = SwitchKind::User;

  bool operator==(const Step&) const = default;
};

struct TraceProgram {
  std::vector<Step> steps;

  bool operator==(const TraceProgram&) const = default;

  /// Appends all steps of `other`.
  TraceProgram& append(const TraceProgram& other);
  std::size_t size() const { return steps.size(); }
};

/// Fluent builder used by the scenario generators and tests.
class TraceBuilder {
 public:
  TraceBuilder& label(Addr addr);
  TraceBuilder& branch(BranchKind kind, Addr pc, bool taken, Addr target,
                       std::vector<Addr> operands = {});
  TraceBuilder& cond(Addr pc, bool taken, Addr target,
                     std::vector<Addr> operands = {});
  TraceBuilder& indirect(Addr pc, Addr target,
                         std::vector<Addr> operands = {});
  TraceBuilder& jump(Addr pc, Addr target);
  TraceBuilder& nop(unsigned count = 1);
  TraceBuilder& load(Addr addr);
  TraceBuilder& load_reg(int reg);
  TraceBuilder& mov(int reg, Addr value);
  TraceBuilder& flush(Addr addr);
  TraceBuilder& barrier();
  TraceBuilder& probe(Addr addr);
  TraceBuilder& context_switch(ContextId ctx, SwitchKind kind);
  TraceBuilder& halt();
  TraceBuilder& append(const TraceProgram& other);

  TraceProgram build() const { return program_; }
  const TraceProgram& program() const { return program_; }

 private:
  TraceProgram program_;
};

/// Checks that every branch target names a label. Throws ConfigError.
/// A label may appear more than once (an unrolled listing); a branch
/// resolves to the first occurrence after itself, else the first overall.
void validate_trace(const TraceProgram& program);

/// Line-oriented text form, one step per line; see docs/trace-format.md.
std::string format_trace(const TraceProgram& program);
TraceProgram parse_trace(std::string_view text);

}  // namespace bhsim
