#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace bhsim {

/// Virtual address of an instruction or data line.
using Addr = std::uint64_t;

/// Context identifier (process / privilege level) carried by the engine.
using ContextId = std::uint32_t;

enum class BranchKind {
  Conditional,
  Indirect,             // BR / BLR
  DirectUnconditional,  // B
  Call,                 // BL
  Return,               // RET
  Svc,
};

std::string_view to_string(BranchKind kind);

/// Whether a branch kind carries a target payload in the predictor
/// (everything except conditionals).
constexpr bool predicts_target(BranchKind kind) {
  return kind != BranchKind::Conditional;
}

/// Committed outcome of a branch: a direction for conditionals, a target
/// address for everything else.
struct BranchOutcome {
  enum class Kind : std::uint8_t { NotTaken, Taken, Target };

  Kind kind = Kind::NotTaken;
  Addr target = 0;

  static constexpr BranchOutcome taken() { return {Kind::Taken, 0}; }
  static constexpr BranchOutcome not_taken() { return {Kind::NotTaken, 0}; }
  static constexpr BranchOutcome to(Addr t) { return {Kind::Target, t}; }
  static constexpr BranchOutcome direction(bool t) {
    return t ? taken() : not_taken();
  }

  bool operator==(const BranchOutcome&) const = default;
};

std::string to_string(const BranchOutcome& outcome);

/// Raised for malformed configuration text or profile/scenario invariant
/// violations. `field()` names the offending key, `line()` is 1-based or 0.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string field, const std::string& message, int line = 0);

  const std::string& field() const noexcept { return field_; }
  int line() const noexcept { return line_; }

 private:
  std::string field_;
  int line_;
};

/// Raised when a caller breaks an operation's precondition (stale rollback
/// token, speculative update without a checkpoint, ...).
class ContractViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace bhsim
