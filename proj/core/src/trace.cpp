#include <bhsim/trace.hpp>

#include <bhsim/config_text.hpp>

#include <set>
#include <sstream>

namespace bhsim {

TraceProgram& TraceProgram::append(const TraceProgram& other) {
  steps.insert(steps.end(), other.steps.begin(), other.steps.end());
  return *this;
}

TraceBuilder& TraceBuilder::label(Addr addr) {
  Step s;
  s.kind = StepKind::Label;
  s.addr = addr;
  program_.steps.push_back(s);
  return *this;
}

TraceBuilder& TraceBuilder::branch(BranchKind kind, Addr pc, bool taken,
                                   Addr target, std::vector<Addr> operands) {
  Step s;
  s.kind = StepKind::Branch;
  s.branch = kind;
  s.pc = pc;
  s.taken = kind == BranchKind::Conditional ? taken : true;
  s.target = target;
  s.operands = std::move(operands);
  program_.steps.push_back(std::move(s));
  return *this;
}

TraceBuilder& TraceBuilder::cond(Addr pc, bool taken, Addr target,
                                 std::vector<Addr> operands) {
  return branch(BranchKind::Conditional, pc, taken, target,
                std::move(operands));
}

TraceBuilder& TraceBuilder::indirect(Addr pc, Addr target,
                                     std::vector<Addr> operands) {
  return branch(BranchKind::Indirect, pc, true, target, std::move(operands));
}

TraceBuilder& TraceBuilder::jump(Addr pc, Addr target) {
  return branch(BranchKind::DirectUnconditional, pc, true, target);
}

TraceBuilder& TraceBuilder::nop(unsigned count) {
  if (count == 0) return *this;
  Step s;
  s.kind = StepKind::Nop;
  s.count = count;
  program_.steps.push_back(s);
  return *this;
}

TraceBuilder& TraceBuilder::load(Addr addr) {
  Step s;
  s.kind = StepKind::Load;
  s.addr = addr;
  program_.steps.push_back(s);
  return *this;
}

TraceBuilder& TraceBuilder::load_reg(int reg) {
  Step s;
  s.kind = StepKind::Load;
  s.reg = reg;
  program_.steps.push_back(s);
  return *this;
}

TraceBuilder& TraceBuilder::mov(int reg, Addr value) {
  Step s;
  s.kind = StepKind::Mov;
  s.reg = reg;
  s.addr = value;
  program_.steps.push_back(s);
  return *this;
}

TraceBuilder& TraceBuilder::flush(Addr addr) {
  Step s;
  s.kind = StepKind::Flush;
  s.addr = addr;
  program_.steps.push_back(s);
  return *this;
}

TraceBuilder& TraceBuilder::barrier() {
  Step s;
  s.kind = StepKind::Barrier;
  program_.steps.push_back(s);
  return *this;
}

TraceBuilder& TraceBuilder::probe(Addr addr) {
  Step s;
  s.kind = StepKind::Probe;
  s.addr = addr;
  program_.steps.push_back(s);
  return *this;
}

TraceBuilder& TraceBuilder::context_switch(ContextId ctx, SwitchKind kind) {
  Step s;
  s.kind = StepKind::ContextSwitch;
  s.context = ctx;
  s.switch_kind = kind;
  program_.steps.push_back(s);
  return *this;
}

TraceBuilder& TraceBuilder::halt() {
  Step s;
  s.kind = StepKind::Halt;
  program_.steps.push_back(s);
  return *this;
}

TraceBuilder& TraceBuilder::append(const TraceProgram& other) {
  program_.append(other);
  return *this;
}

void validate_trace(const TraceProgram& program) {
  std::set<Addr> labels;
  for (const auto& s : program.steps) {
    if (s.kind == StepKind::Label) labels.insert(s.addr);
  }
  for (const auto& s : program.steps) {
    if (s.kind == StepKind::Branch && !labels.count(s.target)) {
      throw ConfigError("target", "branch at " + config::format_hex(s.pc) +
                                      " targets unknown label " +
                                      config::format_hex(s.target));
    }
    if ((s.kind == StepKind::Load || s.kind == StepKind::Mov) &&
        s.reg >= kRegisterCount) {
      throw ConfigError("reg", "register out of range");
    }
  }
}

namespace {

std::string_view opcode(BranchKind kind) {
  switch (kind) {
    case BranchKind::Conditional: return "BCOND";
    case BranchKind::Indirect: return "BR";
    case BranchKind::DirectUnconditional: return "B";
    case BranchKind::Call: return "BL";
    case BranchKind::Return: return "RET";
    case BranchKind::Svc: return "SVC";
  }
  return "?";
}

std::string hex(Addr a) { return config::format_hex(a); }

}  // namespace

std::string format_trace(const TraceProgram& program) {
  std::ostringstream os;
  for (const auto& s : program.steps) {
    switch (s.kind) {
      case StepKind::Label: os << "LABEL " << hex(s.addr); break;
      case StepKind::Branch:
        os << opcode(s.branch) << ' ' << hex(s.pc);
        if (s.branch == BranchKind::Conditional) os << (s.taken ? " T" : " NT");
        os << ' ' << hex(s.target);
        if (!s.operands.empty()) {
          os << " ops=";
          for (std::size_t i = 0; i < s.operands.size(); ++i) {
            os << (i ? "," : "") << hex(s.operands[i]);
          }
        }
        break;
      case StepKind::Nop: os << "NOP " << s.count; break;
      case StepKind::Load:
        if (s.reg >= 0) {
          os << "LOAD [r" << s.reg << ']';
        } else {
          os << "LOAD " << hex(s.addr);
        }
        break;
      case StepKind::Flush: os << "FLUSH " << hex(s.addr); break;
      case StepKind::Barrier: os << "BARRIER"; break;
      case StepKind::Probe: os << "PROBE " << hex(s.addr); break;
      case StepKind::ContextSwitch:
        os << "CTX " << s.context
           << (s.switch_kind == SwitchKind::User ? " user" : " syscall");
        break;
      case StepKind::Mov: os << "MOV r" << s.reg << ' ' << hex(s.addr); break;
      case StepKind::Halt: os << "HALT"; break;
    }
    os << '\n';
  }
  return os.str();
}

namespace {

struct LineReader {
  std::vector<std::string> tokens;
  int line;

  const std::string& at(std::size_t i, const char* what) const {
    if (i >= tokens.size()) {
      throw ConfigError(what, "missing operand", line);
    }
    return tokens[i];
  }
  Addr addr(std::size_t i, const char* what) const {
    return config::parse_uint(what, {at(i, what), line});
  }
  int reg(const std::string& tok, const char* what) const {
    std::string t = tok;
    if (t.size() >= 2 && t.front() == '[' && t.back() == ']') {
      t = t.substr(1, t.size() - 2);
    }
    if (t.size() < 2 || t[0] != 'r') {
      throw ConfigError(what, "expected register, got '" + tok + "'", line);
    }
    const auto r = config::parse_uint(what, {t.substr(1), line});
    if (r >= static_cast<unsigned>(kRegisterCount)) {
      throw ConfigError(what, "register out of range", line);
    }
    return static_cast<int>(r);
  }
};

}  // namespace

TraceProgram parse_trace(std::string_view text) {
  TraceBuilder b;
  std::istringstream in{std::string(text)};
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    if (auto hash = raw.find('#'); hash != std::string::npos) {
      raw.resize(hash);
    }
    std::istringstream ls(raw);
    LineReader r{{}, line_no};
    for (std::string tok; ls >> tok;) r.tokens.push_back(tok);
    if (r.tokens.empty()) continue;
    const std::string& op = r.tokens[0];

    auto branch = [&](BranchKind kind) {
      std::size_t i = 1;
      const Addr pc = r.addr(i++, "pc");
      bool taken = true;
      if (kind == BranchKind::Conditional) {
        const auto& dir = r.at(i++, "direction");
        if (dir == "T") {
          taken = true;
        } else if (dir == "NT") {
          taken = false;
        } else {
          throw ConfigError("direction", "expected T or NT, got '" + dir + "'",
                            line_no);
        }
      }
      const Addr target = r.addr(i++, "target");
      std::vector<Addr> ops;
      if (i < r.tokens.size()) {
        const auto& t = r.tokens[i++];
        if (t.rfind("ops=", 0) != 0) {
          throw ConfigError("ops", "unexpected token '" + t + "'", line_no);
        }
        ops = config::parse_uint_list("ops", {t.substr(4), line_no});
      }
      if (i < r.tokens.size()) {
        throw ConfigError(op, "trailing tokens", line_no);
      }
      b.branch(kind, pc, taken, target, std::move(ops));
    };

    if (op == "LABEL") {
      b.label(r.addr(1, "label"));
    } else if (op == "BCOND") {
      branch(BranchKind::Conditional);
    } else if (op == "BR" || op == "BLR") {
      branch(BranchKind::Indirect);
    } else if (op == "B") {
      branch(BranchKind::DirectUnconditional);
    } else if (op == "BL") {
      branch(BranchKind::Call);
    } else if (op == "RET") {
      branch(BranchKind::Return);
    } else if (op == "SVC") {
      branch(BranchKind::Svc);
    } else if (op == "NOP") {
      unsigned n = 1;
      if (r.tokens.size() > 1) {
        n = static_cast<unsigned>(
            config::parse_uint("count", {r.tokens[1], line_no}));
      }
      b.nop(n);
    } else if (op == "LOAD") {
      const auto& t = r.at(1, "addr");
      if (!t.empty() && t[0] == '[') {
        b.load_reg(r.reg(t, "reg"));
      } else {
        b.load(r.addr(1, "addr"));
      }
    } else if (op == "MOV") {
      b.mov(r.reg(r.at(1, "reg"), "reg"), r.addr(2, "value"));
    } else if (op == "FLUSH") {
      b.flush(r.addr(1, "addr"));
    } else if (op == "PROBE") {
      b.probe(r.addr(1, "addr"));
    } else if (op == "BARRIER") {
      b.barrier();
    } else if (op == "HALT") {
      b.halt();
    } else if (op == "CTX") {
      const auto ctx = static_cast<ContextId>(r.addr(1, "context"));
      const auto& kind = r.at(2, "switch");
      if (kind != "user" && kind != "syscall") {
        throw ConfigError("switch", "expected user or syscall, got '" + kind + "'",
                          line_no);
      }
      b.context_switch(ctx, kind == "user" ? SwitchKind::User
                                           : SwitchKind::Syscall);
    } else {
      throw ConfigError("opcode", "unknown opcode '" + op + "'", line_no);
    }
  }
  return b.build();
}

}  // namespace bhsim
