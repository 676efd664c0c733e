#include <bhsim/trace.hpp>

#include <doctest.h>

using namespace bhsim;

TEST_CASE("format and parse round trip") {
  const auto prog = TraceBuilder()
                        .mov(2, 0x10000040)
                        .load(0x10000000)
                        .load_reg(2)
                        .flush(0x10000080)
                        .cond(0x400000, true, 0x40000100, {0x10000000})
                        .label(0x40000100)
                        .cond(0x400040, false, 0x40000100)
                        .indirect(0x400080, 0x40000200, {0x10000000, 0x10000040})
                        .branch(BranchKind::Call, 0x4000c0, true, 0x40000200)
                        .label(0x40000200)
                        .branch(BranchKind::Return, 0x400100, true, 0x40000300)
                        .branch(BranchKind::Svc, 0x400140, true, 0x40000300)
                        .jump(0x400180, 0x40000300)
                        .label(0x40000300)
                        .nop(17)
                        .barrier()
                        .context_switch(3, SwitchKind::Syscall)
                        .context_switch(0, SwitchKind::User)
                        .probe(0x10000040)
                        .halt()
                        .build();
  CHECK_NOTHROW(validate_trace(prog));
  const auto text = format_trace(prog);
  CHECK(parse_trace(text) == prog);
  CHECK(format_trace(parse_trace(text)) == text);
}

TEST_CASE("text syntax") {
  const auto prog = parse_trace(
      "# comment\n"
      "LABEL 0x100\n"
      "BCOND 0x400000 NT 0x100 ops=0x10000000\n"
      "BR 0x400004 0x100\n"
      "NOP 3\n"
      "LOAD [r1]\n"
      "HALT\n");
  REQUIRE(prog.size() == 6);
  CHECK(prog.steps[1].kind == StepKind::Branch);
  CHECK_FALSE(prog.steps[1].taken);
  CHECK(prog.steps[1].operands == std::vector<Addr>{0x10000000});
  CHECK(prog.steps[2].branch == BranchKind::Indirect);
  CHECK(prog.steps[3].count == 3);
  CHECK(prog.steps[4].reg == 1);
}

TEST_CASE("malformed traces") {
  CHECK_THROWS_AS(parse_trace("JUMP 0x1\n"), ConfigError);
  CHECK_THROWS_AS(parse_trace("BCOND 0x400000 MAYBE 0x100\n"), ConfigError);
  CHECK_THROWS_AS(parse_trace("LOAD [r9]\n"), ConfigError);
  CHECK_THROWS_AS(parse_trace("NOP many\n"), ConfigError);
  CHECK_THROWS_AS(validate_trace(TraceBuilder().jump(0x400000, 0x999).build()),
                  ConfigError);
}

TEST_CASE("repeated labels are allowed") {
  const auto prog = TraceBuilder()
                        .label(0x100)
                        .jump(0x400000, 0x100)
                        .label(0x100)
                        .build();
  CHECK_NOTHROW(validate_trace(prog));
}
