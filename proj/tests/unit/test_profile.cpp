#include <bhsim/profile.hpp>

#include <doctest.h>

#include <string>

using namespace bhsim;

namespace {

std::string replace(std::string text, const std::string& from,
                    const std::string& to) {
  const auto pos = text.find(from);
  REQUIRE(pos != std::string::npos);
  return text.replace(pos, from.size(), to);
}

}  // namespace

TEST_CASE("six built-in profiles with the measured thresholds") {
  const auto& all = builtin_profiles();
  REQUIRE(all.size() == 6);
  const std::pair<const char*, unsigned> expected[] = {
      {"cortex-a72", 2}, {"cortex-a76", 4}, {"cortex-a78ae", 5}, {"zen4", 16}};
  for (const auto& [name, thr] : expected) {
    const auto p = find_builtin_profile(name);
    REQUIRE(p);
    CHECK(p->btb_evict_threshold == thr);
  }
  CHECK(find_builtin_profile("gracemont"));
  CHECK(find_builtin_profile("redwood-cove"));
  CHECK_FALSE(find_builtin_profile("pentium"));
  for (const auto& p : all) CHECK_NOTHROW(validate(p));
}

TEST_CASE("A72 is a bias-free hybrid without T0 fallback") {
  const auto p = *find_builtin_profile("cortex-a72");
  CHECK(p.hybrid());
  CHECK(p.bias_free_enabled);
  CHECK_FALSE(p.fallback_to_t0);
  CHECK(p.phr_capacity == 4);
  CHECK(p.bst_index_lo == 4);
  CHECK(p.bst_index_hi == 15);
}

TEST_CASE("serialize and load round trip") {
  for (const auto& p : builtin_profiles()) {
    CAPTURE(p.name);
    CHECK(load_profile(serialize_profile(p)) == p);
  }
}

TEST_CASE("shipped profile files match the built-ins") {
  for (const auto& p : builtin_profiles()) {
    CAPTURE(p.name);
    const auto path = std::string(BHSIM_PROFILES_DIR) + "/" + p.name + ".conf";
    CHECK(resolve_profile(path) == p);
    CHECK(resolve_profile(p.name) == p);
  }
}

TEST_CASE("invalid profiles name the offending field") {
  const auto text = serialize_profile(*find_builtin_profile("cortex-a76"));
  auto field_of = [](const std::string& t) {
    try {
      load_profile(t);
    } catch (const ConfigError& e) {
      return e.field();
    }
    return std::string("<none>");
  };
  CHECK(field_of(replace(text, "bst_entries = 4096", "bst_entries = 4000"))
            .find("bst") != std::string::npos);
  CHECK(field_of(replace(text, "phr_footprint_bits = 4", "phr_footprint_bits = 3"))
            .find("phr_") != std::string::npos);
  CHECK(field_of(replace(text, "history_kind = pure_phr", "history_kind = gshare")) ==
        "history_kind");
  CHECK(field_of(text + "\n[profile]\nextra = 1\n") != "<none>");
  CHECK(field_of(replace(text, "fallback_to_t0 = true", "bogus_field = true")) !=
        "<none>");
  CHECK_THROWS_AS(resolve_profile("/nonexistent/profile.conf"), ConfigError);
}
