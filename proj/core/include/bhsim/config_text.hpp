#pragma once

// Minimal sectioned key/value text format shared by profile and scenario
// files. See docs/config.md for the grammar.

#include <bhsim/types.hpp>

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace bhsim::config {

struct Value {
  std::string text;
  int line = 0;
};

class Document {
 public:
  /// Keys are stored fully qualified as "section.key".
  void set(std::string key, Value value);

  bool contains(const std::string& key) const;
  const Value* find(const std::string& key) const;
  const std::map<std::string, Value>& entries() const { return entries_; }

  /// Removes and returns a key; used so that leftover keys can be reported
  /// as unknown fields.
  std::optional<Value> take(const std::string& key);

  /// Throws ConfigError for the first key under `prefix` not consumed yet.
  void reject_unknown(std::string_view prefix) const;

 private:
  std::map<std::string, Value> entries_;
};

Document parse(std::string_view text);

std::uint64_t parse_uint(const std::string& field, const Value& v);
double parse_double(const std::string& field, const Value& v);
bool parse_bool(const std::string& field, const Value& v);
std::vector<std::uint64_t> parse_uint_list(const std::string& field,
                                           const Value& v);
std::vector<std::string> parse_string_list(const Value& v);

std::string format_hex(std::uint64_t value);
std::string format_bool(bool value);
std::string format_list(const std::vector<std::uint64_t>& values, bool hex);

}  // namespace bhsim::config
