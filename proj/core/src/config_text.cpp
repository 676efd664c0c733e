#include <bhsim/config_text.hpp>

#include <cerrno>
#include <cstdlib>
#include <sstream>

namespace bhsim {

ConfigError::ConfigError(std::string field, const std::string& message,
                         int line)
    : std::runtime_error(
          (line > 0 ? "line " + std::to_string(line) + ": " : std::string()) +
          (field.empty() ? message : field + ": " + message)),
      field_(std::move(field)),
      line_(line) {}

std::string_view to_string(BranchKind kind) {
  switch (kind) {
    case BranchKind::Conditional: return "conditional";
    case BranchKind::Indirect: return "indirect";
    case BranchKind::DirectUnconditional: return "direct";
    case BranchKind::Call: return "call";
    case BranchKind::Return: return "return";
    case BranchKind::Svc: return "svc";
  }
  return "?";
}

std::string to_string(const BranchOutcome& outcome) {
  switch (outcome.kind) {
    case BranchOutcome::Kind::Taken: return "T";
    case BranchOutcome::Kind::NotTaken: return "NT";
    case BranchOutcome::Kind::Target: return config::format_hex(outcome.target);
  }
  return "?";
}

namespace config {
namespace {

std::string_view trim(std::string_view s) {
  const auto* ws = " \t\r";
  const auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(ws);
  return s.substr(b, e - b + 1);
}

bool valid_name(std::string_view s) {
  if (s.empty()) return false;
  for (char c : s) {
    const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') ||
                    (c >= '0' && c <= '9') || c == '_' || c == '-' || c == '.';
    if (!ok) return false;
  }
  return true;
}

}  // namespace

void Document::set(std::string key, Value value) {
  entries_[std::move(key)] = std::move(value);
}

bool Document::contains(const std::string& key) const {
  return entries_.count(key) != 0;
}

const Value* Document::find(const std::string& key) const {
  auto it = entries_.find(key);
  return it == entries_.end() ? nullptr : &it->second;
}

std::optional<Value> Document::take(const std::string& key) {
  auto it = entries_.find(key);
  if (it == entries_.end()) return std::nullopt;
  Value v = std::move(it->second);
  entries_.erase(it);
  return v;
}

void Document::reject_unknown(std::string_view prefix) const {
  for (const auto& [key, value] : entries_) {
    if (key.compare(0, prefix.size(), prefix) == 0) {
      throw ConfigError(key, "unknown field", value.line);
    }
  }
}

Document parse(std::string_view text) {
  Document doc;
  std::string section;
  int line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    std::string_view line = text.substr(pos, nl - pos);
    pos = nl + 1;
    ++line_no;

    if (auto hash = line.find('#'); hash != std::string_view::npos) {
      line = line.substr(0, hash);
    }
    line = trim(line);
    if (line.empty()) {
      if (nl == text.size()) break;
      continue;
    }

    if (line.front() == '[') {
      if (line.back() != ']') {
        throw ConfigError("", "unterminated section header", line_no);
      }
      auto name = trim(line.substr(1, line.size() - 2));
      if (!valid_name(name)) {
        throw ConfigError("", "invalid section name '" + std::string(name) + "'",
                          line_no);
      }
      section = std::string(name);
    } else {
      auto eq = line.find('=');
      if (eq == std::string_view::npos) {
        throw ConfigError("", "expected 'key = value'", line_no);
      }
      auto key = trim(line.substr(0, eq));
      auto value = trim(line.substr(eq + 1));
      if (!valid_name(key)) {
        throw ConfigError("", "invalid key '" + std::string(key) + "'", line_no);
      }
      if (section.empty()) {
        throw ConfigError(std::string(key), "key outside of any section",
                          line_no);
      }
      std::string full = section + "." + std::string(key);
      if (doc.contains(full)) {
        throw ConfigError(full, "duplicate key", line_no);
      }
      doc.set(std::move(full), Value{std::string(value), line_no});
    }
    if (nl == text.size()) break;
  }
  return doc;
}

std::uint64_t parse_uint(const std::string& field, const Value& v) {
  const std::string& s = v.text;
  if (s.empty() || s.front() == '-' || s.front() == '+') {
    throw ConfigError(field, "expected unsigned integer, got '" + s + "'",
                      v.line);
  }
  errno = 0;
  char* end = nullptr;
  const bool hex = s.size() > 2 && s[0] == '0' && (s[1] == 'x' || s[1] == 'X');
  const auto value = std::strtoull(s.c_str(), &end, hex ? 16 : 10);
  if (errno != 0 || end == s.c_str() || *end != '\0') {
    throw ConfigError(field, "expected unsigned integer, got '" + s + "'",
                      v.line);
  }
  return value;
}

double parse_double(const std::string& field, const Value& v) {
  errno = 0;
  char* end = nullptr;
  const double value = std::strtod(v.text.c_str(), &end);
  if (errno != 0 || end == v.text.c_str() || *end != '\0') {
    throw ConfigError(field, "expected number, got '" + v.text + "'", v.line);
  }
  return value;
}

bool parse_bool(const std::string& field, const Value& v) {
  if (v.text == "true") return true;
  if (v.text == "false") return false;
  throw ConfigError(field, "expected true/false, got '" + v.text + "'", v.line);
}

std::vector<std::uint64_t> parse_uint_list(const std::string& field,
                                           const Value& v) {
  std::vector<std::uint64_t> out;
  for (const auto& item : parse_string_list(v)) {
    out.push_back(parse_uint(field, Value{item, v.line}));
  }
  return out;
}

std::vector<std::string> parse_string_list(const Value& v) {
  std::vector<std::string> out;
  std::string_view rest = v.text;
  while (!trim(rest).empty()) {
    auto comma = rest.find(',');
    auto item = trim(rest.substr(0, comma));
    if (!item.empty()) out.emplace_back(item);
    if (comma == std::string_view::npos) break;
    rest = rest.substr(comma + 1);
  }
  return out;
}

std::string format_hex(std::uint64_t value) {
  std::ostringstream os;
  os << "0x" << std::hex << value;
  return os.str();
}

std::string format_bool(bool value) { return value ? "true" : "false"; }

std::string format_list(const std::vector<std::uint64_t>& values, bool hex) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out += ", ";
    out += hex ? format_hex(values[i]) : std::to_string(values[i]);
  }
  return out;
}

}  // namespace config
}  // namespace bhsim
