#ifndef RBK_KEYVALUE_HPP
#define RBK_KEYVALUE_HPP

#include <cctype>
#include <charconv>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "rbk/errors.hpp"

namespace rbk {

/// Configuration problem tied to a field and, when known, a source line.
class config_error : public configuration_error {
public:
  config_error(std::string source, int line, std::string field, const std::string& msg)
      : configuration_error(compose(source, line, field, msg)), source_(std::move(source)),
        line_(line), field_(std::move(field)) {}

  int line() const { return line_; }
  const std::string& field() const { return field_; }
  const std::string& source() const { return source_; }

private:
  static std::string compose(const std::string& source, int line, const std::string& field,
                             const std::string& msg) {
    std::string out = source;
    if (line > 0) out += ":" + std::to_string(line);
    if (!out.empty()) out += ": ";
    if (!field.empty()) out += "field '" + field + "': ";
    return out + msg;
  }

  std::string source_;
  int line_;
  std::string field_;
};

/// Scalar or one-level array value of a key = value line.
struct KvValue {
  enum class Kind { Number, String, Bool, Array };
  Kind kind = Kind::String;
  double number = 0.0;
  std::string text; ///< string payload, or the raw token for numbers
  bool flag = false;
  std::vector<KvValue> items;
  int line = 0;
};

inline const char* to_string(KvValue::Kind k) {
  switch (k) {
  case KvValue::Kind::Number: return "number";
  case KvValue::Kind::String: return "string";
  case KvValue::Kind::Bool: return "boolean";
  case KvValue::Kind::Array: return "array";
  }
  return "?";
}

/// Parsed `[section]` / `key = value` text. Keys are stored fully qualified
/// ("section.key"); dotted keys outside any section are accepted as well.
/// Every key read through the accessors is marked as used so leftovers can be
/// reported as unknown fields.
class KvDocument {
public:
  static KvDocument parse(std::istream& in, const std::string& source = "config") {
    KvDocument doc;
    doc.source_ = source;
    std::string raw, section;
    int line = 0;
    while (std::getline(in, raw)) {
      ++line;
      Cursor c{raw, 0, line, source};
      c.skip_space();
      if (c.done() || c.peek() == '#') continue;
      if (c.peek() == '[') {
        ++c.pos;
        c.skip_space();
        section = c.identifier();
        c.skip_space();
        if (section.empty() || c.done() || c.peek() != ']')
          c.fail("", "malformed section header");
        ++c.pos;
        c.expect_end("");
        continue;
      }
      const std::string key = c.identifier();
      if (key.empty()) c.fail("", "expected 'key = value'");
      const std::string full = section.empty() ? key : section + "." + key;
      c.skip_space();
      if (c.done() || c.peek() != '=') c.fail(full, "expected '=' after key");
      ++c.pos;
      c.skip_space();
      KvValue v = c.value(full, true);
      c.expect_end(full);
      if (doc.values_.count(full))
        c.fail(full, "duplicate field (first set on line " +
                         std::to_string(doc.values_.at(full).line) + ")");
      doc.values_.emplace(full, std::move(v));
    }
    return doc;
  }

  static KvDocument parse_string(const std::string& text, const std::string& source = "config") {
    std::istringstream in(text);
    return parse(in, source);
  }

  static KvDocument load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw config_error(path, 0, "", "cannot open config file");
    return parse(in, path);
  }

  const std::string& source() const { return source_; }
  bool has(const std::string& key) const { return values_.count(key) > 0; }
  int line_of(const std::string& key) const {
    auto it = values_.find(key);
    return it == values_.end() ? 0 : it->second.line;
  }

  [[noreturn]] void fail(const std::string& key, const std::string& msg) const {
    throw config_error(source_, line_of(key), key, msg);
  }

  double number(const std::string& key, double fallback) const {
    const KvValue* v = find(key);
    if (!v) return fallback;
    require_kind(key, *v, KvValue::Kind::Number);
    return v->number;
  }

  std::size_t count(const std::string& key, std::size_t fallback) const {
    const KvValue* v = find(key);
    if (!v) return fallback;
    return to_count(key, *v);
  }

  std::string string(const std::string& key, const std::string& fallback) const {
    const KvValue* v = find(key);
    if (!v) return fallback;
    require_kind(key, *v, KvValue::Kind::String);
    return v->text;
  }

  /// The string payload when key holds a string; nullopt for other kinds.
  std::optional<std::string> string_if(const std::string& key) const {
    const KvValue* v = find(key);
    if (!v || v->kind != KvValue::Kind::String) return std::nullopt;
    return v->text;
  }

  bool boolean(const std::string& key, bool fallback) const {
    const KvValue* v = find(key);
    if (!v) return fallback;
    require_kind(key, *v, KvValue::Kind::Bool);
    return v->flag;
  }

  std::vector<double> numbers(const std::string& key, std::vector<double> fallback) const {
    const KvValue* v = find(key);
    if (!v) return fallback;
    std::vector<double> out;
    for (const auto& item : array_items(key, *v)) {
      require_kind(key, item, KvValue::Kind::Number);
      out.push_back(item.number);
    }
    return out;
  }

  std::vector<std::size_t> counts(const std::string& key, std::vector<std::size_t> fallback) const {
    const KvValue* v = find(key);
    if (!v) return fallback;
    std::vector<std::size_t> out;
    for (const auto& item : array_items(key, *v)) out.push_back(to_count(key, item));
    return out;
  }

  std::vector<std::string> strings(const std::string& key, std::vector<std::string> fallback) const {
    const KvValue* v = find(key);
    if (!v) return fallback;
    std::vector<std::string> out;
    for (const auto& item : array_items(key, *v)) {
      require_kind(key, item, KvValue::Kind::String);
      out.push_back(item.text);
    }
    return out;
  }

  /// Keys present in the text but never read.
  std::vector<std::string> unused() const {
    std::vector<std::string> out;
    for (const auto& [k, v] : values_)
      if (!used_.count(k)) out.push_back(k);
    return out;
  }

  void reject_unused() const {
    const auto left = unused();
    if (!left.empty()) fail(left.front(), "unknown field");
  }

private:
  struct Cursor {
    const std::string& s;
    std::size_t pos;
    int line;
    const std::string& source;

    bool done() const { return pos >= s.size(); }
    char peek() const { return s[pos]; }
    void skip_space() {
      while (!done() && std::isspace(static_cast<unsigned char>(peek()))) ++pos;
    }
    [[noreturn]] void fail(const std::string& key, const std::string& msg) const {
      throw config_error(source, line, key, msg);
    }
    void expect_end(const std::string& key) {
      skip_space();
      if (!done() && peek() != '#') fail(key, "unexpected text '" + s.substr(pos) + "'");
    }
    std::string identifier() {
      const std::size_t start = pos;
      while (!done()) {
        const char ch = peek();
        if (std::isalnum(static_cast<unsigned char>(ch)) || ch == '_' || ch == '.' || ch == '-')
          ++pos;
        else
          break;
      }
      return s.substr(start, pos - start);
    }
    KvValue value(const std::string& key, bool allow_array) {
      KvValue v;
      v.line = line;
      if (done()) fail(key, "missing value");
      const char ch = peek();
      if (ch == '"') {
        ++pos;
        v.kind = KvValue::Kind::String;
        while (true) {
          if (done()) fail(key, "unterminated string");
          char c = s[pos++];
          if (c == '"') break;
          if (c == '\\') {
            if (done()) fail(key, "unterminated string");
            c = s[pos++];
            if (c == 'n') c = '\n';
            else if (c == 't') c = '\t';
          }
          v.text.push_back(c);
        }
        return v;
      }
      if (ch == '[') {
        if (!allow_array) fail(key, "nested arrays are not supported");
        ++pos;
        v.kind = KvValue::Kind::Array;
        skip_space();
        if (!done() && peek() == ']') {
          ++pos;
          return v;
        }
        while (true) {
          skip_space();
          v.items.push_back(value(key, false));
          skip_space();
          if (done()) fail(key, "unterminated array");
          if (peek() == ',') {
            ++pos;
            continue;
          }
          if (peek() == ']') {
            ++pos;
            return v;
          }
          fail(key, "expected ',' or ']' in array");
        }
      }
      // bare token: boolean, number, or unquoted word
      const std::size_t start = pos;
      while (!done() && !std::isspace(static_cast<unsigned char>(peek())) && peek() != ',' &&
             peek() != ']' && peek() != '#')
        ++pos;
      v.text = s.substr(start, pos - start);
      if (v.text.empty()) fail(key, "missing value");
      if (v.text == "true" || v.text == "false") {
        v.kind = KvValue::Kind::Bool;
        v.flag = v.text == "true";
        return v;
      }
      const char* first = v.text.data();
      const char* last = first + v.text.size();
      auto res = std::from_chars(first + (*first == '+' ? 1 : 0), last, v.number);
      if (res.ec == std::errc() && res.ptr == last) {
        v.kind = KvValue::Kind::Number;
        return v;
      }
      if (std::isalpha(static_cast<unsigned char>(v.text.front()))) {
        v.kind = KvValue::Kind::String;
        return v;
      }
      fail(key, "cannot parse value '" + v.text + "'");
    }
  };

  const KvValue* find(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) return nullptr;
    used_.insert(key);
    return &it->second;
  }

  void require_kind(const std::string& key, const KvValue& v, KvValue::Kind want) const {
    if (v.kind != want)
      fail(key, std::string("expected a ") + to_string(want) + ", got " + to_string(v.kind) +
                    (v.text.empty() ? "" : " '" + v.text + "'"));
  }

  std::size_t to_count(const std::string& key, const KvValue& v) const {
    require_kind(key, v, KvValue::Kind::Number);
    if (!(v.number >= 0.0) || v.number != double(std::size_t(v.number)))
      fail(key, "expected a nonnegative integer, got '" + v.text + "'");
    return std::size_t(v.number);
  }

  const std::vector<KvValue>& array_items(const std::string& key, const KvValue& v) const {
    require_kind(key, v, KvValue::Kind::Array);
    return v.items;
  }

  std::string source_;
  std::map<std::string, KvValue> values_;
  mutable std::set<std::string> used_;
};

} // namespace rbk

#endif // RBK_KEYVALUE_HPP
