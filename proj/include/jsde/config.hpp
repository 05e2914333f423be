#pragma once

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <fstream>
#include <istream>
#include <iterator>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "jsde/errors.hpp"

namespace jsde {

// Typed INI documents. Grammar (see docs/config.md):
//   [section]            section names may contain dots, e.g. [measure.driver]
//   key = value          one per line, keys unique within a section
//   # or ; at line start comment
// Values: true/false, integers, reals, "quoted strings", bare strings,
// and lists [v1, v2, ...] of scalars.

using Scalar = std::variant<bool, std::int64_t, double, std::string>;

struct Value {
  std::vector<Scalar> items;
  bool list = false;

  bool operator==(const Value&) const = default;

  static Value scalar(Scalar s) { return Value{{std::move(s)}, false}; }
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

inline bool quoted(const std::string& s) { return s.size() >= 2 && s.front() == '"' && s.back() == '"'; }

inline Scalar parse_scalar(const std::string& raw) {
  const std::string s = trim(raw);
  if (quoted(s)) return s.substr(1, s.size() - 2);
  if (s == "true") return true;
  if (s == "false") return false;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  if (!s.empty()) {
    const char* p = first + (s[0] == '+' ? 1 : 0);
    std::int64_t i = 0;
    auto [ptr, ec] = std::from_chars(p, last, i);
    if (ptr == last && ec == std::errc()) return i;
    if (ptr == last && ec == std::errc::result_out_of_range) throw FormatError("integer out of range: " + s);
    double d = 0.0;
    auto [dptr, dec] = std::from_chars(p, last, d);
    if (dptr == last && dec == std::errc()) return d;
  }
  return s;
}

inline std::vector<std::string> split_list(const std::string& inner) {
  std::vector<std::string> out;
  std::string cur;
  bool in_quotes = false;
  for (char c : inner) {
    if (c == '"') in_quotes = !in_quotes;
    if (c == ',' && !in_quotes) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (in_quotes) throw FormatError("unterminated quote in list");
  out.push_back(cur);
  return out;
}

inline std::string format_real(double d) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, d);
  std::string s(buf, ptr);
  if (s.find_first_of(".ein") == std::string::npos) s += ".0";
  return s;
}

inline std::string format_scalar(const Scalar& s) {
  struct V {
    std::string operator()(bool b) const { return b ? "true" : "false"; }
    std::string operator()(std::int64_t i) const { return std::to_string(i); }
    std::string operator()(double d) const { return format_real(d); }
    std::string operator()(const std::string& str) const {
      // quote whenever the bare form would read back as something else
      const bool bare = !str.empty() && trim(str) == str && str.find_first_of(",[]\"#;=") == std::string::npos &&
                        std::holds_alternative<std::string>(parse_scalar(str));
      return bare ? str : "\"" + str + "\"";
    }
  };
  return std::visit(V{}, s);
}

}  // namespace detail

inline Value parse_value(const std::string& raw) {
  const std::string s = detail::trim(raw);
  if (!s.empty() && s.front() == '[') {
    if (s.back() != ']') throw FormatError("list is missing its closing ']'");
    Value v;
    v.list = true;
    const std::string inner = detail::trim(s.substr(1, s.size() - 2));
    if (inner.empty()) return v;
    for (const auto& item : detail::split_list(inner)) {
      if (detail::trim(item).empty()) throw FormatError("empty list item");
      v.items.push_back(detail::parse_scalar(item));
    }
    return v;
  }
  return Value::scalar(detail::parse_scalar(s));
}

inline std::string format_value(const Value& v) {
  if (!v.list) return v.items.empty() ? std::string("\"\"") : detail::format_scalar(v.items.front());
  std::string s = "[";
  for (std::size_t i = 0; i < v.items.size(); ++i) {
    if (i) s += ", ";
    s += detail::format_scalar(v.items[i]);
  }
  return s + "]";
}

struct ConfigEntry {
  std::string key;
  Value value;
  bool operator==(const ConfigEntry&) const = default;
};

struct ConfigSection {
  std::string name;
  std::vector<ConfigEntry> entries;

  bool operator==(const ConfigSection&) const = default;

  const Value* find(const std::string& key) const {
    for (const auto& e : entries) {
      if (e.key == key) return &e.value;
    }
    return nullptr;
  }
  bool has(const std::string& key) const { return find(key) != nullptr; }

  std::string field(const std::string& key) const { return "[" + name + "]." + key; }

  const Value& require(const std::string& key) const {
    const Value* v = find(key);
    if (!v) throw ConfigError("missing required key", field(key));
    return *v;
  }

  const Scalar& scalar(const std::string& key) const {
    const Value& v = require(key);
    if (v.list || v.items.size() != 1) throw ConfigError("expected a scalar, got a list", field(key));
    return v.items.front();
  }

  double real(const std::string& key) const {
    const Scalar& s = scalar(key);
    if (const auto* d = std::get_if<double>(&s)) return *d;
    if (const auto* i = std::get_if<std::int64_t>(&s)) return static_cast<double>(*i);
    throw ConfigError("expected a number", field(key));
  }
  double real(const std::string& key, double fallback) const { return has(key) ? real(key) : fallback; }

  std::int64_t integer(const std::string& key) const {
    const Scalar& s = scalar(key);
    if (const auto* i = std::get_if<std::int64_t>(&s)) return *i;
    throw ConfigError("expected an integer", field(key));
  }
  std::int64_t integer(const std::string& key, std::int64_t fallback) const {
    return has(key) ? integer(key) : fallback;
  }
  std::uint64_t count(const std::string& key, std::uint64_t fallback) const {
    if (!has(key)) return fallback;
    const std::int64_t i = integer(key);
    if (i < 0) throw ConfigError("must be non-negative", field(key));
    return static_cast<std::uint64_t>(i);
  }

  bool boolean(const std::string& key, bool fallback) const {
    if (!has(key)) return fallback;
    const Scalar& s = scalar(key);
    if (const auto* b = std::get_if<bool>(&s)) return *b;
    throw ConfigError("expected true or false", field(key));
  }

  std::string string(const std::string& key) const {
    const Scalar& s = scalar(key);
    if (const auto* str = std::get_if<std::string>(&s)) return *str;
    throw ConfigError("expected a string", field(key));
  }
  std::string string(const std::string& key, const std::string& fallback) const {
    return has(key) ? string(key) : fallback;
  }

  std::vector<double> reals(const std::string& key) const {
    const Value& v = require(key);
    std::vector<double> out;
    for (const auto& s : v.items) {
      if (const auto* d = std::get_if<double>(&s)) out.push_back(*d);
      else if (const auto* i = std::get_if<std::int64_t>(&s)) out.push_back(static_cast<double>(*i));
      else throw ConfigError("expected a list of numbers", field(key));
    }
    return out;
  }

  std::vector<std::string> strings(const std::string& key) const {
    const Value& v = require(key);
    std::vector<std::string> out;
    for (const auto& s : v.items) {
      if (const auto* str = std::get_if<std::string>(&s)) out.push_back(*str);
      else throw ConfigError("expected a list of strings", field(key));
    }
    return out;
  }

  /// Rejects keys outside the allowed set (catches typos).
  void allow_only(const std::vector<std::string>& keys) const {
    for (const auto& e : entries) {
      if (std::find(keys.begin(), keys.end(), e.key) == keys.end()) throw ConfigError("unknown key", field(e.key));
    }
  }
};

struct ConfigDoc {
  std::vector<ConfigSection> sections;

  bool operator==(const ConfigDoc&) const = default;

  const ConfigSection* find(const std::string& name) const {
    for (const auto& s : sections) {
      if (s.name == name) return &s;
    }
    return nullptr;
  }

  /// Sections named prefix.NAME, in file order.
  std::vector<const ConfigSection*> with_prefix(const std::string& prefix) const {
    std::vector<const ConfigSection*> out;
    for (const auto& s : sections) {
      if (s.name.size() > prefix.size() + 1 && s.name.compare(0, prefix.size(), prefix) == 0 &&
          s.name[prefix.size()] == '.') {
        out.push_back(&s);
      }
    }
    return out;
  }
};

inline ConfigDoc parse_config(std::istream& in) {
  namespace pt = boost::property_tree;
  const std::string text{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  // the ini reader drops empty sections and only reports some duplicates, so
  // section headers are collected here first
  std::vector<std::string> headers;
  {
    std::istringstream lines(text);
    std::string line;
    for (int n = 1; std::getline(lines, line); ++n) {
      const std::string t = detail::trim(line);
      if (t.size() < 2 || t.front() != '[' || t.back() != ']') continue;
      const std::string name = detail::trim(t.substr(1, t.size() - 2));
      if (std::find(headers.begin(), headers.end(), name) != headers.end()) {
        throw ConfigError("duplicate section name", {}, n);
      }
      headers.push_back(name);
    }
  }
  pt::ptree tree;
  try {
    std::istringstream body(text);
    pt::read_ini(body, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(e.message(), {}, static_cast<int>(e.line()));
  }
  for (const auto& [name, node] : tree) {
    if (std::find(headers.begin(), headers.end(), name) == headers.end()) {
      throw ConfigError("key outside any section", name);
    }
  }
  ConfigDoc doc;
  for (const auto& name : headers) {
    ConfigSection sec;
    sec.name = name;
    if (const auto node = tree.get_child_optional(pt::ptree::path_type(name, '\0'))) {
      for (const auto& [key, leaf] : *node) {
        try {
          sec.entries.push_back({key, parse_value(leaf.data())});
        } catch (const FormatError& e) {
          throw ConfigError(e.what(), sec.field(key));
        }
      }
    }
    doc.sections.push_back(std::move(sec));
  }
  return doc;
}

inline ConfigDoc parse_config_string(const std::string& text) {
  std::istringstream in(text);
  return parse_config(in);
}

inline ConfigDoc load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file", path);
  return parse_config(in);
}

/// Canonical text form; parse_config(serialize(d)) == d.
inline void serialize_config(std::ostream& os, const ConfigDoc& doc) {
  for (std::size_t i = 0; i < doc.sections.size(); ++i) {
    if (i) os << '\n';
    os << '[' << doc.sections[i].name << "]\n";
    for (const auto& e : doc.sections[i].entries) os << e.key << " = " << format_value(e.value) << '\n';
  }
}

inline std::string serialize_config(const ConfigDoc& doc) {
  std::ostringstream os;
  serialize_config(os, doc);
  return os.str();
}

}  // namespace jsde
