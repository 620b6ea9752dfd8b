#include "lrgq/config.hpp"

#include <cctype>
#include <cerrno>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace lrgq {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::string strip_comment(const std::string& s) {
  const auto pos = s.find_first_of("#;");
  return pos == std::string::npos ? s : s.substr(0, pos);
}

bool valid_name(const std::string& s) {
  if (s.empty()) return false;
  for (char c : s)
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == '.')) return false;
  return true;
}

}  // namespace

Config Config::parse(const std::string& text, const std::string& file) {
  Config cfg;
  cfg.file_ = file;
  std::istringstream in(text);
  std::string line, section;
  Index lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(strip_comment(line));
    if (t.empty()) continue;
    if (t.front() == '[') {
      if (t.back() != ']') throw ParseError(file, lineno, "unterminated section header");
      section = trim(t.substr(1, t.size() - 2));
      if (!valid_name(section)) throw ParseError(file, lineno, "invalid section name '" + section + "'");
      cfg.sections_[section];
      continue;
    }
    const auto eq = t.find('=');
    if (eq == std::string::npos) throw ParseError(file, lineno, "expected 'key = value'");
    const std::string key = trim(t.substr(0, eq));
    const std::string value = trim(t.substr(eq + 1));
    if (!valid_name(key)) throw ParseError(file, lineno, "invalid key '" + key + "'");
    auto& entries = cfg.sections_[section];
    for (const auto& [k, e] : entries)
      if (k == key)
        throw ParseError(file, lineno, "duplicate key '" + key + "' (first set on line " + std::to_string(e.line) + ")");
    entries.push_back({key, Entry{value, lineno}});
  }
  return cfg;
}

Config Config::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str(), path.string());
}

const Config::Entry* Config::find(const std::string& section, const std::string& key) const {
  const auto it = sections_.find(section);
  if (it == sections_.end()) return nullptr;
  for (const auto& [k, e] : it->second)
    if (k == key) return &e;
  return nullptr;
}

void Config::fail(const Entry& e, const std::string& section, const std::string& key, const std::string& what) const {
  throw ParseError(file_, e.line, "[" + section + "] " + key + ": " + what + " (got '" + e.value + "')");
}

Index Config::line_of(const std::string& section, const std::string& key) const {
  const Entry* e = find(section, key);
  return e ? e->line : 0;
}

bool Config::has(const std::string& section, const std::string& key) const { return find(section, key) != nullptr; }

std::string Config::get_string(const std::string& section, const std::string& key, const std::string& fallback) const {
  const Entry* e = find(section, key);
  return e ? e->value : fallback;
}

double Config::get_double(const std::string& section, const std::string& key, double fallback) const {
  const Entry* e = find(section, key);
  if (!e) return fallback;
  char* end = nullptr;
  errno = 0;
  const double v = std::strtod(e->value.c_str(), &end);
  if (e->value.empty() || *end != '\0' || errno == ERANGE) fail(*e, section, key, "expected a number");
  return v;
}

Index Config::get_int(const std::string& section, const std::string& key, Index fallback) const {
  const Entry* e = find(section, key);
  if (!e) return fallback;
  char* end = nullptr;
  errno = 0;
  const long long v = std::strtoll(e->value.c_str(), &end, 10);
  if (e->value.empty() || *end != '\0' || errno == ERANGE) fail(*e, section, key, "expected an integer");
  return static_cast<Index>(v);
}

bool Config::get_bool(const std::string& section, const std::string& key, bool fallback) const {
  const Entry* e = find(section, key);
  if (!e) return fallback;
  const std::string& v = e->value;
  if (v == "true" || v == "yes" || v == "on" || v == "1") return true;
  if (v == "false" || v == "no" || v == "off" || v == "0") return false;
  fail(*e, section, key, "expected a boolean");
}

std::vector<std::string> Config::get_list(const std::string& section, const std::string& key,
                                          const std::vector<std::string>& fallback) const {
  const Entry* e = find(section, key);
  if (!e) return fallback;
  std::vector<std::string> out;
  std::string cur;
  for (char c : e->value + ",") {
    if (c == ',') {
      const std::string item = trim(cur);
      if (item.empty()) fail(*e, section, key, "empty list item");
      out.push_back(item);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  return out;
}

std::vector<double> Config::get_doubles(const std::string& section, const std::string& key,
                                        const std::vector<double>& fallback) const {
  const Entry* e = find(section, key);
  if (!e) return fallback;
  std::vector<double> out;
  for (const auto& item : get_list(section, key, {})) {
    char* end = nullptr;
    const double v = std::strtod(item.c_str(), &end);
    if (*end != '\0') fail(*e, section, key, "expected a list of numbers");
    out.push_back(v);
  }
  return out;
}

void Config::set(const std::string& section, const std::string& key, const std::string& value) {
  auto& entries = sections_[section];
  for (auto& [k, e] : entries)
    if (k == key) {
      e.value = value;
      return;
    }
  entries.push_back({key, Entry{value, 0}});
}

std::vector<std::string> Config::keys(const std::string& section) const {
  std::vector<std::string> out;
  const auto it = sections_.find(section);
  if (it != sections_.end())
    for (const auto& [k, e] : it->second) out.push_back(k);
  return out;
}

}  // namespace lrgq
