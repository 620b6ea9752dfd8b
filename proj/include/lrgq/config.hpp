#pragma once

// key = value configuration with [section] headers. '#' and ';' start comments.
// Keys before the first header belong to the "" section.

#include "lrgq/io.hpp"

#include <map>

namespace lrgq {

class Config {
 public:
  static Config parse(const std::string& text, const std::string& file = "<string>");
  static Config load(const std::filesystem::path& path);

  bool has(const std::string& section, const std::string& key) const;
  std::string get_string(const std::string& section, const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& section, const std::string& key, double fallback) const;
  Index get_int(const std::string& section, const std::string& key, Index fallback) const;
  bool get_bool(const std::string& section, const std::string& key, bool fallback) const;
  std::vector<std::string> get_list(const std::string& section, const std::string& key,
                                    const std::vector<std::string>& fallback) const;
  std::vector<double> get_doubles(const std::string& section, const std::string& key,
                                  const std::vector<double>& fallback) const;

  /// Overrides (or adds) a value, as from a command-line flag.
  void set(const std::string& section, const std::string& key, const std::string& value);

  const std::string& file() const { return file_; }
  /// Line a key was read from (0 if absent or set programmatically).
  Index line_of(const std::string& section, const std::string& key) const;
  /// Keys present in a section, in file order.
  std::vector<std::string> keys(const std::string& section) const;

 private:
  struct Entry {
    std::string value;
    Index line = 0;
  };
  const Entry* find(const std::string& section, const std::string& key) const;
  [[noreturn]] void fail(const Entry& e, const std::string& section, const std::string& key,
                         const std::string& what) const;

  std::string file_;
  std::map<std::string, std::vector<std::pair<std::string, Entry>>> sections_;
};

}  // namespace lrgq
