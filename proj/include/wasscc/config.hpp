#pragma once

#include <map>
#include <string>
#include <vector>

#include "wasscc/individual.hpp"
#include "wasscc/joint_rhs.hpp"

namespace wasscc {

struct ConfigError {
  int line;  // 0 for errors without a source line (e.g. overrides)
  std::string message;
};

// Carries every accumulated config error, not just the first one.
class ConfigParseError : public std::runtime_error {
 public:
  explicit ConfigParseError(std::vector<ConfigError> errs)
      : std::runtime_error(join(errs)), errors(std::move(errs)) {}
  std::vector<ConfigError> errors;

 private:
  static std::string join(const std::vector<ConfigError>& errs);
};

struct ConfigValue {
  int line = 0;
  bool is_matrix = false;
  std::string scalar;                       // trimmed raw text
  std::vector<std::vector<double>> matrix;  // row-per-line block
};

using ConfigSection = std::map<std::string, ConfigValue>;

struct ConfigDoc {
  std::map<std::string, ConfigSection> sections;

  const ConfigValue* find(const std::string& section, const std::string& key) const {
    auto s = sections.find(section);
    if (s == sections.end()) return nullptr;
    auto k = s->second.find(key);
    return k == s->second.end() ? nullptr : &k->second;
  }
};

// Line-oriented `key = value` grammar with [section] headers, `#` comments,
// comma-separated vectors and row-per-line matrix blocks introduced by a
// bare `key =`.  Grammar-level problems (bad header, missing '=', stray
// rows) are appended to `errors`; the rest of the document is still parsed.
ConfigDoc parse_document(const std::string& text, std::vector<ConfigError>& errors);

// Typed, error-accumulating access to a parsed document.
class ConfigReader {
 public:
  ConfigReader(const ConfigDoc& doc, std::vector<ConfigError>& errors)
      : doc_(doc), errors_(errors) {}

  bool has(const std::string& section, const std::string& key) const {
    return doc_.find(section, key) != nullptr;
  }
  double number(const std::string& section, const std::string& key,
                double fallback, bool required);
  std::uint64_t integer(const std::string& section, const std::string& key,
                        std::uint64_t fallback, bool required);
  std::string word(const std::string& section, const std::string& key,
                   const std::string& fallback, bool required);
  std::vector<double> vector(const std::string& section, const std::string& key,
                             bool required);
  std::vector<std::vector<double>> matrix(const std::string& section,
                                          const std::string& key, bool required);

  // Flags keys not in `allowed` (and, when `allowed_sections` is given,
  // whole unknown sections).
  void check_known_keys(const std::string& section,
                        const std::vector<std::string>& allowed);
  void check_known_sections(const std::vector<std::string>& allowed);

  void error(int line, const std::string& message) {
    errors_.push_back({line, message});
  }
  int line_of(const std::string& section, const std::string& key) const {
    const ConfigValue* v = doc_.find(section, key);
    return v ? v->line : 0;
  }

 private:
  const ConfigDoc& doc_;
  std::vector<ConfigError>& errors_;
};

// Instance builders; both accumulate errors instead of bailing at the first
// problem and throw ConfigParseError only at the end.
PortfolioInstance load_portfolio(const ConfigDoc& doc);
ProductionInstance load_production(const ConfigDoc& doc);

// `section.key=value` override applied on top of a parsed document.
void apply_override(ConfigDoc& doc, const std::string& spec,
                    std::vector<ConfigError>& errors);

}  // namespace wasscc
