#include "wasscc/config.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <sstream>

namespace wasscc {

namespace {

std::string trim(const std::string& s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

bool parse_double(const std::string& s, double& out) {
  const std::string t = trim(s);
  if (t.empty()) return false;
  char* end = nullptr;
  out = std::strtod(t.c_str(), &end);
  return end == t.c_str() + t.size() && std::isfinite(out);
}

bool parse_row(const std::string& line, std::vector<double>& row) {
  row.clear();
  std::string piece;
  std::istringstream in(line);
  // accept both comma- and whitespace-separated numbers
  std::string cleaned = line;
  for (char& c : cleaned)
    if (c == ',') c = ' ';
  std::istringstream tokens(cleaned);
  while (tokens >> piece) {
    double v;
    if (!parse_double(piece, v)) return false;
    row.push_back(v);
  }
  return !row.empty();
}

}  // namespace

std::string ConfigParseError::join(const std::vector<ConfigError>& errs) {
  std::ostringstream out;
  out << errs.size() << " config error(s)";
  for (const auto& e : errs) out << "\n  line " << e.line << ": " << e.message;
  return out.str();
}

ConfigDoc parse_document(const std::string& text, std::vector<ConfigError>& errors) {
  ConfigDoc doc;
  std::string section = "global";
  std::istringstream in(text);
  std::string raw;
  int lineno = 0;
  ConfigValue* open_matrix = nullptr;

  while (std::getline(in, raw)) {
    ++lineno;
    const std::size_t hash = raw.find('#');
    if (hash != std::string::npos) raw.erase(hash);
    const std::string line = trim(raw);
    if (line.empty()) {
      open_matrix = nullptr;
      continue;
    }
    if (line.front() == '[') {
      open_matrix = nullptr;
      if (line.back() != ']' || line.size() < 3) {
        errors.push_back({lineno, "malformed section header '" + line + "'"});
        continue;
      }
      section = trim(line.substr(1, line.size() - 2));
      doc.sections[section];  // a section may legitimately stay empty
      continue;
    }
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos) {
      if (open_matrix) {
        std::vector<double> row;
        if (!parse_row(line, row)) {
          errors.push_back({lineno, "matrix row is not a list of numbers: '" + line + "'"});
        } else {
          open_matrix->matrix.push_back(std::move(row));
        }
        continue;
      }
      errors.push_back({lineno, "expected 'key = value' but got '" + line + "'"});
      continue;
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) {
      errors.push_back({lineno, "missing key before '='"});
      open_matrix = nullptr;
      continue;
    }
    ConfigValue& slot = doc.sections[section][key];
    if (slot.line != 0)
      errors.push_back({lineno, "duplicate key '" + key + "' in [" + section + "]"});
    slot.line = lineno;
    slot.scalar = value;
    if (value.empty()) {
      slot.is_matrix = true;  // block of rows follows
      open_matrix = &slot;
    } else {
      open_matrix = nullptr;
    }
  }
  return doc;
}

double ConfigReader::number(const std::string& section, const std::string& key,
                            double fallback, bool required) {
  const ConfigValue* v = doc_.find(section, key);
  if (!v) {
    if (required) error(0, "missing required key '" + section + "." + key + "'");
    return fallback;
  }
  double out;
  if (v->is_matrix || !parse_double(v->scalar, out)) {
    error(v->line, "key '" + key + "' must be a number");
    return fallback;
  }
  return out;
}

std::uint64_t ConfigReader::integer(const std::string& section, const std::string& key,
                                    std::uint64_t fallback, bool required) {
  const double d = number(section, key, static_cast<double>(fallback), required);
  if (d < 0 || d != std::floor(d)) {
    const ConfigValue* v = doc_.find(section, key);
    error(v ? v->line : 0, "key '" + key + "' must be a nonnegative integer");
    return fallback;
  }
  return static_cast<std::uint64_t>(d);
}

std::string ConfigReader::word(const std::string& section, const std::string& key,
                               const std::string& fallback, bool required) {
  const ConfigValue* v = doc_.find(section, key);
  if (!v) {
    if (required) error(0, "missing required key '" + section + "." + key + "'");
    return fallback;
  }
  if (v->is_matrix || v->scalar.empty()) {
    error(v->line, "key '" + key + "' must be a word");
    return fallback;
  }
  return v->scalar;
}

std::vector<double> ConfigReader::vector(const std::string& section,
                                         const std::string& key, bool required) {
  const ConfigValue* v = doc_.find(section, key);
  if (!v) {
    if (required) error(0, "missing required key '" + section + "." + key + "'");
    return {};
  }
  std::vector<double> row;
  if (v->is_matrix || !parse_row(v->scalar, row)) {
    error(v->line, "key '" + key + "' must be a comma-separated list of numbers");
    return {};
  }
  return row;
}

std::vector<std::vector<double>> ConfigReader::matrix(const std::string& section,
                                                      const std::string& key,
                                                      bool required) {
  const ConfigValue* v = doc_.find(section, key);
  if (!v) {
    if (required) error(0, "missing required key '" + section + "." + key + "'");
    return {};
  }
  if (!v->is_matrix || v->matrix.empty()) {
    error(v->line, "key '" + key + "' must introduce a row-per-line matrix block");
    return {};
  }
  const std::size_t cols = v->matrix.front().size();
  for (const auto& row : v->matrix)
    if (row.size() != cols) {
      error(v->line, "matrix '" + key + "' has ragged rows");
      return {};
    }
  return v->matrix;
}

void ConfigReader::check_known_keys(const std::string& section,
                                    const std::vector<std::string>& allowed) {
  auto s = doc_.sections.find(section);
  if (s == doc_.sections.end()) return;
  for (const auto& [key, value] : s->second) {
    bool known = false;
    for (const auto& a : allowed)
      if (a == key) known = true;
    if (!known)
      error(value.line, "unknown key '" + key + "' in section [" + section + "]");
  }
}

void ConfigReader::check_known_sections(const std::vector<std::string>& allowed) {
  for (const auto& [name, sec] : doc_.sections) {
    bool known = false;
    for (const auto& a : allowed)
      if (a == name) known = true;
    if (!known) {
      const int line = sec.empty() ? 0 : sec.begin()->second.line;
      error(line, "unknown section [" + name + "]");
    }
  }
}

namespace {

AmbiguitySpec load_ambiguity(ConfigReader& r, NormConvention norm) {
  const double eps = r.number("ambiguity", "eps", 0.15, true);
  const double delta = r.number("ambiguity", "delta", 0.0, true);
  r.check_known_keys("ambiguity", {"eps", "delta"});
  double eps_ok = eps;
  if (!(eps > 0.0 && eps < 1.0)) {
    r.error(r.line_of("ambiguity", "eps"),
            "ambiguity.eps = " + std::to_string(eps) + " violates eps in (0, 1)");
    eps_ok = 0.15;
  }
  double delta_ok = delta;
  if (!(delta >= 0.0)) {
    r.error(r.line_of("ambiguity", "delta"), "ambiguity.delta must be >= 0");
    delta_ok = 0.0;
  }
  return AmbiguitySpec(delta_ok, ProbLevel(eps_ok), norm);
}

}  // namespace

PortfolioInstance load_portfolio(const ConfigDoc& doc) {
  std::vector<ConfigError> errors;
  ConfigReader r(doc, errors);

  const auto means = r.vector("portfolio", "means", true);
  const auto cov_rows = r.matrix("portfolio", "covariance", true);
  const double eta = r.number("portfolio", "eta", 0.0, true);
  r.check_known_keys("portfolio", {"means", "covariance", "eta", "names"});

  AmbiguitySpec amb = load_ambiguity(r, NormConvention::kSigmaWeighted);

  PortfolioInstance inst{Eigen::VectorXd(), Eigen::MatrixXd(), eta, amb, {}};
  const std::size_t n = means.size();
  if (n == 0) errors.push_back({0, "portfolio.means must not be empty"});
  if (cov_rows.size() != n || (n > 0 && cov_rows.front().size() != n)) {
    const ConfigValue* v = doc.find("portfolio", "covariance");
    errors.push_back({v ? v->line : 0, "portfolio.covariance must be " +
                                           std::to_string(n) + "x" +
                                           std::to_string(n)});
  } else {
    inst.mean_returns = Eigen::Map<const Eigen::VectorXd>(means.data(), n);
    inst.covariance.resize(n, n);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) inst.covariance(i, j) = cov_rows[i][j];
  }
  if (const ConfigValue* v = doc.find("portfolio", "names")) {
    std::istringstream in(v->scalar);
    std::string name;
    while (std::getline(in, name, ',')) {
      const std::string t = trim(name);
      if (!t.empty()) inst.asset_names.push_back(t);
    }
    if (inst.asset_names.size() != n)
      errors.push_back({v->line, "portfolio.names must list one name per asset"});
  }
  if (!errors.empty()) throw ConfigParseError(std::move(errors));
  try {
    inst.validate();
  } catch (const std::exception& e) {
    throw ConfigParseError({{0, e.what()}});
  }
  return inst;
}

ProductionInstance load_production(const ConfigDoc& doc) {
  std::vector<ConfigError> errors;
  ConfigReader r(doc, errors);

  const auto cover = r.matrix("production", "coverage", true);
  const auto costs = r.vector("production", "costs", true);
  const double capacity = r.number("production", "capacity", 0.0, true);
  const auto mean = r.vector("production", "demand_mean", true);
  const bool has_std = r.has("production", "demand_std");
  const auto stddev = has_std ? r.vector("production", "demand_std", false)
                              : std::vector<double>();
  const bool has_scale = r.has("production", "row_scale");
  const auto scale = has_scale ? r.vector("production", "row_scale", false)
                               : std::vector<double>();
  r.check_known_keys("production", {"coverage", "costs", "capacity", "demand_mean",
                                    "demand_std", "row_scale"});

  AmbiguitySpec amb = load_ambiguity(r, NormConvention::kEuclidean);

  const std::size_t m = cover.size();
  const std::size_t n = m ? cover.front().size() : 0;
  ProductionInstance inst{Eigen::MatrixXd(),     Eigen::VectorXd(), capacity,
                          Eigen::VectorXd(),     Eigen::VectorXd(),
                          Eigen::VectorXd(),     amb};
  if (m == 0 || n == 0) errors.push_back({0, "production.coverage must not be empty"});
  if (costs.size() != n)
    errors.push_back({0, "production.costs must list one cost per facility"});
  if (mean.size() != m)
    errors.push_back({0, "production.demand_mean must list one mean per demand row"});
  if (has_std && stddev.size() != m)
    errors.push_back({0, "production.demand_std must list one value per demand row"});
  if (has_scale && scale.size() != m)
    errors.push_back({0, "production.row_scale must list one value per demand row"});

  if (errors.empty()) {
    inst.coverage.resize(m, n);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) inst.coverage(i, j) = cover[i][j];
    inst.cost = Eigen::Map<const Eigen::VectorXd>(costs.data(), n);
    inst.demand_mean = Eigen::Map<const Eigen::VectorXd>(mean.data(), m);
    if (has_std) {
      inst.demand_std = Eigen::Map<const Eigen::VectorXd>(stddev.data(), m);
    } else {
      inst.demand_std = 0.1 * inst.demand_mean;  // documented default
    }
    if (has_scale)
      inst.row_scale = Eigen::Map<const Eigen::VectorXd>(scale.data(), m);
    else
      inst.row_scale = Eigen::VectorXd::Ones(m);
  }
  if (!errors.empty()) throw ConfigParseError(std::move(errors));
  try {
    inst.validate();
  } catch (const std::exception& e) {
    throw ConfigParseError({{0, e.what()}});
  }
  return inst;
}

void apply_override(ConfigDoc& doc, const std::string& spec,
                    std::vector<ConfigError>& errors) {
  const std::size_t eq = spec.find('=');
  if (eq == std::string::npos) {
    errors.push_back({0, "override '" + spec + "' must look like section.key=value"});
    return;
  }
  const std::string path = trim(spec.substr(0, eq));
  const std::string value = trim(spec.substr(eq + 1));
  const std::size_t dot = path.find('.');
  std::string section = "ambiguity", key = path;
  if (dot != std::string::npos) {
    section = path.substr(0, dot);
    key = path.substr(dot + 1);
  }
  if (key.empty() || value.empty()) {
    errors.push_back({0, "override '" + spec + "' is missing a key or value"});
    return;
  }
  ConfigValue& slot = doc.sections[section][key];
  slot.line = slot.line ? slot.line : -1;  // keep original line when replacing
  slot.scalar = value;
  slot.is_matrix = false;
  slot.matrix.clear();
}

}  // namespace wasscc
