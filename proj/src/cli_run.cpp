#include "wasscc/cli.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "wasscc/certify.hpp"
#include "wasscc/gaussian.hpp"
#include "wasscc/soc_coeff.hpp"

namespace wasscc {

namespace {

// every section name any command understands; per-command key checks stay strict
const std::vector<std::string> kKnownSections = {
    "portfolio", "production", "ambiguity", "solve",
    "envelope",  "bca",        "watershed", "certify"};

std::string fmt9(double v) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

std::string command_name(Command c) {
  switch (c) {
    case Command::kCoeff: return "coeff";
    case Command::kWatershed: return "watershed";
    case Command::kPortfolio: return "portfolio";
    case Command::kEnvelope: return "envelope";
    case Command::kSolvePp: return "solve-pp";
    default: return "certify";
  }
}

bool read_file(const std::string& path, std::string& out) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return false;
  std::ostringstream buf;
  buf << in.rdbuf();
  out = buf.str();
  return true;
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open output file '" + path + "'");
  out << content;
}

// Resolved parameters, reproducibly ordered; written next to every artifact.
std::string meta_dump(const ConfigDoc& doc, const RunConfig& rc) {
  std::ostringstream out;
  out << "command = " << command_name(rc.command) << "\n";
  out << "config = " << rc.instance_path << "\n";
  for (const auto& [sec, entries] : doc.sections)
    for (const auto& [key, value] : entries) {
      out << sec << "." << key << " = ";
      if (value.is_matrix)
        out << "<matrix " << value.matrix.size() << "x"
            << (value.matrix.empty() ? 0 : value.matrix.front().size()) << ">";
      else
        out << value.scalar;
      out << "\n";
    }
  return out.str();
}

std::vector<double> resolve_grid(ConfigReader& r, const std::string& section,
                                 const std::string& list_key,
                                 const std::string& lo_key, const std::string& hi_key,
                                 const std::string& points_key) {
  if (r.has(section, list_key)) return r.vector(section, list_key, true);
  const double lo = r.number(section, lo_key, 0.0, true);
  const double hi = r.number(section, hi_key, 0.0, true);
  const auto points = r.integer(section, points_key, 0, true);
  if (points < 2 || !(hi > lo)) {
    r.error(r.line_of(section, points_key),
            "grid needs " + lo_key + " < " + hi_key + " and at least 2 points");
    return {};
  }
  std::vector<double> grid(points);
  for (std::size_t i = 0; i < points; ++i)
    grid[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(points - 1);
  return grid;
}

BcaOptions load_bca_options(ConfigReader& r) {
  BcaOptions opts;
  opts.y_tol = r.number("bca", "y_tol", opts.y_tol, false);
  opts.max_iters = static_cast<int>(r.integer("bca", "max_iters", opts.max_iters, false));
  opts.eps1 = r.number("bca", "eps1", opts.eps1, false);
  r.check_known_keys("bca", {"y_tol", "max_iters", "eps1"});
  return opts;
}

CcMode load_mode(ConfigReader& r, const std::string& section) {
  const std::string word = r.word(section, "mode", "pessimistic", true);
  if (word == "pessimistic") return CcMode::kPessimistic;
  if (word == "optimistic") return CcMode::kOptimistic;
  r.error(r.line_of(section, "mode"),
          "mode must be 'pessimistic' or 'optimistic', got '" + word + "'");
  return CcMode::kPessimistic;
}

int run_coeff(const ConfigDoc& doc, const RunConfig& rc) {
  std::vector<ConfigError> errors;
  ConfigReader r(doc, errors);
  r.check_known_sections(kKnownSections);
  const double eps = r.number("ambiguity", "eps", 0.15, true);
  const double delta = r.number("ambiguity", "delta", 0.0, true);
  r.check_known_keys("ambiguity", {"eps", "delta"});
  if (!(eps > 0.0 && eps < 1.0))
    r.error(r.line_of("ambiguity", "eps"), "ambiguity.eps must lie in (0, 1)");
  if (!(delta > 0.0))
    r.error(r.line_of("ambiguity", "delta"),
            "ambiguity.delta must be positive for coefficient computation");
  if (!errors.empty()) throw ConfigParseError(std::move(errors));

  std::ostringstream csv;
  csv << "mode,c,eps_prime,iterations,residual\n";
  const ProbLevel level(eps);
  if (eps <= 0.5) {
    const CoeffResult p = c_pess(level, delta);
    csv << "pessimistic," << fmt9(p.c) << "," << fmt9(p.argopt_eps_prime) << ","
        << p.iterations << "," << fmt9(p.residual) << "\n";
  }
  const CoeffResult o = c_opt(level, delta);
  csv << "optimistic," << fmt9(o.c) << "," << fmt9(o.argopt_eps_prime) << ","
      << o.iterations << "," << fmt9(o.residual) << "\n";
  write_file(rc.output_path, csv.str());
  return 0;
}

int run_watershed(const ConfigDoc& doc, const RunConfig& rc) {
  std::vector<ConfigError> errors;
  ConfigReader r(doc, errors);
  r.check_known_sections(kKnownSections);
  const auto grid =
      resolve_grid(r, "watershed", "eps_grid", "eps_min", "eps_max", "points");
  r.check_known_keys("watershed", {"eps_grid", "eps_min", "eps_max", "points"});
  std::vector<ProbLevel> levels;
  for (const double e : grid) {
    if (!(e > 0.0 && e < 0.5)) {
      r.error(r.line_of("watershed", "eps_grid"),
              "watershed grid value " + fmt9(e) + " outside (0, 0.5)");
      continue;
    }
    levels.emplace_back(e);
  }
  if (!errors.empty()) throw ConfigParseError(std::move(errors));

  std::ostringstream csv;
  csv << "epsi,delta\n";
  for (const WatershedPoint& p : watershed_sweep(levels))
    csv << fmt9(p.eps) << "," << fmt9(p.delta_star) << "\n";
  write_file(rc.output_path, csv.str());
  return 0;
}

int run_portfolio(const ConfigDoc& doc, const RunConfig& rc) {
  std::vector<ConfigError> errors;
  {
    ConfigReader r(doc, errors);
    r.check_known_sections(kKnownSections);
    r.check_known_keys("solve", {"mode", "tol", "allow_nonconvex"});
    if (!errors.empty()) throw ConfigParseError(std::move(errors));
  }
  const PortfolioInstance inst = load_portfolio(doc);
  ConfigReader r(doc, errors);
  const CcMode mode = load_mode(r, "solve");
  const double tol = r.number("solve", "tol", 1e-6, false);
  const bool nonconvex = r.word("solve", "allow_nonconvex", "false", false) == "true";
  if (!errors.empty()) throw ConfigParseError(std::move(errors));

  const PortfolioSolution sol = solve_portfolio(inst, mode, tol, nonconvex);
  std::ostringstream csv;
  for (int i = 0; i < sol.x.size(); ++i)
    csv << (i ? "," : "") << fmt9(sol.x[i]);
  csv << "\n";
  write_file(rc.output_path, csv.str());
  return 0;
}

int run_envelope(const ConfigDoc& doc, const RunConfig& rc) {
  std::vector<ConfigError> errors;
  {
    ConfigReader r(doc, errors);
    r.check_known_sections(kKnownSections);
    if (!errors.empty()) throw ConfigParseError(std::move(errors));
  }
  const ProductionInstance inst = load_production(doc);
  ConfigReader r(doc, errors);
  const auto grid = resolve_grid(r, "envelope", "budgets", "u_min", "u_max", "points");
  r.check_known_keys("envelope", {"budgets", "u_min", "u_max", "points"});
  const BcaOptions opts = load_bca_options(r);
  if (!errors.empty()) throw ConfigParseError(std::move(errors));

  std::ostringstream csv;
  csv << "budget,radius\n";
  for (const auto& [u, rho] : envelope_sweep(inst, grid, opts))
    csv << fmt9(u) << "," << fmt9(rho) << "\n";
  write_file(rc.output_path, csv.str());
  return 0;
}

int run_solve_pp(const ConfigDoc& doc, const RunConfig& rc) {
  std::vector<ConfigError> errors;
  {
    ConfigReader r(doc, errors);
    r.check_known_sections(kKnownSections);
    if (!errors.empty()) throw ConfigParseError(std::move(errors));
  }
  const ProductionInstance inst = load_production(doc);
  ConfigReader r(doc, errors);
  const BcaOptions opts = load_bca_options(r);
  if (!(inst.amb.delta > 0.0))
    r.error(r.line_of("ambiguity", "delta"),
            "solve-pp needs a positive target radius ambiguity.delta");
  if (!errors.empty()) throw ConfigParseError(std::move(errors));

  const MinCostResult res = min_cost(inst, inst.amb.delta, opts);
  std::ostringstream csv;
  csv << "u_star,rho";
  for (int j = 0; j < res.x.size(); ++j) csv << ",x" << (j + 1);
  csv << "\n" << fmt9(res.u_star) << "," << fmt9(res.certifying_run.rho);
  for (int j = 0; j < res.x.size(); ++j) csv << "," << fmt9(res.x[j]);
  csv << "\n";
  write_file(rc.output_path, csv.str());
  return 0;
}

int run_certify(const ConfigDoc& doc, const RunConfig& rc) {
  std::vector<ConfigError> errors;
  ConfigReader r(doc, errors);
  r.check_known_sections(kKnownSections);
  r.check_known_keys("certify",
                     {"target", "mode", "n_samples", "seed", "x", "allocation_file"});
  const std::string target = r.word("certify", "target", "portfolio", false);
  const CcMode mode = load_mode(r, "certify");
  const auto n_samples = r.integer("certify", "n_samples", 100000, false);
  const auto seed = r.integer("certify", "seed", 1, false);

  Eigen::VectorXd x;
  if (r.has("certify", "x")) {
    const auto xs = r.vector("certify", "x", true);
    x = Eigen::Map<const Eigen::VectorXd>(xs.data(), xs.size());
  } else if (r.has("certify", "allocation_file")) {
    const std::string path = r.word("certify", "allocation_file", "", true);
    std::string text;
    if (!read_file(path, text)) {
      r.error(r.line_of("certify", "allocation_file"),
              "allocation file '" + path + "' does not exist");
    } else {
      std::vector<ConfigError> ignored;
      // a headerless one-row CSV is just a comma list
      std::istringstream in(text);
      std::string first_line;
      std::getline(in, first_line);
      std::vector<double> xs;
      std::string token;
      std::istringstream row(first_line);
      bool ok = true;
      while (std::getline(row, token, ',')) {
        try {
          xs.push_back(std::stod(token));
        } catch (...) {
          ok = false;
        }
      }
      if (!ok || xs.empty())
        r.error(r.line_of("certify", "allocation_file"),
                "allocation file '" + path + "' is not a one-row csv of numbers");
      else
        x = Eigen::Map<const Eigen::VectorXd>(xs.data(), xs.size());
    }
  } else {
    r.error(0, "certify needs either certify.x or certify.allocation_file");
  }
  if (target != "portfolio" && target != "production")
    r.error(r.line_of("certify", "target"),
            "certify.target must be 'portfolio' or 'production'");
  if (!errors.empty()) throw ConfigParseError(std::move(errors));

  Certificate cert{0, 0, 0, Verdict::kIndeterminate, 0};
  if (target == "portfolio") {
    const PortfolioInstance inst = load_portfolio(doc);
    if (x.size() != inst.n_assets())
      throw ConfigParseError({{0, "certify.x length does not match the portfolio"}});
    const IndividualInstance ind = inst.to_individual();
    cert = (mode == CcMode::kPessimistic) ? certify_pess(ind, x, n_samples, seed)
                                          : certify_opt(ind, x, n_samples, seed);
  } else {
    const ProductionInstance inst = load_production(doc);
    if (x.size() != inst.n_facilities())
      throw ConfigParseError({{0, "certify.x length does not match the facilities"}});
    cert = (mode == CcMode::kPessimistic) ? certify_pess(inst, x, n_samples, seed)
                                          : certify_opt(inst, x, n_samples, seed);
  }
  write_file(rc.output_path, cert.to_line() + "\n");
  return cert.verdict == Verdict::kFail ? 2 : 0;
}

}  // namespace

Command parse_command(const std::string& word) {
  if (word == "coeff") return Command::kCoeff;
  if (word == "watershed") return Command::kWatershed;
  if (word == "portfolio") return Command::kPortfolio;
  if (word == "envelope") return Command::kEnvelope;
  if (word == "solve-pp") return Command::kSolvePp;
  if (word == "certify") return Command::kCertify;
  throw std::invalid_argument("unknown command '" + word + "'");
}

int run(const RunConfig& rc, std::string& log) {
  std::ostringstream diag;
  int code = 0;
  try {
    std::string text;
    if (!read_file(rc.instance_path, text)) {
      diag << "error: cannot read config file '" << rc.instance_path << "'\n";
      log += diag.str();
      return 1;
    }
    std::vector<ConfigError> errors;
    ConfigDoc doc = parse_document(text, errors);
    for (const std::string& ov : rc.overrides) apply_override(doc, ov, errors);
    if (!errors.empty()) throw ConfigParseError(std::move(errors));

    switch (rc.command) {
      case Command::kCoeff: code = run_coeff(doc, rc); break;
      case Command::kWatershed: code = run_watershed(doc, rc); break;
      case Command::kPortfolio: code = run_portfolio(doc, rc); break;
      case Command::kEnvelope: code = run_envelope(doc, rc); break;
      case Command::kSolvePp: code = run_solve_pp(doc, rc); break;
      case Command::kCertify: code = run_certify(doc, rc); break;
    }
    write_file(rc.output_path + ".meta", meta_dump(doc, rc));
  } catch (const ConfigParseError& e) {
    for (const ConfigError& err : e.errors)
      diag << "config error (line " << err.line << "): " << err.message << "\n";
    code = 1;
  } catch (const InfeasibleError& e) {
    diag << "infeasible: " << e.what() << "\n";
    code = 2;
  } catch (const std::exception& e) {
    diag << "error: " << e.what() << "\n";
    code = 1;
  }
  log += diag.str();
  return code;
}

}  // namespace wasscc
