#include "msa/cli.hpp"

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include "CLI11.hpp"

#include "msa/oracle.hpp"

namespace msa {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string where(const std::string& path) { return path.empty() ? "config" : path; }

void reject_unknown_keys(const json& j, const std::set<std::string>& allowed, const std::string& path) {
  for (const auto& [key, _] : j.items()) {
    if (!allowed.contains(key)) throw ConfigError(where(path) + ": unknown key '" + key + "'");
  }
}

double as_double(const json& j, const std::string& path) {
  if (!j.is_number()) throw ConfigError(path + ": expected a number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) throw ConfigError(path + ": expected a finite number");
  return v;
}

long long as_integer(const json& j, const std::string& path) {
  if (!j.is_number_integer()) throw ConfigError(path + ": expected an integer");
  return j.get<long long>();
}

int as_int(const json& j, const std::string& path, long long lo, long long hi) {
  const long long v = as_integer(j, path);
  if (v < lo || v > hi) {
    throw ConfigError(path + ": " + std::to_string(v) + " outside [" + std::to_string(lo) + ", " +
                      std::to_string(hi) + "]");
  }
  return static_cast<int>(v);
}

Vec as_vec(const json& j, const std::string& path, int size) {
  if (!j.is_array() || static_cast<int>(j.size()) != size) {
    throw ConfigError(path + ": expected an array of " + std::to_string(size) + " numbers");
  }
  Vec v(size);
  for (int e = 0; e < size; ++e) v(e) = as_double(j[static_cast<std::size_t>(e)], path + "[" + std::to_string(e) + "]");
  return v;
}

Mat as_mat(const json& j, const std::string& path, int rows, int cols) {
  if (!j.is_array() || static_cast<int>(j.size()) != rows) {
    throw ConfigError(path + ": expected a " + std::to_string(rows) + "x" + std::to_string(cols) + " array");
  }
  Mat m(rows, cols);
  for (int r = 0; r < rows; ++r) {
    const Vec row = as_vec(j[static_cast<std::size_t>(r)], path + "[" + std::to_string(r) + "]", cols);
    m.row(r) = row.transpose();
  }
  return m;
}

const json& require(const json& j, const std::string& key, const std::string& path) {
  if (!j.contains(key)) throw ConfigError(where(path) + ": missing key '" + key + "'");
  return j.at(key);
}

int infer_rows(const json& j, const std::string& path) {
  if (!j.is_array() || j.empty()) throw ConfigError(path + ": expected a nonempty array");
  return static_cast<int>(j.size());
}

ControlDomain domain_from_json(const json& j, int k, const std::string& path) {
  std::vector<Vec> points;
  if (j.is_array()) {
    for (std::size_t e = 0; e < j.size(); ++e) points.push_back(as_vec(j[e], path + "[" + std::to_string(e) + "]", k));
  } else if (j.is_object()) {
    reject_unknown_keys(j, {"lower", "upper", "points"}, path);
    const Vec lo = as_vec(require(j, "lower", path), path + ".lower", k);
    const Vec hi = as_vec(require(j, "upper", path), path + ".upper", k);
    const json& cnt = require(j, "points", path);
    if (!cnt.is_array() || static_cast<int>(cnt.size()) != k) throw ConfigError(path + ".points: expected k counts");
    std::vector<int> counts(static_cast<std::size_t>(k));
    long long total = 1;
    for (int l = 0; l < k; ++l) {
      counts[l] = as_int(cnt[static_cast<std::size_t>(l)], path + ".points[" + std::to_string(l) + "]", 1, 10000);
      total *= counts[l];
    }
    if (total > 100000) throw ConfigError(path + ": control grid has more than 100000 points");
    std::vector<int> idx(static_cast<std::size_t>(k), 0);
    for (long long e = 0; e < total; ++e) {
      Vec p(k);
      for (int l = 0; l < k; ++l) {
        const int c = counts[l];
        p(l) = c == 1 ? lo(l) : lo(l) + (hi(l) - lo(l)) * idx[l] / (c - 1);
      }
      points.push_back(p);
      for (int l = k - 1; l >= 0; --l) {
        if (++idx[l] < counts[l]) break;
        idx[l] = 0;
      }
    }
  } else {
    throw ConfigError(path + ": expected an array of points or a grid object");
  }
  try {
    return ControlDomain(std::move(points));
  } catch (const ConfigError& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

json config_to_json(const RunConfig& rc) {
  json j = json::object();
  j["problem"] = rc.problem_key.empty() ? rc.problem.spec.name : rc.problem_key;
  j["paths"] = rc.msa.paths;
  j["depth"] = rc.msa.depth;
  j["seed"] = rc.msa.seed;
  j["mu_tol"] = rc.msa.mu_tol;
  j["m_max"] = rc.msa.m_max;
  j["N_max"] = rc.msa.N_max;
  j["basis"] = {{"degree", rc.msa.basis.degree}, {"ridge", rc.msa.basis.ridge}};
  return j;
}

std::string render_json(const json& j) { return j.dump(2) + "\n"; }

// Results are rendered in memory first so a failure leaves no partial output.
void write_outputs(const fs::path& dir, const std::map<std::string, std::string>& files) {
  fs::create_directories(dir);
  for (const auto& [name, content] : files) {
    const fs::path target = dir / name;
    const fs::path tmp = dir / (name + ".tmp");
    {
      std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
      if (!os) throw ConfigError("cannot write " + tmp.string());
      os.write(content.data(), static_cast<std::streamsize>(content.size()));
      if (!os) throw ConfigError("failed writing " + tmp.string());
    }
    fs::rename(tmp, target);
  }
}

std::string flat_bytes(const FlatArray& a) {
  std::ostringstream os(std::ios::binary);
  write_flat_binary(os, a);
  return os.str();
}

std::string read_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ConfigError("cannot read config file '" + path + "'");
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

void configure_logging() {
  const char* env = std::getenv("MSA_LOG");
  set_log_level(env ? env : "info");
}

}  // namespace

void set_log_level(const std::string& level) {
  spdlog::level::level_enum value;
  if (level == "quiet") {
    value = spdlog::level::off;
  } else if (level == "info") {
    value = spdlog::level::info;
  } else if (level == "debug") {
    value = spdlog::level::debug;
  } else {
    throw ConfigError("MSA_LOG must be one of quiet, info, debug");
  }
  auto logger = spdlog::get("msa");
  if (!logger) logger = spdlog::stderr_color_mt("msa");
  spdlog::set_default_logger(logger);
  spdlog::set_pattern("[%l] %v");
  spdlog::set_level(value);
}

namespace {

struct Overrides {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
};

RunConfig load_config(const Overrides& o, const std::string& default_problem, bool config_required) {
  RunConfig rc;
  if (!o.config.empty()) {
    rc = parse_run_config(read_file(o.config), default_problem);
  } else if (config_required) {
    throw ConfigError("--config is required");
  } else {
    rc = parse_run_config("{}", default_problem);
  }
  if (o.seed) rc.msa.seed = *o.seed;
  if (o.threads) {
    if (*o.threads < 1) throw ConfigError("--threads must be positive");
    rc.msa.threads = *o.threads;
  }
  if (!o.out.empty()) rc.output = o.out;
  if (rc.output.empty()) throw ConfigError("no output directory: pass --out or set \"output\"");
  rc.msa.validate();
  return rc;
}

int run_solve(const Overrides& o) {
  const RunConfig rc = load_config(o, "lq-scalar", true);
  const ProblemSpec& spec = rc.problem.spec;
  const MSAResult r = run_msa(spec, rc.msa, rc.initial);

  std::map<std::string, std::string> files;
  std::ostringstream csv;
  write_iterations_csv(csv, r.records);
  files["iterations.csv"] = csv.str();
  files["iterations.json"] = render_json(iterations_to_json(r.records));
  files["final_control.bin"] = flat_bytes(to_flat(r.final_control, spec.domain, rc.msa.seed));

  int accepted = 0;
  for (const auto& rec : r.records) accepted += rec.accepted ? 1 : 0;
  json summary = {{"problem", spec.name},
                  {"J_initial", r.J_initial},
                  {"mu_initial", r.mu_initial},
                  {"J_final", r.J_final},
                  {"mu_final", r.mu_final},
                  {"termination", to_string(r.reason)},
                  {"iterations", accepted},
                  {"diagnostic", r.diagnostic},
                  {"config", config_to_json(rc)},
                  {"metadata", {{"wall_time", r.wall_time}, {"threads", rc.msa.threads}}}};
  files["summary.json"] = render_json(summary);
  write_outputs(rc.output, files);
  spdlog::info("wrote {} files to {}", files.size(), rc.output);
  return 0;
}

int run_bench(const Overrides& o) {
  RunConfig rc = load_config(o, "lq-scalar", false);
  std::map<std::string, std::string> files;
  bool all_passed = true;
  for (const std::string& key : registry_lq_keys()) {
    const RateResult r = rate_experiment(*make_problem(key).lq, rc.msa, rc.initial);
    std::ostringstream csv;
    csv << "m,a_m,a_m_sqrt_m\n";
    for (const RateRow& row : r.rows) {
      csv << row.m << ',' << format_double(row.a) << ',' << format_double(row.a_sqrt_m) << '\n';
    }
    files["rate_" + key + ".csv"] = csv.str();
    all_passed = all_passed && r.passed();
    std::cout << key << ": J*=" << format_double(r.J_star) << " J*_saa=" << format_double(r.J_star_saa)
              << " slope=" << format_double(r.slope) << (r.slope_is_bound ? " (bound)" : "")
              << " bound=" << format_double(r.bound) << (r.passed() ? " pass" : " FAIL") << '\n';
  }
  write_outputs(rc.output, files);
  return all_passed ? 0 : 1;
}

std::vector<double> eps_from_levels(const RunConfig& rc) {
  std::vector<double> eps;
  for (int N : rc.eps_levels) eps.push_back(std::ldexp(rc.problem.spec.T, -N));
  return eps;
}

int run_validate(const std::string& experiment, const Overrides& o) {
  std::map<std::string, std::string> files;
  bool passed = true;
  if (experiment == "sequence") {
    RunConfig rc = load_config(o, "lq-scalar", false);
    std::ostringstream csv;
    csv << "a1,A,m_max,max_b,bound,saturated,passed\n";
    constexpr int kSequenceLength = 100000;
    for (double a1 : {0.1, 0.5, 1.0, 2.0}) {
      for (double A : {0.1, 1.0, 10.0}) {
        const SequenceCheck s = sequence_lemma_check(a1, A, kSequenceLength);
        csv << format_double(a1) << ',' << format_double(A) << ',' << kSequenceLength << ','
            << format_double(s.max_b) << ',' << format_double(s.bound) << ',' << (s.saturated ? 1 : 0) << ','
            << (s.passed ? 1 : 0) << '\n';
        passed = passed && s.passed;
      }
    }
    files["sequence.csv"] = csv.str();
    write_outputs(rc.output, files);
  } else {
    RunConfig rc = load_config(o, "nonconvex-diffusion", false);
    const ProblemSpec& spec = rc.problem.spec;
    const double tau = rc.tau.value_or(0.5 * spec.T);
    const int control = rc.control_index ? *rc.control_index : max_gap_constant_control(spec, rc.msa);
    if (!spec.domain.contains_index(control)) throw ConfigError("control: index outside the domain");
    const ControlProcess u = ControlProcess::constant(rc.msa.paths, 1 << rc.msa.depth, control);
    const std::vector<double> eps = eps_from_levels(rc);
    std::ostringstream csv;
    if (experiment == "remainder") {
      const RemainderResult r = remainder_experiment(spec, u, tau, eps, rc.msa);
      csv << "eps,R,censored\n";
      for (const auto& row : r.rows) {
        csv << format_double(row.eps) << ',' << format_double(row.R) << ',' << (row.censored ? 1 : 0) << '\n';
      }
      passed = r.fit_points >= 2 && r.slope >= 1.2;
      std::cout << "remainder slope=" << format_double(r.slope) << " points=" << r.fit_points
                << (passed ? " pass" : " FAIL") << '\n';
      files["remainder.csv"] = csv.str();
    } else {
      const VariationalResult r = variational_experiment(spec, u, tau, eps, rc.msa);
      csv << "eps,e_sq\n";
      for (const auto& row : r.rows) csv << format_double(row.eps) << ',' << format_double(row.e_sq) << '\n';
      passed = r.slope >= 2.5;
      std::cout << "variational slope=" << format_double(r.slope) << (passed ? " pass" : " FAIL") << '\n';
      files["variational.csv"] = csv.str();
    }
    write_outputs(rc.output, files);
  }
  return passed ? 0 : 1;
}

}  // namespace

LQSpec lq_from_json(const json& j) {
  const std::string path = "problem";
  if (!j.is_object()) throw ConfigError(path + ": expected a registry key or an LQ object");
  reject_unknown_keys(j, {"name", "T", "x0", "b1", "b2", "G", "Gamma", "sigma", "g", "domain"}, path);
  LQSpec lq;
  lq.name = j.value("name", std::string("inline-lq"));
  const json& x0 = require(j, "x0", path);
  lq.n = infer_rows(x0, path + ".x0");
  if (lq.n > kMaxDim) throw ConfigError(path + ".x0: state dimension above " + std::to_string(kMaxDim));
  lq.x0 = as_vec(x0, path + ".x0", lq.n);
  lq.T = j.contains("T") ? as_double(j.at("T"), path + ".T") : 1.0;
  if (!(lq.T > 0.0)) throw ConfigError(path + ".T: must be positive");

  const json& sigma = require(j, "sigma", path);
  if (!sigma.is_object()) throw ConfigError(path + ".sigma: expected an object");
  reject_unknown_keys(sigma, {"constant", "linear"}, path + ".sigma");
  const json& s0 = require(sigma, "constant", path + ".sigma");
  if (!s0.is_array() || s0.empty() || !s0[0].is_array()) throw ConfigError(path + ".sigma.constant: expected n x d");
  lq.d = static_cast<int>(s0[0].size());
  if (lq.d < 1 || lq.d > kMaxDim) throw ConfigError(path + ".sigma.constant: noise dimension out of range");
  const Mat S0 = as_mat(s0, path + ".sigma.constant", lq.n, lq.d);
  const json& sl = require(sigma, "linear", path + ".sigma");
  lq.k = infer_rows(sl, path + ".sigma.linear");
  if (lq.k > kMaxDim) throw ConfigError(path + ".sigma.linear: control dimension above " + std::to_string(kMaxDim));
  std::vector<Mat> S;
  for (int l = 0; l < lq.k; ++l) {
    S.push_back(as_mat(sl[static_cast<std::size_t>(l)], path + ".sigma.linear[" + std::to_string(l) + "]", lq.n, lq.d));
  }

  const Mat b1 = as_mat(require(j, "b1", path), path + ".b1", lq.n, lq.n);
  const Vec b2 = j.contains("b2") ? as_vec(j.at("b2"), path + ".b2", lq.n) : Vec(Vec::Zero(lq.n));
  const Mat G = as_mat(require(j, "G", path), path + ".G", lq.n, lq.n);
  lq.Gamma = as_mat(require(j, "Gamma", path), path + ".Gamma", lq.n, lq.n);

  Mat R = Mat::Zero(lq.k, lq.k);
  Vec r = Vec::Zero(lq.k);
  double r0 = 0.0;
  if (j.contains("g")) {
    const json& g = j.at("g");
    if (!g.is_object()) throw ConfigError(path + ".g: expected an object");
    reject_unknown_keys(g, {"quadratic", "linear", "constant"}, path + ".g");
    if (g.contains("quadratic")) R = as_mat(g.at("quadratic"), path + ".g.quadratic", lq.k, lq.k);
    if (g.contains("linear")) r = as_vec(g.at("linear"), path + ".g.linear", lq.k);
    if (g.contains("constant")) r0 = as_double(g.at("constant"), path + ".g.constant");
  }
  lq.domain = domain_from_json(require(j, "domain", path), lq.k, path + ".domain");

  lq.b1 = [b1](double) { return b1; };
  lq.b2 = [b2](double) { return b2; };
  lq.G = [G](double) { return G; };
  lq.sigma_u = [S0, S](double, const Vec& u) {
    Mat s = S0;
    for (std::size_t l = 0; l < S.size(); ++l) s += u(static_cast<Eigen::Index>(l)) * S[l];
    return s;
  };
  lq.g = [R, r, r0](double, const Vec& u) { return 0.5 * u.dot(R * u) + r.dot(u) + r0; };
  check_lq(lq);
  return lq;
}

RunConfig parse_run_config(std::string_view text, const std::string& default_problem) {
  json j;
  try {
    j = json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    const std::size_t end = std::min<std::size_t>(e.byte == 0 ? 0 : e.byte - 1, text.size());
    int line = 1;
    int column = 1;
    for (std::size_t i = 0; i < end; ++i) {
      if (text[i] == '\n') {
        ++line;
        column = 1;
      } else {
        ++column;
      }
    }
    throw ConfigParseError("invalid JSON", line, column);
  }
  if (!j.is_object()) throw ConfigError("config: expected a JSON object");
  reject_unknown_keys(j,
                      {"problem", "paths", "depth", "seed", "mu_tol", "m_max", "N_max", "basis", "initial", "threads",
                       "record_wall_time", "tau", "eps_levels", "control", "output"},
                      "");

  RunConfig rc;
  const json problem = j.value("problem", json(default_problem));
  if (problem.is_string()) {
    rc.problem_key = problem.get<std::string>();
    rc.problem = make_problem(rc.problem_key);
  } else {
    LQSpec lq = lq_from_json(problem);
    rc.problem = RegistryProblem{lq_embed(lq), lq};
  }

  if (j.contains("paths")) rc.msa.paths = as_int(j.at("paths"), "paths", 1, 100000000);
  if (j.contains("depth")) rc.msa.depth = as_int(j.at("depth"), "depth", 1, 24);
  if (j.contains("seed")) {
    if (!j.at("seed").is_number_unsigned()) throw ConfigError("seed: expected a nonnegative integer");
    rc.msa.seed = j.at("seed").get<std::uint64_t>();
  }
  if (j.contains("mu_tol")) rc.msa.mu_tol = as_double(j.at("mu_tol"), "mu_tol");
  if (j.contains("m_max")) rc.msa.m_max = as_int(j.at("m_max"), "m_max", 0, 1000000);
  rc.msa.N_max = j.contains("N_max") ? as_int(j.at("N_max"), "N_max", 1, 24) : rc.msa.depth;
  if (j.contains("threads")) rc.msa.threads = as_int(j.at("threads"), "threads", 1, 1024);
  if (j.contains("record_wall_time")) {
    if (!j.at("record_wall_time").is_boolean()) throw ConfigError("record_wall_time: expected a boolean");
    rc.msa.record_wall_time = j.at("record_wall_time").get<bool>();
  }
  if (j.contains("basis")) {
    const json& b = j.at("basis");
    if (!b.is_object()) throw ConfigError("basis: expected an object");
    reject_unknown_keys(b, {"degree", "ridge"}, "basis");
    if (b.contains("degree")) rc.msa.basis.degree = as_int(b.at("degree"), "basis.degree", 0, 12);
    if (b.contains("ridge")) rc.msa.basis.ridge = as_double(b.at("ridge"), "basis.ridge");
  }
  if (j.contains("initial")) {
    const json& init = j.at("initial");
    if (init.is_string() && init.get<std::string>() == "worst-constant") {
      rc.initial = InitialControl::worst_constant();
    } else if (init.is_object()) {
      reject_unknown_keys(init, {"constant"}, "initial");
      const int idx = as_int(require(init, "constant", "initial"), "initial.constant", 0, 1 << 30);
      if (!rc.problem.spec.domain.contains_index(idx)) throw ConfigError("initial.constant: index outside the domain");
      rc.initial = InitialControl::constant(idx);
    } else {
      throw ConfigError("initial: expected \"worst-constant\" or {\"constant\": index}");
    }
  }
  if (j.contains("tau")) rc.tau = as_double(j.at("tau"), "tau");
  if (j.contains("eps_levels")) {
    const json& lv = j.at("eps_levels");
    if (!lv.is_array() || lv.empty()) throw ConfigError("eps_levels: expected a nonempty array");
    rc.eps_levels.clear();
    for (std::size_t e = 0; e < lv.size(); ++e) {
      rc.eps_levels.push_back(as_int(lv[e], "eps_levels[" + std::to_string(e) + "]", 1, 24));
    }
  }
  if (j.contains("control")) rc.control_index = as_int(j.at("control"), "control", 0, 1 << 30);
  if (j.contains("output")) {
    if (!j.at("output").is_string()) throw ConfigError("output: expected a string");
    rc.output = j.at("output").get<std::string>();
  }
  rc.msa.validate();
  return rc;
}

int execute(const std::vector<std::string>& argv) {
  CLI::App app{"Successive approximations for stochastic optimal control with controlled diffusion"};
  app.require_subcommand(1);
  Overrides o;
  std::uint64_t seed = 0;
  int threads = 1;
  auto add_common = [&](CLI::App* sub, bool with_config) {
    if (with_config) sub->add_option("--config", o.config, "JSON run configuration");
    sub->add_option("--out", o.out, "output directory");
    sub->add_option("--seed", seed, "Brownian ensemble seed (overrides the config)");
    sub->add_option("--threads", threads, "worker threads")->check(CLI::PositiveNumber);
  };
  CLI::App* solve = app.add_subcommand("solve", "run MSA on a configured problem");
  add_common(solve, true);
  CLI::App* bench = app.add_subcommand("bench", "convergence-rate benchmark on LQ problems");
  std::string suite;
  bench->add_option("suite", suite, "benchmark suite")->required()->check(CLI::IsMember({"lq"}));
  add_common(bench, true);
  CLI::App* validate = app.add_subcommand("validate", "oracle validation experiments");
  std::string experiment;
  validate->add_option("experiment", experiment, "remainder | variational | sequence")
      ->required()
      ->check(CLI::IsMember({"remainder", "variational", "sequence"}));
  add_common(validate, true);

  std::vector<const char*> args;
  for (const auto& a : argv) args.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(args.size()), args.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }
  for (CLI::App* sub : {solve, bench, validate}) {
    if (sub->count("--seed") > 0) o.seed = seed;
    if (sub->count("--threads") > 0) o.threads = threads;
  }

  try {
    configure_logging();
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  try {
    if (solve->parsed()) return run_solve(o);
    if (bench->parsed()) return run_bench(o);
    return run_validate(experiment, o);
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return 3;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
}

}  // namespace msa
