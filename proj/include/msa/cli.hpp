#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "msa/msa.hpp"
#include "msa/registry.hpp"

namespace msa {

/// JSON syntax error with a 1-based position in the source text.
class ConfigParseError : public ConfigError {
 public:
  ConfigParseError(const std::string& message, int line, int column)
      : ConfigError(message + " at line " + std::to_string(line) + ", column " + std::to_string(column)),
        line_(line),
        column_(column) {}
  [[nodiscard]] int line() const { return line_; }
  [[nodiscard]] int column() const { return column_; }

 private:
  int line_;
  int column_;
};

/// Parsed run configuration.
///
///   {
///     "problem": "lq-scalar" | { inline LQ object, see lq_from_json },
///     "paths": 10000, "depth": 8, "seed": 42,
///     "mu_tol": 1e-4, "m_max": 50, "N_max": <depth>,
///     "basis": {"degree": 2, "ridge": 1e-8},
///     "initial": "worst-constant" | {"constant": <index>},
///     "threads": 1, "record_wall_time": false,
///     "tau": <T/2>, "eps_levels": [2, 3, 4, 5, 6], "control": <index>,
///     "output": "<dir>"
///   }
///
/// Every key is optional; unknown keys are rejected.
struct RunConfig {
  std::string problem_key;  // empty for inline problems
  RegistryProblem problem;
  MSAConfig msa;
  InitialControl initial;
  std::optional<double> tau;
  std::vector<int> eps_levels{2, 3, 4, 5, 6};
  std::optional<int> control_index;
  std::string output;
};

/// Throws ConfigParseError on malformed JSON, ConfigError on schema errors
/// (naming the offending key).
RunConfig parse_run_config(std::string_view text, const std::string& default_problem = "lq-scalar");

/// Inline LQ schema:
///   {"name": str, "T": 1, "x0": [..n],
///    "b1": [[n x n]], "b2": [..n], "G": [[n x n]], "Gamma": [[n x n]],
///    "sigma": {"constant": [[n x d]], "linear": [[[n x d]] per control dim]},
///    "g": {"quadratic": [[k x k]], "linear": [..k], "constant": c},
///    "domain": [[..k], ...] | {"lower": [..k], "upper": [..k], "points": [..k]}}
/// sigma_u(u) = constant + sum_l u_l linear[l]; g(u) = u'Ru/2 + r'u + c.
LQSpec lq_from_json(const nlohmann::json& j);

/// Routes library logging to stderr at "quiet", "info" or "debug";
/// throws ConfigError otherwise.
void set_log_level(const std::string& level);

/// Entry point of the command-line tool; argv[0] is the program name.
/// Returns 0 on success, 1 when a validation experiment fails its check,
/// 2 on usage or configuration errors, 3 on numerical failure.
int execute(const std::vector<std::string>& argv);

}  // namespace msa
