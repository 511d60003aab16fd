#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "msa/adjoint.hpp"
#include "msa/hamiltonian.hpp"
#include "msa/model.hpp"
#include "msa/paths.hpp"
#include "msa/regression.hpp"

namespace msa {

/// E_j^N = [(2j-2) eps_N, 2j eps_N] with eps_N = T 2^-N, as grid steps
/// [first_step, last_step).
struct DyadicInterval {
  int level = 1;
  int index = 1;
  double eps = 0.0;
  double tau = 0.0;
  int first_step = 0;
  int last_step = 0;
};

/// Throws ConfigError when j is outside 1..2^{N-1} or N exceeds the grid depth.
DyadicInterval dyadic_interval(double T, int N, int j, const TimeGrid& grid);

/// u'[p,i] = argmin[p,i] on steps [first, last), u[p,i] elsewhere.
ControlProcess spike_control(const ControlProcess& u, const GapProcess& gaps, int first, int last);
ControlProcess spike_control(const ControlProcess& u, const GapProcess& gaps, const DyadicInterval& interval);

/// Smallest j whose interval gap integral is <= 2 eps_N mu / T, if any.
std::optional<int> find_descent_interval(const GapProcess& gaps, double mu_value, int N, const TimeGrid& grid);

struct MSAConfig {
  double mu_tol = 1e-4;
  int m_max = 50;
  int N_max = 8;
  int paths = 10000;
  int depth = 8;
  std::uint64_t seed = 42;
  RegressionBasis basis;
  int threads = 1;
  bool record_wall_time = false;

  /// Throws ConfigError on N_max > depth, m_max < 0, mu_tol <= 0, ...
  void validate() const;
};

struct IterationRecord {
  int m = 0;
  double J = 0.0;
  double mu = 0.0;
  int N = 0;
  int j = 0;
  bool accepted = false;
  double wall_time = 0.0;
};

enum class Termination { Converged, Exhausted, Budget };

std::string to_string(Termination t);

/// Everything Algorithm-level code needs about one control on the frozen
/// ensemble.
struct SolverState {
  ControlProcess u;
  StateEnsemble X;
  AdjointFirst adj1;
  AdjointSecond adj2;
  GapProcess gaps;
  double J = 0.0;
  double mu = 0.0;
};

/// Simulates, prices, solves both adjoints and computes the gap process.
SolverState evaluate_control(const ProblemSpec& spec, const TimeGrid& grid, const BrownianEnsemble& W,
                             ControlProcess u, const MSAConfig& config);

/// Adjoints and gaps for an already simulated and priced control.
SolverState complete_state(const ProblemSpec& spec, const TimeGrid& grid, const BrownianEnsemble& W,
                           ControlProcess u, StateEnsemble X, double J, const MSAConfig& config);

struct StepOutcome {
  IterationRecord record;
  std::optional<ControlProcess> next_control;
  std::optional<StateEnsemble> next_state;  // simulated state of next_control
  double next_J = 0.0;
  std::optional<Termination> terminal;
  std::string diagnostic;
};

/// One pass of the dyadic search: for N = 1..N_max pick j, spike, resimulate
/// and accept the first candidate with J' - J <= eps_N mu / T.
StepOutcome msa_step(const ProblemSpec& spec, const TimeGrid& grid, const BrownianEnsemble& W,
                     const SolverState& state, int m, const MSAConfig& config);

struct InitialControl {
  enum class Kind { Explicit, WorstConstant, Constant };
  Kind kind = Kind::WorstConstant;
  int constant_index = 0;
  std::optional<ControlProcess> control;

  static InitialControl worst_constant() { return {}; }
  static InitialControl constant(int index) { return {Kind::Constant, index, std::nullopt}; }
  static InitialControl explicit_control(ControlProcess u) { return {Kind::Explicit, 0, std::move(u)}; }
};

struct MSAResult {
  std::vector<IterationRecord> records;
  ControlProcess initial_control;
  ControlProcess final_control;
  double J_initial = 0.0;
  double J_final = 0.0;
  double mu_initial = 0.0;
  double mu_final = 0.0;
  Termination reason = Termination::Budget;
  std::string diagnostic;
  double wall_time = 0.0;
};

/// Index of the constant control with the largest cost on the ensemble
/// (smallest index on ties).
int worst_constant_control(const ProblemSpec& spec, const TimeGrid& grid, const BrownianEnsemble& W,
                           int threads = 1);

ControlProcess resolve_initial(const ProblemSpec& spec, const TimeGrid& grid, const BrownianEnsemble& W,
                               const InitialControl& init, int threads = 1);

/// Full MSA run on the ensemble W. m_max bounds the number of accepted
/// updates; m_max = 0 logs nothing.
MSAResult run_msa(const ProblemSpec& spec, const TimeGrid& grid, const BrownianEnsemble& W, const MSAConfig& config,
                  const InitialControl& init);

/// Generates the ensemble from config (paths, depth, seed) and runs MSA.
MSAResult run_msa(const ProblemSpec& spec, const MSAConfig& config, const InitialControl& init);

/// CSV with header m,J,mu,N,j,accepted,wall_time; doubles in round-trip precision.
void write_iterations_csv(std::ostream& os, const std::vector<IterationRecord>& records);
nlohmann::json iterations_to_json(const std::vector<IterationRecord>& records);

/// Shortest decimal text that round-trips to the same double.
std::string format_double(double v);

}  // namespace msa
