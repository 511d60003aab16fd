#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "msa/adjoint.hpp"
#include "msa/hamiltonian.hpp"
#include "msa/model.hpp"
#include "msa/msa.hpp"
#include "msa/paths.hpp"

namespace msa {

/// Value-function coefficients of an LQ problem on the grid:
/// V(t, x) = x'K(t)x/2 + k(t)'x + c(t).
struct LyapunovSolution {
  std::vector<Mat> K;
  std::vector<Vec> k;
  std::vector<double> c;
};

/// Classical RK4 backward on the grid:
///   K' = -(K b1 + b1'K + G),          K(T) = Gamma
///   k' = -(b1'k + K b2),              k(T) = 0
///   c' = -(b2'k + min_u [sum_i sigma_u^i' K sigma_u^i / 2 + g]),  c(T) = 0
LyapunovSolution lyapunov_solve(const LQSpec& lq, const TimeGrid& grid);

struct LQOracle {
  LyapunovSolution lyapunov;
  ControlProcess u_star;  // deterministic, identical rows
  std::vector<int> u_star_steps;
  double J_star = 0.0;
};

/// Pointwise minimizer of sum_i sigma_u^i' K sigma_u^i / 2 + g over the
/// domain at every grid time (smallest index on ties) and
/// J* = x0'K(0)x0/2 + k(0)'x0 + c(0).
LQOracle lq_optimal_control(const LQSpec& lq, const TimeGrid& grid, const LyapunovSolution& sol, int paths);

struct RateRow {
  int m = 0;
  double a = 0.0;
  double a_sqrt_m = 0.0;
};

struct RateResult {
  std::vector<RateRow> rows;  // m = 1 is the initial control
  MSAResult run;
  double J_star = 0.0;        // analytic optimal cost
  double J_star_saa = 0.0;    // oracle control evaluated on the frozen ensemble
  double tol_mc = 0.0;        // nonnegativity / censoring tolerance
  double A_est = 0.0;         // min (a_m - a_{m+1}) / a_m^3 over uncensored pairs
  double plateau = 0.0;       // max a_m sqrt(m) over m >= 2
  double bound = 0.0;         // 2 max(a_1, A_est^{-1/2})
  double slope = 0.0;         // least-squares slope of log a_m vs log m
  int slope_points = 0;
  bool slope_is_bound = false;  // true when censored points enter at tol_mc
  bool nonnegative = true;
  bool nonincreasing = true;
  bool bounded = true;
  [[nodiscard]] bool passed() const { return nonnegative && nonincreasing && bounded; }
};

/// Runs MSA on an LQ benchmark and tabulates a_m = J(u^m) - J*_saa, with the
/// initial control labelled m = 1.
RateResult rate_experiment(const LQSpec& lq, const MSAConfig& config, const InitialControl& init);

struct RemainderRow {
  double eps = 0.0;
  double R = 0.0;
  double standard_error = 0.0;
  bool censored = false;
  bool diagnostic = false;  // eps spanning the whole horizon; excluded from the fit
};

struct RemainderResult {
  std::vector<RemainderRow> rows;
  double slope = 0.0;
  int fit_points = 0;
};

/// For each eps: R = J(u_tau_eps) - J(u) - (1/M) sum_p sum_{i in E} gap dt, on
/// the ensemble of `config`. Points with |R| < 10 x the standard error of the
/// paired cost difference are censored.
RemainderResult remainder_experiment(const ProblemSpec& spec, const ControlProcess& u, double tau,
                                     const std::vector<double>& eps_list, const MSAConfig& config);

/// Index of the constant control with the most negative mu on the ensemble
/// of `config` (smallest index on ties): the constant farthest from
/// satisfying the maximum principle.
int max_gap_constant_control(const ProblemSpec& spec, const MSAConfig& config);

/// Grid-step range [first, last) of [tau - eps, tau + eps] clipped to [0, T].
/// Throws ConfigError unless both ends fall on grid times.
std::pair<int, int> spike_steps(const TimeGrid& grid, double tau, double eps);

struct VariationalEnsemble {
  int paths = 0;
  int steps = 0;
  int n = 0;
  std::vector<double> X1;
  std::vector<double> X2;
  double e_sq = 0.0;  // mean_p max_i |X_tau_eps - X - X1 - X2|^2
};

/// Euler-integrates the first and second variational equations of the spike
/// on steps [first, last) and measures the expansion defect against the
/// simulated perturbed state. Throws ConfigError without second derivatives.
VariationalEnsemble variational_simulate(const ProblemSpec& spec, const TimeGrid& grid, const BrownianEnsemble& W,
                                         const ControlProcess& u, const StateEnsemble& X, const GapProcess& gaps,
                                         std::pair<int, int> step_range, int threads = 1);

struct VariationalRow {
  double eps = 0.0;
  double e_sq = 0.0;
};

struct VariationalResult {
  std::vector<VariationalRow> rows;
  double slope = 0.0;
};

VariationalResult variational_experiment(const ProblemSpec& spec, const ControlProcess& u, double tau,
                                         const std::vector<double>& eps_list, const MSAConfig& config);

struct SequenceCheck {
  double a1 = 0.0;
  double A = 0.0;
  std::vector<double> a;  // a[m-1] = a_m
  double max_b = 0.0;     // max_m a_m sqrt(m)
  double bound = 0.0;     // max(b_1, A^{-1/2})
  bool saturated = false; // recurrence would have gone negative; clamped at 0
  bool passed = true;
};

/// Extremal recurrence a_{m+1} = max(0, a_m - A a_m^3) for m < m_max and the
/// check a_m sqrt(m) <= max(a_1, A^{-1/2}).
SequenceCheck sequence_lemma_check(double a1, double A, int m_max);

/// Least-squares slope of y on x.
double fit_slope(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace msa
