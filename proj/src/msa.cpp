#include "msa/msa.hpp"

#include <spdlog/spdlog.h>

#include <charconv>
#include <chrono>
#include <cmath>
#include <limits>
#include <ostream>

namespace msa {

namespace {

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

}  // namespace

DyadicInterval dyadic_interval(double T, int N, int j, const TimeGrid& grid) {
  if (N < 1) throw ConfigError("dyadic level N must be at least 1");
  if (N > grid.depth()) {
    throw ConfigError("dyadic level N=" + std::to_string(N) + " exceeds the grid depth " +
                      std::to_string(grid.depth()));
  }
  const int count = 1 << (N - 1);
  if (j < 1 || j > count) {
    throw ConfigError("dyadic index j=" + std::to_string(j) + " outside 1.." + std::to_string(count));
  }
  if (T != grid.horizon()) throw ConfigError("dyadic interval horizon differs from the grid horizon");
  DyadicInterval iv;
  iv.level = N;
  iv.index = j;
  iv.eps = std::ldexp(T, -N);
  iv.tau = (2 * j - 1) * iv.eps;
  const int stride = 1 << (grid.depth() - N);
  iv.first_step = (2 * j - 2) * stride;
  iv.last_step = 2 * j * stride;
  return iv;
}

ControlProcess spike_control(const ControlProcess& u, const GapProcess& gaps, int first, int last) {
  if (u.paths() != gaps.paths() || u.steps() != gaps.steps()) {
    throw ShapeError("gap process does not match the control");
  }
  if (first < 0 || last > u.steps() || first > last) throw ConfigError("spike step range out of bounds");
  ControlProcess out = u;
  for (int p = 0; p < u.paths(); ++p) {
    for (int i = first; i < last; ++i) out.set(p, i, gaps.argmin(p, i));
  }
  return out;
}

ControlProcess spike_control(const ControlProcess& u, const GapProcess& gaps, const DyadicInterval& interval) {
  return spike_control(u, gaps, interval.first_step, interval.last_step);
}

std::optional<int> find_descent_interval(const GapProcess& gaps, double mu_value, int N, const TimeGrid& grid) {
  if (N < 1 || N > grid.depth()) throw ConfigError("dyadic level outside 1..grid depth");
  const double eps = std::ldexp(grid.horizon(), -N);
  const double threshold = 2.0 * eps * mu_value / grid.horizon();
  // interval sums and mu are accumulated in different orders
  const double slack = 1e-12 * std::abs(mu_value);
  const int stride = 1 << (grid.depth() - N);
  const int count = 1 << (N - 1);
  for (int j = 1; j <= count; ++j) {
    const double integral = gap_integral(gaps, grid, (2 * j - 2) * stride, 2 * j * stride);
    if (integral <= threshold + slack) return j;
  }
  return std::nullopt;
}

void MSAConfig::validate() const {
  if (!(mu_tol > 0.0)) throw ConfigError("mu_tol must be positive");
  if (m_max < 0) throw ConfigError("m_max must be nonnegative");
  if (paths < 1) throw ConfigError("paths must be positive");
  if (depth < 1 || depth > 24) throw ConfigError("grid depth must lie in [1, 24]");
  if (N_max < 1) throw ConfigError("N_max must be at least 1");
  if (N_max > depth) {
    throw ConfigError("N_max=" + std::to_string(N_max) + " exceeds the grid depth " + std::to_string(depth));
  }
  if (basis.degree < 0) throw ConfigError("basis degree must be nonnegative");
  if (!(basis.ridge >= 0.0)) throw ConfigError("ridge must be nonnegative");
  if (threads < 1) throw ConfigError("threads must be positive");
}

std::string to_string(Termination t) {
  switch (t) {
    case Termination::Converged:
      return "converged";
    case Termination::Exhausted:
      return "exhausted";
    case Termination::Budget:
      return "budget";
  }
  return "unknown";
}

SolverState complete_state(const ProblemSpec& spec, const TimeGrid& grid, const BrownianEnsemble& W,
                           ControlProcess u, StateEnsemble X, double J, const MSAConfig& config) {
  AdjointFirst adj1 = solve_first_adjoint(spec, grid, W, X, u, config.basis, config.threads);
  AdjointSecond adj2 = solve_second_adjoint(spec, grid, W, X, u, adj1, config.basis, config.threads);
  GapProcess gaps = gap_process(spec, grid, X, u, adj1, adj2, config.threads);
  const double mu_value = mu(gaps, grid);
  return {std::move(u), std::move(X), std::move(adj1), std::move(adj2), std::move(gaps), J, mu_value};
}

SolverState evaluate_control(const ProblemSpec& spec, const TimeGrid& grid, const BrownianEnsemble& W,
                             ControlProcess u, const MSAConfig& config) {
  StateEnsemble X = simulate_state(spec, grid, W, u, config.threads);
  const double J = evaluate_cost(spec, grid, X, u, config.threads);
  return complete_state(spec, grid, W, std::move(u), std::move(X), J, config);
}

StepOutcome msa_step(const ProblemSpec& spec, const TimeGrid& grid, const BrownianEnsemble& W,
                     const SolverState& state, int m, const MSAConfig& config) {
  state.X.require_control(state.u);
  if (!(state.X.ensemble() == W.id())) throw ProvenanceError("solver state belongs to a different ensemble");

  StepOutcome out;
  out.record.m = m;
  out.record.J = state.J;
  out.record.mu = state.mu;
  if (std::abs(state.mu) <= config.mu_tol) {
    out.terminal = Termination::Converged;
    return out;
  }

  const double T = grid.horizon();
  for (int N = 1; N <= config.N_max; ++N) {
    const std::optional<int> j = find_descent_interval(state.gaps, state.mu, N, grid);
    out.record.N = N;
    if (!j) {
      out.record.j = 0;
      spdlog::debug("m={} N={}: no interval meets the averaging bound", m, N);
      continue;
    }
    out.record.j = *j;
    const DyadicInterval iv = dyadic_interval(T, N, *j, grid);
    ControlProcess candidate = spike_control(state.u, state.gaps, iv);
    const double target = iv.eps * state.mu / T;
    if (candidate == state.u) {
      spdlog::debug("m={} N={} j={}: spike leaves the control unchanged", m, N, *j);
      continue;
    }
    StateEnsemble Xc = simulate_state(spec, grid, W, candidate, config.threads);
    const double Jc = evaluate_cost(spec, grid, Xc, candidate, config.threads);
    spdlog::debug("m={} N={} j={}: J'-J={} target={}", m, N, *j, Jc - state.J, target);
    if (Jc - state.J <= target) {
      out.record.accepted = true;
      out.next_control = std::move(candidate);
      out.next_state = std::move(Xc);
      out.next_J = Jc;
      return out;
    }
  }
  out.terminal = Termination::Exhausted;
  out.diagnostic = "no dyadic level up to N_max=" + std::to_string(config.N_max) +
                   " satisfied the descent test at mu=" + format_double(state.mu);
  return out;
}

int worst_constant_control(const ProblemSpec& spec, const TimeGrid& grid, const BrownianEnsemble& W, int threads) {
  int worst = 0;
  double worst_J = -std::numeric_limits<double>::infinity();
  for (int v = 0; v < spec.domain.size(); ++v) {
    const ControlProcess u = ControlProcess::constant(W.paths(), grid.steps(), v);
    const StateEnsemble X = simulate_state(spec, grid, W, u, threads);
    const double J = evaluate_cost(spec, grid, X, u, threads);
    if (J > worst_J) {
      worst_J = J;
      worst = v;
    }
  }
  return worst;
}

ControlProcess resolve_initial(const ProblemSpec& spec, const TimeGrid& grid, const BrownianEnsemble& W,
                               const InitialControl& init, int threads) {
  switch (init.kind) {
    case InitialControl::Kind::Explicit: {
      if (!init.control) throw ConfigError("explicit initial control is missing");
      if (init.control->paths() != W.paths() || init.control->steps() != grid.steps()) {
        throw ShapeError("initial control is " + std::to_string(init.control->paths()) + "x" +
                         std::to_string(init.control->steps()) + ", expected " + std::to_string(W.paths()) + "x" +
                         std::to_string(grid.steps()));
      }
      init.control->validate(spec.domain);
      return *init.control;
    }
    case InitialControl::Kind::Constant:
      if (!spec.domain.contains_index(init.constant_index)) {
        throw ConfigError("initial constant index " + std::to_string(init.constant_index) + " is outside the domain");
      }
      return ControlProcess::constant(W.paths(), grid.steps(), init.constant_index);
    case InitialControl::Kind::WorstConstant:
      break;
  }
  return ControlProcess::constant(W.paths(), grid.steps(), worst_constant_control(spec, grid, W, threads));
}

MSAResult run_msa(const ProblemSpec& spec, const TimeGrid& grid, const BrownianEnsemble& W, const MSAConfig& config,
                  const InitialControl& init) {
  config.validate();
  if (W.steps() != grid.steps() || W.dim() != spec.d) throw ShapeError("Brownian ensemble does not match the problem");
  const auto start = std::chrono::steady_clock::now();

  SolverState state = evaluate_control(spec, grid, W, resolve_initial(spec, grid, W, init, config.threads), config);
  MSAResult result;
  result.initial_control = state.u;
  result.J_initial = state.J;
  result.mu_initial = state.mu;
  spdlog::info("{}: J0={} mu0={}", spec.name, format_double(state.J), format_double(state.mu));

  int accepted = 0;
  result.reason = Termination::Budget;
  while (true) {
    if (accepted >= config.m_max) {
      // closing row so the last accepted step can be re-checked from the log
      if (!result.records.empty()) result.records.push_back({accepted, state.J, state.mu, 0, 0, false, 0.0});
      break;
    }
    const auto step_start = std::chrono::steady_clock::now();
    StepOutcome outcome = msa_step(spec, grid, W, state, accepted, config);
    if (config.record_wall_time) outcome.record.wall_time = seconds_since(step_start);
    result.records.push_back(outcome.record);
    if (outcome.terminal) {
      result.reason = *outcome.terminal;
      result.diagnostic = outcome.diagnostic;
      break;
    }
    ++accepted;
    state = complete_state(spec, grid, W, std::move(*outcome.next_control), std::move(*outcome.next_state),
                           outcome.next_J, config);
    spdlog::info("m={} N={} j={} J={} mu={}", accepted, outcome.record.N, outcome.record.j, format_double(state.J),
                 format_double(state.mu));
  }
  result.final_control = state.u;
  result.J_final = state.J;
  result.mu_final = state.mu;
  result.wall_time = seconds_since(start);
  spdlog::info("{}: {} after {} accepted steps, J={} mu={}", spec.name, to_string(result.reason), accepted,
               format_double(result.J_final), format_double(result.mu_final));
  return result;
}

MSAResult run_msa(const ProblemSpec& spec, const MSAConfig& config, const InitialControl& init) {
  config.validate();
  const TimeGrid grid(spec.T, config.depth);
  const BrownianEnsemble W = generate_brownian(grid, config.paths, spec.d, config.seed, config.threads);
  return run_msa(spec, grid, W, config, init);
}

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return {buf, res.ptr};
}

void write_iterations_csv(std::ostream& os, const std::vector<IterationRecord>& records) {
  os << "m,J,mu,N,j,accepted,wall_time\n";
  for (const auto& r : records) {
    os << r.m << ',' << format_double(r.J) << ',' << format_double(r.mu) << ',' << r.N << ',' << r.j << ','
       << (r.accepted ? 1 : 0) << ',' << format_double(r.wall_time) << '\n';
  }
}

nlohmann::json iterations_to_json(const std::vector<IterationRecord>& records) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& r : records) {
    arr.push_back({{"m", r.m},
                   {"J", r.J},
                   {"mu", r.mu},
                   {"N", r.N},
                   {"j", r.j},
                   {"accepted", r.accepted},
                   {"wall_time", r.wall_time}});
  }
  return arr;
}

}  // namespace msa
