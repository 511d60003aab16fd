#include "msa/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "msa/parallel.hpp"

namespace msa {

namespace {

// min over the domain of sum_i sigma_u^i' K sigma_u^i / 2 + g(t, u)
std::pair<int, double> control_minimum(const LQSpec& lq, double t, const Mat& K) {
  int best = 0;
  double best_value = std::numeric_limits<double>::infinity();
  for (int v = 0; v < lq.domain.size(); ++v) {
    const Vec& u = lq.domain.point(v);
    const Mat s = lq.sigma_u(t, u);
    double value = lq.g(t, u);
    for (int i = 0; i < s.cols(); ++i) value += 0.5 * s.col(i).dot(K * s.col(i));
    if (value < best_value) {
      best_value = value;
      best = v;
    }
  }
  return {best, best_value};
}

struct ValueRates {
  Mat K;
  Vec k;
  double c;
};

ValueRates value_rates(const LQSpec& lq, double t, const Mat& K, const Vec& k) {
  const Mat b1 = lq.b1(t);
  const Vec b2 = lq.b2(t);
  return {-(K * b1 + b1.transpose() * K + lq.G(t)), -(b1.transpose() * k + K * b2),
          -(b2.dot(k) + control_minimum(lq, t, K).second)};
}

}  // namespace

LyapunovSolution lyapunov_solve(const LQSpec& lq, const TimeGrid& grid) {
  check_lq(lq);
  const int steps = grid.steps();
  const double h = grid.dt();
  LyapunovSolution sol;
  sol.K.resize(static_cast<std::size_t>(steps) + 1);
  sol.k.resize(static_cast<std::size_t>(steps) + 1);
  sol.c.resize(static_cast<std::size_t>(steps) + 1);

  Mat K = lq.Gamma;
  Vec k = Vec::Zero(lq.n);
  double c = 0.0;
  sol.K[steps] = K;
  sol.k[steps] = k;
  sol.c[steps] = c;
  for (int i = steps; i > 0; --i) {
    const double t = grid.time(i);
    const double tm = t - 0.5 * h;
    const double t0 = grid.time(i - 1);
    const ValueRates r1 = value_rates(lq, t, K, k);
    const ValueRates r2 = value_rates(lq, tm, K - 0.5 * h * r1.K, k - 0.5 * h * r1.k);
    const ValueRates r3 = value_rates(lq, tm, K - 0.5 * h * r2.K, k - 0.5 * h * r2.k);
    const ValueRates r4 = value_rates(lq, t0, K - h * r3.K, k - h * r3.k);
    K -= h / 6.0 * (r1.K + 2.0 * r2.K + 2.0 * r3.K + r4.K);
    k -= h / 6.0 * (r1.k + 2.0 * r2.k + 2.0 * r3.k + r4.k);
    c -= h / 6.0 * (r1.c + 2.0 * r2.c + 2.0 * r3.c + r4.c);
    K = (0.5 * (K + K.transpose())).eval();
    if (!K.allFinite() || !k.allFinite() || !std::isfinite(c)) {
      throw NumericalError("value-function ODE diverged at step " + std::to_string(i - 1));
    }
    sol.K[static_cast<std::size_t>(i) - 1] = K;
    sol.k[static_cast<std::size_t>(i) - 1] = k;
    sol.c[static_cast<std::size_t>(i) - 1] = c;
  }
  return sol;
}

LQOracle lq_optimal_control(const LQSpec& lq, const TimeGrid& grid, const LyapunovSolution& sol, int paths) {
  const int steps = grid.steps();
  if (static_cast<int>(sol.K.size()) != steps + 1) throw ShapeError("Lyapunov solution does not match the grid");
  LQOracle oracle;
  oracle.lyapunov = sol;
  oracle.u_star_steps.resize(static_cast<std::size_t>(steps));
  for (int i = 0; i < steps; ++i) {
    oracle.u_star_steps[static_cast<std::size_t>(i)] = control_minimum(lq, grid.time(i), sol.K[i]).first;
  }
  std::vector<std::int32_t> indices(static_cast<std::size_t>(paths) * steps);
  for (int p = 0; p < paths; ++p) {
    std::copy(oracle.u_star_steps.begin(), oracle.u_star_steps.end(),
              indices.begin() + static_cast<std::ptrdiff_t>(p) * steps);
  }
  oracle.u_star = ControlProcess(paths, steps, std::move(indices));
  oracle.J_star = 0.5 * lq.x0.dot(sol.K[0] * lq.x0) + sol.k[0].dot(lq.x0) + sol.c[0];
  return oracle;
}

double fit_slope(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size()) throw ShapeError("fit_slope: size mismatch");
  const std::size_t n = x.size();
  if (n < 2) return std::numeric_limits<double>::quiet_NaN();
  double mx = 0.0, my = 0.0;
  for (std::size_t e = 0; e < n; ++e) {
    mx += x[e];
    my += y[e];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t e = 0; e < n; ++e) {
    sxy += (x[e] - mx) * (y[e] - my);
    sxx += (x[e] - mx) * (x[e] - mx);
  }
  if (sxx == 0.0) return std::numeric_limits<double>::quiet_NaN();
  return sxy / sxx;
}

RateResult rate_experiment(const LQSpec& lq, const MSAConfig& config, const InitialControl& init) {
  config.validate();
  const ProblemSpec spec = lq_embed(lq);
  const TimeGrid grid(lq.T, config.depth);
  const BrownianEnsemble W = generate_brownian(grid, config.paths, spec.d, config.seed, config.threads);
  const LQOracle oracle = lq_optimal_control(lq, grid, lyapunov_solve(lq, grid), config.paths);

  RateResult out;
  out.J_star = oracle.J_star;
  const StateEnsemble X_star = simulate_state(spec, grid, W, oracle.u_star, config.threads);
  out.J_star_saa = evaluate_cost(spec, grid, X_star, oracle.u_star, config.threads);
  out.tol_mc = 3.0 * (grid.dt() + 1.0 / std::sqrt(static_cast<double>(config.paths))) *
               std::max(1.0, std::abs(out.J_star));
  out.run = run_msa(spec, grid, W, config, init);

  std::vector<double> J{out.run.J_initial};
  for (std::size_t r = 1; r < out.run.records.size(); ++r) J.push_back(out.run.records[r].J);
  for (std::size_t e = 0; e < J.size(); ++e) {
    const int m = static_cast<int>(e) + 1;
    const double a = J[e] - out.J_star_saa;
    out.rows.push_back({m, a, a * std::sqrt(static_cast<double>(m))});
  }

  out.A_est = std::numeric_limits<double>::infinity();
  std::vector<double> lx, ly;
  for (std::size_t e = 0; e < out.rows.size(); ++e) {
    const RateRow& r = out.rows[e];
    if (r.a < -out.tol_mc) out.nonnegative = false;
    if (e > 0) {
      if (r.a > out.rows[e - 1].a) out.nonincreasing = false;
      out.plateau = std::max(out.plateau, r.a_sqrt_m);
    }
    if (e + 1 < out.rows.size() && r.a > out.tol_mc) {
      out.A_est = std::min(out.A_est, (r.a - out.rows[e + 1].a) / (r.a * r.a * r.a));
    }
    if (r.a > out.tol_mc) {
      lx.push_back(std::log(static_cast<double>(r.m)));
      ly.push_back(std::log(r.a));
      ++out.slope_points;
    }
  }
  const double a1 = out.rows.front().a;
  const double inv_sqrt_A = std::isinf(out.A_est) || out.A_est <= 0.0 ? 0.0 : 1.0 / std::sqrt(out.A_est);
  out.bound = 2.0 * std::max(a1, inv_sqrt_A);
  for (const RateRow& r : out.rows) {
    if (r.a_sqrt_m > out.bound) out.bounded = false;
  }

  if (out.slope_points >= 2) {
    out.slope = fit_slope(lx, ly);
  } else {
    // too few points above the noise floor: censored points enter at the
    // floor, so the fitted slope is an upper bound on the true one
    lx.clear();
    ly.clear();
    for (const RateRow& r : out.rows) {
      lx.push_back(std::log(static_cast<double>(r.m)));
      ly.push_back(std::log(std::max(r.a, out.tol_mc)));
    }
    out.slope = fit_slope(lx, ly);
    out.slope_points = static_cast<int>(lx.size());
    out.slope_is_bound = true;
  }
  return out;
}

int max_gap_constant_control(const ProblemSpec& spec, const MSAConfig& config) {
  config.validate();
  const TimeGrid grid(spec.T, config.depth);
  const BrownianEnsemble W = generate_brownian(grid, config.paths, spec.d, config.seed, config.threads);
  int best = 0;
  double best_mu = std::numeric_limits<double>::infinity();
  for (int v = 0; v < spec.domain.size(); ++v) {
    const SolverState s = evaluate_control(spec, grid, W, ControlProcess::constant(config.paths, grid.steps(), v), config);
    if (s.mu < best_mu) {
      best_mu = s.mu;
      best = v;
    }
  }
  return best;
}

std::pair<int, int> spike_steps(const TimeGrid& grid, double tau, double eps) {
  if (!(eps > 0.0)) throw ConfigError("spike half-width must be positive");
  if (tau < 0.0 || tau > grid.horizon()) throw ConfigError("spike centre outside [0, T]");
  const double lo = std::max(0.0, tau - eps);
  const double hi = std::min(grid.horizon(), tau + eps);
  const double a = lo / grid.dt();
  const double b = hi / grid.dt();
  const double ra = std::round(a);
  const double rb = std::round(b);
  if (std::abs(a - ra) > 1e-9 * std::max(1.0, a) || std::abs(b - rb) > 1e-9 * std::max(1.0, b)) {
    throw ConfigError("spike interval [" + format_double(lo) + ", " + format_double(hi) +
                      "] is not aligned with the time grid");
  }
  if (ra >= rb) throw ConfigError("spike interval is narrower than one grid step");
  return {static_cast<int>(ra), static_cast<int>(rb)};
}

RemainderResult remainder_experiment(const ProblemSpec& spec, const ControlProcess& u, double tau,
                                     const std::vector<double>& eps_list, const MSAConfig& config) {
  config.validate();
  const TimeGrid grid(spec.T, config.depth);
  const BrownianEnsemble W = generate_brownian(grid, config.paths, spec.d, config.seed, config.threads);
  const SolverState state = evaluate_control(spec, grid, W, u, config);
  const std::vector<double> base = path_costs(spec, grid, state.X, state.u, config.threads);
  const double M = static_cast<double>(config.paths);

  RemainderResult out;
  std::vector<double> lx, ly;
  for (double eps : eps_list) {
    const auto [first, last] = spike_steps(grid, tau, eps);
    const ControlProcess spiked = spike_control(state.u, state.gaps, first, last);
    const StateEnsemble Xs = simulate_state(spec, grid, W, spiked, config.threads);
    const std::vector<double> costs = path_costs(spec, grid, Xs, spiked, config.threads);
    std::vector<double> diff(costs.size());
    for (std::size_t p = 0; p < costs.size(); ++p) diff[p] = costs[p] - base[p];
    const double mean_diff = ordered_mean(diff);
    double var = 0.0;
    for (double d : diff) var += (d - mean_diff) * (d - mean_diff);
    var /= std::max(1.0, M - 1.0);

    RemainderRow row;
    row.eps = eps;
    row.R = mean_diff - gap_integral(state.gaps, grid, first, last);
    row.standard_error = std::sqrt(var / M);
    row.censored = std::abs(row.R) < 10.0 * row.standard_error || row.R == 0.0;
    row.diagnostic = first == 0 && last == grid.steps();
    if (!row.censored && !row.diagnostic) {
      lx.push_back(std::log(eps));
      ly.push_back(std::log(std::abs(row.R)));
    }
    out.rows.push_back(row);
  }
  out.fit_points = static_cast<int>(lx.size());
  out.slope = fit_slope(lx, ly);
  return out;
}

VariationalEnsemble variational_simulate(const ProblemSpec& spec, const TimeGrid& grid, const BrownianEnsemble& W,
                                         const ControlProcess& u, const StateEnsemble& X, const GapProcess& gaps,
                                         std::pair<int, int> step_range, int threads) {
  const auto& c = spec.coefficients;
  if (!c.has_second_derivatives()) throw ConfigError("variational equations need second derivatives");
  X.require_control(u);
  if (!(X.ensemble() == W.id())) throw ProvenanceError("state ensemble was simulated on a different Brownian ensemble");
  const auto [first, last] = step_range;
  const ControlProcess spiked = spike_control(u, gaps, first, last);
  const StateEnsemble Xs = simulate_state(spec, grid, W, spiked, threads);

  const int M = X.paths();
  const int steps = grid.steps();
  const int n = spec.n;
  const int d = spec.d;
  const double dt = grid.dt();
  VariationalEnsemble out;
  out.paths = M;
  out.steps = steps;
  out.n = n;
  out.X1.assign(static_cast<std::size_t>(M) * (steps + 1) * n, 0.0);
  out.X2.assign(out.X1.size(), 0.0);
  std::vector<double> defect(static_cast<std::size_t>(M), 0.0);

  parallel_for(M, threads, [&](int begin, int end) {
    for (int p = begin; p < end; ++p) {
      Vec x1 = Vec::Zero(n);
      Vec x2 = Vec::Zero(n);
      double worst = 0.0;
      for (int i = 0; i < steps; ++i) {
        const double t = grid.time(i);
        const Vec x = X.vec(p, i);
        const Vec& uu = spec.domain.point(u.index(p, i));
        const bool active = i >= first && i < last;
        const Vec& vv = spec.domain.point(spiked.index(p, i));
        const auto dw = W.dw(p, i);

        const Mat bx = c.drift_x(t, x, uu);
        Vec quad_b(n);
        for (int j = 0; j < n; ++j) quad_b(j) = x1.dot(c.drift_xx(t, x, uu, j) * x1);
        Vec dx1 = bx * x1 * dt;
        Vec dx2 = (bx * x2 + 0.5 * quad_b) * dt;
        if (active) dx2 += (c.drift(t, x, vv) - c.drift(t, x, uu)) * dt;

        const Mat sig_u = c.diffusion(t, x, uu);
        const Mat sig_v = active ? c.diffusion(t, x, vv) : sig_u;
        for (int col = 0; col < d; ++col) {
          const Mat sx = c.diffusion_x(t, x, uu, col);
          Vec quad_s(n);
          for (int j = 0; j < n; ++j) quad_s(j) = x1.dot(c.diffusion_xx(t, x, uu, col, j) * x1);
          Vec g1 = sx * x1;
          Vec g2 = sx * x2 + 0.5 * quad_s;
          if (active) {
            g1 += sig_v.col(col) - sig_u.col(col);
            g2 += (c.diffusion_x(t, x, vv, col) - sx) * x1;
          }
          dx1 += g1 * dw(col);
          dx2 += g2 * dw(col);
        }
        x1 += dx1;
        x2 += dx2;

        const std::size_t off = (static_cast<std::size_t>(p) * (steps + 1) + i + 1) * n;
        for (int j = 0; j < n; ++j) {
          out.X1[off + j] = x1(j);
          out.X2[off + j] = x2(j);
        }
        const Vec gap = Xs.vec(p, i + 1) - X.vec(p, i + 1) - x1 - x2;
        worst = std::max(worst, gap.squaredNorm());
      }
      defect[static_cast<std::size_t>(p)] = worst;
    }
  });
  out.e_sq = ordered_mean(defect);
  return out;
}

VariationalResult variational_experiment(const ProblemSpec& spec, const ControlProcess& u, double tau,
                                         const std::vector<double>& eps_list, const MSAConfig& config) {
  config.validate();
  const TimeGrid grid(spec.T, config.depth);
  const BrownianEnsemble W = generate_brownian(grid, config.paths, spec.d, config.seed, config.threads);
  const SolverState state = evaluate_control(spec, grid, W, u, config);

  VariationalResult out;
  std::vector<double> lx, ly;
  for (double eps : eps_list) {
    const auto range = spike_steps(grid, tau, eps);
    const VariationalEnsemble ve = variational_simulate(spec, grid, W, state.u, state.X, state.gaps, range,
                                                        config.threads);
    out.rows.push_back({eps, ve.e_sq});
    if (ve.e_sq > 0.0) {
      lx.push_back(std::log(eps));
      ly.push_back(std::log(ve.e_sq));
    }
  }
  out.slope = fit_slope(lx, ly);
  return out;
}

SequenceCheck sequence_lemma_check(double a1, double A, int m_max) {
  if (!(a1 >= 0.0)) throw ConfigError("a1 must be nonnegative");
  if (!(A > 0.0)) throw ConfigError("A must be positive");
  if (m_max < 1) throw ConfigError("m_max must be at least 1");
  SequenceCheck out;
  out.a1 = a1;
  out.A = A;
  out.a.resize(static_cast<std::size_t>(m_max));
  out.a[0] = a1;
  for (int m = 1; m < m_max; ++m) {
    const double prev = out.a[static_cast<std::size_t>(m) - 1];
    double next = prev - A * prev * prev * prev;
    if (next < 0.0) {
      out.saturated = true;
      next = 0.0;
    }
    out.a[static_cast<std::size_t>(m)] = next;
  }
  out.bound = std::max(a1, 1.0 / std::sqrt(A));
  for (int m = 1; m <= m_max; ++m) {
    const double b = out.a[static_cast<std::size_t>(m) - 1] * std::sqrt(static_cast<double>(m));
    out.max_b = std::max(out.max_b, b);
    if (b > out.bound) out.passed = false;
  }
  return out;
}

}  // namespace msa
