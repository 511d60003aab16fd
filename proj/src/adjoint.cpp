#include "msa/adjoint.hpp"

#include <cmath>
#include <string>

#include "msa/oracle.hpp"
#include "msa/parallel.hpp"

namespace msa {

AdjointFirst::AdjointFirst(int paths, int steps, int n, int d)
    : paths_(paths),
      steps_(steps),
      n_(n),
      d_(d),
      p_(static_cast<std::size_t>(paths) * (steps + 1) * n, 0.0),
      q_(static_cast<std::size_t>(paths) * steps * n * d, 0.0) {}

AdjointSecond::AdjointSecond(int paths, int steps, int n)
    : paths_(paths), steps_(steps), n_(n), P_(static_cast<std::size_t>(paths) * (steps + 1) * n * n, 0.0) {}

namespace {

void check_inputs(const ProblemSpec& spec, const TimeGrid& grid, const BrownianEnsemble& W, const StateEnsemble& X,
                  const ControlProcess& u) {
  X.require_control(u);
  if (!(X.ensemble() == W.id())) throw ProvenanceError("state ensemble was simulated on a different Brownian ensemble");
  if (X.steps() != grid.steps() || X.dim() != spec.n || W.dim() != spec.d) {
    throw ShapeError("adjoint solver inputs do not match the problem dimensions");
  }
}

Eigen::MatrixXd gather_states(const StateEnsemble& X, int step) {
  Eigen::MatrixXd s(X.paths(), X.dim());
  for (int p = 0; p < X.paths(); ++p) s.row(p) = X.x(p, step).transpose();
  return s;
}

// Fits E[target | X_i] and wraps regression failures with the step index.
ConditionalExpectation make_regressor(const StateEnsemble& X, int step, const RegressionBasis& basis) {
  try {
    return ConditionalExpectation(gather_states(X, step), basis);
  } catch (const RegressionError& e) {
    throw RegressionError(std::string(e.what()) + " at step " + std::to_string(step));
  }
}

}  // namespace

AdjointFirst solve_first_adjoint(const ProblemSpec& spec, const TimeGrid& grid, const BrownianEnsemble& W,
                                 const StateEnsemble& X, const ControlProcess& u, const RegressionBasis& basis,
                                 int threads) {
  check_inputs(spec, grid, W, X, u);
  const int M = X.paths();
  const int steps = grid.steps();
  const int n = spec.n;
  const int d = spec.d;
  const double dt = grid.dt();
  const auto& c = spec.coefficients;

  AdjointFirst adj(M, steps, n, d);
  parallel_for(M, threads, [&](int begin, int end) {
    for (int p = begin; p < end; ++p) adj.p(p, steps) = c.terminal_cost_x(X.vec(p, steps));
  });

  Eigen::MatrixXd next(M, n);
  Eigen::MatrixXd qtarget(M, n * d);
  for (int i = steps - 1; i >= 0; --i) {
    const ConditionalExpectation ce = make_regressor(X, i, basis);
    for (int p = 0; p < M; ++p) next.row(p) = adj.p(p, i + 1).transpose();
    const Eigen::MatrixXd p_hat = ce.fit(next).fitted;

    // centred quotient estimator: subtracting the X_i-measurable fit leaves the
    // conditional expectation unchanged and removes most of its variance
    for (int p = 0; p < M; ++p) {
      const auto dw = W.dw(p, i);
      for (int col = 0; col < d; ++col) {
        for (int j = 0; j < n; ++j) qtarget(p, j + n * col) = (next(p, j) - p_hat(p, j)) * dw(col) / dt;
      }
    }
    const Eigen::MatrixXd q_hat = ce.fit(qtarget).fitted;

    const double t = grid.time(i);
    parallel_for(M, threads, [&](int begin, int end) {
      for (int p = begin; p < end; ++p) {
        const Vec x = X.vec(p, i);
        const Vec& v = spec.domain.point(u.index(p, i));
        Vec ph = p_hat.row(p).transpose();
        auto q = adj.q(p, i);
        for (int col = 0; col < d; ++col) {
          for (int j = 0; j < n; ++j) q(j, col) = q_hat(p, j + n * col);
        }
        Vec driver = c.drift_x(t, x, v).transpose() * ph + c.running_cost_x(t, x, v);
        for (int col = 0; col < d; ++col) {
          driver += c.diffusion_x(t, x, v, col).transpose() * q.col(col);
        }
        adj.p(p, i) = ph + dt * driver;
      }
    });
  }
  return adj;
}

Mat hessian_of_H(const ProblemSpec& spec, double t, const Vec& x, const Vec& p, const Mat& q, const Vec& u) {
  const auto& c = spec.coefficients;
  if (!c.has_second_derivatives()) throw ConfigError("second derivatives are required for H_xx");
  Mat h = c.running_cost_xx(t, x, u);
  for (int j = 0; j < spec.n; ++j) {
    if (p(j) != 0.0) h += p(j) * c.drift_xx(t, x, u, j);
    for (int i = 0; i < spec.d; ++i) {
      if (q(j, i) != 0.0) h += q(j, i) * c.diffusion_xx(t, x, u, i, j);
    }
  }
  return h;
}

AdjointSecond solve_second_adjoint(const ProblemSpec& spec, const TimeGrid& grid, const BrownianEnsemble& W,
                                   const StateEnsemble& X, const ControlProcess& u, const AdjointFirst& adj1,
                                   const RegressionBasis& basis, int threads) {
  check_inputs(spec, grid, W, X, u);
  const int M = X.paths();
  const int steps = grid.steps();
  const int n = spec.n;
  const int d = spec.d;
  const int nn = n * n;
  const double dt = grid.dt();
  const auto& c = spec.coefficients;
  if (!c.has_second_derivatives()) throw ConfigError("second derivatives are required for the second adjoint");
  if (adj1.paths() != M || adj1.steps() != steps) throw ShapeError("first adjoint does not match the ensemble");

  AdjointSecond adj(M, steps, n);
  parallel_for(M, threads, [&](int begin, int end) {
    for (int p = begin; p < end; ++p) adj.P(p, steps) = c.terminal_cost_xx(X.vec(p, steps));
  });

  std::vector<double> asym(static_cast<std::size_t>(M), 0.0);
  Eigen::MatrixXd next(M, nn);
  Eigen::MatrixXd qtarget(M, nn * d);
  std::vector<Mat> sigma_x(static_cast<std::size_t>(M) * d);
  for (int i = steps - 1; i >= 0; --i) {
    const double t = grid.time(i);
    bool diffusion_depends_on_x = false;
    for (int p = 0; p < M; ++p) {
      const Vec x = X.vec(p, i);
      const Vec& v = spec.domain.point(u.index(p, i));
      for (int col = 0; col < d; ++col) {
        Mat& sx = sigma_x[static_cast<std::size_t>(p) * d + col];
        sx = c.diffusion_x(t, x, v, col);
        diffusion_depends_on_x = diffusion_depends_on_x || !sx.isZero(0.0);
      }
    }

    const ConditionalExpectation ce = make_regressor(X, i, basis);
    for (int p = 0; p < M; ++p) {
      const auto P = adj.P(p, i + 1);
      for (int e = 0; e < nn; ++e) next(p, e) = P.data()[e];
    }
    const Eigen::MatrixXd P_hat = ce.fit(next).fitted;
    Eigen::MatrixXd Q_hat;
    if (diffusion_depends_on_x) {
      for (int p = 0; p < M; ++p) {
        const auto dw = W.dw(p, i);
        for (int col = 0; col < d; ++col) {
          for (int e = 0; e < nn; ++e) qtarget(p, e + nn * col) = (next(p, e) - P_hat(p, e)) * dw(col) / dt;
        }
      }
      Q_hat = ce.fit(qtarget).fitted;
    }

    parallel_for(M, threads, [&](int begin, int end) {
      for (int p = begin; p < end; ++p) {
        const Vec x = X.vec(p, i);
        const Vec& v = spec.domain.point(u.index(p, i));
        const Mat Ph = Eigen::Map<const Eigen::MatrixXd>(P_hat.row(p).eval().data(), n, n);
        const Mat bx = c.drift_x(t, x, v);
        Mat driver = bx.transpose() * Ph + Ph.transpose() * bx;
        for (int col = 0; col < d; ++col) {
          const Mat& sx = sigma_x[static_cast<std::size_t>(p) * d + col];
          driver += sx.transpose() * Ph * sx;
          if (diffusion_depends_on_x) {
            const Mat Q = Eigen::Map<const Eigen::MatrixXd>(Q_hat.row(p).segment(nn * col, nn).eval().data(), n, n);
            driver += sx.transpose() * Q + Q.transpose() * sx;
          }
        }
        const Vec pv = adj1.p(p, i);
        const Mat qv = adj1.q(p, i);
        driver += hessian_of_H(spec, t, x, pv, qv, v);
        Mat Pi = Ph + dt * driver;
        const double scale = std::max(1.0, Pi.cwiseAbs().maxCoeff());
        asym[static_cast<std::size_t>(p)] =
            std::max(asym[static_cast<std::size_t>(p)], (Pi - Pi.transpose()).cwiseAbs().maxCoeff() / scale);
        adj.P(p, i) = 0.5 * (Pi + Pi.transpose());
      }
    });
  }
  for (double a : asym) adj.max_asymmetry = std::max(adj.max_asymmetry, a);
  return adj;
}

std::pair<AdjointFirst, AdjointSecond> lq_closed_form_adjoint(const LQSpec& lq, const TimeGrid& grid,
                                                              const StateEnsemble& X, const ControlProcess& u) {
  X.require_control(u);
  const LyapunovSolution sol = lyapunov_solve(lq, grid);
  const int M = X.paths();
  const int steps = grid.steps();
  AdjointFirst a1(M, steps, lq.n, lq.d);
  AdjointSecond a2(M, steps, lq.n);
  for (int p = 0; p < M; ++p) {
    for (int i = 0; i <= steps; ++i) {
      const auto& K = sol.K[static_cast<std::size_t>(i)];
      a1.p(p, i) = K * X.vec(p, i) + sol.k[static_cast<std::size_t>(i)];
      a2.P(p, i) = K;
      if (i < steps) a1.q(p, i) = K * lq.sigma_u(grid.time(i), lq.domain.point(u.index(p, i)));
    }
  }
  return {std::move(a1), std::move(a2)};
}

double relative_l2_error(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw ShapeError("relative_l2_error: size mismatch");
  double num = 0.0, den = 0.0;
  for (std::size_t e = 0; e < a.size(); ++e) {
    num += (a[e] - b[e]) * (a[e] - b[e]);
    den += b[e] * b[e];
  }
  return den == 0.0 ? std::sqrt(num) : std::sqrt(num / den);
}

}  // namespace msa
