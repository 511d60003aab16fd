#include "msa/hamiltonian.hpp"

#include <limits>

#include "msa/parallel.hpp"

namespace msa {

namespace {

struct Coeffs {
  Vec b;
  Mat sigma;
  double f;
};

Coeffs evaluate(const ProblemSpec& spec, double t, const Vec& x, const Vec& v) {
  const auto& c = spec.coefficients;
  return {c.drift(t, x, v), c.diffusion(t, x, v), c.running_cost(t, x, v)};
}

double h_from(const Coeffs& at_v, const Mat& sigma_u, double correction_u, const Vec& p, const Mat& q, const Mat& P) {
  const Mat diff = at_v.sigma - sigma_u;
  double quad = 0.0;
  for (int i = 0; i < diff.cols(); ++i) quad += diff.col(i).dot(P * diff.col(i));
  const double H = p.dot(at_v.b) + (q.array() * at_v.sigma.array()).sum() + at_v.f;
  return H + 0.5 * quad - correction_u;
}

double sigma_quadratic(const Mat& sigma, const Mat& P) {
  double s = 0.0;
  for (int i = 0; i < sigma.cols(); ++i) s += sigma.col(i).dot(P * sigma.col(i));
  return 0.5 * s;
}

}  // namespace

double hamiltonian(const ProblemSpec& spec, double t, const Vec& x, const Vec& p, const Mat& q, const Vec& u) {
  const Coeffs at = evaluate(spec, t, x, u);
  return p.dot(at.b) + (q.array() * at.sigma.array()).sum() + at.f;
}

double h_function(const ProblemSpec& spec, double t, const Vec& x, const Vec& p, const Mat& q, const Mat& P,
                  const Vec& v, const Vec& u) {
  const Mat sigma_u = spec.coefficients.diffusion(t, x, u);
  return h_from(evaluate(spec, t, x, v), sigma_u, sigma_quadratic(sigma_u, P), p, q, P);
}

Minimizer minimize_h(const ProblemSpec& spec, double t, const Vec& x, const Vec& p, const Mat& q, const Mat& P,
                     int u_index) {
  const auto& domain = spec.domain;
  if (!domain.contains_index(u_index)) throw ConfigError("control index outside the domain");
  const Mat sigma_u = spec.coefficients.diffusion(t, x, domain.point(u_index));
  const double correction = sigma_quadratic(sigma_u, P);

  double h_u = 0.0;
  double best = std::numeric_limits<double>::infinity();
  int best_index = u_index;
  for (int v = 0; v < domain.size(); ++v) {
    const double h = h_from(evaluate(spec, t, x, domain.point(v)), sigma_u, correction, p, q, P);
    if (v == u_index) h_u = h;
    if (h < best) {
      best = h;
      best_index = v;
    }
  }
  if (h_u <= best) return {u_index, 0.0};
  return {best_index, best - h_u};
}

GapProcess::GapProcess(int paths, int steps)
    : paths_(paths),
      steps_(steps),
      values_(static_cast<std::size_t>(paths) * steps, 0.0),
      argmin_(static_cast<std::size_t>(paths) * steps, 0) {}

GapProcess gap_process(const ProblemSpec& spec, const TimeGrid& grid, const StateEnsemble& X,
                       const ControlProcess& u, const AdjointFirst& adj1, const AdjointSecond& adj2, int threads) {
  X.require_control(u);
  const int M = X.paths();
  const int steps = grid.steps();
  if (adj1.paths() != M || adj2.paths() != M || adj1.steps() != steps || adj2.steps() != steps) {
    throw ShapeError("adjoints do not match the state ensemble");
  }
  GapProcess gaps(M, steps);
  parallel_for(M, threads, [&](int begin, int end) {
    for (int p = begin; p < end; ++p) {
      for (int i = 0; i < steps; ++i) {
        const Minimizer m = minimize_h(spec, grid.time(i), X.vec(p, i), adj1.p(p, i), adj1.q(p, i), adj2.P(p, i),
                                       u.index(p, i));
        gaps.set(p, i, m.gap, m.index);
      }
    }
  });
  return gaps;
}

double gap_integral(const GapProcess& gaps, const TimeGrid& grid, int first, int last) {
  if (first < 0 || last > gaps.steps() || first > last) throw ConfigError("gap integral range out of bounds");
  double total = 0.0;
  for (int p = 0; p < gaps.paths(); ++p) {
    double path_sum = 0.0;
    for (int i = first; i < last; ++i) path_sum += gaps.value(p, i);
    total += path_sum * grid.dt();
  }
  return total / gaps.paths();
}

double mu(const GapProcess& gaps, const TimeGrid& grid) { return gap_integral(gaps, grid, 0, gaps.steps()); }

}  // namespace msa
