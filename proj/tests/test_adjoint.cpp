#include <gtest/gtest.h>

#include <cmath>

#include "msa/adjoint.hpp"
#include "msa/oracle.hpp"
#include "msa/registry.hpp"
#include "test_support.hpp"

using namespace msa;
using msa::testing::v1;

namespace {

struct Simulated {
  TimeGrid grid;
  BrownianEnsemble W;
  ControlProcess u;
  StateEnsemble X;
};

Simulated simulate(const ProblemSpec& spec, int depth, int M, int control, std::uint64_t seed = 42) {
  TimeGrid grid(spec.T, depth);
  BrownianEnsemble W = generate_brownian(grid, M, spec.d, seed);
  ControlProcess u = ControlProcess::constant(M, grid.steps(), control);
  StateEnsemble X = simulate_state(spec, grid, W, u);
  return {grid, std::move(W), std::move(u), std::move(X)};
}

const RegressionBasis kBasis{2, 1e-8};

// max_p,i |p - ref| / max_p,i |ref|
double max_relative(const std::vector<double>& a, const std::vector<double>& ref) {
  double num = 0.0, den = 0.0;
  for (std::size_t e = 0; e < a.size(); ++e) {
    num = std::max(num, std::abs(a[e] - ref[e]));
    den = std::max(den, std::abs(ref[e]));
  }
  return num / den;
}

}  // namespace

TEST(FirstAdjoint, ZeroDataGivesZeroAdjoint) {
  msa::testing::ScalarFns fns;
  fns.s = [](double, double) { return 1.0; };
  fns.b = [](double x, double) { return 0.3 * x; };
  fns.bx = [](double, double) { return 0.3; };
  const ProblemSpec spec = fns.spec();
  const Simulated r = simulate(spec, 4, 200, 0);
  for (int degree : {0, 2, 3}) {
    const AdjointFirst a = solve_first_adjoint(spec, r.grid, r.W, r.X, r.u, {degree, 1e-8});
    for (double v : a.p_data()) EXPECT_EQ(v, 0.0);
    for (double v : a.q_data()) EXPECT_EQ(v, 0.0);
    const AdjointSecond b = solve_second_adjoint(spec, r.grid, r.W, r.X, r.u, a, {degree, 1e-8});
    for (double v : b.data()) EXPECT_EQ(v, 0.0);
  }
}

TEST(FirstAdjoint, TerminalValueIsExact) {
  const RegistryProblem prob = make_problem("nonconvex-diffusion");
  const Simulated r = simulate(prob.spec, 4, 500, 0);
  const AdjointFirst a = solve_first_adjoint(prob.spec, r.grid, r.W, r.X, r.u, kBasis);
  const AdjointSecond b = solve_second_adjoint(prob.spec, r.grid, r.W, r.X, r.u, a, kBasis);
  const int S = r.grid.steps();
  for (int p = 0; p < r.X.paths(); ++p) {
    EXPECT_EQ(a.p(p, S)(0), prob.spec.coefficients.terminal_cost_x(r.X.vec(p, S))(0));
    EXPECT_EQ(b.P(p, S)(0, 0), prob.spec.coefficients.terminal_cost_xx(r.X.vec(p, S))(0, 0));
  }
}

TEST(FirstAdjoint, UnitTerminalWeightTracksState) {
  msa::testing::ScalarLQ lq;
  lq.Gamma = 1.0;
  lq.s0 = 1.0;
  lq.s1 = 0.0;
  const ProblemSpec spec = lq_embed(lq.spec());
  const Simulated r = simulate(spec, 6, 10000, 0);
  const AdjointFirst a = solve_first_adjoint(spec, r.grid, r.W, r.X, r.u, kBasis);
  EXPECT_LE(max_relative(a.p_data(), r.X.data()), 0.05);
}

TEST(FirstAdjoint, RunningCostMatchesLyapunov) {
  msa::testing::ScalarLQ lq;
  lq.G = 1.0;
  lq.s0 = 0.4;
  lq.s1 = 0.0;
  const LQSpec spec_lq = lq.spec();
  const ProblemSpec spec = lq_embed(spec_lq);
  const Simulated r = simulate(spec, 6, 10000, 0);
  const AdjointFirst a = solve_first_adjoint(spec, r.grid, r.W, r.X, r.u, kBasis);
  const auto exact = lq_closed_form_adjoint(spec_lq, r.grid, r.X, r.u);
  EXPECT_LE(relative_l2_error(a.p_data(), exact.first.p_data()), 0.05);
}

TEST(Hessian, Examples) {
  msa::testing::ScalarFns fns;
  fns.b = [](double x, double) { return x * x; };
  fns.bx = [](double x, double) { return 2.0 * x; };
  fns.bxx = [](double, double) { return 2.0; };
  fns.fxx = [](double, double) { return 0.0; };
  const ProblemSpec spec = fns.spec();
  EXPECT_DOUBLE_EQ(hessian_of_H(spec, 0.0, v1(0.7), v1(3.0), msa::testing::m1(0.0), v1(0.0))(0, 0), 6.0);

  const ProblemSpec nc = make_problem("nonconvex-diffusion").spec;
  const Vec x = v1(0.4);
  EXPECT_DOUBLE_EQ(hessian_of_H(nc, 0.0, x, v1(0.0), msa::testing::m1(0.0), v1(1.0))(0, 0),
                   nc.coefficients.running_cost_xx(0.0, x, v1(1.0))(0, 0));

  msa::testing::ScalarLQ lq;
  lq.G = 2.5;
  const ProblemSpec emb = lq_embed(lq.spec());
  msa::testing::Gen gen(3);
  for (int i = 0; i < 10; ++i) {
    const double h = hessian_of_H(emb, 0.2, v1(gen.normal()), v1(gen.normal()), msa::testing::m1(gen.normal()),
                                  v1(0.0))(0, 0);
    EXPECT_DOUBLE_EQ(h, 2.5);
  }
}

TEST(SecondAdjoint, RunningCostGivesTimeToGo) {
  msa::testing::ScalarLQ lq;
  lq.G = 1.0;
  lq.s0 = 0.4;
  lq.s1 = 0.0;
  const ProblemSpec spec = lq_embed(lq.spec());
  const Simulated r = simulate(spec, 6, 10000, 0);
  const AdjointFirst a = solve_first_adjoint(spec, r.grid, r.W, r.X, r.u, kBasis);
  const AdjointSecond b = solve_second_adjoint(spec, r.grid, r.W, r.X, r.u, a, kBasis);
  double worst = 0.0;
  for (int p = 0; p < r.X.paths(); ++p) {
    for (int i = 0; i <= r.grid.steps(); ++i) {
      worst = std::max(worst, std::abs(b.P(p, i)(0, 0) - (1.0 - r.grid.time(i))));
    }
  }
  EXPECT_LE(worst, 0.02);
}

TEST(SecondAdjoint, OracleEquivalenceOnRegistry) {
  for (const auto& key : registry_lq_keys()) {
    const RegistryProblem prob = make_problem(key);
    for (int control : {0, prob.spec.domain.size() / 2, prob.spec.domain.size() - 1}) {
      const Simulated r = simulate(prob.spec, 6, 10000, control);
      const AdjointFirst a = solve_first_adjoint(prob.spec, r.grid, r.W, r.X, r.u, kBasis);
      const AdjointSecond b = solve_second_adjoint(prob.spec, r.grid, r.W, r.X, r.u, a, kBasis);
      const auto exact = lq_closed_form_adjoint(*prob.lq, r.grid, r.X, r.u);
      EXPECT_LE(relative_l2_error(a.p_data(), exact.first.p_data()), 0.05) << key << " u=" << control;
      EXPECT_LE(relative_l2_error(b.data(), exact.second.data()), 0.05) << key << " u=" << control;
      EXPECT_LE(b.max_asymmetry, 1e-8);
    }
  }
}

TEST(SecondAdjoint, CoupledLqMatchesOracleAndStaysSymmetric) {
  const LQSpec lq = msa::testing::coupled_lq();
  const ProblemSpec spec = lq_embed(lq);
  const Simulated r = simulate(spec, 6, 10000, 1);
  const AdjointFirst a = solve_first_adjoint(spec, r.grid, r.W, r.X, r.u, kBasis);
  const AdjointSecond b = solve_second_adjoint(spec, r.grid, r.W, r.X, r.u, a, kBasis);
  const auto exact = lq_closed_form_adjoint(lq, r.grid, r.X, r.u);
  EXPECT_LE(relative_l2_error(a.p_data(), exact.first.p_data()), 0.05);
  EXPECT_LE(relative_l2_error(b.data(), exact.second.data()), 0.05);
  EXPECT_LE(b.max_asymmetry, 1e-8);
  for (int p = 0; p < r.X.paths(); p += 97) {
    for (int i = 0; i <= r.grid.steps(); ++i) {
      const auto P = b.P(p, i);
      EXPECT_EQ(P(0, 1), P(1, 0));
    }
  }
}

TEST(ClosedForm, ZeroCostsGiveZeroAdjoints) {
  msa::testing::ScalarLQ lq;
  lq.b1 = 0.7;
  const LQSpec spec_lq = lq.spec();
  const Simulated r = simulate(lq_embed(spec_lq), 4, 20, 2);
  const auto [a, b] = lq_closed_form_adjoint(spec_lq, r.grid, r.X, r.u);
  for (double v : a.p_data()) EXPECT_EQ(v, 0.0);
  for (double v : a.q_data()) EXPECT_EQ(v, 0.0);
  for (double v : b.data()) EXPECT_EQ(v, 0.0);
}

TEST(ClosedForm, RunningCostTimeToGo) {
  msa::testing::ScalarLQ lq;
  lq.G = 1.0;
  const LQSpec spec_lq = lq.spec();
  const Simulated r = simulate(lq_embed(spec_lq), 5, 4, 2);
  const auto [a, b] = lq_closed_form_adjoint(spec_lq, r.grid, r.X, r.u);
  for (int i = 0; i <= r.grid.steps(); ++i) {
    const double K = 1.0 - r.grid.time(i);
    EXPECT_NEAR(b.P(1, i)(0, 0), K, 1e-10);
    EXPECT_NEAR(a.p(1, i)(0), K * r.X.x(1, i)(0), 1e-10);
  }
}

TEST(ClosedForm, ConstantDriftShiftsCostate) {
  msa::testing::ScalarLQ lq;
  lq.b2 = 1.0;
  lq.Gamma = 1.0;
  const LQSpec spec_lq = lq.spec();
  const Simulated r = simulate(lq_embed(spec_lq), 5, 4, 0);
  const auto [a, b] = lq_closed_form_adjoint(spec_lq, r.grid, r.X, r.u);
  for (int p = 0; p < 4; ++p) {
    for (int i = 0; i <= r.grid.steps(); ++i) {
      EXPECT_NEAR(b.P(p, i)(0, 0), 1.0, 1e-12);
      EXPECT_NEAR(a.p(p, i)(0), r.X.x(p, i)(0) + (1.0 - r.grid.time(i)), 1e-10);
      if (i < r.grid.steps()) EXPECT_NEAR(a.q(p, i)(0, 0), -1.0, 1e-12);  // K sigma_u(-1) = -1
    }
  }
}

TEST(ClosedForm, SharesLyapunovSolution) {
  const LQSpec lq = lq_scalar_spec();
  const Simulated r = simulate(lq_embed(lq), 5, 3, 4);
  const LyapunovSolution sol = lyapunov_solve(lq, r.grid);
  const auto exact = lq_closed_form_adjoint(lq, r.grid, r.X, r.u);
  for (int i = 0; i <= r.grid.steps(); ++i) EXPECT_EQ(exact.second.P(0, i)(0, 0), sol.K[i](0, 0));
}

TEST(Adjoint, RejectsMismatchedControl) {
  const ProblemSpec spec = make_problem("nonconvex-diffusion").spec;
  const Simulated r = simulate(spec, 3, 50, 0);
  const ControlProcess other = ControlProcess::constant(50, r.grid.steps(), 1);
  EXPECT_THROW((void)solve_first_adjoint(spec, r.grid, r.W, r.X, other, kBasis), ProvenanceError);
}
