#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <numeric>
#include <sstream>

#include "msa/oracle.hpp"
#include "msa/paths.hpp"
#include "msa/registry.hpp"
#include "test_support.hpp"

using namespace msa;
using msa::testing::v1;

namespace {

ProblemSpec additive_noise(double x0) {
  msa::testing::ScalarFns fns;
  fns.s = [](double, double) { return 1.0; };
  fns.x0 = x0;
  return fns.spec();
}

}  // namespace

TEST(TimeGrid, DyadicLayout) {
  const TimeGrid grid(2.0, 3);
  EXPECT_EQ(grid.steps(), 8);
  EXPECT_DOUBLE_EQ(grid.dt(), 0.25);
  EXPECT_EQ(grid.time(0), 0.0);
  EXPECT_EQ(grid.time(grid.steps()), 2.0);
  EXPECT_THROW(TimeGrid(0.0, 3), ConfigError);
  EXPECT_THROW(TimeGrid(1.0, 0), ConfigError);
}

TEST(Brownian, SameSeedIsBitIdentical) {
  const TimeGrid grid(1.0, 4);
  const BrownianEnsemble a = generate_brownian(grid, 2, 1, 7);
  const BrownianEnsemble b = generate_brownian(grid, 2, 1, 7);
  EXPECT_EQ(a.data(), b.data());
  EXPECT_EQ(a.id(), b.id());
}

TEST(Brownian, DifferentSeedsDiffer) {
  const TimeGrid grid(1.0, 4);
  EXPECT_NE(generate_brownian(grid, 2, 1, 7).data(), generate_brownian(grid, 2, 1, 8).data());
}

TEST(Brownian, ThreadCountDoesNotChangeDraws) {
  const TimeGrid grid(1.0, 5);
  EXPECT_EQ(generate_brownian(grid, 37, 2, 3, 1).data(), generate_brownian(grid, 37, 2, 3, 4).data());
}

TEST(Brownian, PathStreamIndependentOfPathCount) {
  const TimeGrid grid(1.0, 4);
  const BrownianEnsemble small = generate_brownian(grid, 3, 1, 11);
  const BrownianEnsemble large = generate_brownian(grid, 10, 1, 11);
  for (int p = 0; p < 3; ++p) {
    for (int i = 0; i < grid.steps(); ++i) EXPECT_EQ(small.dw(p, i)(0), large.dw(p, i)(0));
  }
}

TEST(Brownian, MomentsMatchIncrementLaw) {
  const TimeGrid grid(1.0, 4);
  const int M = 10000;
  const BrownianEnsemble W = generate_brownian(grid, M, 1, 42);
  for (int i = 0; i < grid.steps(); ++i) {
    double s = 0.0, s2 = 0.0;
    for (int p = 0; p < M; ++p) {
      const double x = W.dw(p, i)(0);
      s += x;
      s2 += x * x;
    }
    const double mean = s / M;
    const double var = s2 / M - mean * mean;
    EXPECT_LE(std::abs(mean), 5.0 * std::sqrt(grid.dt()) / std::sqrt(M)) << "step " << i;
    EXPECT_GE(var, 0.9 * grid.dt());
    EXPECT_LE(var, 1.1 * grid.dt());
  }
}

TEST(Simulate, FrozenDynamicsStayAtX0) {
  msa::testing::ScalarFns fns;
  fns.x0 = 0.7;
  const ProblemSpec spec = fns.spec();
  const TimeGrid grid(1.0, 4);
  const BrownianEnsemble W = generate_brownian(grid, 5, 1, 1);
  const StateEnsemble X = simulate_state(spec, grid, W, ControlProcess::constant(5, grid.steps(), 0));
  for (double v : X.data()) EXPECT_EQ(v, 0.7);
}

TEST(Simulate, AdditiveNoiseIsExact) {
  const ProblemSpec spec = additive_noise(0.25);
  const TimeGrid grid(1.0, 5);
  const BrownianEnsemble W = generate_brownian(grid, 20, 1, 3);
  const StateEnsemble X = simulate_state(spec, grid, W, ControlProcess::constant(20, grid.steps(), 1));
  for (int p = 0; p < 20; ++p) {
    // telescoping sum x0 + dW_0 + ... + dW_i, accumulated left to right
    double x = 0.25;
    EXPECT_EQ(X.x(p, 0)(0), x);
    for (int i = 0; i < grid.steps(); ++i) {
      x += W.dw(p, i)(0);
      EXPECT_EQ(X.x(p, i + 1)(0), x);
    }
  }
}

TEST(Simulate, LinearDriftMatchesEulerRecursion) {
  msa::testing::ScalarFns fns;
  fns.b = [](double x, double) { return x; };
  fns.x0 = 1.0;
  const ProblemSpec spec = fns.spec();
  for (int depth : {2, 4, 8}) {
    const TimeGrid grid(1.0, depth);
    const BrownianEnsemble W = generate_brownian(grid, 3, 1, 1);
    const StateEnsemble X = simulate_state(spec, grid, W, ControlProcess::constant(3, grid.steps(), 0));
    const double expected = std::pow(1.0 + grid.dt(), grid.steps());
    EXPECT_NEAR(X.x(0, grid.steps())(0), expected, 1e-12 * expected);
  }
  const TimeGrid fine(1.0, 12);
  const BrownianEnsemble W = generate_brownian(fine, 1, 1, 1);
  const StateEnsemble X = simulate_state(spec, fine, W, ControlProcess::constant(1, fine.steps(), 0));
  EXPECT_NEAR(X.x(0, fine.steps())(0), std::exp(1.0), 1e-3);
}

TEST(Simulate, NonFiniteStateNamesPathAndStep) {
  msa::testing::ScalarFns fns;
  fns.b = [](double x, double) { return x * x * x * x * 1e80; };
  const ProblemSpec spec = fns.spec();
  const TimeGrid grid(1.0, 4);
  const BrownianEnsemble W = generate_brownian(grid, 2, 1, 1);
  try {
    (void)simulate_state(spec, grid, W, ControlProcess::constant(2, grid.steps(), 0));
    FAIL() << "expected NumericalError";
  } catch (const NumericalError& e) {
    EXPECT_NE(std::string(e.what()).find("path 0"), std::string::npos) << e.what();
  }
}

TEST(Cost, MartingaleTerminalCost) {
  msa::testing::ScalarFns fns = {};
  fns.s = [](double, double) { return 1.0; };
  fns.phi = [](double x) { return x; };
  fns.x0 = 0.4;
  const ProblemSpec spec = fns.spec();
  const TimeGrid grid(1.0, 4);
  const int M = 10000;
  const BrownianEnsemble W = generate_brownian(grid, M, 1, 9);
  const ControlProcess u = ControlProcess::constant(M, grid.steps(), 0);
  const double J = evaluate_cost(spec, grid, simulate_state(spec, grid, W, u), u);
  EXPECT_LE(std::abs(J - 0.4), 5.0 / std::sqrt(M));
}

TEST(Cost, UnitRunningCostGivesHorizon) {
  msa::testing::ScalarFns fns;
  fns.f = [](double, double) { return 1.0; };
  fns.s = [](double, double) { return 1.0; };
  fns.T = 2.0;
  const ProblemSpec spec = fns.spec();
  const TimeGrid grid(2.0, 5);
  const BrownianEnsemble W = generate_brownian(grid, 8, 1, 1);
  const ControlProcess u = ControlProcess::constant(8, grid.steps(), 0);
  EXPECT_EQ(evaluate_cost(spec, grid, simulate_state(spec, grid, W, u), u), 2.0);
}

TEST(Cost, UnitNormControlGivesHorizon) {
  msa::testing::ScalarFns fns;
  fns.f = [](double, double u) { return u * u; };
  const ProblemSpec spec = fns.spec();
  const TimeGrid grid(1.0, 4);
  const BrownianEnsemble W = generate_brownian(grid, 4, 1, 1);
  const ControlProcess u = ControlProcess::constant(4, grid.steps(), 2);  // point 1.0
  EXPECT_EQ(evaluate_cost(spec, grid, simulate_state(spec, grid, W, u), u), 1.0);
}

TEST(Cost, RejectsForeignControl) {
  const ProblemSpec spec = additive_noise(0.0);
  const TimeGrid grid(1.0, 3);
  const BrownianEnsemble W = generate_brownian(grid, 4, 1, 1);
  const ControlProcess u = ControlProcess::constant(4, grid.steps(), 0);
  const ControlProcess v = ControlProcess::constant(4, grid.steps(), 1);
  const StateEnsemble X = simulate_state(spec, grid, W, u);
  EXPECT_THROW((void)evaluate_cost(spec, grid, X, v), ProvenanceError);
}

TEST(Moments, ConstantPaths) {
  msa::testing::ScalarFns fns;
  fns.x0 = -2.0;
  const ProblemSpec spec = fns.spec();
  const TimeGrid grid(1.0, 3);
  const BrownianEnsemble W = generate_brownian(grid, 3, 1, 1);
  const StateEnsemble X = simulate_state(spec, grid, W, ControlProcess::constant(3, grid.steps(), 0));
  EXPECT_DOUBLE_EQ(empirical_moment(X, 2), 4.0);
  fns.x0 = 0.0;
  const ProblemSpec zero = fns.spec();
  const StateEnsemble Z = simulate_state(zero, grid, W, ControlProcess::constant(3, grid.steps(), 0));
  for (int order : {2, 4, 8}) EXPECT_EQ(empirical_moment(Z, order), 0.0);
  EXPECT_THROW((void)empirical_moment(X, 3), ConfigError);
}

// The uniform bound over constant controls is reproducible across ensembles.
TEST(Moments, EighthMomentBoundStableAcrossSeeds) {
  const ProblemSpec spec = make_problem("lq-scalar").spec;
  const TimeGrid grid(1.0, 6);
  const int M = 10000;
  auto bound = [&](std::uint64_t seed) {
    const BrownianEnsemble W = generate_brownian(grid, M, 1, seed);
    double hi = 0.0;
    for (int v = 0; v < spec.domain.size(); ++v) {
      const StateEnsemble X = simulate_state(spec, grid, W, ControlProcess::constant(M, grid.steps(), v));
      const double m8 = empirical_moment(X, 8);
      EXPECT_TRUE(std::isfinite(m8));
      hi = std::max(hi, m8);
    }
    return hi;
  };
  const double a = bound(42), b = bound(43);
  EXPECT_GT(a, 0.0);
  EXPECT_LE(std::max(a, b), 2.0 * std::min(a, b));
}

// Property: paths agree bitwise up to the first step where the controls differ.
TEST(Paths, SpikeLocalityAndCommonRandomNumbers) {
  const ProblemSpec spec = make_problem("nonconvex-diffusion").spec;
  const TimeGrid grid(1.0, 5);
  const int M = 16;
  const BrownianEnsemble W = generate_brownian(grid, M, 1, 77);
  msa::testing::Gen gen(77);
  for (int trial = 0; trial < 20; ++trial) {
    const ControlProcess u = ControlProcess::constant(M, grid.steps(), gen.integer(0, 1));
    ControlProcess v = u;
    const int a = gen.integer(0, grid.steps() - 1);
    const int b = gen.integer(a + 1, grid.steps());
    for (int p = 0; p < M; ++p) {
      if (gen.integer(0, 1) == 0) continue;
      for (int i = a; i < b; ++i) v.set(p, i, 1 - u.index(p, i));
    }
    const StateEnsemble Xu = simulate_state(spec, grid, W, u);
    const StateEnsemble Xv = simulate_state(spec, grid, W, v);
    for (int p = 0; p < M; ++p) {
      bool same_row = true;
      for (int i = 0; i < grid.steps(); ++i) same_row = same_row && u.index(p, i) == v.index(p, i);
      const int limit = same_row ? grid.steps() : a;
      for (int i = 0; i <= limit; ++i) EXPECT_EQ(Xu.x(p, i)(0), Xv.x(p, i)(0));
    }
  }
}

TEST(Paths, WeakErrorIsFirstOrder) {
  // b = x, sigma = 1, x0 = 100: E X_T = 100 e^T; the Euler bias dominates MC noise.
  msa::testing::ScalarFns fns;
  fns.b = [](double x, double) { return x; };
  fns.s = [](double, double) { return 1.0; };
  fns.x0 = 100.0;
  const ProblemSpec spec = fns.spec();
  const int M = 10000;
  std::vector<double> log_dt, log_err;
  for (int depth = 4; depth <= 8; ++depth) {
    const TimeGrid grid(1.0, depth);
    const BrownianEnsemble W = generate_brownian(grid, M, 1, 42);
    const StateEnsemble X = simulate_state(spec, grid, W, ControlProcess::constant(M, grid.steps(), 0));
    double s = 0.0;
    for (int p = 0; p < M; ++p) s += X.x(p, grid.steps())(0);
    log_dt.push_back(std::log(grid.dt()));
    log_err.push_back(std::log(std::abs(s / M - 100.0 * std::exp(1.0))));
  }
  EXPECT_NEAR(fit_slope(log_dt, log_err), 1.0, 0.3);
}

TEST(ControlProcess, ValidationAndShape) {
  const ControlDomain dom = msa::testing::scalar_domain({0.0, 1.0});
  ControlProcess u = ControlProcess::constant(2, 3, 1);
  EXPECT_NO_THROW(u.validate(dom));
  EXPECT_TRUE(u.is_deterministic());
  u.set(1, 2, 0);
  EXPECT_FALSE(u.is_deterministic());
  u.set(1, 2, 2);
  EXPECT_THROW(u.validate(dom), ConfigError);
  EXPECT_THROW(ControlProcess(2, 3, std::vector<std::int32_t>(5, 0)), ShapeError);
  EXPECT_NE(ControlProcess::constant(2, 3, 0).fingerprint(), ControlProcess::constant(2, 3, 1).fingerprint());
}

TEST(FlatBinary, RoundTrip) {
  const TimeGrid grid(1.0, 3);
  const BrownianEnsemble W = generate_brownian(grid, 3, 2, 99);
  const FlatArray flat = to_flat(W);
  EXPECT_EQ(flat.paths, 3);
  EXPECT_EQ(flat.steps, 8);
  EXPECT_EQ(flat.dim, 2);
  EXPECT_EQ(flat.seed, 99);
  const auto file = std::filesystem::temp_directory_path() / "msa_flat_roundtrip.bin";
  write_flat_binary(file, flat);
  const FlatArray back = read_flat_binary(file);
  std::filesystem::remove(file);
  EXPECT_EQ(back.paths, flat.paths);
  EXPECT_EQ(back.steps, flat.steps);
  EXPECT_EQ(back.dim, flat.dim);
  EXPECT_EQ(back.seed, flat.seed);
  EXPECT_EQ(back.data, W.data());

  std::ostringstream os;
  write_flat_binary(os, flat);
  EXPECT_EQ(os.str().size(), 4 * 8 + W.data().size() * 8);
  EXPECT_EQ(static_cast<unsigned char>(os.str()[0]), 3);  // little-endian M
}

TEST(FlatBinary, ControlValues) {
  const ControlDomain dom = msa::testing::scalar_domain({-1.0, 0.5});
  const FlatArray flat = to_flat(ControlProcess::constant(2, 4, 1), dom, 5);
  EXPECT_EQ(flat.dim, 1);
  EXPECT_EQ(flat.data.size(), 8u);
  for (double v : flat.data) EXPECT_EQ(v, 0.5);
}
