#include <gtest/gtest.h>

#include <cmath>

#include "msa/model.hpp"
#include "msa/registry.hpp"
#include "test_support.hpp"

using namespace msa;
using msa::testing::m1;
using msa::testing::v1;

namespace {

ProblemSpec zero_spec() {
  msa::testing::ScalarFns fns;
  fns.x0 = 0.3;
  return fns.spec();
}

Vec v2(double a, double b) {
  Vec v(2);
  v << a, b;
  return v;
}

}  // namespace

TEST(ControlDomain, RejectsEmptyAndDuplicates) {
  EXPECT_THROW(ControlDomain(std::vector<Vec>{}), ConfigError);
  EXPECT_THROW(ControlDomain({v1(1.0), v1(1.0)}), ConfigError);
  EXPECT_THROW(ControlDomain({v1(1.0), v2(1.0, 2.0)}), ConfigError);
}

TEST(ControlDomain, AlphaIsLargestNorm) {
  const ControlDomain dom({v2(3.0, 4.0), v2(0.0, 1.0)});
  EXPECT_EQ(dom.size(), 2);
  EXPECT_EQ(dom.dim(), 2);
  EXPECT_DOUBLE_EQ(dom.alpha(), 5.0);
  EXPECT_TRUE(dom.contains_index(1));
  EXPECT_FALSE(dom.contains_index(2));
  EXPECT_FALSE(dom.contains_index(-1));
}

TEST(ValidateSpec, ZeroCoefficientsPassWithZeroResiduals) {
  for (std::uint64_t seed : {1u, 7u, 12345u}) {
    const ValidationReport report = validate_spec(zero_spec(), 16, seed);
    EXPECT_TRUE(report.all_passed());
    for (const auto& c : report.checks) {
      if (c.name.rfind("lipschitz", 0) == 0) continue;
      EXPECT_EQ(c.worst_residual, 0.0) << c.name;
    }
  }
}

TEST(ValidateSpec, EmbeddedQuadraticPassesDerivativeChecks) {
  msa::testing::ScalarLQ lq;
  lq.G = 1.0;
  lq.Gamma = 1.0;
  lq.s1 = 1.0;
  const ProblemSpec spec = lq_embed(lq.spec());
  const ValidationReport report = validate_spec(spec, 32, 3);
  EXPECT_TRUE(report.all_passed());
  ASSERT_NE(report.find("f_x"), nullptr);
  EXPECT_TRUE(report.find("f_x")->passed);
  ASSERT_NE(report.find("f_xx"), nullptr);
  EXPECT_TRUE(report.find("f_xx")->passed);
  EXPECT_DOUBLE_EQ(spec.coefficients.running_cost_x(0.0, v1(1.7), v1(0.0))(0), 1.7);
  EXPECT_DOUBLE_EQ(spec.coefficients.running_cost_xx(0.0, v1(1.7), v1(0.0))(0, 0), 1.0);
}

TEST(ValidateSpec, WrongSigmaShapeNamesSigma) {
  ProblemSpec spec = zero_spec();
  spec.coefficients.diffusion = [](double, const Vec&, const Vec&) -> Mat { return Mat::Zero(1, 2); };
  try {
    (void)validate_spec(spec, 4, 1);
    FAIL() << "expected ShapeError";
  } catch (const ShapeError& e) {
    EXPECT_NE(std::string(e.what()).find("sigma"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("1x1"), std::string::npos) << e.what();
  }
}

TEST(ValidateSpec, WrongDerivativeIsReported) {
  msa::testing::ScalarFns fns;
  fns.b = [](double x, double) { return x * x; };
  fns.bx = [](double x, double) { return x; };  // should be 2x
  fns.bxx = [](double, double) { return 2.0; };
  const ValidationReport report = validate_spec(fns.spec(), 16, 5);
  ASSERT_NE(report.find("drift_x"), nullptr);
  EXPECT_FALSE(report.find("drift_x")->passed);
  EXPECT_FALSE(report.all_passed());
}

TEST(ValidateSpec, AsymmetricHessianIsHardError) {
  msa::testing::ScalarLQ base;
  ProblemSpec spec = lq_embed(base.spec());
  spec.n = 2;
  spec.x0 = v2(0.0, 0.0);
  auto& c = spec.coefficients;
  c.drift = [](double, const Vec&, const Vec&) -> Vec { return Vec::Zero(2); };
  c.diffusion = [](double, const Vec&, const Vec&) -> Mat { return Mat::Zero(2, 1); };
  c.drift_x = [](double, const Vec&, const Vec&) -> Mat { return Mat::Zero(2, 2); };
  c.diffusion_x = [](double, const Vec&, const Vec&, int) -> Mat { return Mat::Zero(2, 2); };
  c.drift_xx = [](double, const Vec&, const Vec&, int) -> Mat { return Mat::Zero(2, 2); };
  c.diffusion_xx = [](double, const Vec&, const Vec&, int, int) -> Mat { return Mat::Zero(2, 2); };
  c.running_cost = [](double, const Vec& x, const Vec&) { return x(0) * x(1); };
  c.running_cost_x = [](double, const Vec& x, const Vec&) -> Vec { return v2(x(1), x(0)); };
  c.running_cost_xx = [](double, const Vec&, const Vec&) -> Mat {
    Mat m(2, 2);
    m << 0.0, 1.0, 0.5, 0.0;
    return m;
  };
  c.terminal_cost = [](const Vec&) { return 0.0; };
  c.terminal_cost_x = [](const Vec&) -> Vec { return Vec::Zero(2); };
  c.terminal_cost_xx = [](const Vec&) -> Mat { return Mat::Zero(2, 2); };
  EXPECT_THROW((void)validate_spec(spec, 4, 1), ConfigError);
}

TEST(ValidateSpec, RejectsZeroSamples) { EXPECT_THROW((void)validate_spec(zero_spec(), 0, 1), ConfigError); }

TEST(ValidateSpec, DeterministicGivenSeed) {
  const ProblemSpec spec = make_problem("nonconvex-diffusion").spec;
  const ValidationReport a = validate_spec(spec, 16, 11);
  const ValidationReport b = validate_spec(spec, 16, 11);
  ASSERT_EQ(a.checks.size(), b.checks.size());
  for (std::size_t i = 0; i < a.checks.size(); ++i) {
    EXPECT_EQ(a.checks[i].name, b.checks[i].name);
    EXPECT_EQ(a.checks[i].worst_residual, b.checks[i].worst_residual);
  }
  EXPECT_TRUE(a.all_passed());
}

TEST(LqEmbed, ScalarTerminalCost) {
  msa::testing::ScalarLQ lq;
  lq.Gamma = 1.0;
  const ProblemSpec spec = lq_embed(lq.spec());
  EXPECT_DOUBLE_EQ(spec.coefficients.terminal_cost(v1(2.0)), 2.0);
  EXPECT_DOUBLE_EQ(spec.coefficients.terminal_cost_x(v1(2.0))(0), 2.0);
  EXPECT_DOUBLE_EQ(spec.coefficients.terminal_cost_xx(v1(2.0))(0, 0), 1.0);
}

TEST(LqEmbed, MatrixRunningCost) {
  LQSpec lq;
  lq.name = "two";
  lq.n = 2;
  lq.d = 1;
  lq.k = 1;
  lq.x0 = v2(0.0, 0.0);
  lq.b1 = [](double) -> Mat { return Mat::Zero(2, 2); };
  lq.b2 = [](double) -> Vec { return Vec::Zero(2); };
  lq.G = [](double) -> Mat { return 2.0 * Mat::Identity(2, 2); };
  lq.Gamma = Mat::Zero(2, 2);
  lq.sigma_u = [](double, const Vec& u) -> Mat {
    Mat m(2, 1);
    m << u(0), 0.0;
    return m;
  };
  lq.g = [](double, const Vec&) { return 0.0; };
  lq.domain = msa::testing::scalar_domain({0.0, 1.0});
  const ProblemSpec spec = lq_embed(lq);
  const Vec x = v2(1.0, 1.0);
  const Vec fx = spec.coefficients.running_cost_x(0.0, x, v1(0.0));
  EXPECT_DOUBLE_EQ(fx(0), 2.0);
  EXPECT_DOUBLE_EQ(fx(1), 2.0);
  EXPECT_DOUBLE_EQ(spec.coefficients.running_cost(0.0, x, v1(0.0)), 2.0);
  EXPECT_TRUE(validate_spec(spec, 16, 2).all_passed());
}

TEST(LqEmbed, RejectsAsymmetricGamma) {
  LQSpec lq = msa::testing::ScalarLQ{}.spec();
  lq.n = 2;
  lq.x0 = v2(0.0, 0.0);
  lq.b1 = [](double) -> Mat { return Mat::Zero(2, 2); };
  lq.b2 = [](double) -> Vec { return Vec::Zero(2); };
  lq.G = [](double) -> Mat { return Mat::Zero(2, 2); };
  lq.sigma_u = [](double, const Vec&) -> Mat { return Mat::Zero(2, 1); };
  lq.Gamma = Mat(2, 2);
  lq.Gamma << 1.0, 0.5, 0.0, 1.0;
  EXPECT_THROW(lq_embed(lq), ConfigError);
}

TEST(LqEmbed, RejectsAsymmetricG) {
  LQSpec lq = msa::testing::ScalarLQ{}.spec();
  lq.n = 2;
  lq.x0 = v2(0.0, 0.0);
  lq.b1 = [](double) -> Mat { return Mat::Zero(2, 2); };
  lq.b2 = [](double) -> Vec { return Vec::Zero(2); };
  lq.Gamma = Mat::Zero(2, 2);
  lq.sigma_u = [](double, const Vec&) -> Mat { return Mat::Zero(2, 1); };
  lq.G = [](double t) -> Mat {
    Mat m = Mat::Zero(2, 2);
    if (t > 0.5) m(0, 1) = 1.0;
    return m;
  };
  EXPECT_THROW(lq_embed(lq), ConfigError);
}

// Property: embedding any symmetric scalar LQ gives exact derivatives.
TEST(LqEmbed, RandomSymmetricInputsAlwaysValidate) {
  msa::testing::Gen gen(2024);
  for (int trial = 0; trial < 25; ++trial) {
    msa::testing::ScalarLQ lq;
    lq.b1 = gen.uniform(-2.0, 2.0);
    lq.b2 = gen.uniform(-1.0, 1.0);
    lq.G = gen.uniform(0.0, 3.0);
    lq.Gamma = gen.uniform(0.0, 3.0);
    lq.s0 = gen.uniform(-1.0, 1.0);
    lq.s1 = gen.uniform(-1.0, 1.0);
    lq.g2 = gen.uniform(0.0, 1.0);
    lq.x0 = gen.uniform(-2.0, 2.0);
    const ValidationReport report = validate_spec(lq_embed(lq.spec()), 8, static_cast<std::uint64_t>(trial));
    EXPECT_TRUE(report.all_passed()) << "trial " << trial;
  }
}

TEST(Registry, EveryProblemValidates) {
  for (const auto& key : registry_keys()) {
    const RegistryProblem p = make_problem(key);
    EXPECT_TRUE(validate_spec(p.spec, 32, 9).all_passed()) << key;
    EXPECT_TRUE(p.spec.coefficients.has_second_derivatives()) << key;
  }
  EXPECT_THROW(make_problem("nope"), ConfigError);
  EXPECT_TRUE(make_problem("lq-scalar").lq.has_value());
  EXPECT_FALSE(make_problem("nonconvex-diffusion").lq.has_value());
  EXPECT_EQ(make_problem("lq-scalar").spec.domain.size(), 21);
}

TEST(Purity, RepeatedEvaluationIsBitIdentical) {
  const ProblemSpec spec = make_problem("nonconvex-diffusion").spec;
  msa::testing::Gen gen(5);
  for (int i = 0; i < 50; ++i) {
    const Vec x = v1(gen.uniform(-3.0, 3.0));
    const Vec u = spec.domain.point(gen.integer(0, 1));
    const double t = gen.uniform(0.0, 1.0);
    EXPECT_EQ(spec.coefficients.drift(t, x, u), spec.coefficients.drift(t, x, u));
    EXPECT_EQ(spec.coefficients.diffusion(t, x, u), spec.coefficients.diffusion(t, x, u));
    EXPECT_EQ(spec.coefficients.running_cost(t, x, u), spec.coefficients.running_cost(t, x, u));
  }
}
