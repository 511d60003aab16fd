#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "msa/types.hpp"

namespace msa {

/// Finite discretization of the compact control set U.
class ControlDomain {
 public:
  ControlDomain() = default;
  /// Throws ConfigError on an empty set, mixed dimensions or duplicate points.
  explicit ControlDomain(std::vector<Vec> points);

  [[nodiscard]] const std::vector<Vec>& points() const { return points_; }
  [[nodiscard]] const Vec& point(int index) const { return points_[static_cast<std::size_t>(index)]; }
  [[nodiscard]] int size() const { return static_cast<int>(points_.size()); }
  [[nodiscard]] int dim() const { return points_.empty() ? 0 : static_cast<int>(points_.front().size()); }
  /// max over points of the Euclidean norm
  [[nodiscard]] double alpha() const { return alpha_; }
  [[nodiscard]] bool contains_index(int index) const { return index >= 0 && index < size(); }

 private:
  std::vector<Vec> points_;
  double alpha_ = 0.0;
};

/// Coefficients of the controlled SDE and cost together with their state
/// derivatives. Every callable must be pure and safe to call concurrently.
///
/// Layout conventions:
///   drift_x(t,x,u)(j,l)          = d b^j / d x^l
///   diffusion_x(t,x,u,i)(j,l)    = d sigma^{ji} / d x^l   (Jacobian of column i)
///   drift_xx(t,x,u,j)            = Hessian of b^j
///   diffusion_xx(t,x,u,i,j)      = Hessian of sigma^{ji}
/// Second-derivative callables may be left empty; consumers that need them
/// raise ConfigError.
struct CoefficientSet {
  using VecFn = std::function<Vec(double, const Vec&, const Vec&)>;
  using MatFn = std::function<Mat(double, const Vec&, const Vec&)>;
  using ScalarFn = std::function<double(double, const Vec&, const Vec&)>;

  VecFn drift;
  MatFn diffusion;
  ScalarFn running_cost;
  std::function<double(const Vec&)> terminal_cost;

  MatFn drift_x;
  std::function<Mat(double, const Vec&, const Vec&, int)> diffusion_x;
  VecFn running_cost_x;
  std::function<Vec(const Vec&)> terminal_cost_x;

  std::function<Mat(double, const Vec&, const Vec&, int)> drift_xx;
  std::function<Mat(double, const Vec&, const Vec&, int, int)> diffusion_xx;
  MatFn running_cost_xx;
  std::function<Mat(const Vec&)> terminal_cost_xx;

  [[nodiscard]] bool has_second_derivatives() const {
    return drift_xx && diffusion_xx && running_cost_xx && terminal_cost_xx;
  }
};

/// Constants of the standing regularity assumption; documentation only.
struct AssumptionConstants {
  double lipschitz = 0.0;  // L
  int growth_exponent = 1; // l, stored but never used quantitatively
};

struct ProblemSpec {
  std::string name;
  int n = 1;  // state dimension
  int d = 1;  // Brownian dimension
  int k = 1;  // control dimension
  double T = 1.0;
  Vec x0;
  CoefficientSet coefficients;
  ControlDomain domain;
  std::optional<AssumptionConstants> assumption_constants;
};

/// Linear-quadratic specialization:
///   b = b1(t) x + b2(t),  sigma = sigma_u(t,u),
///   Phi = x' Gamma x / 2, f = x' G(t) x / 2 + g(t,u).
struct LQSpec {
  std::string name;
  int n = 1;
  int d = 1;
  int k = 1;
  double T = 1.0;
  Vec x0;
  std::function<Mat(double)> b1;
  std::function<Vec(double)> b2;
  std::function<Mat(double)> G;
  Mat Gamma;
  std::function<Mat(double, const Vec&)> sigma_u;
  std::function<double(double, const Vec&)> g;
  ControlDomain domain;
};

struct ValidationCheck {
  std::string name;
  bool passed = true;
  double worst_residual = 0.0;
  bool hard = false;  // hard checks throw instead of reporting a failure
};

struct ValidationReport {
  std::vector<ValidationCheck> checks;

  [[nodiscard]] bool all_passed() const;
  [[nodiscard]] const ValidationCheck* find(const std::string& name) const;
};

/// Spot-checks shapes (hard), symmetry of f_xx/Phi_xx (hard), derivative
/// consistency by central finite differences, purity, and sampled Lipschitz
/// ratios of the second derivatives. Deterministic given `seed`.
/// Throws ShapeError naming the function and expected dims; ConfigError on
/// asymmetric Hessians or samples < 1.
ValidationReport validate_spec(const ProblemSpec& spec, int samples, std::uint64_t seed);

/// Induces the general coefficient set of an LQ problem with analytic
/// derivatives. Throws ConfigError when Gamma or G(t) (checked on 33 sample
/// times) is not symmetric.
ProblemSpec lq_embed(const LQSpec& lq);

/// Checks structural validity of an LQ spec (dimensions, symmetry).
void check_lq(const LQSpec& lq);

}  // namespace msa
