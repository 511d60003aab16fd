#pragma once

#include <Eigen/Dense>

#include <vector>

#include "msa/types.hpp"

namespace msa {

/// Total-degree polynomial features of the state with a ridge penalty.
struct RegressionBasis {
  int degree = 2;
  double ridge = 1e-8;

  /// C(n + degree, degree)
  [[nodiscard]] int feature_count(int n) const;
};

/// Exponent vectors of the monomials, graded by total degree then
/// lexicographically descending (1, x1, x2, x1^2, x1 x2, x2^2, ...).
std::vector<std::vector<int>> monomial_exponents(int n, int degree);

/// M x F design matrix of raw monomials of the M x n states.
Eigen::MatrixXd build_features(const Eigen::MatrixXd& states, const RegressionBasis& basis);

struct RegressionFit {
  Eigen::MatrixXd coefficients;  // F x m
  Eigen::MatrixXd fitted;        // M x m
};

/// Least-squares projection onto the feature span, minimizing
/// (1/M)|Phi beta - y|^2 + ridge |beta|^2. One decomposition serves any
/// number of target blocks.
class ConditionalExpectation {
 public:
  /// Throws ConfigError unless M > F; RegressionError when ridge == 0 and
  /// the design is rank deficient.
  ConditionalExpectation(const Eigen::MatrixXd& states, const RegressionBasis& basis);

  [[nodiscard]] RegressionFit fit(const Eigen::MatrixXd& targets) const;
  [[nodiscard]] int feature_count() const { return static_cast<int>(features_.cols()); }
  [[nodiscard]] const Eigen::MatrixXd& features() const { return features_; }

 private:
  Eigen::MatrixXd features_;
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr_;
  Eigen::Index paths_;
  bool ridge_ = false;
};

/// Convenience wrapper: fitted conditional expectations E[targets | states].
RegressionFit regress_conditional(const Eigen::MatrixXd& targets, const Eigen::MatrixXd& states,
                                  const RegressionBasis& basis);

}  // namespace msa
