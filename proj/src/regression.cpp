#include "msa/regression.hpp"

#include <cmath>
#include <string>

namespace msa {

int RegressionBasis::feature_count(int n) const {
  // C(n + degree, degree), exact in integer arithmetic
  long long num = 1;
  for (int i = 1; i <= degree; ++i) num = num * (n + i) / i;
  return static_cast<int>(num);
}

std::vector<std::vector<int>> monomial_exponents(int n, int degree) {
  std::vector<std::vector<int>> out;
  std::vector<int> e(static_cast<std::size_t>(n), 0);
  // emit all exponent vectors of total degree `left` over coordinates >= pos
  auto emit = [&](auto&& self, int pos, int left) -> void {
    if (pos == n - 1) {
      e[static_cast<std::size_t>(pos)] = left;
      out.push_back(e);
      return;
    }
    for (int a = left; a >= 0; --a) {
      e[static_cast<std::size_t>(pos)] = a;
      self(self, pos + 1, left - a);
    }
    e[static_cast<std::size_t>(pos)] = 0;
  };
  for (int total = 0; total <= degree; ++total) emit(emit, 0, total);
  return out;
}

Eigen::MatrixXd build_features(const Eigen::MatrixXd& states, const RegressionBasis& basis) {
  if (basis.degree < 0) throw ConfigError("regression degree must be >= 0");
  const auto M = states.rows();
  const int n = static_cast<int>(states.cols());
  const auto exps = monomial_exponents(n, basis.degree);
  Eigen::MatrixXd phi(M, static_cast<Eigen::Index>(exps.size()));
  for (std::size_t f = 0; f < exps.size(); ++f) {
    for (Eigen::Index p = 0; p < M; ++p) {
      double v = 1.0;
      for (int l = 0; l < n; ++l) {
        for (int a = 0; a < exps[f][static_cast<std::size_t>(l)]; ++a) v *= states(p, l);
      }
      phi(p, static_cast<Eigen::Index>(f)) = v;
    }
  }
  return phi;
}

ConditionalExpectation::ConditionalExpectation(const Eigen::MatrixXd& states, const RegressionBasis& basis)
    : features_(build_features(states, basis)), paths_(states.rows()), ridge_(basis.ridge > 0.0) {
  if (basis.ridge < 0.0) throw ConfigError("ridge must be nonnegative");
  const auto F = features_.cols();
  if (paths_ <= F) {
    throw ConfigError("regression needs more paths (" + std::to_string(paths_) + ") than features (" +
                      std::to_string(F) + ")");
  }
  if (ridge_) {
    Eigen::MatrixXd aug(paths_ + F, F);
    aug.topRows(paths_) = features_;
    aug.bottomRows(F) = std::sqrt(basis.ridge * static_cast<double>(paths_)) * Eigen::MatrixXd::Identity(F, F);
    qr_.compute(aug);
  } else {
    qr_.compute(features_);
    if (qr_.rank() < F) {
      throw RegressionError("regression design is rank deficient (rank " + std::to_string(qr_.rank()) + " of " +
                            std::to_string(F) + "); use ridge > 0");
    }
  }
}

RegressionFit ConditionalExpectation::fit(const Eigen::MatrixXd& targets) const {
  if (targets.rows() != paths_) throw ShapeError("regression targets must have one row per path");
  RegressionFit out;
  if (ridge_) {
    Eigen::MatrixXd aug = Eigen::MatrixXd::Zero(paths_ + features_.cols(), targets.cols());
    aug.topRows(paths_) = targets;
    out.coefficients = qr_.solve(aug);
  } else {
    out.coefficients = qr_.solve(targets);
  }
  out.fitted = features_ * out.coefficients;
  return out;
}

RegressionFit regress_conditional(const Eigen::MatrixXd& targets, const Eigen::MatrixXd& states,
                                  const RegressionBasis& basis) {
  return ConditionalExpectation(states, basis).fit(targets);
}

}  // namespace msa
