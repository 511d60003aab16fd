#pragma once

#include <utility>
#include <vector>

#include "msa/model.hpp"
#include "msa/paths.hpp"
#include "msa/regression.hpp"

namespace msa {

/// First-order adjoint (p, q) on the ensemble. p is M x (steps+1) x n;
/// q is M x steps x (n x d), each entry stored column-major so that column i
/// is the integrand q^i against W_i.
class AdjointFirst {
 public:
  AdjointFirst(int paths, int steps, int n, int d);

  [[nodiscard]] int paths() const { return paths_; }
  [[nodiscard]] int steps() const { return steps_; }
  [[nodiscard]] int n() const { return n_; }
  [[nodiscard]] int d() const { return d_; }

  [[nodiscard]] Eigen::Map<const Eigen::VectorXd> p(int path, int step) const {
    return {p_.data() + p_offset(path, step), n_};
  }
  Eigen::Map<Eigen::VectorXd> p(int path, int step) { return {p_.data() + p_offset(path, step), n_}; }
  [[nodiscard]] Eigen::Map<const Eigen::MatrixXd> q(int path, int step) const {
    return {q_.data() + q_offset(path, step), n_, d_};
  }
  Eigen::Map<Eigen::MatrixXd> q(int path, int step) { return {q_.data() + q_offset(path, step), n_, d_}; }

  [[nodiscard]] const std::vector<double>& p_data() const { return p_; }
  [[nodiscard]] const std::vector<double>& q_data() const { return q_; }

 private:
  [[nodiscard]] std::size_t p_offset(int path, int step) const {
    return (static_cast<std::size_t>(path) * (steps_ + 1) + step) * n_;
  }
  [[nodiscard]] std::size_t q_offset(int path, int step) const {
    return (static_cast<std::size_t>(path) * steps_ + step) * n_ * d_;
  }
  int paths_, steps_, n_, d_;
  std::vector<double> p_;
  std::vector<double> q_;
};

/// Second-order adjoint P, M x (steps+1) x (n x n), symmetric slices.
class AdjointSecond {
 public:
  AdjointSecond(int paths, int steps, int n);

  [[nodiscard]] int paths() const { return paths_; }
  [[nodiscard]] int steps() const { return steps_; }
  [[nodiscard]] int n() const { return n_; }

  [[nodiscard]] Eigen::Map<const Eigen::MatrixXd> P(int path, int step) const {
    return {P_.data() + offset(path, step), n_, n_};
  }
  Eigen::Map<Eigen::MatrixXd> P(int path, int step) { return {P_.data() + offset(path, step), n_, n_}; }
  [[nodiscard]] const std::vector<double>& data() const { return P_; }

  /// Largest relative asymmetry |P - P'| / max(1, |P|) seen before the
  /// slices were symmetrized.
  double max_asymmetry = 0.0;

 private:
  [[nodiscard]] std::size_t offset(int path, int step) const {
    return (static_cast<std::size_t>(path) * (steps_ + 1) + step) * n_ * n_;
  }
  int paths_, steps_, n_;
  std::vector<double> P_;
};

/// Backward least-squares Monte Carlo for the first adjoint BSDE:
///   p_T = Phi_x(X_T)
///   p_hat = E[p_{i+1} | X_i],  q_hat^i = E[(p_{i+1} - p_hat) dW^i / dt | X_i]
///   p_i = p_hat + dt (b_x' p_hat + sum_i sigma_x^i' q_hat^i + f_x)
AdjointFirst solve_first_adjoint(const ProblemSpec& spec, const TimeGrid& grid, const BrownianEnsemble& W,
                                 const StateEnsemble& X, const ControlProcess& u, const RegressionBasis& basis,
                                 int threads = 1);

/// sum_j p_j b^j_xx + sum_{i,j} q_{ji} sigma^{ji}_xx + f_xx at one point.
Mat hessian_of_H(const ProblemSpec& spec, double t, const Vec& x, const Vec& p, const Mat& q, const Vec& u);

/// Backward least-squares Monte Carlo for the second adjoint BSDE. The
/// martingale integrand Q is regressed per step and discarded.
AdjointSecond solve_second_adjoint(const ProblemSpec& spec, const TimeGrid& grid, const BrownianEnsemble& W,
                                   const StateEnsemble& X, const ControlProcess& u, const AdjointFirst& adj1,
                                   const RegressionBasis& basis, int threads = 1);

/// Exact adjoints for LQ problems: p = K X + k, q^i = K sigma_u^i(t, u(t)),
/// P = K, with (K, k) from lyapunov_solve.
std::pair<AdjointFirst, AdjointSecond> lq_closed_form_adjoint(const LQSpec& lq, const TimeGrid& grid,
                                                              const StateEnsemble& X, const ControlProcess& u);

/// sqrt(sum |a - b|^2 / sum |b|^2) over all stored entries.
double relative_l2_error(const std::vector<double>& a, const std::vector<double>& b);

}  // namespace msa
