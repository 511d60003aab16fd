#pragma once

#include <cstdint>
#include <vector>

#include "msa/adjoint.hpp"
#include "msa/model.hpp"
#include "msa/paths.hpp"

namespace msa {

/// H(t,x,p,q,u) = p'b + <q, sigma> + f, with <A,B> = tr(AB').
double hamiltonian(const ProblemSpec& spec, double t, const Vec& x, const Vec& p, const Mat& q, const Vec& u);

/// Generalized Hamiltonian of the spike variation:
///   H(t,x,p,q,v) + 1/2 sum_i (sigma^i(v) - sigma^i(u))' P (sigma^i(v) - sigma^i(u))
///                - 1/2 sum_i sigma^i(u)' P sigma^i(u)
double h_function(const ProblemSpec& spec, double t, const Vec& x, const Vec& p, const Mat& q, const Mat& P,
                  const Vec& v, const Vec& u);

struct Minimizer {
  int index = 0;
  double gap = 0.0;  // h(v) - h(u) <= 0
};

/// Exhaustive search over the domain. Ties go to the smallest index, except
/// that u itself is kept whenever it attains the minimum (gap exactly 0).
Minimizer minimize_h(const ProblemSpec& spec, double t, const Vec& x, const Vec& p, const Mat& q, const Mat& P,
                     int u_index);

/// Pointwise gaps and minimizers at every (path, left grid endpoint).
class GapProcess {
 public:
  GapProcess(int paths, int steps);

  [[nodiscard]] int paths() const { return paths_; }
  [[nodiscard]] int steps() const { return steps_; }
  [[nodiscard]] double value(int path, int step) const { return values_[offset(path, step)]; }
  [[nodiscard]] int argmin(int path, int step) const { return argmin_[offset(path, step)]; }
  void set(int path, int step, double gap, int index) {
    values_[offset(path, step)] = gap;
    argmin_[offset(path, step)] = index;
  }
  [[nodiscard]] const std::vector<double>& values() const { return values_; }
  [[nodiscard]] const std::vector<std::int32_t>& argmin_indices() const { return argmin_; }

 private:
  [[nodiscard]] std::size_t offset(int path, int step) const {
    return static_cast<std::size_t>(path) * steps_ + step;
  }
  int paths_;
  int steps_;
  std::vector<double> values_;
  std::vector<std::int32_t> argmin_;
};

GapProcess gap_process(const ProblemSpec& spec, const TimeGrid& grid, const StateEnsemble& X,
                       const ControlProcess& u, const AdjointFirst& adj1, const AdjointSecond& adj2,
                       int threads = 1);

/// (1/M) sum_p sum_i gap dt over steps [first, last), summed path by path in
/// index order.
double gap_integral(const GapProcess& gaps, const TimeGrid& grid, int first, int last);

/// mu(u) = (1/M) sum_p sum_i gap dt over the whole horizon.
double mu(const GapProcess& gaps, const TimeGrid& grid);

}  // namespace msa
