#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <vector>

#include "msa/model.hpp"

namespace msa {

/// Uniform dyadic grid: steps = 2^depth, t_i = i * T * 2^-depth.
class TimeGrid {
 public:
  TimeGrid(double T, int depth);

  [[nodiscard]] double horizon() const { return T_; }
  [[nodiscard]] int depth() const { return depth_; }
  [[nodiscard]] int steps() const { return steps_; }
  [[nodiscard]] double dt() const { return dt_; }
  [[nodiscard]] double time(int i) const { return i * dt_; }

 private:
  double T_;
  int depth_;
  int steps_;
  double dt_;
};

/// Identifies the frozen Monte Carlo ensemble an array was generated on.
struct EnsembleId {
  std::uint64_t seed = 0;
  int paths = 0;
  int steps = 0;
  int dim = 0;
  double horizon = 0.0;

  friend bool operator==(const EnsembleId&, const EnsembleId&) = default;
};

/// M x steps x d array of N(0, dt) increments, row-major.
class BrownianEnsemble {
 public:
  BrownianEnsemble(const TimeGrid& grid, int paths, int dim, std::uint64_t seed, std::vector<double> increments);

  [[nodiscard]] int paths() const { return id_.paths; }
  [[nodiscard]] int steps() const { return id_.steps; }
  [[nodiscard]] int dim() const { return id_.dim; }
  [[nodiscard]] std::uint64_t seed() const { return id_.seed; }
  [[nodiscard]] const EnsembleId& id() const { return id_; }
  [[nodiscard]] const std::vector<double>& data() const { return increments_; }

  [[nodiscard]] Eigen::Map<const Eigen::VectorXd> dw(int path, int step) const {
    return {increments_.data() + offset(path, step), id_.dim};
  }

 private:
  [[nodiscard]] std::size_t offset(int path, int step) const {
    return (static_cast<std::size_t>(path) * id_.steps + step) * id_.dim;
  }
  EnsembleId id_;
  std::vector<double> increments_;
};

/// Pathwise piecewise-constant control: index into the control domain for
/// every (path, step). The value on [t_i, t_{i+1}) is index(path, i).
class ControlProcess {
 public:
  ControlProcess() = default;
  ControlProcess(int paths, int steps, std::vector<std::int32_t> indices);

  static ControlProcess constant(int paths, int steps, int index);

  [[nodiscard]] int paths() const { return paths_; }
  [[nodiscard]] int steps() const { return steps_; }
  [[nodiscard]] int index(int path, int step) const {
    return indices_[static_cast<std::size_t>(path) * steps_ + step];
  }
  void set(int path, int step, int index) {
    indices_[static_cast<std::size_t>(path) * steps_ + step] = index;
  }
  [[nodiscard]] const std::vector<std::int32_t>& indices() const { return indices_; }

  /// Throws ConfigError if any index falls outside the domain.
  void validate(const ControlDomain& domain) const;
  /// True when every row equals row 0.
  [[nodiscard]] bool is_deterministic() const;
  /// FNV-1a hash of the shape and indices, used for provenance checks.
  [[nodiscard]] std::uint64_t fingerprint() const;

  friend bool operator==(const ControlProcess&, const ControlProcess&) = default;

 private:
  int paths_ = 0;
  int steps_ = 0;
  std::vector<std::int32_t> indices_;
};

/// M x (steps+1) x n states of one control on one ensemble.
class StateEnsemble {
 public:
  StateEnsemble(int paths, int steps, int n, EnsembleId ensemble, std::uint64_t control_fingerprint,
                std::vector<double> states);

  [[nodiscard]] int paths() const { return paths_; }
  [[nodiscard]] int steps() const { return steps_; }
  [[nodiscard]] int dim() const { return n_; }
  [[nodiscard]] const EnsembleId& ensemble() const { return ensemble_; }
  [[nodiscard]] std::uint64_t control_fingerprint() const { return control_fingerprint_; }
  [[nodiscard]] const std::vector<double>& data() const { return states_; }

  [[nodiscard]] Eigen::Map<const Eigen::VectorXd> x(int path, int step) const {
    return {states_.data() + offset(path, step), n_};
  }
  [[nodiscard]] Vec vec(int path, int step) const { return x(path, step); }

  /// Throws ProvenanceError unless this ensemble was simulated under `u`.
  void require_control(const ControlProcess& u) const;

 private:
  [[nodiscard]] std::size_t offset(int path, int step) const {
    return (static_cast<std::size_t>(path) * (steps_ + 1) + step) * n_;
  }
  int paths_;
  int steps_;
  int n_;
  EnsembleId ensemble_;
  std::uint64_t control_fingerprint_;
  std::vector<double> states_;
};

/// Path p draws from its own generator keyed by (seed, p), so the result does
/// not depend on generation order or thread count.
BrownianEnsemble generate_brownian(const TimeGrid& grid, int paths, int dim, std::uint64_t seed, int threads = 1);

/// Euler-Maruyama: X_{i+1} = X_i + b dt + sigma dW. Throws NumericalError
/// naming the first (path, step) with a non-finite state.
StateEnsemble simulate_state(const ProblemSpec& spec, const TimeGrid& grid, const BrownianEnsemble& W,
                             const ControlProcess& u, int threads = 1);

/// Per-path cost Phi(X_T) + sum_i f(t_i, X_i, u_i) dt.
std::vector<double> path_costs(const ProblemSpec& spec, const TimeGrid& grid, const StateEnsemble& X,
                               const ControlProcess& u, int threads = 1);

/// Mean of path_costs, summed in path order.
double evaluate_cost(const ProblemSpec& spec, const TimeGrid& grid, const StateEnsemble& X,
                     const ControlProcess& u, int threads = 1);

/// (1/M) sum_p max_i |X_i|^order, order in {2, 4, 8}.
double empirical_moment(const StateEnsemble& X, int order);

/// Sum in index order divided by the count.
double ordered_mean(std::span<const double> values);

// Flat binary dumps: four little-endian int64 header words
// (M, steps, dim, seed) followed by row-major float64 data.
struct FlatArray {
  std::int64_t paths = 0;
  std::int64_t steps = 0;
  std::int64_t dim = 0;
  std::int64_t seed = 0;
  std::vector<double> data;
};

void write_flat_binary(const std::filesystem::path& file, const FlatArray& array);
void write_flat_binary(std::ostream& os, const FlatArray& array);
FlatArray read_flat_binary(const std::filesystem::path& file);

FlatArray to_flat(const BrownianEnsemble& W);
FlatArray to_flat(const StateEnsemble& X);
/// Control values (domain points), M x steps x k.
FlatArray to_flat(const ControlProcess& u, const ControlDomain& domain, std::uint64_t seed);

}  // namespace msa
