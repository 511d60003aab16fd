#include "msa/paths.hpp"

#include <bit>
#include <cmath>
#include <fstream>
#include <random>
#include <string>

#include "msa/parallel.hpp"

namespace msa {

TimeGrid::TimeGrid(double T, int depth) : T_(T), depth_(depth) {
  if (!(T > 0.0) || !std::isfinite(T)) throw ConfigError("time grid horizon must be positive and finite");
  if (depth < 1 || depth > 24) throw ConfigError("time grid depth must lie in [1, 24]");
  steps_ = 1 << depth;
  dt_ = std::ldexp(T, -depth);
}

BrownianEnsemble::BrownianEnsemble(const TimeGrid& grid, int paths, int dim, std::uint64_t seed,
                                   std::vector<double> increments)
    : id_{seed, paths, grid.steps(), dim, grid.horizon()}, increments_(std::move(increments)) {
  if (increments_.size() != static_cast<std::size_t>(paths) * grid.steps() * dim) {
    throw ShapeError("Brownian increments have the wrong size");
  }
}

ControlProcess::ControlProcess(int paths, int steps, std::vector<std::int32_t> indices)
    : paths_(paths), steps_(steps), indices_(std::move(indices)) {
  if (indices_.size() != static_cast<std::size_t>(paths) * steps) {
    throw ShapeError("control process has " + std::to_string(indices_.size()) + " entries, expected " +
                     std::to_string(static_cast<std::size_t>(paths) * steps));
  }
}

ControlProcess ControlProcess::constant(int paths, int steps, int index) {
  return {paths, steps, std::vector<std::int32_t>(static_cast<std::size_t>(paths) * steps, index)};
}

void ControlProcess::validate(const ControlDomain& domain) const {
  for (std::size_t e = 0; e < indices_.size(); ++e) {
    if (!domain.contains_index(indices_[e])) {
      throw ConfigError("control index " + std::to_string(indices_[e]) + " at path " +
                        std::to_string(e / steps_) + ", step " + std::to_string(e % steps_) +
                        " is outside the domain");
    }
  }
}

bool ControlProcess::is_deterministic() const {
  for (int p = 1; p < paths_; ++p) {
    for (int i = 0; i < steps_; ++i) {
      if (index(p, i) != index(0, i)) return false;
    }
  }
  return true;
}

std::uint64_t ControlProcess::fingerprint() const {
  std::uint64_t h = 1469598103934665603ULL;
  auto mix = [&h](std::uint64_t v) {
    for (int b = 0; b < 8; ++b) {
      h ^= (v >> (8 * b)) & 0xFFU;
      h *= 1099511628211ULL;
    }
  };
  mix(static_cast<std::uint64_t>(paths_));
  mix(static_cast<std::uint64_t>(steps_));
  for (auto v : indices_) mix(static_cast<std::uint32_t>(v));
  return h;
}

StateEnsemble::StateEnsemble(int paths, int steps, int n, EnsembleId ensemble, std::uint64_t control_fingerprint,
                             std::vector<double> states)
    : paths_(paths),
      steps_(steps),
      n_(n),
      ensemble_(ensemble),
      control_fingerprint_(control_fingerprint),
      states_(std::move(states)) {
  if (states_.size() != static_cast<std::size_t>(paths) * (steps + 1) * n) {
    throw ShapeError("state array has the wrong size");
  }
}

void StateEnsemble::require_control(const ControlProcess& u) const {
  if (u.paths() != paths_ || u.steps() != steps_ || u.fingerprint() != control_fingerprint_) {
    throw ProvenanceError("state ensemble was not simulated under the supplied control");
  }
}

BrownianEnsemble generate_brownian(const TimeGrid& grid, int paths, int dim, std::uint64_t seed, int threads) {
  if (paths < 1) throw ConfigError("number of paths must be >= 1");
  if (dim < 1 || dim > kMaxDim) throw ConfigError("Brownian dimension out of range");
  const int steps = grid.steps();
  const double sd = std::sqrt(grid.dt());
  std::vector<double> inc(static_cast<std::size_t>(paths) * steps * dim);
  parallel_for(paths, threads, [&](int begin, int end) {
    for (int p = begin; p < end; ++p) {
      std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                        static_cast<std::uint32_t>(p), 0x9E3779B9U};
      std::mt19937_64 rng(seq);
      std::normal_distribution<double> normal(0.0, 1.0);
      double* out = inc.data() + static_cast<std::size_t>(p) * steps * dim;
      for (int e = 0; e < steps * dim; ++e) out[e] = sd * normal(rng);
    }
  });
  return {grid, paths, dim, seed, std::move(inc)};
}

StateEnsemble simulate_state(const ProblemSpec& spec, const TimeGrid& grid, const BrownianEnsemble& W,
                             const ControlProcess& u, int threads) {
  const int M = W.paths();
  const int steps = grid.steps();
  const int n = spec.n;
  if (W.steps() != steps || W.dim() != spec.d) throw ShapeError("Brownian ensemble does not match grid/spec");
  if (u.paths() != M || u.steps() != steps) throw ShapeError("control process does not match the ensemble");
  if (spec.x0.size() != n) throw ShapeError("x0 must have length n");
  const auto& c = spec.coefficients;
  const double dt = grid.dt();

  std::vector<double> xs(static_cast<std::size_t>(M) * (steps + 1) * n);
  // first non-finite step per path, or -1
  std::vector<int> bad(static_cast<std::size_t>(M), -1);
  parallel_for(M, threads, [&](int begin, int end) {
    for (int p = begin; p < end; ++p) {
      double* row = xs.data() + static_cast<std::size_t>(p) * (steps + 1) * n;
      Vec x = spec.x0;
      for (int l = 0; l < n; ++l) row[l] = x(l);
      for (int i = 0; i < steps; ++i) {
        const double t = grid.time(i);
        const Vec& v = spec.domain.point(u.index(p, i));
        const Vec b = c.drift(t, x, v);
        const Mat s = c.diffusion(t, x, v);
        x += b * dt + s * W.dw(p, i);
        double* dst = row + static_cast<std::size_t>(i + 1) * n;
        bool finite = true;
        for (int l = 0; l < n; ++l) {
          dst[l] = x(l);
          finite = finite && std::isfinite(x(l));
        }
        if (!finite) {
          bad[static_cast<std::size_t>(p)] = i + 1;
          break;
        }
      }
    }
  });
  for (int p = 0; p < M; ++p) {
    if (bad[static_cast<std::size_t>(p)] >= 0) {
      throw NumericalError("non-finite state at path " + std::to_string(p) + ", step " +
                           std::to_string(bad[static_cast<std::size_t>(p)]));
    }
  }
  return {M, steps, n, W.id(), u.fingerprint(), std::move(xs)};
}

std::vector<double> path_costs(const ProblemSpec& spec, const TimeGrid& grid, const StateEnsemble& X,
                               const ControlProcess& u, int threads) {
  X.require_control(u);
  const int M = X.paths();
  const int steps = grid.steps();
  if (X.steps() != steps) throw ShapeError("state ensemble does not match grid");
  const auto& c = spec.coefficients;
  const double dt = grid.dt();
  std::vector<double> costs(static_cast<std::size_t>(M));
  parallel_for(M, threads, [&](int begin, int end) {
    for (int p = begin; p < end; ++p) {
      double running = 0.0;
      for (int i = 0; i < steps; ++i) {
        running += c.running_cost(grid.time(i), X.vec(p, i), spec.domain.point(u.index(p, i))) * dt;
      }
      costs[static_cast<std::size_t>(p)] = c.terminal_cost(X.vec(p, steps)) + running;
    }
  });
  return costs;
}

double ordered_mean(std::span<const double> values) {
  double sum = 0.0;
  for (double v : values) sum += v;
  return sum / static_cast<double>(values.size());
}

double evaluate_cost(const ProblemSpec& spec, const TimeGrid& grid, const StateEnsemble& X, const ControlProcess& u,
                     int threads) {
  const auto costs = path_costs(spec, grid, X, u, threads);
  return ordered_mean(costs);
}

double empirical_moment(const StateEnsemble& X, int order) {
  if (order != 2 && order != 4 && order != 8) throw ConfigError("moment order must be 2, 4 or 8");
  double sum = 0.0;
  for (int p = 0; p < X.paths(); ++p) {
    double worst = 0.0;
    for (int i = 0; i <= X.steps(); ++i) worst = std::max(worst, X.x(p, i).squaredNorm());
    sum += std::pow(worst, order / 2);
  }
  return sum / X.paths();
}

namespace {

void put_i64(std::ostream& os, std::int64_t v) {
  unsigned char buf[8];
  const auto u = static_cast<std::uint64_t>(v);
  for (int b = 0; b < 8; ++b) buf[b] = static_cast<unsigned char>((u >> (8 * b)) & 0xFFU);
  os.write(reinterpret_cast<const char*>(buf), 8);
}

std::int64_t get_i64(std::ifstream& is) {
  unsigned char buf[8];
  is.read(reinterpret_cast<char*>(buf), 8);
  std::uint64_t u = 0;
  for (int b = 0; b < 8; ++b) u |= static_cast<std::uint64_t>(buf[b]) << (8 * b);
  return static_cast<std::int64_t>(u);
}

void put_f64(std::ostream& os, double v) { put_i64(os, static_cast<std::int64_t>(std::bit_cast<std::uint64_t>(v))); }

double get_f64(std::ifstream& is) { return std::bit_cast<double>(static_cast<std::uint64_t>(get_i64(is))); }

}  // namespace

void write_flat_binary(std::ostream& os, const FlatArray& array) {
  put_i64(os, array.paths);
  put_i64(os, array.steps);
  put_i64(os, array.dim);
  put_i64(os, array.seed);
  for (double v : array.data) put_f64(os, v);
}

void write_flat_binary(const std::filesystem::path& file, const FlatArray& array) {
  std::ofstream os(file, std::ios::binary | std::ios::trunc);
  if (!os) throw Error("cannot open '" + file.string() + "' for writing");
  write_flat_binary(os, array);
  if (!os) throw Error("failed writing '" + file.string() + "'");
}

FlatArray read_flat_binary(const std::filesystem::path& file) {
  std::ifstream is(file, std::ios::binary);
  if (!is) throw Error("cannot open '" + file.string() + "'");
  FlatArray a;
  a.paths = get_i64(is);
  a.steps = get_i64(is);
  a.dim = get_i64(is);
  a.seed = get_i64(is);
  if (!is) throw Error("truncated header in '" + file.string() + "'");
  const auto bytes = std::filesystem::file_size(file);
  if (bytes < 32 || (bytes - 32) % 8 != 0) throw Error("corrupt flat binary '" + file.string() + "'");
  a.data.resize((bytes - 32) / 8);
  for (auto& v : a.data) v = get_f64(is);
  return a;
}

FlatArray to_flat(const BrownianEnsemble& W) {
  return {W.paths(), W.steps(), W.dim(), static_cast<std::int64_t>(W.seed()), W.data()};
}

FlatArray to_flat(const StateEnsemble& X) {
  return {X.paths(), X.steps() + 1, X.dim(), static_cast<std::int64_t>(X.ensemble().seed), X.data()};
}

FlatArray to_flat(const ControlProcess& u, const ControlDomain& domain, std::uint64_t seed) {
  FlatArray a{u.paths(), u.steps(), domain.dim(), static_cast<std::int64_t>(seed), {}};
  a.data.reserve(static_cast<std::size_t>(u.paths()) * u.steps() * domain.dim());
  for (int p = 0; p < u.paths(); ++p) {
    for (int i = 0; i < u.steps(); ++i) {
      const Vec& v = domain.point(u.index(p, i));
      for (int l = 0; l < domain.dim(); ++l) a.data.push_back(v(l));
    }
  }
  return a;
}

}  // namespace msa
