#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "msa/cli.hpp"
#include "msa/oracle.hpp"
#include "msa/registry.hpp"

namespace py = pybind11;
using namespace msa;

namespace {

MSAConfig make_config(int paths, int depth, std::uint64_t seed, double mu_tol, int m_max, std::optional<int> N_max,
                      int degree, double ridge, int threads) {
  MSAConfig c;
  c.paths = paths;
  c.depth = depth;
  c.seed = seed;
  c.mu_tol = mu_tol;
  c.m_max = m_max;
  c.N_max = N_max.value_or(depth);
  c.basis = {degree, ridge};
  c.threads = threads;
  c.validate();
  return c;
}

InitialControl make_initial(std::optional<int> index) {
  return index ? InitialControl::constant(*index) : InitialControl::worst_constant();
}

py::array_t<std::int32_t> control_array(const ControlProcess& u) {
  py::array_t<std::int32_t> out({u.paths(), u.steps()});
  std::copy(u.indices().begin(), u.indices().end(), out.mutable_data());
  return out;
}

py::list records_list(const std::vector<IterationRecord>& records) {
  py::list out;
  for (const auto& r : records) {
    py::dict d;
    d["m"] = r.m;
    d["J"] = r.J;
    d["mu"] = r.mu;
    d["N"] = r.N;
    d["j"] = r.j;
    d["accepted"] = r.accepted;
    d["wall_time"] = r.wall_time;
    out.append(d);
  }
  return out;
}

py::dict result_dict(const MSAResult& r) {
  py::dict d;
  d["J_initial"] = r.J_initial;
  d["J_final"] = r.J_final;
  d["mu_initial"] = r.mu_initial;
  d["mu_final"] = r.mu_final;
  d["termination"] = to_string(r.reason);
  d["diagnostic"] = r.diagnostic;
  d["records"] = records_list(r.records);
  d["final_control"] = control_array(r.final_control);
  return d;
}

// Translates library errors into Python exceptions of matching intent.
void register_errors(py::module_& m) {
  static py::exception<Error> base(m, "MsaError");
  static py::exception<ConfigError> config(m, "ConfigError", base.ptr());
  static py::exception<ShapeError> shape(m, "ShapeError", base.ptr());
  static py::exception<NumericalError> numerical(m, "NumericalError", base.ptr());
  static py::exception<ProvenanceError> provenance(m, "ProvenanceError", base.ptr());
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const ConfigError& e) {
      PyErr_SetString(config.ptr(), e.what());
    } catch (const ShapeError& e) {
      PyErr_SetString(shape.ptr(), e.what());
    } catch (const NumericalError& e) {
      PyErr_SetString(numerical.ptr(), e.what());
    } catch (const ProvenanceError& e) {
      PyErr_SetString(provenance.ptr(), e.what());
    } catch (const Error& e) {
      PyErr_SetString(base.ptr(), e.what());
    }
  });
}

}  // namespace

PYBIND11_MODULE(_msa, m) {
  m.doc() = "Successive approximations for stochastic control with controlled diffusion";
  register_errors(m);

  m.def("set_log_level", &set_log_level, py::arg("level"));
  m.def("registry_keys", &registry_keys);

  m.def(
      "validate_problem",
      [](const std::string& key, int samples, std::uint64_t seed) {
        py::list out;
        for (const auto& c : validate_spec(make_problem(key).spec, samples, seed).checks) {
          py::dict d;
          d["name"] = c.name;
          d["passed"] = c.passed;
          d["worst_residual"] = c.worst_residual;
          out.append(d);
        }
        return out;
      },
      py::arg("problem"), py::arg("samples") = 32, py::arg("seed") = 0);

  m.def(
      "brownian",
      [](double T, int depth, int paths, int dim, std::uint64_t seed) {
        const TimeGrid grid(T, depth);
        const BrownianEnsemble W = generate_brownian(grid, paths, dim, seed);
        py::array_t<double> out({paths, grid.steps(), dim});
        std::copy(W.data().begin(), W.data().end(), out.mutable_data());
        return out;
      },
      py::arg("T") = 1.0, py::arg("depth") = 4, py::arg("paths") = 1, py::arg("dim") = 1, py::arg("seed") = 42);

  m.def(
      "constant_cost",
      [](const std::string& key, int index, int paths, int depth, std::uint64_t seed) {
        const ProblemSpec spec = make_problem(key).spec;
        const TimeGrid grid(spec.T, depth);
        const BrownianEnsemble W = generate_brownian(grid, paths, spec.d, seed);
        const ControlProcess u = ControlProcess::constant(paths, grid.steps(), index);
        u.validate(spec.domain);
        return evaluate_cost(spec, grid, simulate_state(spec, grid, W, u), u);
      },
      py::arg("problem"), py::arg("index"), py::arg("paths") = 10000, py::arg("depth") = 8, py::arg("seed") = 42);

  m.def(
      "solve",
      [](const std::string& key, int paths, int depth, std::uint64_t seed, double mu_tol, int m_max,
         std::optional<int> N_max, int degree, double ridge, int threads, std::optional<int> initial) {
        const ProblemSpec spec = make_problem(key).spec;
        const MSAConfig config = make_config(paths, depth, seed, mu_tol, m_max, N_max, degree, ridge, threads);
        MSAResult r;
        {
          py::gil_scoped_release release;
          r = run_msa(spec, config, make_initial(initial));
        }
        return result_dict(r);
      },
      py::arg("problem") = "lq-scalar", py::arg("paths") = 10000, py::arg("depth") = 8, py::arg("seed") = 42,
      py::arg("mu_tol") = 1e-4, py::arg("m_max") = 50, py::arg("N_max") = py::none(), py::arg("degree") = 2,
      py::arg("ridge") = 1e-8, py::arg("threads") = 1, py::arg("initial") = py::none());

  m.def(
      "lq_oracle",
      [](const std::string& key, int depth) {
        const RegistryProblem prob = make_problem(key);
        if (!prob.lq) throw ConfigError("problem '" + key + "' has no closed-form oracle");
        const TimeGrid grid(prob.lq->T, depth);
        const LyapunovSolution sol = lyapunov_solve(*prob.lq, grid);
        const LQOracle o = lq_optimal_control(*prob.lq, grid, sol, 1);
        const int n = prob.lq->n;
        py::array_t<double> K({grid.steps() + 1, n, n});
        py::array_t<double> k({grid.steps() + 1, n});
        auto Kv = K.mutable_unchecked<3>();
        auto kv = k.mutable_unchecked<2>();
        for (int i = 0; i <= grid.steps(); ++i) {
          for (int a = 0; a < n; ++a) {
            kv(i, a) = sol.k[i](a);
            for (int b = 0; b < n; ++b) Kv(i, a, b) = sol.K[i](a, b);
          }
        }
        py::dict d;
        d["K"] = K;
        d["k"] = k;
        d["c"] = sol.c;
        d["u_star"] = o.u_star_steps;
        d["J_star"] = o.J_star;
        return d;
      },
      py::arg("problem") = "lq-scalar", py::arg("depth") = 8);

  m.def(
      "rate_experiment",
      [](const std::string& key, int paths, int depth, std::uint64_t seed, int m_max, int threads) {
        const RegistryProblem prob = make_problem(key);
        if (!prob.lq) throw ConfigError("problem '" + key + "' has no closed-form oracle");
        const MSAConfig config = make_config(paths, depth, seed, 1e-4, m_max, std::nullopt, 2, 1e-8, threads);
        RateResult r;
        {
          py::gil_scoped_release release;
          r = rate_experiment(*prob.lq, config, InitialControl::worst_constant());
        }
        py::list rows;
        for (const auto& row : r.rows) rows.append(py::make_tuple(row.m, row.a, row.a_sqrt_m));
        py::dict d;
        d["rows"] = rows;
        d["J_star"] = r.J_star;
        d["J_star_saa"] = r.J_star_saa;
        d["tol_mc"] = r.tol_mc;
        d["bound"] = r.bound;
        d["slope"] = r.slope;
        d["slope_is_bound"] = r.slope_is_bound;
        d["passed"] = r.passed();
        d["run"] = result_dict(r.run);
        return d;
      },
      py::arg("problem") = "lq-scalar", py::arg("paths") = 10000, py::arg("depth") = 8, py::arg("seed") = 42,
      py::arg("m_max") = 50, py::arg("threads") = 1);

  m.def(
      "sequence_lemma_check",
      [](double a1, double A, int m_max) {
        const SequenceCheck s = sequence_lemma_check(a1, A, m_max);
        py::dict d;
        d["a"] = s.a;
        d["max_b"] = s.max_b;
        d["bound"] = s.bound;
        d["saturated"] = s.saturated;
        d["passed"] = s.passed;
        return d;
      },
      py::arg("a1"), py::arg("A"), py::arg("m_max"));

  m.def(
      "cli",
      [](std::vector<std::string> args) {
        args.insert(args.begin(), "msa_cli");
        py::gil_scoped_release release;
        return execute(args);
      },
      py::arg("args"));
}
