#include "msa/registry.hpp"

#include <cmath>

namespace msa {

namespace {

Vec scalar(double v) {
  Vec x(1);
  x(0) = v;
  return x;
}

Mat scalar_mat(double v) {
  Mat m(1, 1);
  m(0, 0) = v;
  return m;
}

ProblemSpec nonconvex_diffusion_spec() {
  ProblemSpec spec;
  spec.name = "nonconvex-diffusion";
  spec.n = spec.d = spec.k = 1;
  spec.T = 1.0;
  spec.x0 = scalar(1.0);
  spec.domain = ControlDomain({scalar(-1.0), scalar(1.0)});
  spec.assumption_constants = AssumptionConstants{1.0, 1};

  auto& c = spec.coefficients;
  c.drift = [](double, const Vec& x, const Vec&) -> Vec { return scalar(std::sin(x(0))); };
  c.diffusion = [](double, const Vec& x, const Vec& u) -> Mat {
    return scalar_mat(0.2 + 0.4 * u(0) * std::cos(x(0)));
  };
  c.running_cost = [](double, const Vec& x, const Vec&) { return x(0) * x(0) + 0.1; };
  c.terminal_cost = [](const Vec& x) { return x(0) * x(0); };

  c.drift_x = [](double, const Vec& x, const Vec&) -> Mat { return scalar_mat(std::cos(x(0))); };
  c.diffusion_x = [](double, const Vec& x, const Vec& u, int) -> Mat {
    return scalar_mat(-0.4 * u(0) * std::sin(x(0)));
  };
  c.running_cost_x = [](double, const Vec& x, const Vec&) -> Vec { return scalar(2.0 * x(0)); };
  c.terminal_cost_x = [](const Vec& x) -> Vec { return scalar(2.0 * x(0)); };

  c.drift_xx = [](double, const Vec& x, const Vec&, int) -> Mat { return scalar_mat(-std::sin(x(0))); };
  c.diffusion_xx = [](double, const Vec& x, const Vec& u, int, int) -> Mat {
    return scalar_mat(-0.4 * u(0) * std::cos(x(0)));
  };
  c.running_cost_xx = [](double, const Vec&, const Vec&) -> Mat { return scalar_mat(2.0); };
  c.terminal_cost_xx = [](const Vec&) -> Mat { return scalar_mat(2.0); };
  return spec;
}

}  // namespace

LQSpec lq_scalar_spec() {
  LQSpec lq;
  lq.name = "lq-scalar";
  lq.n = lq.d = lq.k = 1;
  lq.T = 1.0;
  lq.x0 = scalar(1.0);
  lq.b1 = [](double) { return scalar_mat(-0.5); };
  lq.b2 = [](double) { return scalar(0.0); };
  lq.G = [](double) { return scalar_mat(1.0); };
  lq.Gamma = scalar_mat(1.0);
  lq.sigma_u = [](double, const Vec& u) { return scalar_mat(0.3 + 0.5 * u(0)); };
  lq.g = [](double, const Vec& u) { return 0.1 * u(0) * u(0); };
  std::vector<Vec> pts;
  for (int i = 0; i <= 20; ++i) pts.push_back(scalar(i / 10.0 - 1.0));
  lq.domain = ControlDomain(std::move(pts));
  return lq;
}

RegistryProblem make_problem(std::string_view key) {
  if (key == "lq-scalar") {
    LQSpec lq = lq_scalar_spec();
    ProblemSpec spec = lq_embed(lq);
    return {std::move(spec), std::move(lq)};
  }
  if (key == "nonconvex-diffusion") return {nonconvex_diffusion_spec(), std::nullopt};
  throw ConfigError("unknown registry problem '" + std::string(key) + "'");
}

std::vector<std::string> registry_keys() { return {"lq-scalar", "nonconvex-diffusion"}; }

std::vector<std::string> registry_lq_keys() { return {"lq-scalar"}; }

}  // namespace msa
