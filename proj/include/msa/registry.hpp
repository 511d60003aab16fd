#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "msa/model.hpp"

namespace msa {

/// A built-in benchmark. `lq` is set for linear-quadratic problems, which
/// have closed-form oracles.
struct RegistryProblem {
  ProblemSpec spec;
  std::optional<LQSpec> lq;
};

/// "lq-scalar": n=d=k=1, b = -0.5x, sigma = 0.3+0.5u, f = x^2/2 + 0.1u^2,
///   Phi = x^2/2, U = 21 points on [-1,1], T = 1, x0 = 1.
/// "nonconvex-diffusion": n=d=1, U = {-1, 1}, b = sin(x),
///   sigma = 0.2 + 0.4u cos(x), f = x^2 + 0.1, Phi = x^2, T = 1, x0 = 1.
/// Throws ConfigError for unknown keys.
RegistryProblem make_problem(std::string_view key);

std::vector<std::string> registry_keys();
std::vector<std::string> registry_lq_keys();

LQSpec lq_scalar_spec();

}  // namespace msa
