#include "msa/model.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

namespace msa {

ControlDomain::ControlDomain(std::vector<Vec> points) : points_(std::move(points)) {
  if (points_.empty()) throw ConfigError("control domain must contain at least one point");
  const auto dim = points_.front().size();
  if (dim < 1 || dim > kMaxDim) {
    throw ConfigError("control dimension must lie in [1, " + std::to_string(kMaxDim) + "]");
  }
  for (std::size_t a = 0; a < points_.size(); ++a) {
    if (points_[a].size() != dim) throw ConfigError("control domain points have mixed dimensions");
    for (std::size_t b = 0; b < a; ++b) {
      if (points_[a] == points_[b]) {
        throw ConfigError("duplicate control domain point at index " + std::to_string(a));
      }
    }
    alpha_ = std::max(alpha_, points_[a].norm());
  }
}

bool ValidationReport::all_passed() const {
  return std::all_of(checks.begin(), checks.end(), [](const ValidationCheck& c) { return c.passed; });
}

const ValidationCheck* ValidationReport::find(const std::string& name) const {
  for (const auto& c : checks) {
    if (c.name == name) return &c;
  }
  return nullptr;
}

namespace {

constexpr double kFdRelTol = 1e-4;
constexpr double kFdStep = 1e-5;
constexpr double kSymmetryTol = 1e-12;

std::string dims(Eigen::Index r, Eigen::Index c) {
  std::ostringstream os;
  os << r << "x" << c;
  return os.str();
}

void expect_shape(const std::string& fn, Eigen::Index rows, Eigen::Index cols, Eigen::Index er,
                  Eigen::Index ec) {
  if (rows != er || cols != ec) {
    throw ShapeError("'" + fn + "' returned " + dims(rows, cols) + ", expected " + dims(er, ec));
  }
}

// |analytic - fd| / (1 + |analytic|), the mixed error used by the FD checks
double fd_residual(double analytic, double fd) { return std::abs(analytic - fd) / (1.0 + std::abs(analytic)); }

double step_for(double x) { return kFdStep * (1.0 + std::abs(x)); }

struct Sample {
  double t;
  Vec x;
  Vec u;
};

// Central difference of a scalar-valued map along coordinate l.
template <typename F>
double central(F&& fn, const Vec& x, int l) {
  const double h = step_for(x(l));
  Vec xp = x, xm = x;
  xp(l) += h;
  xm(l) -= h;
  return (fn(xp) - fn(xm)) / (2.0 * h);
}

double asymmetry(const Mat& m) {
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  return (m - m.transpose()).cwiseAbs().maxCoeff() / scale;
}

class Checker {
 public:
  explicit Checker(ValidationReport& report) : report_(report) {}

  void record(const std::string& name, double residual, double tol, bool hard = false) {
    auto it = std::find_if(report_.checks.begin(), report_.checks.end(),
                           [&](const ValidationCheck& c) { return c.name == name; });
    if (it == report_.checks.end()) {
      report_.checks.push_back({name, true, 0.0, hard});
      it = std::prev(report_.checks.end());
    }
    it->worst_residual = std::max(it->worst_residual, residual);
    if (!(residual <= tol)) it->passed = false;
  }

 private:
  ValidationReport& report_;
};

}  // namespace

ValidationReport validate_spec(const ProblemSpec& spec, int samples, std::uint64_t seed) {
  if (samples < 1) throw ConfigError("validate_spec: samples must be >= 1");
  if (spec.n < 1 || spec.d < 1 || spec.k < 1) throw ConfigError("dimensions n, d, k must be >= 1");
  if (spec.n > kMaxDim || spec.d > kMaxDim || spec.k > kMaxDim) {
    throw ConfigError("dimensions exceed the supported maximum of " + std::to_string(kMaxDim));
  }
  if (!(spec.T > 0.0)) throw ConfigError("horizon T must be positive");
  if (spec.domain.size() == 0) throw ConfigError("control domain is empty");
  const auto& c = spec.coefficients;
  if (!c.drift || !c.diffusion || !c.running_cost || !c.terminal_cost || !c.drift_x || !c.diffusion_x ||
      !c.running_cost_x || !c.terminal_cost_x) {
    throw ConfigError("coefficient set is missing a value or first-derivative function");
  }

  const int n = spec.n;
  const int d = spec.d;
  expect_shape("x0", spec.x0.size(), 1, n, 1);
  expect_shape("control domain", spec.domain.dim(), 1, spec.k, 1);

  ValidationReport report;
  Checker check(report);

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif_t(0.0, spec.T);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_int_distribution<int> pick(0, spec.domain.size() - 1);

  std::vector<Sample> pts;
  pts.reserve(static_cast<std::size_t>(samples));
  for (int s = 0; s < samples; ++s) {
    Vec x(n);
    for (int l = 0; l < n; ++l) x(l) = spec.x0(l) + normal(rng) * (1.0 + std::abs(spec.x0(l)));
    pts.push_back({unif_t(rng), x, spec.domain.point(pick(rng))});
  }

  for (const auto& [t, x, u] : pts) {
    // shapes (hard)
    const Vec b = c.drift(t, x, u);
    expect_shape("drift", b.size(), 1, n, 1);
    const Mat sig = c.diffusion(t, x, u);
    expect_shape("sigma", sig.rows(), sig.cols(), n, d);
    const Mat bx = c.drift_x(t, x, u);
    expect_shape("drift_x", bx.rows(), bx.cols(), n, n);
    for (int i = 0; i < d; ++i) {
      const Mat sx = c.diffusion_x(t, x, u, i);
      expect_shape("sigma_x", sx.rows(), sx.cols(), n, n);
    }
    const Vec fx = c.running_cost_x(t, x, u);
    expect_shape("f_x", fx.size(), 1, n, 1);
    const Vec phix = c.terminal_cost_x(x);
    expect_shape("Phi_x", phix.size(), 1, n, 1);
    check.record("shapes", 0.0, 0.0, true);

    // purity: bitwise-identical repeated evaluation
    {
      const Vec b2 = c.drift(t, x, u);
      const Mat s2 = c.diffusion(t, x, u);
      const double f1 = c.running_cost(t, x, u);
      const double f2 = c.running_cost(t, x, u);
      const bool same = (b2.array() == b.array()).all() && (s2.array() == sig.array()).all() &&
                        (f1 == f2 || (std::isnan(f1) && std::isnan(f2)));
      check.record("purity", same ? 0.0 : 1.0, 0.0);
    }

    // first derivatives vs central differences
    for (int l = 0; l < n; ++l) {
      for (int j = 0; j < n; ++j) {
        const double fd = central([&](const Vec& y) { return c.drift(t, y, u)(j); }, x, l);
        check.record("drift_x", fd_residual(bx(j, l), fd), kFdRelTol);
      }
      for (int i = 0; i < d; ++i) {
        const Mat sx = c.diffusion_x(t, x, u, i);
        for (int j = 0; j < n; ++j) {
          const double fd = central([&](const Vec& y) { return c.diffusion(t, y, u)(j, i); }, x, l);
          check.record("sigma_x", fd_residual(sx(j, l), fd), kFdRelTol);
        }
      }
      const double fdf = central([&](const Vec& y) { return c.running_cost(t, y, u); }, x, l);
      check.record("f_x", fd_residual(fx(l), fdf), kFdRelTol);
      const double fdp = central([&](const Vec& y) { return c.terminal_cost(y); }, x, l);
      check.record("Phi_x", fd_residual(phix(l), fdp), kFdRelTol);
    }

    if (!c.has_second_derivatives()) continue;

    const Mat fxx = c.running_cost_xx(t, x, u);
    expect_shape("f_xx", fxx.rows(), fxx.cols(), n, n);
    const Mat pxx = c.terminal_cost_xx(x);
    expect_shape("Phi_xx", pxx.rows(), pxx.cols(), n, n);
    for (int j = 0; j < n; ++j) {
      const Mat h = c.drift_xx(t, x, u, j);
      expect_shape("drift_xx", h.rows(), h.cols(), n, n);
      for (int i = 0; i < d; ++i) {
        const Mat hs = c.diffusion_xx(t, x, u, i, j);
        expect_shape("sigma_xx", hs.rows(), hs.cols(), n, n);
      }
    }

    const double asym_f = asymmetry(fxx);
    const double asym_p = asymmetry(pxx);
    check.record("f_xx symmetric", asym_f, kSymmetryTol, true);
    check.record("Phi_xx symmetric", asym_p, kSymmetryTol, true);
    if (asym_f > kSymmetryTol) throw ConfigError("f_xx is not symmetric at a sampled point");
    if (asym_p > kSymmetryTol) throw ConfigError("Phi_xx is not symmetric at a sampled point");

    // second derivatives vs central differences of the supplied first derivatives
    for (int l = 0; l < n; ++l) {
      for (int m = 0; m < n; ++m) {
        for (int j = 0; j < n; ++j) {
          const double fd = central([&](const Vec& y) { return c.drift_x(t, y, u)(j, m); }, x, l);
          check.record("drift_xx", fd_residual(c.drift_xx(t, x, u, j)(m, l), fd), kFdRelTol);
          for (int i = 0; i < d; ++i) {
            const double fds = central([&](const Vec& y) { return c.diffusion_x(t, y, u, i)(j, m); }, x, l);
            check.record("sigma_xx", fd_residual(c.diffusion_xx(t, x, u, i, j)(m, l), fds), kFdRelTol);
          }
        }
        const double fdf = central([&](const Vec& y) { return c.running_cost_x(t, y, u)(m); }, x, l);
        check.record("f_xx", fd_residual(fxx(m, l), fdf), kFdRelTol);
        const double fdp = central([&](const Vec& y) { return c.terminal_cost_x(y)(m); }, x, l);
        check.record("Phi_xx", fd_residual(pxx(m, l), fdp), kFdRelTol);
      }
    }
  }

  // Sampled Lipschitz ratios of the second derivatives between consecutive
  // samples (same t and u, so only the x-dependence is probed). Advisory.
  if (c.has_second_derivatives()) {
    const double bound = spec.assumption_constants ? spec.assumption_constants->lipschitz
                                                   : std::numeric_limits<double>::infinity();
    for (std::size_t s = 1; s < pts.size(); ++s) {
      const auto& [t, x1, u] = pts[s];
      const Vec& x2 = pts[s - 1].x;
      const double dx = (x1 - x2).norm();
      if (dx == 0.0) continue;
      double rb = 0.0, rs = 0.0;
      for (int j = 0; j < n; ++j) {
        rb = std::max(rb, (c.drift_xx(t, x1, u, j) - c.drift_xx(t, x2, u, j)).norm() / dx);
        for (int i = 0; i < d; ++i) {
          rs = std::max(rs, (c.diffusion_xx(t, x1, u, i, j) - c.diffusion_xx(t, x2, u, i, j)).norm() / dx);
        }
      }
      check.record("lipschitz drift_xx", rb, bound);
      check.record("lipschitz sigma_xx", rs, bound);
      check.record("lipschitz f_xx",
                   (c.running_cost_xx(t, x1, u) - c.running_cost_xx(t, x2, u)).norm() / dx, bound);
      check.record("lipschitz Phi_xx", (c.terminal_cost_xx(x1) - c.terminal_cost_xx(x2)).norm() / dx, bound);
    }
  }
  return report;
}

void check_lq(const LQSpec& lq) {
  if (lq.n < 1 || lq.d < 1 || lq.k < 1 || lq.n > kMaxDim || lq.d > kMaxDim || lq.k > kMaxDim) {
    throw ConfigError("LQ dimensions must lie in [1, " + std::to_string(kMaxDim) + "]");
  }
  if (!(lq.T > 0.0)) throw ConfigError("LQ horizon T must be positive");
  if (!lq.b1 || !lq.b2 || !lq.G || !lq.sigma_u || !lq.g) throw ConfigError("LQ spec has an unset function");
  expect_shape("x0", lq.x0.size(), 1, lq.n, 1);
  expect_shape("Gamma", lq.Gamma.rows(), lq.Gamma.cols(), lq.n, lq.n);
  if (lq.domain.dim() != lq.k) throw ShapeError("control domain points must have dimension k");
  if (!(lq.Gamma.array() == lq.Gamma.transpose().array()).all()) {
    throw ConfigError("LQ terminal weight Gamma is not symmetric");
  }
  constexpr int kTimeSamples = 33;
  for (int s = 0; s < kTimeSamples; ++s) {
    const double t = lq.T * s / (kTimeSamples - 1);
    const Mat G = lq.G(t);
    expect_shape("G", G.rows(), G.cols(), lq.n, lq.n);
    if (!(G.array() == G.transpose().array()).all()) {
      throw ConfigError("LQ running weight G(t) is not symmetric at t=" + std::to_string(t));
    }
    const Mat b1 = lq.b1(t);
    expect_shape("b1", b1.rows(), b1.cols(), lq.n, lq.n);
    const Vec b2 = lq.b2(t);
    expect_shape("b2", b2.size(), 1, lq.n, 1);
    const Mat sig = lq.sigma_u(t, lq.domain.point(0));
    expect_shape("sigma", sig.rows(), sig.cols(), lq.n, lq.d);
  }
}

ProblemSpec lq_embed(const LQSpec& lq) {
  check_lq(lq);
  const int n = lq.n;
  ProblemSpec spec;
  spec.name = lq.name;
  spec.n = lq.n;
  spec.d = lq.d;
  spec.k = lq.k;
  spec.T = lq.T;
  spec.x0 = lq.x0;
  spec.domain = lq.domain;

  auto& c = spec.coefficients;
  c.drift = [b1 = lq.b1, b2 = lq.b2](double t, const Vec& x, const Vec&) -> Vec { return b1(t) * x + b2(t); };
  c.diffusion = [s = lq.sigma_u](double t, const Vec&, const Vec& u) -> Mat { return s(t, u); };
  c.running_cost = [G = lq.G, g = lq.g](double t, const Vec& x, const Vec& u) {
    return 0.5 * x.dot(G(t) * x) + g(t, u);
  };
  c.terminal_cost = [Gamma = lq.Gamma](const Vec& x) { return 0.5 * x.dot(Gamma * x); };

  c.drift_x = [b1 = lq.b1](double t, const Vec&, const Vec&) -> Mat { return b1(t); };
  c.diffusion_x = [n](double, const Vec&, const Vec&, int) -> Mat { return Mat::Zero(n, n); };
  c.running_cost_x = [G = lq.G](double t, const Vec& x, const Vec&) -> Vec { return G(t) * x; };
  c.terminal_cost_x = [Gamma = lq.Gamma](const Vec& x) -> Vec { return Gamma * x; };

  c.drift_xx = [n](double, const Vec&, const Vec&, int) -> Mat { return Mat::Zero(n, n); };
  c.diffusion_xx = [n](double, const Vec&, const Vec&, int, int) -> Mat { return Mat::Zero(n, n); };
  c.running_cost_xx = [G = lq.G](double t, const Vec&, const Vec&) -> Mat { return G(t); };
  c.terminal_cost_xx = [Gamma = lq.Gamma](const Vec&) -> Mat { return Gamma; };
  return spec;
}

}  // namespace msa
