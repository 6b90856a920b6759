#include "dynnet/systems.hpp"

#include "dynnet/error.hpp"

#include <cmath>
#include <sstream>

namespace dynnet {

namespace {

HamiltonianSystem harmonic_oscillator() {
  HamiltonianSystem h;
  h.name = "harmonic_oscillator";
  h.dim = 2;
  h.hamiltonian = [](const Vec& z) { return 0.5 * (z(0) * z(0) + z(1) * z(1)); };
  h.grad_h = [](const Vec& z) { return Vec(z); };
  h.hess_h = [](const Vec&) { return Mat(Mat::Identity(2, 2)); };
  h.third_h = [](const Vec&) { return HessianTensor(2, Mat::Zero(2, 2)); };
  h.domain_note = "linear; valid on all of R^2";
  return h;
}

HamiltonianSystem nonlinear_pendulum() {
  HamiltonianSystem h;
  h.name = "nonlinear_pendulum";
  h.dim = 2;
  h.hamiltonian = [](const Vec& z) { return 0.5 * z(1) * z(1) - std::cos(z(0)); };
  h.grad_h = [](const Vec& z) { return Vec{{std::sin(z(0)), z(1)}}; };
  h.hess_h = [](const Vec& z) {
    Mat m = Mat::Zero(2, 2);
    m(0, 0) = std::cos(z(0));
    m(1, 1) = 1.0;
    return m;
  };
  h.third_h = [](const Vec& z) {
    HessianTensor t(2, Mat::Zero(2, 2));
    t[0](0, 0) = -std::sin(z(0));
    return t;
  };
  h.domain_note = "smooth on R^2; separatrix at energy 1";
  return h;
}

HamiltonianSystem cubic_oscillator() {
  HamiltonianSystem h;
  h.name = "cubic_oscillator";
  h.dim = 2;
  h.hamiltonian = [](const Vec& z) {
    const double q = z(0), p = z(1);
    return 0.5 * p * p + 0.5 * q * q + 0.25 * q * q * q * q;
  };
  h.grad_h = [](const Vec& z) { return Vec{{z(0) + z(0) * z(0) * z(0), z(1)}}; };
  h.hess_h = [](const Vec& z) {
    Mat m = Mat::Zero(2, 2);
    m(0, 0) = 1.0 + 3.0 * z(0) * z(0);
    m(1, 1) = 1.0;
    return m;
  };
  h.third_h = [](const Vec& z) {
    HessianTensor t(2, Mat::Zero(2, 2));
    t[0](0, 0) = 6.0 * z(0);
    return t;
  };
  h.domain_note = "hardening Duffing oscillator; smooth on R^2";
  return h;
}

// z = (x, y, px, py), H = (px^2 + py^2)/2 + (x^2 + y^2)/2 + x^2 y - y^3/3
HamiltonianSystem henon_heiles() {
  HamiltonianSystem h;
  h.name = "henon_heiles";
  h.dim = 4;
  h.hamiltonian = [](const Vec& z) {
    const double x = z(0), y = z(1);
    return 0.5 * (z(2) * z(2) + z(3) * z(3)) + 0.5 * (x * x + y * y) + x * x * y - y * y * y / 3.0;
  };
  h.grad_h = [](const Vec& z) {
    const double x = z(0), y = z(1);
    return Vec{{x + 2.0 * x * y, y + x * x - y * y, z(2), z(3)}};
  };
  h.hess_h = [](const Vec& z) {
    const double x = z(0), y = z(1);
    Mat m = Mat::Zero(4, 4);
    m(0, 0) = 1.0 + 2.0 * y;
    m(0, 1) = m(1, 0) = 2.0 * x;
    m(1, 1) = 1.0 - 2.0 * y;
    m(2, 2) = m(3, 3) = 1.0;
    return m;
  };
  h.third_h = [](const Vec&) {
    HessianTensor t(4, Mat::Zero(4, 4));
    // d3H/dx dx dy = 2 (all orderings), d3H/dy dy dy = -2
    t[0](0, 1) = t[0](1, 0) = 2.0;
    t[1](0, 0) = 2.0;
    t[1](1, 1) = -2.0;
    return t;
  };
  h.domain_note = "chaotic above energy ~1/8; escapes for energy > 1/6";
  return h;
}

}  // namespace

Mat symplectic_matrix(int dim) {
  if (dim <= 0 || dim % 2 != 0)
    throw ConfigError("symplectic matrix needs a positive even dimension, got " +
                      std::to_string(dim));
  const int n = dim / 2;
  Mat j = Mat::Zero(dim, dim);
  j.topRightCorner(n, n).setIdentity();
  j.bottomLeftCorner(n, n) = -Mat::Identity(n, n);
  return j;
}

SystemDef from_hamiltonian(const HamiltonianSystem& h) {
  if (h.dim <= 0 || h.dim % 2 != 0)
    throw ConfigError("Hamiltonian system '" + h.name + "' has odd dimension " +
                      std::to_string(h.dim));
  if (!h.grad_h || !h.hess_h)
    throw ConfigError("Hamiltonian system '" + h.name + "' needs grad_h and hess_h");

  const Mat j = symplectic_matrix(h.dim);
  SystemDef s;
  s.name = h.name;
  s.dim = h.dim;
  s.domain_note = h.domain_note;
  s.f = [j, grad = h.grad_h](const Vec& z) -> Vec { return j * grad(z); };
  s.jacobian = [j, hess = h.hess_h](const Vec& z) -> Mat { return j * hess(z); };
  if (h.third_h) {
    s.hessian = [j, third = h.third_h, dim = h.dim](const Vec& z) {
      const HessianTensor t = third(z);
      HessianTensor out(dim, Mat::Zero(dim, dim));
      for (int i = 0; i < dim; ++i)
        for (int k = 0; k < dim; ++k)
          if (j(i, k) != 0.0) out[i] += j(i, k) * t[k];
      return out;
    };
  }
  return s;
}

const std::vector<std::string>& catalog_names() {
  static const std::vector<std::string> names{"harmonic_oscillator", "nonlinear_pendulum",
                                              "cubic_oscillator", "henon_heiles"};
  return names;
}

HamiltonianSystem catalog_hamiltonian(std::string_view name) {
  if (name == "harmonic_oscillator") return harmonic_oscillator();
  if (name == "nonlinear_pendulum") return nonlinear_pendulum();
  if (name == "cubic_oscillator") return cubic_oscillator();
  if (name == "henon_heiles") return henon_heiles();
  std::ostringstream msg;
  msg << "unknown system '" << name << "'; available:";
  for (const auto& n : catalog_names()) msg << ' ' << n;
  throw ConfigError(msg.str());
}

SystemDef catalog_get(std::string_view name) { return from_hamiltonian(catalog_hamiltonian(name)); }

InstrumentedSystem instrument(SystemDef system) {
  auto counters = std::make_shared<EvalCounters>();
  SystemDef wrapped = system;
  wrapped.f = [c = counters, f = system.f](const Vec& z) {
    ++c->f;
    return f(z);
  };
  wrapped.jacobian = [c = counters, jac = system.jacobian](const Vec& z) {
    ++c->jacobian;
    return jac(z);
  };
  if (system.hessian) {
    wrapped.hessian = [c = counters, hess = system.hessian](const Vec& z) {
      ++c->hessian;
      return hess(z);
    };
  }
  return {std::move(wrapped), std::move(counters)};
}

ReferenceTrajectory rk4_solve(const SystemDef& system, const Vec& z0,
                              std::span<const double> grid, double h_max) {
  if (grid.empty() || grid.front() != 0.0) throw ConfigError("time grid must start at 0");
  if (z0.size() != system.dim) throw ConfigError("initial condition dimension mismatch");
  if (!(h_max > 0.0)) throw ConfigError("h_max must be positive");
  for (std::size_t i = 1; i < grid.size(); ++i)
    if (!(grid[i] > grid[i - 1])) throw ConfigError("time grid must be strictly increasing");

  ReferenceTrajectory out;
  out.times.assign(grid.begin(), grid.end());
  out.states.reserve(grid.size());
  out.states.push_back(z0);

  Vec z = z0;
  for (std::size_t i = 1; i < grid.size(); ++i) {
    const double span = grid[i] - grid[i - 1];
    const auto substeps = static_cast<long>(std::ceil(span / h_max - 1e-9));
    const double h = span / static_cast<double>(std::max(1L, substeps));
    out.step = std::max(out.step, h);
    for (long s = 0; s < std::max(1L, substeps); ++s) {
      const Vec k1 = system.f(z);
      const Vec k2 = system.f(z + 0.5 * h * k1);
      const Vec k3 = system.f(z + 0.5 * h * k2);
      const Vec k4 = system.f(z + h * k3);
      z += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
      if (!z.allFinite()) {
        std::ostringstream msg;
        msg << "rk4: non-finite state at t = " << grid[i - 1] + static_cast<double>(s + 1) * h;
        throw NumericalError(msg.str());
      }
    }
    out.states.push_back(z);
  }
  return out;
}

}  // namespace dynnet
