#pragma once

#include <Eigen/Dense>

#include <atomic>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace dynnet {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// Second derivatives of a vector field: `tensor[i](j, k) = d^2 F_i / dz_j dz_k`.
using HessianTensor = std::vector<Mat>;

/// Autonomous dynamical system dz/dt = F(z) with its first and second derivatives.
struct SystemDef {
  std::string name;
  int dim = 0;
  std::function<Vec(const Vec&)> f;
  std::function<Mat(const Vec&)> jacobian;
  std::function<HessianTensor(const Vec&)> hessian;  // empty when not supplied
  std::string domain_note;

  bool has_hessian() const { return static_cast<bool>(hessian); }
};

/// Canonical Hamiltonian system on an even-dimensional phase space z = (q, p).
///
/// `hess_h` is required to build the Jacobian of the induced vector field;
/// `third_h` (with `third_h(z)[j](k, l) = d^3 H / dz_j dz_k dz_l`) is optional
/// and, when present, yields the Hessian tensor of the field.
struct HamiltonianSystem {
  std::string name;
  int dim = 0;
  std::function<double(const Vec&)> hamiltonian;
  std::function<Vec(const Vec&)> grad_h;
  std::function<Mat(const Vec&)> hess_h;
  std::function<HessianTensor(const Vec&)> third_h;
  std::string domain_note;
};

/// The 2n x 2n matrix [[0, I], [-I, 0]].
Mat symplectic_matrix(int dim);

/// Builds F(z) = J * grad H(z), F_z = J * Hess H(z). Rejects odd dimensions.
SystemDef from_hamiltonian(const HamiltonianSystem& h);

/// Names accepted by catalog_get, in a stable order.
const std::vector<std::string>& catalog_names();

/// harmonic_oscillator, nonlinear_pendulum, cubic_oscillator, henon_heiles.
SystemDef catalog_get(std::string_view name);
HamiltonianSystem catalog_hamiltonian(std::string_view name);

/// Evaluation counts of an instrumented system. Shared between copies of the
/// wrapped SystemDef so counts survive pass-by-value.
struct EvalCounters {
  std::atomic<long> f{0};
  std::atomic<long> jacobian{0};
  std::atomic<long> hessian{0};

  long total() const { return f + jacobian + hessian; }
  void reset() {
    f = 0;
    jacobian = 0;
    hessian = 0;
  }
};

struct InstrumentedSystem {
  SystemDef system;
  std::shared_ptr<EvalCounters> counters;
};

InstrumentedSystem instrument(SystemDef system);

struct ReferenceTrajectory {
  std::vector<double> times;
  std::vector<Vec> states;
  std::string method = "rk4";
  double step = 0.0;  // largest internal substep used
};

/// Classical RK4. Each interval of `grid` is split into equal substeps no
/// longer than `h_max`, so grid points are exact substep boundaries.
ReferenceTrajectory rk4_solve(const SystemDef& system, const Vec& z0,
                              std::span<const double> grid, double h_max = 1e-4);

}  // namespace dynnet
