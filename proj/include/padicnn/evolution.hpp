#pragma once

// Time integration of a NetworkSystem: fixed-step classical RK4 for the full
// dynamics, and an eigendecomposition propagator for the free linear flow.

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "padicnn/kernel.hpp"
#include "padicnn/network.hpp"
#include "padicnn/observables.hpp"

namespace padicnn {

enum class IntegrationMethod { rk4, exact_free };

struct IntegrationPlan {
  double t_end = 1.0;
  double dt = 1e-3;
  std::uint64_t snapshot_stride = 100;
  IntegrationMethod method = IntegrationMethod::rk4;
  /// Keep the complex state alongside each snapshot density.
  bool keep_states = false;

  std::uint64_t steps() const { return static_cast<std::uint64_t>(std::llround(t_end / dt)); }

  void validate() const {
    if (!(t_end > 0.0) || !std::isfinite(t_end)) throw std::invalid_argument("plan t_end must be positive and finite");
    if (!(dt > 0.0) || !std::isfinite(dt)) throw std::invalid_argument("plan dt must be positive");
    if (snapshot_stride == 0) throw std::invalid_argument("plan snapshot_stride must be positive");
    if (t_end / dt > 1e12) throw std::invalid_argument("plan needs more than 1e12 steps");
    if (steps() == 0) throw std::invalid_argument("plan has zero steps (t_end < dt)");
  }
};

/// Warning text when dt * ||J||_inf exceeds 0.5, empty otherwise.
inline std::string stability_warning(const IntegrationPlan& plan, const CouplingOperator& op) {
  const double norm = op.matrix.cwiseAbs().rowwise().sum().maxCoeff();
  if (plan.dt * norm <= 0.5) return {};
  return "dt * ||J|| = " + std::to_string(plan.dt * norm) + " exceeds 0.5; RK4 may be inaccurate";
}

struct Snapshot {
  double time = 0.0;
  Eigen::VectorXd density;
  std::optional<Eigen::VectorXcd> state;
};

struct Trajectory {
  std::vector<double> times;
  std::vector<double> norm_sq;
  std::vector<Snapshot> snapshots;
  Eigen::VectorXcd final_state;
};

class BlowUpError : public std::runtime_error {
 public:
  BlowUpError(double time, const std::string& what)
      : std::runtime_error("numerical blow-up at t = " + std::to_string(time) + ": " + what), time_(time) {}

  double time() const { return time_; }
  /// Everything recorded before the failing step, if available.
  const std::shared_ptr<const Trajectory>& partial() const { return partial_; }
  void attach(std::shared_ptr<const Trajectory> t) { partial_ = std::move(t); }

 private:
  double time_;
  std::shared_ptr<const Trajectory> partial_;
};

/// y(t + dt) - y(t) for one classical RK4 step.
inline StateVector rk4_increment(const NetworkSystem& sys, double t, const StateVector& y, double dt) {
  try {
    const StateVector k1 = rhs(sys, t, y);
    const StateVector k2 = rhs(sys, t + 0.5 * dt, y + (0.5 * dt) * k1);
    const StateVector k3 = rhs(sys, t + 0.5 * dt, y + (0.5 * dt) * k2);
    const StateVector k4 = rhs(sys, t + dt, y + dt * k3);
    StateVector inc = (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    if (!inc.allFinite()) throw NonFiniteStateError("state is not finite after the step");
    return inc;
  } catch (const NonFiniteStateError& e) {
    throw BlowUpError(t, e.what());
  }
}

inline StateVector step_rk4(const NetworkSystem& sys, double t, const StateVector& y, double dt) {
  StateVector out = y + rk4_increment(sys, t, y, dt);
  if (!out.allFinite()) throw BlowUpError(t, "state is not finite after the step");
  return out;
}

/// Eigendecomposition J = Q diag(lambda) Q^T of a real symmetric operator:
/// eigenvalues ascending, columns orthonormal, and the first nonnegligible
/// component of each column positive.
struct SymmetricEigen {
  Eigen::VectorXd values;
  Eigen::MatrixXd vectors;
};

inline double symmetry_defect(const Eigen::MatrixXd& m) {
  if (m.rows() != m.cols()) return std::numeric_limits<double>::infinity();
  if (m.size() == 0) return 0.0;
  return (m - m.transpose()).cwiseAbs().maxCoeff();
}

inline SymmetricEigen symmetric_eigen(const Eigen::MatrixXd& m, double symmetry_tolerance = 1e-10) {
  const double defect = symmetry_defect(m);
  if (defect > symmetry_tolerance)
    throw std::invalid_argument("operator is not symmetric (defect " + std::to_string(defect) + ")");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(m);
  if (solver.info() != Eigen::Success) throw std::runtime_error("symmetric eigensolver failed");
  SymmetricEigen out{solver.eigenvalues(), solver.eigenvectors()};
  for (Eigen::Index c = 0; c < out.vectors.cols(); ++c) {
    for (Eigen::Index r = 0; r < out.vectors.rows(); ++r) {
      const double x = out.vectors(r, c);
      if (std::abs(x) > 1e-12) {
        if (x < 0.0) out.vectors.col(c) *= -1.0;
        break;
      }
    }
  }
  return out;
}

/// Free semigroup of the linear part: e^{itJ} (quantum) or e^{tJ} (classical).
class FreePropagator {
 public:
  explicit FreePropagator(const CouplingOperator& op, NetworkMode mode = NetworkMode::quantum)
      : eig_(symmetric_eigen(op.matrix)), mode_(mode) {}

  const SymmetricEigen& eigen() const { return eig_; }

  /// Coefficients of a state in the eigenbasis.
  Eigen::VectorXcd to_modes(const StateVector& state) const {
    return eig_.vectors.transpose().cast<Complex>() * state;
  }
  StateVector from_modes(const Eigen::VectorXcd& modes) const { return eig_.vectors.cast<Complex>() * modes; }

  Complex mode_factor(Eigen::Index k, double t) const {
    const double lambda = eig_.values[k];
    if (mode_ == NetworkMode::quantum) return std::polar(1.0, lambda * t);
    return {std::exp(lambda * t), 0.0};
  }

  Eigen::VectorXcd advance_modes(const Eigen::VectorXcd& modes, double t) const {
    Eigen::VectorXcd out(modes.size());
    for (Eigen::Index k = 0; k < modes.size(); ++k) out[k] = mode_factor(k, t) * modes[k];
    return out;
  }

  StateVector propagate(const StateVector& state, double t) const {
    if (state.size() != eig_.values.size()) throw DimensionError("state length does not match operator side");
    return from_modes(advance_modes(to_modes(state), t));
  }

 private:
  SymmetricEigen eig_;
  NetworkMode mode_;
};

/// Exact solution of i dPsi/dt = -J Psi: Q diag(e^{i t lambda}) Q^T psi.
inline StateVector exact_free_propagate(const CouplingOperator& op, const StateVector& state, double t) {
  return FreePropagator(op).propagate(state, t);
}

/// Free quantum propagator with the eigendecomposition and phases carried in
/// long double. Meant as a reference: in double, an eigenvalue error of a few
/// ulps turns into a phase error of ~1e-14 by t = 10, which hides RK4 truncation.
class ExtendedFreePropagator {
 public:
  using Real = long double;
  using RealMatrix = Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic>;
  using ComplexVector = Eigen::Matrix<std::complex<Real>, Eigen::Dynamic, 1>;

  ExtendedFreePropagator(const CouplingOperator& op, const StateVector& psi0) {
    if (symmetry_defect(op.matrix) > 1e-12) throw std::invalid_argument("operator is not symmetric");
    if (psi0.size() != op.matrix.rows()) throw DimensionError("state length does not match operator side");
    const Eigen::SelfAdjointEigenSolver<RealMatrix> es(op.matrix.cast<Real>());
    if (es.info() != Eigen::Success) throw std::runtime_error("extended eigendecomposition failed");
    values_ = es.eigenvalues();
    vectors_ = es.eigenvectors();
    modes0_ = vectors_.transpose().template cast<std::complex<Real>>() * psi0.cast<std::complex<Real>>();
  }

  StateVector at(double t) const {
    ComplexVector m = modes0_;
    for (Eigen::Index k = 0; k < m.size(); ++k) m[k] *= std::polar(Real(1), values_[k] * static_cast<Real>(t));
    const ComplexVector out = vectors_.template cast<std::complex<Real>>() * m;
    StateVector v(out.size());
    for (Eigen::Index k = 0; k < out.size(); ++k)
      v[k] = Complex(static_cast<double>(out[k].real()), static_cast<double>(out[k].imag()));
    return v;
  }

 private:
  Eigen::Matrix<Real, Eigen::Dynamic, 1> values_;
  RealMatrix vectors_;
  ComplexVector modes0_;
};

namespace detail {

inline void record(Trajectory& tr, const GroupScheme& s, std::uint64_t k, double t, const StateVector& y,
                   const IntegrationPlan& plan, std::optional<double> norm_sq = std::nullopt) {
  tr.times.push_back(t);
  tr.norm_sq.push_back(norm_sq ? *norm_sq : l2_norm_sq(y, s));
  if (k % plan.snapshot_stride == 0) {
    Snapshot snap{t, density(y), std::nullopt};
    if (plan.keep_states) snap.state = y;
    tr.snapshots.push_back(std::move(snap));
  }
}

}  // namespace detail

/// March from t = 0 to t_end with fixed steps; norms every step, snapshots
/// every snapshot_stride steps.
inline Trajectory evolve(const NetworkSystem& sys, const IntegrationPlan& plan) {
  plan.validate();
  const auto n_steps = plan.steps();
  const auto& s = sys.scheme();
  Trajectory tr;
  tr.times.reserve(n_steps + 1);
  tr.norm_sq.reserve(n_steps + 1);

  StateVector y = sys.initial();
  detail::record(tr, s, 0, 0.0, y, plan);

  if (plan.method == IntegrationMethod::exact_free) {
    if (sys.mode() != NetworkMode::quantum || sys.has_coupling() || !sys.bias().empty())
      throw std::invalid_argument("exact-free integration needs a quantum system with W = 0 and Z = 0");
    const FreePropagator prop(sys.coupling_operator());
    const Eigen::VectorXcd modes = prop.to_modes(y);
    for (std::uint64_t k = 1; k <= n_steps; ++k) {
      const double t = static_cast<double>(k) * plan.dt;
      y = prop.from_modes(prop.advance_modes(modes, t));
      detail::record(tr, s, k, t, y, plan);
    }
    tr.final_state = y;
    return tr;
  }

  // A free classical system conserves the Haar mean m exactly (J kills
  // constants), so integrate only the deviation v = u - m. Near convergence
  // the rounding of v then scales with v rather than with m, and
  //   ||u||^2 = |m|^2 + 2 Re(conj(m) mean(v)) + ||v||^2
  // keeps decaying visibly instead of drowning in ulps of m.
  const bool split = sys.mode() == NetworkMode::classical && !sys.has_coupling() && sys.bias().empty();
  const Complex m = split ? y.mean() : Complex(0.0);
  StateVector v = y.array() - m;
  const double fixed_part = std::norm(m) + 2.0 * (std::conj(m) * v.mean()).real();
  if (split) tr.norm_sq.front() = fixed_part + l2_norm_sq(v, s);

  // Kahan-compensated accumulation: over 1e5 steps the rounding of v + inc
  // otherwise dominates the O(dt^4) truncation error.
  StateVector carry = StateVector::Zero(y.size());
  for (std::uint64_t k = 1; k <= n_steps; ++k) {
    const double t0 = static_cast<double>(k - 1) * plan.dt;
    try {
      const StateVector inc = rk4_increment(sys, t0, v, plan.dt) - carry;
      StateVector next = v + inc;
      if (!next.allFinite()) throw BlowUpError(t0, "state is not finite after the step");
      carry = (next - v) - inc;
      if (!carry.allFinite()) carry.setZero();
      v = std::move(next);
      y = split ? StateVector(v.array() + m) : v;
    } catch (BlowUpError& e) {
      tr.final_state = y;
      e.attach(std::make_shared<const Trajectory>(std::move(tr)));
      throw;
    }
    if (split)
      detail::record(tr, s, k, static_cast<double>(k) * plan.dt, y, plan, fixed_part + l2_norm_sq(v, s));
    else
      detail::record(tr, s, k, static_cast<double>(k) * plan.dt, y, plan);
  }
  tr.final_state = y;
  return tr;
}

/// || Psi(t) - [U(t) psi_0 + int_0^t U(t - s) G(s) ds] ||_2 at each sample
/// time, with G the forcing of the mild formulation and the integral done by
/// the trapezoid rule over stored snapshot states.
inline std::vector<double> duhamel_residual(const NetworkSystem& sys, const Trajectory& tr,
                                            const std::vector<double>& sample_times) {
  std::vector<const Snapshot*> stored;
  for (const auto& snap : tr.snapshots)
    if (snap.state) stored.push_back(&snap);
  if (stored.empty() || stored.front()->time != 0.0)
    throw std::invalid_argument("Duhamel residual needs stored states starting at t = 0");

  const auto& s = sys.scheme();
  const FreePropagator prop(sys.coupling_operator(), sys.mode());
  const Complex minus_i(0.0, -1.0);

  // Forcing in mode coordinates at every stored time.
  std::vector<Eigen::VectorXcd> forcing_modes;
  forcing_modes.reserve(stored.size());
  for (const auto* snap : stored) {
    StateVector g = sys.forcing(snap->time, *snap->state);
    if (sys.mode() == NetworkMode::quantum) g *= minus_i;
    forcing_modes.push_back(prop.to_modes(g));
  }
  const Eigen::VectorXcd initial_modes = prop.to_modes(*stored.front()->state);

  std::vector<double> out;
  out.reserve(sample_times.size());
  for (double t : sample_times) {
    std::size_t last = stored.size();
    for (std::size_t j = 0; j < stored.size(); ++j) {
      if (std::abs(stored[j]->time - t) <= 1e-9 * std::max(1.0, std::abs(t))) {
        last = j;
        break;
      }
    }
    if (last == stored.size())
      throw std::invalid_argument("no stored state at sample time " + std::to_string(t));

    Eigen::VectorXcd modes = prop.advance_modes(initial_modes, t);
    for (std::size_t j = 0; j + 1 <= last; ++j) {
      const double s0 = stored[j]->time, s1 = stored[j + 1]->time;
      const double h = s1 - s0;
      modes += (0.5 * h) * (prop.advance_modes(forcing_modes[j], t - s0) + prop.advance_modes(forcing_modes[j + 1], t - s1));
    }
    out.push_back(l2_norm(StateVector(*stored[last]->state - prop.from_modes(modes)), s));
  }
  return out;
}

}  // namespace padicnn
