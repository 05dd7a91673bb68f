#pragma once

// Spectral diagnostics of coupling operators and the a-priori bounds of the
// mild formulation: ||H0|| <= ||J||_1 + 1, the Lipschitz constant of the
// forcing, and the uniform bound C(F) on its squared norm.

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <iomanip>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>
#include <variant>

#include "padicnn/evolution.hpp"
#include "padicnn/kernel.hpp"
#include "padicnn/network.hpp"
#include "padicnn/observables.hpp"

namespace padicnn {

namespace detail {

inline std::string format_value(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

}  // namespace detail

struct SpectralReport {
  double symmetry_defect = 0.0;
  double min_eigenvalue = 0.0;
  double max_eigenvalue = 0.0;
  std::size_t positive_count = 0;
  std::size_t kernel_dimension = 0;
  Eigen::VectorXd eigenvalues;

  bool negative_semidefinite() const { return positive_count == 0; }

  std::string to_key_value() const {
    std::ostringstream os;
    os << "symmetry_defect=" << detail::format_value(symmetry_defect) << '\n'
       << "min_eigenvalue=" << detail::format_value(min_eigenvalue) << '\n'
       << "max_eigenvalue=" << detail::format_value(max_eigenvalue) << '\n'
       << "positive_eigenvalues=" << positive_count << '\n'
       << "kernel_dimension=" << kernel_dimension << '\n'
       << "negative_semidefinite=" << (negative_semidefinite() ? "true" : "false") << '\n';
    return os.str();
  }
};

inline constexpr double kEigenvalueTolerance = 1e-10;

inline SpectralReport spectral_diagnostics(const CouplingOperator& op) {
  SpectralReport r;
  r.symmetry_defect = symmetry_defect(op.matrix);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(op.matrix, Eigen::EigenvaluesOnly);
  r.eigenvalues = solver.eigenvalues();
  if (r.eigenvalues.size() == 0) return r;
  r.min_eigenvalue = r.eigenvalues.minCoeff();
  r.max_eigenvalue = r.eigenvalues.maxCoeff();
  for (double lambda : r.eigenvalues) {
    if (lambda > kEigenvalueTolerance) ++r.positive_count;
    if (std::abs(lambda) <= kEigenvalueTolerance) ++r.kernel_dimension;
  }
  return r;
}

class CertificateError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct BoundCertificate {
  double h0_norm_bound = 0.0;
  double lipschitz_F = 0.0;
  double c_F = 0.0;
  double activation_sup = 0.0;

  std::string to_key_value() const {
    std::ostringstream os;
    os << "h0_norm_bound=" << detail::format_value(h0_norm_bound) << '\n'
       << "lipschitz_F=" << detail::format_value(lipschitz_F) << '\n'
       << "c_F=" << detail::format_value(c_F) << '\n'
       << "activation_sup=" << detail::format_value(activation_sup) << '\n';
    return os.str();
  }
};

/// ||J||_1 + 1 for a convolution operator (the diagonal carries Aver_l - 1),
/// the induced infinity norm for a graph operator.
inline double h0_norm_bound(const CouplingOperator& op) {
  const Eigen::MatrixXd& m = op.matrix;
  if (m.rows() == 0) return 0.0;
  if (op.kind == OperatorKind::graph) return m.cwiseAbs().rowwise().sum().maxCoeff();
  double worst = 0.0;
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    const double off = m.row(i).cwiseAbs().sum() - std::abs(m(i, i));
    const double tail = 1.0 + m(i, i);
    worst = std::max(worst, off + std::abs(tail) + 1.0);
  }
  return worst;
}

/// Haar-weighted L2 norm of W(x, .) for every row x.
inline Eigen::VectorXd coupling_row_norms(const CouplingSpec& w, const GroupScheme& s) {
  const auto n = static_cast<Eigen::Index>(s.size());
  const double hw = haar_weight(s);
  if (const auto* c = std::get_if<ConstantCoupling>(&w)) return Eigen::VectorXd::Constant(n, std::abs(c->value));
  if (const auto* m = std::get_if<MatrixCoupling>(&w))
    return (std::abs(m->scale) * (hw * m->matrix.cwiseAbs2().rowwise().sum()).cwiseSqrt()).eval();
  return Eigen::VectorXd::Zero(n);
}

/// ||W||_{L2(Z_p x Z_p)} of the step-function kernel.
inline double coupling_l2_norm(const CouplingSpec& w, const GroupScheme& s) {
  const Eigen::VectorXd rows = coupling_row_norms(w, s);
  return std::sqrt(haar_weight(s) * rows.squaredNorm());
}

inline BoundCertificate compute_certificate(const NetworkSystem& sys) {
  const auto& s = sys.scheme();
  const auto sup = sys.activation().complex_sup_bound();
  if (sys.has_coupling() && !sup)
    throw CertificateError("activation is unbounded; C(F) is undefined and only local existence holds");

  BoundCertificate c;
  c.activation_sup = sup.value_or(0.0);
  c.h0_norm_bound = h0_norm_bound(sys.coupling_operator());
  c.lipschitz_F = sys.activation().lipschitz() * coupling_l2_norm(sys.coupling(), s);

  const Eigen::VectorXd per_cell =
      coupling_row_norms(sys.coupling(), s) * c.activation_sup + bias_sup_field(sys.bias(), s);
  c.c_F = haar_weight(s) * per_cell.squaredNorm();
  return c;
}

struct GrowthReport {
  bool passed = true;
  double worst_margin = std::numeric_limits<double>::infinity();
  double worst_time = 0.0;
  std::size_t checked = 0;

  std::string to_key_value() const {
    std::ostringstream os;
    os << "growth_bound=" << (passed ? "pass" : "fail") << '\n'
       << "worst_margin=" << detail::format_value(worst_margin) << '\n'
       << "worst_time=" << detail::format_value(worst_time) << '\n'
       << "checked=" << checked << '\n';
    return os.str();
  }
};

/// ||Psi(t)||_2 <= ||Psi(0)||_2 + t sqrt(C(F)) at every recorded time. The
/// relative slack absorbs rounding on runs where the bound is attained.
inline GrowthReport check_growth_bound(const Trajectory& tr, const BoundCertificate& cert,
                                       double relative_slack = 1e-10) {
  GrowthReport r;
  if (tr.norm_sq.empty()) return r;
  const double n0 = std::sqrt(tr.norm_sq.front());
  const double rate = std::sqrt(cert.c_F);
  for (std::size_t k = 0; k < tr.norm_sq.size(); ++k) {
    const double bound = n0 + tr.times[k] * rate;
    const double margin = bound - std::sqrt(tr.norm_sq[k]);
    ++r.checked;
    if (margin < r.worst_margin) {
      r.worst_margin = margin;
      r.worst_time = tr.times[k];
    }
    if (margin < -relative_slack * std::max(1.0, bound)) r.passed = false;
  }
  return r;
}

}  // namespace padicnn
