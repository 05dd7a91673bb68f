#pragma once

// Quick invariant and certificate checks, used by `padicnn check`.

#include <Eigen/Dense>

#include <cmath>
#include <algorithm>
#include <functional>
#include <numbers>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include "padicnn/analysis.hpp"
#include "padicnn/evolution.hpp"
#include "padicnn/kernel.hpp"
#include "padicnn/network.hpp"

namespace padicnn {

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

inline std::vector<CheckResult> run_self_check() {
  std::vector<CheckResult> out;
  auto add = [&](std::string name, const std::function<std::pair<bool, std::string>()>& body) {
    try {
      auto [ok, detail] = body();
      out.push_back({std::move(name), ok, std::move(detail)});
    } catch (const std::exception& e) {
      out.push_back({std::move(name), false, std::string("exception: ") + e.what()});
    }
  };

  add("kernel_normalization", [] {
    double worst = 0.0;
    for (int p : {2, 3, 5})
      for (int l = 1; l <= 6; ++l)
        for (double a : {1.2, 1.6, 2.5, 3.0}) worst = std::max(worst, RadialKernel::j_alpha(a, GroupScheme(p, l)).normalization_defect());
    return std::pair{worst <= 1e-12, "max_defect=" + std::to_string(worst)};
  });

  add("operator_structure", [] {
    bool ok = true;
    double worst_row = 0.0;
    for (int p : {2, 3})
      for (int l = 1; l <= 4; ++l) {
        const auto op = build_convolution_operator(2.5, GroupScheme(p, l));
        const auto rep = spectral_diagnostics(op);
        worst_row = std::max(worst_row, op.matrix.rowwise().sum().cwiseAbs().maxCoeff());
        ok = ok && rep.symmetry_defect <= 1e-14 && rep.negative_semidefinite() && rep.kernel_dimension == 1;
      }
    return std::pair{ok && worst_row <= 1e-12, "max_row_sum=" + std::to_string(worst_row)};
  });

  add("two_vertex_ctqw", [] {
    Eigen::MatrixXd a(2, 2);
    a << 0, 1, 1, 0;
    const auto op = build_graph_operator(a, GroupScheme(2, 1));
    const FreePropagator prop(op);
    StateVector psi0(2);
    psi0 << 1.0, 0.0;
    double worst = 0.0;
    for (int k = 0; k <= 100; ++k) {
      const double t = 4.0 * std::numbers::pi * k / 100.0;
      const Eigen::VectorXd d = density(prop.propagate(psi0, t));
      worst = std::max({worst, std::abs(d[0] - std::pow(std::cos(t / 2), 2)), std::abs(d[1] - std::pow(std::sin(t / 2), 2))});
    }
    return std::pair{worst <= 1e-8, "max_error=" + std::to_string(worst)};
  });

  add("free_unitarity", [] {
    const GroupScheme s(3, 4);
    NetworkSystem sys(build_convolution_operator(2.5, s), NetworkMode::quantum, ZeroCoupling{}, {},
                      Activation::saturation(), initial_state(BallState{{CellIndex(4), 2}}, s));
    const auto tr = evolve(sys, IntegrationPlan{2.0, 1e-3, 100});
    double worst = 0.0;
    for (double n : tr.norm_sq) worst = std::max(worst, std::abs(n - 1.0));
    return std::pair{worst <= 1e-6, "max_norm_drift=" + std::to_string(worst)};
  });

  add("certificate_constant_bias", [] {
    const GroupScheme s(2, 3);
    NetworkSystem sys(build_convolution_operator(2.5, s), NetworkMode::quantum, ZeroCoupling{}, BiasSignal::constant(10.0),
                      Activation::saturation(), StateVector::Zero(8));
    const auto c = compute_certificate(sys);
    return std::pair{std::abs(c.c_F - 100.0) <= 1e-12 && c.lipschitz_F == 0.0, "c_F=" + std::to_string(c.c_F)};
  });

  add("growth_bound", [] {
    const GroupScheme s(3, 3);
    NetworkSystem sys(build_convolution_operator(2.5, s), NetworkMode::quantum, ConstantCoupling{{5.0, 0.0}},
                      BiasSignal::constant(1.0), Activation::saturation(), StateVector::Constant(27, Complex(0.5, 0.3)));
    const auto tr = evolve(sys, IntegrationPlan{2.0, 1e-3, 100});
    const auto rep = check_growth_bound(tr, compute_certificate(sys));
    return std::pair{rep.passed, "worst_margin=" + std::to_string(rep.worst_margin)};
  });

  add("lipschitz_certificate", [] {
    const GroupScheme s(2, 4);
    std::mt19937_64 rng(7);
    std::normal_distribution<double> g;
    Eigen::MatrixXcd w(16, 16);
    for (Eigen::Index i = 0; i < w.size(); ++i) w(i) = Complex(g(rng), g(rng));
    const CouplingSpec spec = MatrixCoupling{w, 0.7, "random"};
    NetworkSystem sys(build_convolution_operator(1.6, s), NetworkMode::quantum, spec, {}, Activation::saturation(),
                      StateVector::Zero(16));
    const double lf = compute_certificate(sys).lipschitz_F;
    double worst = 0.0;
    for (int trial = 0; trial < 200; ++trial) {
      StateVector a(16), b(16);
      for (Eigen::Index k = 0; k < 16; ++k) {
        a[k] = Complex(2 * g(rng), 2 * g(rng));
        b[k] = Complex(2 * g(rng), 2 * g(rng));
      }
      const double num = l2_norm(StateVector(coupling_term(spec, sys.activation(), a, s) - coupling_term(spec, sys.activation(), b, s)), s);
      const double den = l2_norm(StateVector(a - b), s);
      worst = std::max(worst, num / den);
    }
    return std::pair{worst <= lf + 1e-9, "ratio=" + std::to_string(worst) + " L_F=" + std::to_string(lf)};
  });

  return out;
}

inline bool print_self_check(std::ostream& os, const std::vector<CheckResult>& results) {
  bool all = true;
  for (const auto& r : results) {
    os << r.name << '=' << (r.passed ? "pass" : "fail") << "  # " << r.detail << '\n';
    all = all && r.passed;
  }
  os << "overall=" << (all ? "pass" : "fail") << '\n';
  return all;
}

}  // namespace padicnn
