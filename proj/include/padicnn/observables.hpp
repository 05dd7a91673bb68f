#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>
#include <string>

#include "padicnn/padic.hpp"

namespace padicnn {

/// Haar-weighted squared L2 norm: p^{-l} sum_I |psi_I|^2.
inline double l2_norm_sq(const Eigen::VectorXcd& state, const GroupScheme& s) {
  if (state.size() != static_cast<Eigen::Index>(s.size()))
    throw std::invalid_argument("state length " + std::to_string(state.size()) + " does not match p^l = " +
                                std::to_string(s.size()));
  return haar_weight(s) * state.squaredNorm();
}

inline double l2_norm(const Eigen::VectorXcd& state, const GroupScheme& s) { return std::sqrt(l2_norm_sq(state, s)); }

/// |psi_I|^2 entrywise.
inline Eigen::VectorXd density(const Eigen::VectorXcd& state) { return state.cwiseAbs2(); }

}  // namespace padicnn
