#pragma once

// Right-hand sides of the quantum network
//   i dPsi/dt = -J Psi + [p^{-l} sum_K W_{I,K} phi(Psi_K) + Z_I(t)]
// and of its classical (heat-type) counterpart
//   du/dt = J u + p^{-l} sum_K W_{I,K} phi(u_K) + Z_I(t).

#include <Eigen/Dense>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <complex>
#include <fstream>
#include <functional>
#include <istream>
#include <limits>
#include <numbers>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "padicnn/kernel.hpp"
#include "padicnn/padic.hpp"

namespace padicnn {

using Complex = std::complex<double>;
using StateVector = Eigen::VectorXcd;

class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum class ActivationKind { saturation, paper_literal, identity, custom };

/// Real activation extended to C componentwise: phi(a + ib) = phi(a) + i phi(b).
class Activation {
 public:
  /// 0.5 (|s+1| - |s-1|), the usual CNN clamp to [-1, 1].
  static Activation saturation() { return Activation(ActivationKind::saturation, 1.0, 1.0, {}); }
  /// 0.5 (|s+1| + |s-1|) = max(1, |s|), the formula as printed.
  static Activation paper_literal() { return Activation(ActivationKind::paper_literal, 1.0, std::nullopt, {}); }
  static Activation identity() { return Activation(ActivationKind::identity, 1.0, std::nullopt, {}); }
  static Activation custom(std::function<double(double)> f, double lipschitz, std::optional<double> sup_bound) {
    if (!(lipschitz > 0.0)) throw std::invalid_argument("custom activation needs a positive Lipschitz constant");
    return Activation(ActivationKind::custom, lipschitz, sup_bound, std::move(f));
  }

  ActivationKind kind() const { return kind_; }
  double lipschitz() const { return lipschitz_; }
  /// Bound on |phi(s)| for real s, if any.
  std::optional<double> sup_bound() const { return sup_; }
  /// Bound on |phi(z)| for complex z: each component is bounded separately.
  std::optional<double> complex_sup_bound() const {
    if (!sup_) return std::nullopt;
    return *sup_ * std::sqrt(2.0);
  }

  double operator()(double s) const {
    switch (kind_) {
      case ActivationKind::saturation:
        return std::clamp(s, -1.0, 1.0);  // same function, no rounding inside [-1, 1]
      case ActivationKind::paper_literal:
        return 0.5 * (std::abs(s + 1.0) + std::abs(s - 1.0));
      case ActivationKind::identity:
        return s;
      case ActivationKind::custom:
        return fn_(s);
    }
    return s;
  }
  Complex operator()(Complex z) const { return {(*this)(z.real()), (*this)(z.imag())}; }

 private:
  Activation(ActivationKind k, double lip, std::optional<double> sup, std::function<double(double)> f)
      : kind_(k), lipschitz_(lip), sup_(sup), fn_(std::move(f)) {}

  ActivationKind kind_;
  double lipschitz_;
  std::optional<double> sup_;
  std::function<double(double)> fn_;
};

inline Complex apply_activation(const Activation& act, Complex z) { return act(z); }

// W(x, y) variants.
struct ZeroCoupling {};
struct ConstantCoupling {
  Complex value;
};
struct MatrixCoupling {
  Eigen::MatrixXcd matrix;
  double scale = 1.0;
  std::string provenance;
};
using CouplingSpec = std::variant<ZeroCoupling, ConstantCoupling, MatrixCoupling>;

/// One term amplitude * sin(omega * pi * t) + offset, active for t in
/// [t_start, t_end) and on the cells of the mask (all cells when unset).
struct BiasTerm {
  double amplitude = 0.0;
  double omega = 0.0;
  double t_start = 0.0;
  double t_end = std::numeric_limits<double>::infinity();
  std::optional<BallSpec> mask;
  double offset = 0.0;

  bool active_at(double t) const { return t >= t_start && t < t_end; }
  double value_at(double t) const { return amplitude * std::sin(omega * std::numbers::pi * t) + offset; }
  friend bool operator==(const BiasTerm&, const BiasTerm&) = default;
};

struct BiasSignal {
  std::vector<BiasTerm> terms;

  static BiasSignal constant(double value) { return {{BiasTerm{0.0, 0.0, 0.0, std::numeric_limits<double>::infinity(), std::nullopt, value}}}; }
  bool empty() const { return terms.empty(); }
  friend bool operator==(const BiasSignal&, const BiasSignal&) = default;
};

inline Complex evaluate_bias(const BiasSignal& z, CellIndex cell, double t, const GroupScheme& s) {
  double sum = 0.0;
  for (const auto& term : z.terms) {
    if (!term.active_at(t)) continue;
    if (term.mask && !term.mask->contains(cell, s)) continue;
    sum += term.value_at(t);
  }
  return {sum, 0.0};
}

/// Z(., t) for every cell.
inline StateVector evaluate_bias_field(const BiasSignal& z, double t, const GroupScheme& s) {
  const auto n = static_cast<Eigen::Index>(s.size());
  StateVector out = StateVector::Zero(n);
  for (const auto& term : z.terms) {
    if (!term.active_at(t)) continue;
    const double v = term.value_at(t);
    if (!term.mask) {
      out.array() += v;
      continue;
    }
    for (auto c : ball_members(*term.mask, s)) out[static_cast<Eigen::Index>(c.value)] += v;
  }
  return out;
}

/// Upper bound of |Z(I, t)| over all t, per cell.
inline Eigen::VectorXd bias_sup_field(const BiasSignal& z, const GroupScheme& s) {
  const auto n = static_cast<Eigen::Index>(s.size());
  Eigen::VectorXd out = Eigen::VectorXd::Zero(n);
  for (const auto& term : z.terms) {
    const double bound = std::abs(term.amplitude) + std::abs(term.offset);
    if (!term.mask) {
      out.array() += bound;
      continue;
    }
    for (auto c : ball_members(*term.mask, s)) out[static_cast<Eigen::Index>(c.value)] += bound;
  }
  return out;
}

enum class NetworkMode { quantum, classical };

/// p^{-l} sum_K W_{I,K} phi(state_K) for every I.
inline StateVector coupling_term(const CouplingSpec& w, const Activation& act, const StateVector& state,
                                 const GroupScheme& s) {
  const auto n = static_cast<Eigen::Index>(s.size());
  if (state.size() != n)
    throw DimensionError("state has " + std::to_string(state.size()) + " entries, expected " + std::to_string(n));
  const double hw = haar_weight(s);
  return std::visit(
      [&](const auto& spec) -> StateVector {
        using T = std::decay_t<decltype(spec)>;
        if constexpr (std::is_same_v<T, ZeroCoupling>) {
          return StateVector::Zero(n);
        } else if constexpr (std::is_same_v<T, ConstantCoupling>) {
          Complex sum = 0.0;
          for (Eigen::Index k = 0; k < n; ++k) sum += act(state[k]);
          return StateVector::Constant(n, spec.value * hw * sum);
        } else {
          if (spec.matrix.rows() != n || spec.matrix.cols() != n)
            throw DimensionError("coupling matrix is " + std::to_string(spec.matrix.rows()) + "x" +
                                 std::to_string(spec.matrix.cols()) + ", expected " + std::to_string(n) + "x" +
                                 std::to_string(n));
          StateVector phi(n);
          for (Eigen::Index k = 0; k < n; ++k) phi[k] = act(state[k]);
          return (hw * spec.scale) * (spec.matrix * phi);
        }
      },
      w);
}

struct BallState {
  BallSpec ball;
  friend bool operator==(const BallState&, const BallState&) = default;
};
struct UniformState {
  Complex value;
  friend bool operator==(const UniformState&, const UniformState&) = default;
};
struct ZeroState {
  friend bool operator==(const ZeroState&, const ZeroState&) = default;
};
using InitialStateSpec = std::variant<BallState, UniformState, ZeroState>;

/// Ball indicators are scaled by p^{r/2} so that the Haar-weighted L2 norm is 1.
inline StateVector initial_state(const InitialStateSpec& spec, const GroupScheme& s) {
  const auto n = static_cast<Eigen::Index>(s.size());
  if (const auto* b = std::get_if<BallState>(&spec)) {
    b->ball.validate(s);
    const double amp = std::pow(static_cast<double>(s.p()), 0.5 * b->ball.level);
    StateVector out = StateVector::Zero(n);
    for (auto c : ball_members(b->ball, s)) out[static_cast<Eigen::Index>(c.value)] = amp;
    return out;
  }
  if (const auto* u = std::get_if<UniformState>(&spec)) return StateVector::Constant(n, u->value);
  return StateVector::Zero(n);
}

/// y = M x for real M and complex x, as one real product with two columns.
inline void apply_real_operator(const Eigen::MatrixXd& m, const StateVector& x, StateVector& y) {
  using Planes = Eigen::Matrix<double, Eigen::Dynamic, 2, Eigen::RowMajor>;
  const auto n = x.size();
  y.resize(n);
  Eigen::Map<const Planes> xs(reinterpret_cast<const double*>(x.data()), n, 2);
  Eigen::Map<Planes> ys(reinterpret_cast<double*>(y.data()), n, 2);
  ys.noalias() = m * xs;
}

/// y = J x, through the radial structure when the operator carries one.
inline void apply_operator(const CouplingOperator& op, const StateVector& x, StateVector& y) {
  if (op.radial) {
    apply_radial(op.scheme, *op.radial, x, y);
    return;
  }
  apply_real_operator(op.matrix, x, y);
}

/// Immutable description of one network.
class NetworkSystem {
 public:
  NetworkSystem(CouplingOperator op, NetworkMode mode, CouplingSpec w, BiasSignal z, Activation act,
                StateVector initial)
      : op_(std::move(op)),
        mode_(mode),
        w_(std::move(w)),
        z_(std::move(z)),
        act_(std::move(act)),
        initial_(std::move(initial)) {
    const auto n = static_cast<Eigen::Index>(op_.scheme.size());
    if (op_.matrix.rows() != n || op_.matrix.cols() != n)
      throw DimensionError("operator side " + std::to_string(op_.matrix.rows()) + " does not match p^l = " +
                           std::to_string(n));
    if (initial_.size() != n)
      throw DimensionError("initial state has " + std::to_string(initial_.size()) + " entries, expected " +
                           std::to_string(n));
    if (const auto* m = std::get_if<MatrixCoupling>(&w_)) {
      if (m->matrix.rows() != n || m->matrix.cols() != n)
        throw DimensionError("coupling matrix must be " + std::to_string(n) + "x" + std::to_string(n));
      if (!m->matrix.allFinite() || !std::isfinite(m->scale)) throw DimensionError("coupling matrix must be finite");
    }
    for (const auto& t : z_.terms)
      if (t.mask) t.mask->validate(op_.scheme);
  }

  const GroupScheme& scheme() const { return op_.scheme; }
  const CouplingOperator& coupling_operator() const { return op_; }
  NetworkMode mode() const { return mode_; }
  const CouplingSpec& coupling() const { return w_; }
  const BiasSignal& bias() const { return z_; }
  const Activation& activation() const { return act_; }
  const StateVector& initial() const { return initial_; }

  bool has_coupling() const { return !std::holds_alternative<ZeroCoupling>(w_); }

  /// coupling_term + Z(., t).
  StateVector forcing(double t, const StateVector& state) const {
    StateVector f = evaluate_bias_field(z_, t, scheme());
    if (has_coupling()) f += coupling_term(w_, act_, state, scheme());
    return f;
  }

 private:
  CouplingOperator op_;
  NetworkMode mode_;
  CouplingSpec w_;
  BiasSignal z_;
  Activation act_;
  StateVector initial_;
};

class NonFiniteStateError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// dState/dt. Quantum: i J psi - i (coupling + Z). Classical: J u + coupling + Z.
inline StateVector rhs(const NetworkSystem& sys, double t, const StateVector& state) {
  const auto n = static_cast<Eigen::Index>(sys.scheme().size());
  if (state.size() != n)
    throw DimensionError("state has " + std::to_string(state.size()) + " entries, expected " + std::to_string(n));
  if (!state.allFinite()) throw NonFiniteStateError("non-finite state entry at t = " + std::to_string(t));
  StateVector out;
  apply_operator(sys.coupling_operator(), state, out);
  const StateVector f = sys.forcing(t, state);
  if (sys.mode() == NetworkMode::quantum) {
    const Complex i(0.0, 1.0);
    out = i * (out - f);
  } else {
    out += f;
  }
  return out;
}

// --- coupling-matrix CSV ---------------------------------------------------

class MatrixFormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline std::optional<double> parse_double(std::string_view s) {
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  if (s.empty()) return std::nullopt;
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

}  // namespace detail

/// Accepts "a", "a+bi", "a-bi", "bi" (also with 'j').
inline std::optional<Complex> parse_complex_token(std::string_view tok) {
  tok = detail::trim(tok);
  if (tok.empty()) return std::nullopt;
  if (tok.back() != 'i' && tok.back() != 'j') {
    auto re = detail::parse_double(tok);
    if (!re) return std::nullopt;
    return Complex(*re, 0.0);
  }
  tok.remove_suffix(1);
  std::size_t split = std::string_view::npos;
  for (std::size_t k = tok.size(); k-- > 1;) {
    if ((tok[k] == '+' || tok[k] == '-') && tok[k - 1] != 'e' && tok[k - 1] != 'E') {
      split = k;
      break;
    }
  }
  auto imag_of = [](std::string_view s) -> std::optional<double> {
    if (s.empty() || s == "+") return 1.0;
    if (s == "-") return -1.0;
    return detail::parse_double(s);
  };
  if (split == std::string_view::npos) {
    auto im = imag_of(tok);
    if (!im) return std::nullopt;
    return Complex(0.0, *im);
  }
  auto re = detail::parse_double(tok.substr(0, split));
  auto im = imag_of(tok.substr(split));
  if (!re || !im) return std::nullopt;
  return Complex(*re, *im);
}

/// Square CSV of side `side`; rows and columns are reported 1-based in errors.
inline Eigen::MatrixXcd read_coupling_csv(std::istream& in, Eigen::Index side) {
  Eigen::MatrixXcd m(side, side);
  std::string line;
  Eigen::Index row = 0;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    if (row >= side)
      throw MatrixFormatError("row " + std::to_string(row + 1) + ": more than " + std::to_string(side) + " rows");
    std::string_view rest(line);
    Eigen::Index col = 0;
    while (true) {
      const auto comma = rest.find(',');
      const auto tok = rest.substr(0, comma);
      if (col >= side)
        throw MatrixFormatError("row " + std::to_string(row + 1) + ": more than " + std::to_string(side) + " columns");
      auto v = parse_complex_token(tok);
      if (!v)
        throw MatrixFormatError("row " + std::to_string(row + 1) + ", column " + std::to_string(col + 1) +
                                ": cannot parse \"" + std::string(detail::trim(tok)) + "\"");
      m(row, col++) = *v;
      if (comma == std::string_view::npos) break;
      rest.remove_prefix(comma + 1);
    }
    if (col != side)
      throw MatrixFormatError("row " + std::to_string(row + 1) + ": has " + std::to_string(col) + " columns, expected " +
                              std::to_string(side));
    ++row;
  }
  if (row != side)
    throw MatrixFormatError("matrix has " + std::to_string(row) + " rows, expected " + std::to_string(side));
  return m;
}

}  // namespace padicnn
