#pragma once

// Radial kernels J(|x|_p) on Z_p and the dense coupling matrices J^(l) that
// discretize psi -> J * psi - psi on G_l.

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <fstream>
#include <istream>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "padicnn/padic.hpp"

namespace padicnn {

class KernelError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Taibleson-type kernel
///   J_a(x) = (1 - p^{-a}) / (1 - p^{a-1}) * (|x|_p^{a-1} - p^{a-1})
/// on the unit ball. Nonnegative with unit mass on Z_p for every a != 1.
inline double eval_j_alpha(double norm_value, double alpha, int p) {
  if (alpha == 1.0) throw KernelError("J_alpha is singular at alpha = 1");
  if (!(norm_value > 0.0) || norm_value > 1.0) throw KernelError("J_alpha needs a norm value in (0, 1]");
  const double pd = static_cast<double>(p);
  const double prefactor = (1.0 - std::pow(pd, -alpha)) / (1.0 - std::pow(pd, alpha - 1.0));
  return prefactor * (std::pow(norm_value, alpha - 1.0) - std::pow(pd, alpha - 1.0));
}

/// A radial profile tabulated on the norm levels p^0 .. p^{-(l-1)} of G_l.
/// The remaining mass (the integral over p^l Z_p) is the tail average.
class RadialKernel {
 public:
  RadialKernel(GroupScheme scheme, std::vector<double> level_values, bool allow_negative = false)
      : scheme_(std::move(scheme)), values_(std::move(level_values)) {
    if (values_.size() != static_cast<std::size_t>(scheme_.l()))
      throw KernelError("kernel needs one value per norm level (" + std::to_string(scheme_.l()) + "), got " +
                        std::to_string(values_.size()));
    for (double v : values_) {
      if (!std::isfinite(v)) throw KernelError("kernel values must be finite");
      if (!allow_negative && v < 0.0) throw KernelError("kernel values must be nonnegative");
    }
    tail_ = 1.0 - haar_weight(scheme_) * off_origin_sum();
  }

  static RadialKernel j_alpha(double alpha, const GroupScheme& scheme) {
    std::vector<double> v(static_cast<std::size_t>(scheme.l()));
    for (int j = 0; j < scheme.l(); ++j)
      v[static_cast<std::size_t>(j)] = eval_j_alpha(std::pow(static_cast<double>(scheme.p()), -j), alpha, scheme.p());
    return RadialKernel(scheme, std::move(v));
  }

  const GroupScheme& scheme() const { return scheme_; }

  /// J(p^{-j}) for 0 <= j < l.
  double at_level(int j) const { return values_.at(static_cast<std::size_t>(j)); }
  const std::vector<double>& level_values() const { return values_; }

  /// J(|I|_p) for a nonzero cell.
  double at_valuation(Valuation v) const {
    if (v.is_infinite()) throw KernelError("kernel value at the origin cell is the tail average, not a level value");
    return at_level(v.value());
  }

  /// Sum over I != 0 of J(|I|_p), evaluated with sphere cardinalities.
  double off_origin_sum() const {
    double sum = 0.0;
    for (int j = 0; j < scheme_.l(); ++j) sum += static_cast<double>(sphere_count(j, scheme_)) * at_level(j);
    return sum;
  }

  /// Aver_l(J) = 1 - p^{-l} sum_{I != 0} J(|I|_p).
  double tail_average() const { return tail_; }

  /// |p^{-l} sum_{I != 0} J + Aver_l - 1|.
  double normalization_defect() const { return std::abs(haar_weight(scheme_) * off_origin_sum() + tail_ - 1.0); }

 private:
  GroupScheme scheme_;
  std::vector<double> values_;
  double tail_ = 0.0;
};

inline double tail_average(const RadialKernel& k) { return k.tail_average(); }

enum class OperatorKind { convolution, graph };

/// Entry (I, K) of a convolution operator is level_weights[ord(I - K)] off the
/// diagonal and `diagonal` on it.
struct RadialStructure {
  std::vector<double> level_weights;
  double diagonal = 0.0;
};

/// Dense real symmetric J^(l), side p^l, cells in integer order.
struct CouplingOperator {
  GroupScheme scheme;
  Eigen::MatrixXd matrix;
  OperatorKind kind = OperatorKind::convolution;
  /// Set by the convolution builder; enables apply_radial. Clearing it forces
  /// dense products.
  std::optional<RadialStructure> radial;

  Eigen::Index side() const { return matrix.rows(); }
};

/// y = J x for a radial operator in O(p^l l) operations.
///
/// With B_j(I) the sum of x over the ball I + p^j Z_p, the sphere of
/// valuation j around I carries B_j(I) - B_{j+1}(I), so
///   (J x)_I = diagonal x_I + sum_j w_j (B_j(I) - B_{j+1}(I)).
template <typename Vec>
void apply_radial(const GroupScheme& s, const RadialStructure& r, const Vec& x, Vec& y) {
  using Scalar = typename Vec::Scalar;
  const int l = s.l();
  const auto p = static_cast<std::uint32_t>(s.p());
  const auto n = static_cast<Eigen::Index>(s.size());

  // Ball sums for levels l (the input itself) down to 0, stored level by level.
  std::vector<std::uint32_t> offset(static_cast<std::size_t>(l) + 1);
  std::uint32_t total = 0;
  for (int j = 0; j <= l; ++j) {
    offset[static_cast<std::size_t>(j)] = total;
    total += s.power(j);
  }
  std::vector<Scalar> sums(total);
  for (Eigen::Index k = 0; k < n; ++k) sums[offset[static_cast<std::size_t>(l)] + static_cast<std::uint32_t>(k)] = x[k];
  for (int j = l - 1; j >= 0; --j) {
    const std::uint32_t m = s.power(j);
    const Scalar* finer = sums.data() + offset[static_cast<std::size_t>(j) + 1];
    Scalar* coarse = sums.data() + offset[static_cast<std::size_t>(j)];
    for (std::uint32_t c = 0; c < m; ++c) {
      Scalar acc(0);
      for (std::uint32_t d = 0; d < p; ++d) acc += finer[c + d * m];
      coarse[c] = acc;
    }
  }

  y.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto iu = static_cast<std::uint32_t>(i);
    Scalar acc = r.diagonal * x[i];
    std::uint32_t m = 1;
    for (int j = 0; j < l; ++j) {
      const Scalar inner = sums[offset[static_cast<std::size_t>(j)] + iu % m];
      const Scalar outer = sums[offset[static_cast<std::size_t>(j) + 1] + iu % (m * p)];
      acc += r.level_weights[static_cast<std::size_t>(j)] * (inner - outer);
      m *= p;
    }
    y[i] = acc;
  }
}

inline constexpr std::uint32_t kDefaultDenseCellCap = 729;

/// Level weights p^{-l} J(p^{-j}) and the common diagonal -p^{-l} sum J,
/// without forming the matrix.
inline RadialStructure radial_structure(const RadialKernel& kernel) {
  const GroupScheme& s = kernel.scheme();
  const double w = haar_weight(s);
  RadialStructure r;
  r.level_weights.resize(static_cast<std::size_t>(s.l()));
  for (int j = 0; j < s.l(); ++j) r.level_weights[static_cast<std::size_t>(j)] = w * kernel.at_level(j);
  r.diagonal = -w * kernel.off_origin_sum();
  return r;
}

/// Eigenvalues of a radial operator. The additive characters of G_l with
/// conductor p^k share one eigenvalue; entry k of the result belongs to
/// conductor p^k (k = 0 is the constants) and has multiplicity
/// p^k - p^{k-1} (1 for k = 0).
///
/// A character of conductor p^k sums to p^{l-j} over p^j G_l when j >= k and
/// to 0 otherwise, so over the sphere of valuation j it sums to B_j - B_{j+1}.
inline std::vector<double> radial_spectrum(const GroupScheme& s, const RadialStructure& r) {
  const int l = s.l();
  std::vector<double> out(static_cast<std::size_t>(l) + 1);
  for (int k = 0; k <= l; ++k) {
    auto ball_sum = [&](int j) { return j >= k ? static_cast<double>(s.power(l - j)) : 0.0; };
    double lambda = r.diagonal;
    for (int j = 0; j < l; ++j) lambda += r.level_weights[static_cast<std::size_t>(j)] * (ball_sum(j) - ball_sum(j + 1));
    out[static_cast<std::size_t>(k)] = lambda;
  }
  return out;
}

inline std::uint32_t radial_multiplicity(const GroupScheme& s, int k) {
  return k == 0 ? 1u : s.power(k) - s.power(k - 1);
}

inline CouplingOperator build_convolution_operator(const RadialKernel& kernel,
                                                   std::uint32_t max_cells = kDefaultDenseCellCap) {
  const GroupScheme& s = kernel.scheme();
  if (s.size() > max_cells)
    throw KernelError("p^l = " + std::to_string(s.size()) + " exceeds the dense-matrix cap of " +
                      std::to_string(max_cells) + " cells");
  const auto n = static_cast<Eigen::Index>(s.size());

  // Entry (I, K) depends only on ord(I - K).
  RadialStructure r = radial_structure(kernel);
  const std::vector<double> by_level = r.level_weights;
  const double diagonal = r.diagonal;

  CouplingOperator op{s, Eigen::MatrixXd(n, n), OperatorKind::convolution, std::move(r)};
  for (Eigen::Index k = 0; k < n; ++k) {
    for (Eigen::Index i = 0; i < n; ++i) {
      if (i == k) {
        op.matrix(i, k) = diagonal;
        continue;
      }
      const auto d = s.sub(CellIndex(static_cast<std::uint32_t>(i)), CellIndex(static_cast<std::uint32_t>(k)));
      op.matrix(i, k) = by_level[static_cast<std::size_t>(valuation_of(d.value, s).value())];
    }
  }
  return op;
}

inline CouplingOperator build_convolution_operator(double alpha, const GroupScheme& scheme,
                                                   std::uint32_t max_cells = kDefaultDenseCellCap) {
  if (scheme.size() > max_cells)
    throw KernelError("p^l = " + std::to_string(scheme.size()) + " exceeds the dense-matrix cap of " +
                      std::to_string(max_cells) + " cells");
  return build_convolution_operator(RadialKernel::j_alpha(alpha, scheme), max_cells);
}

/// Graph operator: p^{-l} A off the diagonal, -p^{-l} val(K) on it.
/// Vertex v sits at cell vertex_cells[v]; every other cell has a zero row and
/// column. With an empty vertex_cells, vertex v sits at cell v.
inline CouplingOperator build_graph_operator(const Eigen::MatrixXd& adjacency, const GroupScheme& scheme,
                                             std::vector<CellIndex> vertex_cells = {}) {
  if (adjacency.rows() != adjacency.cols()) throw KernelError("adjacency matrix must be square");
  const auto nv = adjacency.rows();
  if (static_cast<std::uint64_t>(nv) > scheme.size())
    throw KernelError("graph has " + std::to_string(nv) + " vertices but G_l has only " +
                      std::to_string(scheme.size()) + " cells");
  if (vertex_cells.empty()) {
    for (Eigen::Index v = 0; v < nv; ++v) vertex_cells.emplace_back(static_cast<std::uint32_t>(v));
  }
  if (static_cast<Eigen::Index>(vertex_cells.size()) != nv) throw KernelError("one cell per vertex required");
  std::set<CellIndex> seen;
  for (auto c : vertex_cells) {
    scheme.require(c);
    if (!seen.insert(c).second) throw KernelError("two vertices mapped to cell " + std::to_string(c.value));
  }

  for (Eigen::Index i = 0; i < nv; ++i) {
    if (adjacency(i, i) != 0.0) throw KernelError("graph has a loop at vertex " + std::to_string(i));
    for (Eigen::Index k = 0; k < nv; ++k) {
      const double a = adjacency(i, k);
      if (a != 0.0 && a != 1.0)
        throw KernelError("adjacency entry (" + std::to_string(i) + "," + std::to_string(k) + ") is not 0/1");
      if (a != adjacency(k, i))
        throw KernelError("adjacency is not symmetric at (" + std::to_string(i) + "," + std::to_string(k) + ")");
    }
  }

  const auto n = static_cast<Eigen::Index>(scheme.size());
  const double w = haar_weight(scheme);
  CouplingOperator op{scheme, Eigen::MatrixXd::Zero(n, n), OperatorKind::graph, std::nullopt};
  for (Eigen::Index i = 0; i < nv; ++i) {
    const auto ci = static_cast<Eigen::Index>(vertex_cells[static_cast<std::size_t>(i)].value);
    double valence = 0.0;
    for (Eigen::Index k = 0; k < nv; ++k) {
      if (adjacency(i, k) == 0.0) continue;
      op.matrix(ci, static_cast<Eigen::Index>(vertex_cells[static_cast<std::size_t>(k)].value)) = w;
      valence += 1.0;
    }
    op.matrix(ci, ci) = -w * valence;
  }
  return op;
}

/// Edge-list text: one "u v" pair per line, 0-based ids, '#' comments and
/// blank lines ignored. The vertex count is max id + 1 unless given.
inline Eigen::MatrixXd read_edge_list(std::istream& in, Eigen::Index vertex_count = -1) {
  std::vector<std::pair<long, long>> edges;
  std::string line;
  long max_id = -1;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream ls(line);
    long u = 0, v = 0;
    if (!(ls >> u)) {
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      throw KernelError("edge list line " + std::to_string(line_no) + ": expected \"u v\"");
    }
    std::string rest;
    if (!(ls >> v) || (ls >> rest))
      throw KernelError("edge list line " + std::to_string(line_no) + ": expected exactly two vertex ids");
    if (u < 0 || v < 0) throw KernelError("edge list line " + std::to_string(line_no) + ": negative vertex id");
    if (u == v) throw KernelError("edge list line " + std::to_string(line_no) + ": loop at vertex " + std::to_string(u));
    edges.emplace_back(u, v);
    max_id = std::max({max_id, u, v});
  }
  const Eigen::Index n = vertex_count >= 0 ? vertex_count : static_cast<Eigen::Index>(max_id + 1);
  if (max_id >= n) throw KernelError("edge list references vertex " + std::to_string(max_id) + " beyond vertex count");
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, n);
  for (auto [u, v] : edges) {
    if (a(u, v) != 0.0)
      throw KernelError("edge list repeats edge " + std::to_string(u) + "-" + std::to_string(v));
    a(u, v) = a(v, u) = 1.0;
  }
  return a;
}

inline Eigen::MatrixXd read_edge_list_file(const std::string& path, Eigen::Index vertex_count = -1) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open edge list " + path);
  try {
    return read_edge_list(in, vertex_count);
  } catch (const KernelError& e) {
    throw KernelError(path + ": " + e.what());
  }
}

}  // namespace padicnn
