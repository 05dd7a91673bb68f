#pragma once

// Arithmetic on the finite quotient G_l = Z_p / p^l Z_p.
//
// A cell I is stored as the integer I_0 + I_1 p + ... + I_{l-1} p^{l-1} in
// [0, p^l); every vector and matrix in the library is indexed in this order.

#include <cmath>
#include <compare>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace padicnn {

class SchemeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

inline bool is_prime(std::int64_t n) {
  if (n < 2) return false;
  for (std::int64_t d = 2; d * d <= n; ++d)
    if (n % d == 0) return false;
  return true;
}

struct CellIndex {
  std::uint32_t value = 0;

  constexpr CellIndex() = default;
  constexpr explicit CellIndex(std::uint32_t v) : value(v) {}
  friend constexpr auto operator<=>(CellIndex, CellIndex) = default;
};

/// Exponent of p in an element of G_l. The zero element has infinite
/// valuation, kept as a sentinel so that |0|_p = 0 exactly.
class Valuation {
 public:
  static constexpr Valuation infinity() { return Valuation(kInfinite); }
  static constexpr Valuation finite(int v) { return Valuation(v); }

  constexpr bool is_infinite() const { return v_ == kInfinite; }
  constexpr int value() const {
    if (is_infinite()) throw std::logic_error("valuation of zero is infinite");
    return v_;
  }
  friend constexpr bool operator==(Valuation, Valuation) = default;

 private:
  static constexpr int kInfinite = std::numeric_limits<int>::max();
  constexpr explicit Valuation(int v) : v_(v) {}
  int v_;
};

/// The pair (p, l). Immutable once constructed.
class GroupScheme {
 public:
  static constexpr std::int64_t kMaxSize = std::int64_t{1} << 31;

  GroupScheme(int p, int l) : p_(p), l_(l) {
    if (!is_prime(p)) throw SchemeError("p must be prime (got " + std::to_string(p) + ")");
    if (l < 1) throw SchemeError("l must be a positive integer (got " + std::to_string(l) + ")");
    std::int64_t size = 1;
    for (int k = 0; k < l; ++k) {
      size *= p;
      if (size > kMaxSize)
        throw SchemeError("p^l exceeds 2^31 for p=" + std::to_string(p) + ", l=" + std::to_string(l));
    }
    size_ = static_cast<std::uint32_t>(size);
  }

  int p() const { return p_; }
  int l() const { return l_; }
  std::uint32_t size() const { return size_; }

  bool contains(CellIndex i) const { return i.value < size_; }

  void require(CellIndex i) const {
    if (!contains(i))
      throw std::out_of_range("cell " + std::to_string(i.value) + " outside G_" + std::to_string(l_) +
                              " of size " + std::to_string(size_));
  }

  /// p^k as an integer, 0 <= k <= l.
  std::uint32_t power(int k) const {
    std::uint32_t r = 1;
    for (int j = 0; j < k; ++j) r *= static_cast<std::uint32_t>(p_);
    return r;
  }

  /// Base-p digits I_0 .. I_{l-1}.
  std::vector<int> digits(CellIndex i) const {
    require(i);
    std::vector<int> d(static_cast<std::size_t>(l_));
    std::uint32_t v = i.value;
    for (auto& x : d) {
      x = static_cast<int>(v % static_cast<std::uint32_t>(p_));
      v /= static_cast<std::uint32_t>(p_);
    }
    return d;
  }

  CellIndex from_digits(const std::vector<int>& d) const {
    if (d.size() != static_cast<std::size_t>(l_)) throw SchemeError("expected l digits");
    std::uint32_t v = 0;
    for (auto it = d.rbegin(); it != d.rend(); ++it) {
      if (*it < 0 || *it >= p_) throw SchemeError("digit out of range");
      v = v * static_cast<std::uint32_t>(p_) + static_cast<std::uint32_t>(*it);
    }
    return CellIndex(v);
  }

  CellIndex add(CellIndex a, CellIndex b) const {
    return CellIndex(static_cast<std::uint32_t>((std::uint64_t{a.value} + b.value) % size_));
  }
  CellIndex sub(CellIndex a, CellIndex b) const {
    return CellIndex(static_cast<std::uint32_t>((std::uint64_t{a.value} + size_ - b.value) % size_));
  }

  friend bool operator==(const GroupScheme& a, const GroupScheme& b) { return a.p_ == b.p_ && a.l_ == b.l_; }

 private:
  int p_;
  int l_;
  std::uint32_t size_ = 0;
};

/// Valuation of a raw residue d in [0, p^l); infinite for d == 0.
inline Valuation valuation_of(std::uint32_t d, const GroupScheme& s) {
  if (d == 0) return Valuation::infinity();
  int v = 0;
  const auto p = static_cast<std::uint32_t>(s.p());
  while (d % p == 0) {
    d /= p;
    ++v;
  }
  return Valuation::finite(v);
}

/// ord_p(i - k mod p^l).
inline Valuation valuation(CellIndex i, CellIndex k, const GroupScheme& s) {
  s.require(i);
  s.require(k);
  return valuation_of(s.sub(i, k).value, s);
}

/// p^{-v} for a finite valuation, 0 for the infinite one.
inline double norm_of(Valuation v, const GroupScheme& s) {
  if (v.is_infinite()) return 0.0;
  return std::pow(static_cast<double>(s.p()), -v.value());
}

inline double padic_norm(CellIndex i, CellIndex k, const GroupScheme& s) { return norm_of(valuation(i, k, s), s); }

inline double haar_weight(const GroupScheme& s) { return std::pow(static_cast<double>(s.p()), -s.l()); }

/// Number of nonzero cells I with |I|_p = p^{-j}, 0 <= j < l.
inline std::uint32_t sphere_count(int j, const GroupScheme& s) {
  if (j < 0 || j >= s.l()) throw std::out_of_range("sphere level out of range");
  return s.power(s.l() - j) - s.power(s.l() - j - 1);
}

/// The ball center + p^r Z_p restricted to the grid.
struct BallSpec {
  CellIndex center;
  int level = 0;

  bool contains(CellIndex i, const GroupScheme& s) const {
    const auto m = s.power(level);
    return i.value % m == center.value % m;
  }
  void validate(const GroupScheme& s) const {
    s.require(center);
    if (level < 0 || level > s.l())
      throw std::out_of_range("ball level " + std::to_string(level) + " outside [0, " + std::to_string(s.l()) + "]");
  }
  friend bool operator==(const BallSpec&, const BallSpec&) = default;
};

inline std::vector<CellIndex> ball_members(const BallSpec& ball, const GroupScheme& s) {
  ball.validate(s);
  const auto step = s.power(ball.level);
  std::vector<CellIndex> out;
  out.reserve(s.size() / step);
  for (std::uint32_t v = ball.center.value % step; v < s.size(); v += step) out.emplace_back(v);
  return out;
}

}  // namespace padicnn
