#ifndef REVHMC_CORE_HPP
#define REVHMC_CORE_HPP

#include <Eigen/Dense>

#include <stdexcept>
#include <string>
#include <vector>

namespace revhmc {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Solution chain (y_1, ..., y_k) of a numerical scheme, each y_i a full
/// state of dimension d.
using Chain = std::vector<Vector>;

inline bool all_finite(const Vector& v) { return v.allFinite(); }

inline bool all_finite(const Chain& chain) {
  for (const auto& y : chain)
    if (!y.allFinite()) return false;
  return true;
}

/// Position-momentum pair (q, p) in R^m x R^m.
struct PhasePoint {
  Vector q;
  Vector p;

  PhasePoint() = default;

  PhasePoint(Vector q_, Vector p_) : q(std::move(q_)), p(std::move(p_)) {
    if (q.size() != p.size())
      throw std::invalid_argument("PhasePoint: q and p must have the same dimension");
    if (q.size() < 1) throw std::invalid_argument("PhasePoint: dimension must be >= 1");
    if (!q.allFinite() || !p.allFinite())
      throw std::invalid_argument("PhasePoint: components must be finite");
  }

  Eigen::Index dim() const { return q.size(); }

  /// Flattened state (q, p) in R^{2m}, the layout used by schemes and solvers.
  Vector flat() const {
    Vector x(2 * q.size());
    x << q, p;
    return x;
  }

  static PhasePoint from_flat(const Vector& x) {
    const Eigen::Index m = x.size() / 2;
    if (2 * m != x.size())
      throw std::invalid_argument("PhasePoint::from_flat: odd dimension");
    return PhasePoint(x.head(m), x.tail(m));
  }
};

inline Vector stack_chain(const Chain& chain) {
  if (chain.empty()) return Vector();
  const Eigen::Index d = chain.front().size();
  Vector y(d * static_cast<Eigen::Index>(chain.size()));
  for (std::size_t i = 0; i < chain.size(); ++i) y.segment(i * d, d) = chain[i];
  return y;
}

inline Chain split_chain(const Vector& y, Eigen::Index d) {
  if (y.size() % d != 0)
    throw std::invalid_argument("split_chain: size not a multiple of d");
  Chain chain(static_cast<std::size_t>(y.size() / d));
  for (std::size_t i = 0; i < chain.size(); ++i) chain[i] = y.segment(i * d, d);
  return chain;
}

}  // namespace revhmc

#endif
