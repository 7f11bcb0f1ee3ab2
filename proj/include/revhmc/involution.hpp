#ifndef REVHMC_INVOLUTION_HPP
#define REVHMC_INVOLUTION_HPP

#include <revhmc/core.hpp>

namespace revhmc {

/// Involution S acting on states by negating the trailing components:
/// momentum reversal S(q, p) = (q, -p) on phase space, direction reversal
/// S(q, xi) = (q, -xi) on the augmented space. The Jacobian is diagonal with
/// entries +-1, so S.S = id and |det grad S| = 1 hold exactly.
class InvolutionMap {
 public:
  enum class Kind { MomentumReversal, DirectionReversal };

  static InvolutionMap momentum_reversal(Eigen::Index m) {
    return InvolutionMap(Kind::MomentumReversal, 2 * m, m);
  }
  static InvolutionMap direction_reversal(Eigen::Index m) {
    return InvolutionMap(Kind::DirectionReversal, m + 1, m);
  }

  Kind kind() const { return kind_; }
  Eigen::Index dim() const { return dim_; }
  /// Components [0, flip_start) are untouched ("positions"); the rest flip sign.
  Eigen::Index flip_start() const { return flip_start_; }

  Vector apply(const Vector& x) const {
    Vector y = x;
    y.tail(dim_ - flip_start_) = -y.tail(dim_ - flip_start_);
    return y;
  }

  /// Apply S to every element of a chain and reverse its order, the
  /// transformation under which a reversible scheme maps solutions to
  /// solutions.
  Chain apply_reversed(const Chain& chain) const {
    Chain out(chain.size());
    for (std::size_t i = 0; i < chain.size(); ++i)
      out[i] = apply(chain[chain.size() - 1 - i]);
    return out;
  }

 private:
  InvolutionMap(Kind kind, Eigen::Index dim, Eigen::Index flip_start)
      : kind_(kind), dim_(dim), flip_start_(flip_start) {}

  Kind kind_;
  Eigen::Index dim_;
  Eigen::Index flip_start_;
};

}  // namespace revhmc

#endif
