#ifndef REVHMC_GHMALA_SCHEME_HPP
#define REVHMC_GHMALA_SCHEME_HPP

#include <revhmc/core.hpp>
#include <revhmc/potentials.hpp>
#include <revhmc/schemes.hpp>

#include <memory>

namespace revhmc {

/// Nonreversible drift field gamma with its Jacobian, (jac)_{ij} = d gamma_i / d q_j.
class GammaField {
 public:
  virtual ~GammaField() = default;
  virtual Eigen::Index dim() const = 0;
  virtual Vector eval(const Vector& q) const = 0;
  virtual Matrix jac(const Vector& q) const = 0;
};

using GammaPtr = std::shared_ptr<const GammaField>;

/// gamma = J grad V with J antisymmetric, which satisfies
/// det(I - t grad gamma) = det(I + t grad gamma) by construction. The default
/// J is the 2D rotation mapping grad V = q to (q_2, -q_1).
class RotatedGradField final : public GammaField {
 public:
  RotatedGradField(PotentialPtr potential, Matrix j)
      : potential_(std::move(potential)), j_(std::move(j)) {
    if (j_.rows() != potential_->dim() || j_.cols() != potential_->dim())
      throw std::invalid_argument("RotatedGradField: J dimension mismatch");
    if (!j_.isApprox(-j_.transpose()))
      throw std::invalid_argument("RotatedGradField: J must be antisymmetric");
  }
  explicit RotatedGradField(PotentialPtr potential)
      : RotatedGradField(std::move(potential), rotation2d()) {}

  static Matrix rotation2d() {
    Matrix j(2, 2);
    j << 0.0, 1.0, -1.0, 0.0;
    return j;
  }

  Eigen::Index dim() const override { return potential_->dim(); }
  Vector eval(const Vector& q) const override { return j_ * potential_->grad(q); }
  Matrix jac(const Vector& q) const override { return j_ * potential_->hessian(q); }

 private:
  PotentialPtr potential_;
  Matrix j_;
};

/// Midpoint proposal for the nonreversible part dq = xi gamma(q) dt on the
/// augmented space (q, xi), k = 1:
///   q1 = q + dt xi gamma((q + q1)/2), xi1 = xi.
class GhmalaResidual final : public SchemeResidual {
 public:
  GhmalaResidual(GammaPtr gamma, double dt) : gamma_(std::move(gamma)), dt_(dt) {
    if (dt_ <= 0.0) throw std::invalid_argument("GhmalaResidual: dt must be > 0");
  }

  SchemeKind kind() const override { return SchemeKind::GHMALA; }
  Eigen::Index k() const override { return 1; }
  Eigen::Index dim() const override { return gamma_->dim() + 1; }
  double dt() const override { return dt_; }

  Vector residual(const Vector& x, const Chain& y) const override {
    const Eigen::Index m = gamma_->dim();
    const double xi = x[m];
    const Vector mid = 0.5 * (x.head(m) + y[0].head(m));
    Vector r(m + 1);
    r.head(m) = y[0].head(m) - x.head(m) - dt_ * xi * gamma_->eval(mid);
    r[m] = y[0][m] - xi;
    return r;
  }

  Matrix jac_y(const Vector& x, const Chain& y) const override {
    const Eigen::Index m = gamma_->dim();
    const double xi = x[m];
    const Vector mid = 0.5 * (x.head(m) + y[0].head(m));
    Matrix j = Matrix::Identity(m + 1, m + 1);
    j.topLeftCorner(m, m) -= 0.5 * dt_ * xi * gamma_->jac(mid);
    return j;
  }

  Matrix jac_x(const Vector& x, const Chain& y) const override {
    const Eigen::Index m = gamma_->dim();
    const double xi = x[m];
    const Vector mid = 0.5 * (x.head(m) + y[0].head(m));
    Matrix j = -Matrix::Identity(m + 1, m + 1);
    j.topLeftCorner(m, m) -= 0.5 * dt_ * xi * gamma_->jac(mid);
    j.topRightCorner(m, 1) = -dt_ * gamma_->eval(mid);
    return j;
  }

  Chain predict(const Vector& x) const override {
    const Eigen::Index m = gamma_->dim();
    Vector y = x;
    y.head(m) += dt_ * x[m] * gamma_->eval(x.head(m));
    return {std::move(y)};
  }

 private:
  GammaPtr gamma_;
  double dt_;
};

}  // namespace revhmc

#endif
