#ifndef REVHMC_SCHEMES_HPP
#define REVHMC_SCHEMES_HPP

#include <revhmc/core.hpp>
#include <revhmc/hamiltonian.hpp>

#include <memory>

namespace revhmc {

enum class SchemeKind { IMR, EulerA, EulerB, GSV, GHMALA };

/// Residual map Phi_dt of an implicit one-step scheme: a chain (y_1, .., y_k)
/// is one integrator step from x exactly when residual(x, y) = 0. Jacobians
/// are assembled analytically from the model's Hessian blocks.
class SchemeResidual {
 public:
  virtual ~SchemeResidual() = default;

  virtual SchemeKind kind() const = 0;
  virtual Eigen::Index k() const = 0;
  virtual Eigen::Index dim() const = 0;  // state dimension d
  virtual double dt() const = 0;

  virtual Vector residual(const Vector& x, const Chain& y) const = 0;
  virtual Matrix jac_y(const Vector& x, const Chain& y) const = 0;
  virtual Matrix jac_x(const Vector& x, const Chain& y) const = 0;

  /// Residual and y-Jacobian together; overridden where sharing work pays.
  virtual void eval(const Vector& x, const Chain& y, Vector& r, Matrix& jy) const {
    r = residual(x, y);
    jy = jac_y(x, y);
  }

  /// Explicit-Euler predictor chain ES_dt(x) used to start implicit solves.
  virtual Chain predict(const Vector& x) const = 0;
};

using SchemePtr = std::shared_ptr<const SchemeResidual>;

namespace detail {

/// One explicit Euler step of the Hamiltonian dynamics with time step h.
inline Vector explicit_euler(const HamiltonianModel& model, double h, const Vector& x) {
  const Eigen::Index m = model.dim();
  const Vector q = x.head(m), p = x.tail(m);
  const auto pd = model.at(q);
  Vector out(2 * m);
  out.head(m) = q + h * model.grad_p(pd, p);
  out.tail(m) = p - h * model.grad_q(pd, p);
  return out;
}

}  // namespace detail

/// Implicit Midpoint Rule, k = 1:
///   q1 = q + dt grad_p H(mid), p1 = p - dt grad_q H(mid),
/// with mid the phase-space midpoint of x and y1.
class ImrResidual final : public SchemeResidual {
 public:
  ImrResidual(ModelPtr model, double dt) : model_(std::move(model)), dt_(dt) {
    if (dt_ <= 0.0) throw std::invalid_argument("ImrResidual: dt must be > 0");
  }

  SchemeKind kind() const override { return SchemeKind::IMR; }
  Eigen::Index k() const override { return 1; }
  Eigen::Index dim() const override { return 2 * model_->dim(); }
  double dt() const override { return dt_; }
  const HamiltonianModel& model() const { return *model_; }

  Vector residual(const Vector& x, const Chain& y) const override {
    const Eigen::Index m = model_->dim();
    const Vector mid_q = 0.5 * (x.head(m) + y[0].head(m));
    const Vector mid_p = 0.5 * (x.tail(m) + y[0].tail(m));
    const auto pd = model_->at(mid_q);
    Vector r(2 * m);
    r.head(m) = y[0].head(m) - x.head(m) - dt_ * model_->grad_p(pd, mid_p);
    r.tail(m) = y[0].tail(m) - x.tail(m) + dt_ * model_->grad_q(pd, mid_p);
    return r;
  }

  Matrix jac_y(const Vector& x, const Chain& y) const override {
    return jac(x, y, +1.0);
  }
  Matrix jac_x(const Vector& x, const Chain& y) const override {
    return jac(x, y, -1.0);
  }

  Chain predict(const Vector& x) const override {
    return {detail::explicit_euler(*model_, dt_, x)};
  }

 private:
  // d Phi / dy = I + (dt/2) K(mid), d Phi / dx = -I + (dt/2) K(mid) with
  // K the phase-space Hessian of H conjugated by -J.
  Matrix jac(const Vector& x, const Chain& y, double sign) const {
    const Eigen::Index m = model_->dim();
    const Vector mid_q = 0.5 * (x.head(m) + y[0].head(m));
    const Vector mid_p = 0.5 * (x.tail(m) + y[0].tail(m));
    const auto pd = model_->at(mid_q);
    const double h = 0.5 * dt_;
    Matrix j(2 * m, 2 * m);
    j.topLeftCorner(m, m) = sign * Matrix::Identity(m, m) - h * model_->hess_pq(pd, mid_p);
    j.topRightCorner(m, m) = -h * model_->hess_pp(pd);
    j.bottomLeftCorner(m, m) = h * model_->hess_qq(mid_q, mid_p);
    j.bottomRightCorner(m, m) = sign * Matrix::Identity(m, m) + h * model_->hess_qp(pd, mid_p);
    return j;
  }

  ModelPtr model_;
  double dt_;
};

/// Symplectic Euler B, k = 1, implicit in the new momentum:
///   p1 = p - dt grad_q H(q, p1), q1 = q + dt grad_p H(q, p1).
class EulerBResidual final : public SchemeResidual {
 public:
  EulerBResidual(ModelPtr model, double dt) : model_(std::move(model)), dt_(dt) {
    if (dt_ <= 0.0) throw std::invalid_argument("EulerBResidual: dt must be > 0");
  }

  SchemeKind kind() const override { return SchemeKind::EulerB; }
  Eigen::Index k() const override { return 1; }
  Eigen::Index dim() const override { return 2 * model_->dim(); }
  double dt() const override { return dt_; }

  Vector residual(const Vector& x, const Chain& y) const override {
    const Eigen::Index m = model_->dim();
    const Vector p1 = y[0].tail(m);
    const auto pd = model_->at(x.head(m));
    Vector r(2 * m);
    r.head(m) = y[0].head(m) - x.head(m) - dt_ * model_->grad_p(pd, p1);
    r.tail(m) = p1 - x.tail(m) + dt_ * model_->grad_q(pd, p1);
    return r;
  }

  Matrix jac_y(const Vector& x, const Chain& y) const override {
    const Eigen::Index m = model_->dim();
    const auto pd = model_->at(x.head(m));
    const Vector p1 = y[0].tail(m);
    Matrix j = Matrix::Identity(2 * m, 2 * m);
    j.topRightCorner(m, m) = -dt_ * model_->hess_pp(pd);
    j.bottomRightCorner(m, m) += dt_ * model_->hess_qp(pd, p1);
    return j;
  }

  Matrix jac_x(const Vector& x, const Chain& y) const override {
    const Eigen::Index m = model_->dim();
    const Vector q = x.head(m);
    const Vector p1 = y[0].tail(m);
    const auto pd = model_->at(q);
    Matrix j = -Matrix::Identity(2 * m, 2 * m);
    j.topLeftCorner(m, m) -= dt_ * model_->hess_pq(pd, p1);
    j.bottomLeftCorner(m, m) = dt_ * model_->hess_qq(q, p1);
    return j;
  }

  Chain predict(const Vector& x) const override {
    return {detail::explicit_euler(*model_, dt_, x)};
  }

 private:
  ModelPtr model_;
  double dt_;
};

/// Symplectic Euler A, k = 1, implicit in the new position:
///   q1 = q + dt grad_p H(q1, p), p1 = p - dt grad_q H(q1, p).
class EulerAResidual final : public SchemeResidual {
 public:
  EulerAResidual(ModelPtr model, double dt) : model_(std::move(model)), dt_(dt) {
    if (dt_ <= 0.0) throw std::invalid_argument("EulerAResidual: dt must be > 0");
  }

  SchemeKind kind() const override { return SchemeKind::EulerA; }
  Eigen::Index k() const override { return 1; }
  Eigen::Index dim() const override { return 2 * model_->dim(); }
  double dt() const override { return dt_; }

  Vector residual(const Vector& x, const Chain& y) const override {
    const Eigen::Index m = model_->dim();
    const Vector q1 = y[0].head(m);
    const Vector p = x.tail(m);
    const auto pd = model_->at(q1);
    Vector r(2 * m);
    r.head(m) = q1 - x.head(m) - dt_ * model_->grad_p(pd, p);
    r.tail(m) = y[0].tail(m) - p + dt_ * model_->grad_q(pd, p);
    return r;
  }

  Matrix jac_y(const Vector& x, const Chain& y) const override {
    const Eigen::Index m = model_->dim();
    const Vector q1 = y[0].head(m);
    const Vector p = x.tail(m);
    const auto pd = model_->at(q1);
    Matrix j = Matrix::Identity(2 * m, 2 * m);
    j.topLeftCorner(m, m) -= dt_ * model_->hess_pq(pd, p);
    j.bottomLeftCorner(m, m) = dt_ * model_->hess_qq(q1, p);
    return j;
  }

  Matrix jac_x(const Vector& x, const Chain& y) const override {
    const Eigen::Index m = model_->dim();
    const Vector q1 = y[0].head(m);
    const Vector p = x.tail(m);
    const auto pd = model_->at(q1);
    Matrix j = -Matrix::Identity(2 * m, 2 * m);
    j.topRightCorner(m, m) = -dt_ * model_->hess_pp(pd);
    j.bottomRightCorner(m, m) += dt_ * model_->hess_qp(pd, p);
    return j;
  }

  Chain predict(const Vector& x) const override {
    return {detail::explicit_euler(*model_, dt_, x)};
  }

 private:
  ModelPtr model_;
  double dt_;
};

/// Generalized Stoermer-Verlet, k = 2: a half step of Euler B followed by a
/// half step of Euler A, stacked as one residual so that the chain
/// (x, y1, y2) carries the intermediate configuration explicitly. Reduces to
/// the explicit Stoermer-Verlet scheme for separable Hamiltonians.
class GsvResidual final : public SchemeResidual {
 public:
  GsvResidual(ModelPtr model, double dt)
      : model_(std::move(model)),
        dt_(dt),
        euler_b_(model_, 0.5 * dt),
        euler_a_(model_, 0.5 * dt) {}

  SchemeKind kind() const override { return SchemeKind::GSV; }
  Eigen::Index k() const override { return 2; }
  Eigen::Index dim() const override { return 2 * model_->dim(); }
  double dt() const override { return dt_; }
  const HamiltonianModel& model() const { return *model_; }
  ModelPtr model_ptr() const { return model_; }

  Vector residual(const Vector& x, const Chain& y) const override {
    const Eigen::Index d = dim();
    Vector r(2 * d);
    r.head(d) = euler_b_.residual(x, {y[0]});
    r.tail(d) = euler_a_.residual(y[0], {y[1]});
    return r;
  }

  /// Block lower-triangular: diag(grad_y Phi^B(x, y1), grad_y Phi^A(y1, y2))
  /// with the coupling block grad_x Phi^A(y1, y2) below the diagonal.
  Matrix jac_y(const Vector& x, const Chain& y) const override {
    const Eigen::Index d = dim();
    Matrix j = Matrix::Zero(2 * d, 2 * d);
    j.topLeftCorner(d, d) = euler_b_.jac_y(x, {y[0]});
    j.bottomLeftCorner(d, d) = euler_a_.jac_x(y[0], {y[1]});
    j.bottomRightCorner(d, d) = euler_a_.jac_y(y[0], {y[1]});
    return j;
  }

  Matrix jac_x(const Vector& x, const Chain& y) const override {
    const Eigen::Index d = dim();
    Matrix j = Matrix::Zero(2 * d, d);
    j.topRows(d) = euler_b_.jac_x(x, {y[0]});
    return j;
  }

  Chain predict(const Vector& x) const override {
    Vector y1 = detail::explicit_euler(*model_, 0.5 * dt_, x);
    Vector y2 = detail::explicit_euler(*model_, 0.5 * dt_, y1);
    return {std::move(y1), std::move(y2)};
  }

  const EulerBResidual& euler_b() const { return euler_b_; }
  const EulerAResidual& euler_a() const { return euler_a_; }

 private:
  ModelPtr model_;
  double dt_;
  EulerBResidual euler_b_;
  EulerAResidual euler_a_;
};

}  // namespace revhmc

#endif
