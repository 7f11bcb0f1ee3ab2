#ifndef REVHMC_POTENTIALS_HPP
#define REVHMC_POTENTIALS_HPP

#include <revhmc/core.hpp>

#include <cmath>
#include <memory>

namespace revhmc {

/// Potential energy V with analytic first and second derivatives.
class Potential {
 public:
  virtual ~Potential() = default;
  virtual Eigen::Index dim() const = 0;
  virtual double value(const Vector& q) const = 0;
  virtual Vector grad(const Vector& q) const = 0;
  virtual Matrix hessian(const Vector& q) const = 0;
};

using PotentialPtr = std::shared_ptr<const Potential>;

class ZeroPotential final : public Potential {
 public:
  explicit ZeroPotential(Eigen::Index m) : m_(m) {}
  Eigen::Index dim() const override { return m_; }
  double value(const Vector&) const override { return 0.0; }
  Vector grad(const Vector& q) const override { return Vector::Zero(q.size()); }
  Matrix hessian(const Vector& q) const override { return Matrix::Zero(q.size(), q.size()); }

 private:
  Eigen::Index m_;
};

/// V(q) = 1/2 q^T A q with A symmetric positive definite.
class QuadraticPotential final : public Potential {
 public:
  explicit QuadraticPotential(Matrix a) : a_(std::move(a)) {
    if (a_.rows() != a_.cols()) throw std::invalid_argument("QuadraticPotential: A must be square");
    if (!a_.isApprox(a_.transpose()))
      throw std::invalid_argument("QuadraticPotential: A must be symmetric");
  }
  static QuadraticPotential isotropic(Eigen::Index m, double scale = 1.0) {
    return QuadraticPotential(scale * Matrix::Identity(m, m));
  }
  Eigen::Index dim() const override { return a_.rows(); }
  double value(const Vector& q) const override { return 0.5 * q.dot(a_ * q); }
  Vector grad(const Vector& q) const override { return a_ * q; }
  Matrix hessian(const Vector&) const override { return a_; }

 private:
  Matrix a_;
};

/// Confining double well on R: V(q) = q^2 - 1 + h/sqrt(2 pi s^2) exp(-q^2/(2 s^2)).
/// The Gaussian bump of width s and weight h creates a barrier at q = 0.
class DoubleWellPotential final : public Potential {
 public:
  DoubleWellPotential(double sigma, double h) : sigma2_(sigma * sigma), h_(h) {
    if (sigma <= 0.0) throw std::invalid_argument("DoubleWellPotential: sigma must be > 0");
    amp_ = h_ / std::sqrt(2.0 * M_PI * sigma2_);
  }
  Eigen::Index dim() const override { return 1; }
  double value(const Vector& q) const override {
    const double x = q[0];
    return x * x - 1.0 + amp_ * std::exp(-x * x / (2.0 * sigma2_));
  }
  Vector grad(const Vector& q) const override {
    const double x = q[0];
    Vector g(1);
    g[0] = 2.0 * x - amp_ * x / sigma2_ * std::exp(-x * x / (2.0 * sigma2_));
    return g;
  }
  Matrix hessian(const Vector& q) const override {
    const double x = q[0];
    const double e = std::exp(-x * x / (2.0 * sigma2_));
    Matrix h(1, 1);
    h(0, 0) = 2.0 + amp_ * e * (x * x / (sigma2_ * sigma2_) - 1.0 / sigma2_);
    return h;
  }

 private:
  double sigma2_;
  double h_;
  double amp_;
};

/// Annulus-shaped density on R^2: V(x, y) = c ((x^2 + y^2) - 1)^2.
class CirclePotential final : public Potential {
 public:
  explicit CirclePotential(double stiffness = 100.0) : c_(stiffness) {}
  Eigen::Index dim() const override { return 2; }
  double value(const Vector& q) const override {
    const double s = q.squaredNorm() - 1.0;
    return c_ * s * s;
  }
  Vector grad(const Vector& q) const override {
    const double s = q.squaredNorm() - 1.0;
    return 4.0 * c_ * s * q;
  }
  Matrix hessian(const Vector& q) const override {
    const double s = q.squaredNorm() - 1.0;
    return 4.0 * c_ * (s * Matrix::Identity(2, 2) + 2.0 * q * q.transpose());
  }

 private:
  double c_;
};

}  // namespace revhmc

#endif
