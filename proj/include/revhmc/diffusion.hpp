#ifndef REVHMC_DIFFUSION_HPP
#define REVHMC_DIFFUSION_HPP

#include <revhmc/core.hpp>

#include <cmath>
#include <memory>
#include <optional>
#include <vector>

namespace revhmc {

/// Optional declared spectral bounds 0 < a <= b with a I <= D(q) <= b I.
struct SpectralBounds {
  double lower;
  double upper;
};

/// Position-dependent diffusion coefficient D(q), a symmetric positive
/// definite m x m matrix field with analytic derivatives.
///
/// grad(q)[i] is dD/dq_i; hessian(q)[i*m + j] is d^2 D / dq_i dq_j (needed to
/// assemble the q-q Hessian block of the RMHMC Hamiltonian for implicit
/// solvers). divergence(q)_i = sum_j d_{q_j} D_{i,j}.
class DiffusionField {
 public:
  virtual ~DiffusionField() = default;
  virtual Eigen::Index dim() const = 0;
  virtual Matrix eval(const Vector& q) const = 0;
  virtual std::vector<Matrix> grad(const Vector& q) const = 0;
  virtual std::vector<Matrix> hessian(const Vector& q) const = 0;
  virtual Vector divergence(const Vector& q) const = 0;
  virtual std::optional<SpectralBounds> bounds() const { return std::nullopt; }
  /// True when D(q) is diagonal for every q (enables the exact OU update).
  virtual bool diagonal() const { return false; }
  /// True when D does not depend on q (the separable case).
  virtual bool constant() const { return false; }
};

using DiffusionPtr = std::shared_ptr<const DiffusionField>;

class ConstantDiffusion final : public DiffusionField {
 public:
  explicit ConstantDiffusion(Matrix d) : d_(std::move(d)) {
    if (d_.rows() != d_.cols()) throw std::invalid_argument("ConstantDiffusion: D must be square");
    if (!d_.isApprox(d_.transpose()))
      throw std::invalid_argument("ConstantDiffusion: D must be symmetric");
  }
  static ConstantDiffusion identity(Eigen::Index m) {
    return ConstantDiffusion(Matrix::Identity(m, m));
  }
  Eigen::Index dim() const override { return d_.rows(); }
  Matrix eval(const Vector&) const override { return d_; }
  std::vector<Matrix> grad(const Vector&) const override {
    return std::vector<Matrix>(d_.rows(), Matrix::Zero(d_.rows(), d_.cols()));
  }
  std::vector<Matrix> hessian(const Vector&) const override {
    return std::vector<Matrix>(d_.rows() * d_.rows(), Matrix::Zero(d_.rows(), d_.cols()));
  }
  Vector divergence(const Vector&) const override { return Vector::Zero(d_.rows()); }
  std::optional<SpectralBounds> bounds() const override {
    Eigen::SelfAdjointEigenSolver<Matrix> es(d_);
    return SpectralBounds{es.eigenvalues().minCoeff(), es.eigenvalues().maxCoeff()};
  }
  bool diagonal() const override { return d_.isDiagonal(); }
  bool constant() const override { return true; }

 private:
  Matrix d_;
};

/// One-dimensional field D(q) = 1 + q^2.
class OnePlusQSquaredDiffusion final : public DiffusionField {
 public:
  Eigen::Index dim() const override { return 1; }
  Matrix eval(const Vector& q) const override {
    Matrix d(1, 1);
    d(0, 0) = 1.0 + q[0] * q[0];
    return d;
  }
  std::vector<Matrix> grad(const Vector& q) const override {
    Matrix g(1, 1);
    g(0, 0) = 2.0 * q[0];
    return {g};
  }
  std::vector<Matrix> hessian(const Vector&) const override {
    Matrix h(1, 1);
    h(0, 0) = 2.0;
    return {h};
  }
  Vector divergence(const Vector& q) const override {
    Vector v(1);
    v[0] = 2.0 * q[0];
    return v;
  }
  bool diagonal() const override { return true; }
};

/// One-dimensional field D(q) = ((1.5 + cos(pi q)) / 2)^2 >= 1/16.
class CosineWellDiffusion final : public DiffusionField {
 public:
  Eigen::Index dim() const override { return 1; }
  Matrix eval(const Vector& q) const override {
    const double s = base(q[0]);
    Matrix d(1, 1);
    d(0, 0) = s * s;
    return d;
  }
  std::vector<Matrix> grad(const Vector& q) const override {
    Matrix g(1, 1);
    g(0, 0) = 2.0 * base(q[0]) * dbase(q[0]);
    return {g};
  }
  std::vector<Matrix> hessian(const Vector& q) const override {
    const double s = base(q[0]), s1 = dbase(q[0]);
    const double s2 = -0.5 * M_PI * M_PI * std::cos(M_PI * q[0]);
    Matrix h(1, 1);
    h(0, 0) = 2.0 * (s1 * s1 + s * s2);
    return {h};
  }
  Vector divergence(const Vector& q) const override {
    Vector v(1);
    v[0] = 2.0 * base(q[0]) * dbase(q[0]);
    return v;
  }
  std::optional<SpectralBounds> bounds() const override {
    return SpectralBounds{1.0 / 16.0, 25.0 / 16.0};
  }
  bool diagonal() const override { return true; }

 private:
  static double base(double x) { return 0.5 * (1.5 + std::cos(M_PI * x)); }
  static double dbase(double x) { return -0.5 * M_PI * std::sin(M_PI * x); }
};

/// Isotropic field on R^2: D = (1 + eps) I, the separable reference for the
/// annulus experiment, normalized to share the anisotropic field's spectral
/// radius 1 + eps.
class IsotropicDiffusion final : public DiffusionField {
 public:
  explicit IsotropicDiffusion(double eps) : eps_(eps) {
    if (eps <= 0.0) throw std::invalid_argument("IsotropicDiffusion: eps must be > 0");
  }
  Eigen::Index dim() const override { return 2; }
  Matrix eval(const Vector&) const override { return (1.0 + eps_) * Matrix::Identity(2, 2); }
  std::vector<Matrix> grad(const Vector&) const override {
    return std::vector<Matrix>(2, Matrix::Zero(2, 2));
  }
  std::vector<Matrix> hessian(const Vector&) const override {
    return std::vector<Matrix>(4, Matrix::Zero(2, 2));
  }
  Vector divergence(const Vector&) const override { return Vector::Zero(2); }
  std::optional<SpectralBounds> bounds() const override {
    return SpectralBounds{1.0 + eps_, 1.0 + eps_};
  }
  bool diagonal() const override { return true; }
  bool constant() const override { return true; }
  double eps() const { return eps_; }

 private:
  double eps_;
};

/// Anisotropic field on R^2: D = eps I + t t^T with t the unit tangent to the
/// circle through q. Equivalently D = (1 + eps) I - q q^T / |q|^2, which is
/// the form used for derivatives. Undefined at the origin.
class AnisotropicDiffusion final : public DiffusionField {
 public:
  explicit AnisotropicDiffusion(double eps) : eps_(eps) {
    if (eps <= 0.0) throw std::invalid_argument("AnisotropicDiffusion: eps must be > 0");
  }
  Eigen::Index dim() const override { return 2; }

  Matrix eval(const Vector& q) const override {
    const double r2 = check_origin(q);
    const double x = q[0], y = q[1];
    Matrix d(2, 2);
    d(0, 0) = 1.0 + eps_ - x * x / r2;
    d(0, 1) = d(1, 0) = -x * y / r2;
    d(1, 1) = 1.0 + eps_ - y * y / r2;
    return d;
  }
  std::vector<Matrix> grad(const Vector& q) const override {
    // entries of d_k [-(e_k q^T + q e_k^T)/r^2 + 2 q_k q q^T / r^4]
    const double r2 = check_origin(q);
    const double r4 = r2 * r2;
    const double x = q[0], y = q[1];
    std::vector<Matrix> g(2, Matrix(2, 2));
    g[0](0, 0) = -2.0 * x * y * y / r4;
    g[0](0, 1) = g[0](1, 0) = y * (x * x - y * y) / r4;
    g[0](1, 1) = 2.0 * x * y * y / r4;
    g[1](0, 0) = 2.0 * x * x * y / r4;
    g[1](0, 1) = g[1](1, 0) = x * (y * y - x * x) / r4;
    g[1](1, 1) = -2.0 * x * x * y / r4;
    return g;
  }
  std::vector<Matrix> hessian(const Vector& q) const override {
    const double r2 = check_origin(q);
    const double r4 = r2 * r2;
    const Matrix qq = q * q.transpose();
    std::vector<Matrix> h(4);
    for (Eigen::Index k = 0; k < 2; ++k) {
      Vector ek = Vector::Zero(2);
      ek[k] = 1.0;
      for (Eigen::Index l = 0; l < 2; ++l) {
        Vector el = Vector::Zero(2);
        el[l] = 1.0;
        Matrix m = -(ek * el.transpose() + el * ek.transpose()) / r2;
        m += 2.0 * q[l] * (ek * q.transpose() + q * ek.transpose()) / r4;
        m += 2.0 * ((k == l ? 1.0 : 0.0) * qq +
                    q[k] * (el * q.transpose() + q * el.transpose())) / r4;
        m += -8.0 * q[k] * q[l] * qq / (r4 * r2);
        h[k * 2 + l] = m;
      }
    }
    return h;
  }
  Vector divergence(const Vector& q) const override {
    const double r2 = check_origin(q);
    return -q / r2;
  }
  std::optional<SpectralBounds> bounds() const override {
    return SpectralBounds{eps_, 1.0 + eps_};
  }
  double eps() const { return eps_; }

 private:
  double check_origin(const Vector& q) const {
    const double r2 = q.squaredNorm();
    if (r2 == 0.0)
      throw std::domain_error("AnisotropicDiffusion: undefined at the origin");
    return r2;
  }
  double eps_;
};

}  // namespace revhmc

#endif
