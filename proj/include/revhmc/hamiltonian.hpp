#ifndef REVHMC_HAMILTONIAN_HPP
#define REVHMC_HAMILTONIAN_HPP

#include <revhmc/core.hpp>
#include <revhmc/diffusion.hpp>
#include <revhmc/potentials.hpp>
#include <revhmc/rng.hpp>

#include <cmath>
#include <memory>

namespace revhmc {

/// Hamiltonian of the Riemannian-manifold HMC family,
///   H(q, p) = V(q) - 1/2 ln det D(q) + 1/2 p^T D(q) p,
/// with D a symmetric positive definite diffusion coefficient. The separable
/// case is recovered with a constant D. H is even in p by construction.
///
/// Gradients and Hessian blocks are assembled from the analytic derivatives
/// of V and D:
///   grad_p H = D(q) p,
///   (grad_q H)_i = d_i V - 1/2 Tr(D^{-1} d_i D) + 1/2 p^T (d_i D) p.
class HamiltonianModel {
 public:
  HamiltonianModel(PotentialPtr potential, DiffusionPtr diffusion)
      : potential_(std::move(potential)), diffusion_(std::move(diffusion)) {
    if (!potential_ || !diffusion_)
      throw std::invalid_argument("HamiltonianModel: null potential or diffusion");
    if (potential_->dim() != diffusion_->dim())
      throw std::invalid_argument("HamiltonianModel: potential and diffusion dimension mismatch");
  }

  Eigen::Index dim() const { return potential_->dim(); }
  const Potential& potential() const { return *potential_; }
  const DiffusionField& diffusion() const { return *diffusion_; }
  bool separable() const { return diffusion_->constant(); }

  /// Everything that depends on the position only, computed once and shared
  /// by the residual/Jacobian evaluations of the implicit sub-solves.
  struct PositionData {
    Matrix d;                   // D(q)
    std::vector<Matrix> dgrad;  // d_i D
    Vector grad_v;              // grad V(q)
    Vector half_trace;          // 1/2 Tr(D^{-1} d_i D)
    double log_det_d;           // ln det D(q)
    Eigen::LLT<Matrix> llt;     // Cholesky factor of D(q)
  };

  PositionData at(const Vector& q) const {
    PositionData pd;
    pd.d = diffusion_->eval(q);
    pd.dgrad = diffusion_->grad(q);
    pd.grad_v = potential_->grad(q);
    pd.llt.compute(pd.d);
    if (pd.llt.info() != Eigen::Success)
      throw std::runtime_error("HamiltonianModel: D(q) is not positive definite");
    // ln det D via the Cholesky factor, robust against det overflow
    const Matrix& l = pd.llt.matrixLLT();
    pd.log_det_d = 0.0;
    for (Eigen::Index i = 0; i < l.rows(); ++i) pd.log_det_d += 2.0 * std::log(l(i, i));
    const Eigen::Index m = dim();
    const Matrix dinv = pd.llt.solve(Matrix::Identity(m, m));
    pd.half_trace.resize(m);
    // Tr(D^{-1} M) = sum_ij (D^{-1})_ij M_ij for symmetric D^{-1}, M
    for (Eigen::Index i = 0; i < m; ++i)
      pd.half_trace[i] = 0.5 * dinv.cwiseProduct(pd.dgrad[i]).sum();
    return pd;
  }

  double energy(const PositionData& pd, const Vector& q, const Vector& p) const {
    return potential_->value(q) - 0.5 * pd.log_det_d + 0.5 * p.dot(pd.d * p);
  }
  double energy(const Vector& q, const Vector& p) const { return energy(at(q), q, p); }
  double energy(const PhasePoint& x) const { return energy(x.q, x.p); }

  Vector grad_p(const PositionData& pd, const Vector& p) const { return pd.d * p; }
  Vector grad_p(const Vector& q, const Vector& p) const { return diffusion_->eval(q) * p; }

  Vector grad_q(const PositionData& pd, const Vector& p) const {
    Vector g = pd.grad_v - pd.half_trace;
    for (Eigen::Index i = 0; i < dim(); ++i) g[i] += 0.5 * p.dot(pd.dgrad[i] * p);
    return g;
  }
  Vector grad_q(const Vector& q, const Vector& p) const { return grad_q(at(q), p); }

  // Hessian blocks, named after the gradient they differentiate:
  // hess_pq = d(grad_p H)/dq, hess_qp = d(grad_q H)/dp, etc.
  Matrix hess_pp(const PositionData& pd) const { return pd.d; }
  Matrix hess_pp(const Vector& q, const Vector&) const { return diffusion_->eval(q); }

  Matrix hess_pq(const PositionData& pd, const Vector& p) const {
    const Eigen::Index m = dim();
    Matrix h(m, m);
    for (Eigen::Index j = 0; j < m; ++j) h.col(j) = pd.dgrad[j] * p;
    return h;
  }
  Matrix hess_pq(const Vector& q, const Vector& p) const { return hess_pq(at(q), p); }

  Matrix hess_qp(const PositionData& pd, const Vector& p) const {
    return hess_pq(pd, p).transpose();
  }
  Matrix hess_qp(const Vector& q, const Vector& p) const { return hess_qp(at(q), p); }

  Matrix hess_qq(const Vector& q, const Vector& p) const {
    const Eigen::Index m = dim();
    const PositionData pd = at(q);
    const auto dhess = diffusion_->hessian(q);
    Matrix h = potential_->hessian(q);
    std::vector<Matrix> dinv_dgrad(m);
    for (Eigen::Index i = 0; i < m; ++i) dinv_dgrad[i] = pd.llt.solve(pd.dgrad[i]);
    for (Eigen::Index i = 0; i < m; ++i) {
      for (Eigen::Index j = 0; j < m; ++j) {
        const Matrix& dij = dhess[static_cast<std::size_t>(i * m + j)];
        h(i, j) += -0.5 * (pd.llt.solve(dij).trace() -
                           (dinv_dgrad[j] * dinv_dgrad[i]).trace());
        h(i, j) += 0.5 * p.dot(dij * p);
      }
    }
    return h;
  }

  /// Full phase-space Hessian of H at (q, p), blocks [qq, qp; pq, pp].
  Matrix hessian(const Vector& q, const Vector& p) const {
    const Eigen::Index m = dim();
    Matrix h(2 * m, 2 * m);
    const PositionData pd = at(q);
    h.topLeftCorner(m, m) = hess_qq(q, p);
    h.topRightCorner(m, m) = hess_qp(pd, p);
    h.bottomLeftCorner(m, m) = hess_pq(pd, p);
    h.bottomRightCorner(m, m) = hess_pp(pd);
    return h;
  }

 private:
  PotentialPtr potential_;
  DiffusionPtr diffusion_;
};

using ModelPtr = std::shared_ptr<const HamiltonianModel>;

inline ModelPtr rmhmc_hamiltonian(PotentialPtr potential, DiffusionPtr diffusion) {
  return std::make_shared<HamiltonianModel>(std::move(potential), std::move(diffusion));
}

/// Separable Hamiltonian with identity mass, H = V(q) + |p|^2 / 2.
inline ModelPtr separable_hamiltonian(PotentialPtr potential) {
  const Eigen::Index m = potential->dim();
  return std::make_shared<HamiltonianModel>(
      std::move(potential), std::make_shared<ConstantDiffusion>(ConstantDiffusion::identity(m)));
}

/// Draw p ~ N(0, D(q)^{-1}) by solving L^T p = G with L L^T = D(q).
inline Vector sample_momentum(const HamiltonianModel& model, const Vector& q, RngStream& rng) {
  const auto pd = model.at(q);
  const Vector g = rng.normal_vector(model.dim());
  return pd.llt.matrixU().solve(g);
}

inline Vector sample_momentum(const HamiltonianModel::PositionData& pd, RngStream& rng) {
  const Vector g = rng.normal_vector(pd.d.rows());
  return pd.llt.matrixU().solve(g);
}

}  // namespace revhmc

#endif
