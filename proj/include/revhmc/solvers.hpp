#ifndef REVHMC_SOLVERS_HPP
#define REVHMC_SOLVERS_HPP

#include <revhmc/core.hpp>
#include <revhmc/schemes.hpp>

#include <cmath>
#include <functional>
#include <limits>
#include <string>

namespace revhmc {

/// Guard against relative criteria degenerating at the origin.
inline constexpr double kNormFloor = 1e-300;

enum class SolveBackend { Newton, NewtonSequential, FixedPoint };

inline std::string to_string(SolveBackend b) {
  switch (b) {
    case SolveBackend::Newton: return "newton";
    case SolveBackend::NewtonSequential: return "newton_sequential";
    case SolveBackend::FixedPoint: return "fixed_point";
  }
  return "?";
}

inline SolveBackend backend_from_string(const std::string& s) {
  if (s == "newton") return SolveBackend::Newton;
  if (s == "newton_sequential") return SolveBackend::NewtonSequential;
  if (s == "fixed_point") return SolveBackend::FixedPoint;
  throw std::invalid_argument("unknown solver backend: " + s);
}

struct SolverConfig {
  double eta_newton = 1e-12;        // relative residual tolerance
  double eta_newton_tilde = 1e-12;  // relative step tolerance
  int n_newton = 100;               // max Newton iterations
  // Singular-value cutoff factor: a matrix passes the invertibility gate when
  // all n singular values exceed n * rank_rel_threshold * sigma_max.
  double rank_rel_threshold = std::numeric_limits<double>::epsilon();
  int fp_max_iter = 200;
  double fp_tol = 1e-14;
  // Every Converged result must satisfy ||Phi(x, chain)|| <=
  // certificate_tol * max(1, ||x||), whichever stopping criterion fired.
  double certificate_tol = 1e-8;
  SolveBackend backend = SolveBackend::Newton;

  void validate() const {
    if (eta_newton <= 0.0 || eta_newton_tilde <= 0.0 || rank_rel_threshold <= 0.0 ||
        fp_tol <= 0.0 || certificate_tol <= 0.0)
      throw std::invalid_argument("SolverConfig: tolerances must be > 0");
    if (n_newton < 1 || fp_max_iter < 1)
      throw std::invalid_argument("SolverConfig: iteration counts must be >= 1");
  }
};

enum class SolveStatus { Converged, JacobianSingular, MaxIterations, Diverged };

inline std::string to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::Converged: return "converged";
    case SolveStatus::JacobianSingular: return "jacobian_singular";
    case SolveStatus::MaxIterations: return "max_iterations";
    case SolveStatus::Diverged: return "diverged";
  }
  return "?";
}

struct SolveResult {
  SolveStatus status = SolveStatus::MaxIterations;
  Chain chain;  // nonempty only when Converged
  int iterations = 0;
  double final_residual_norm = std::numeric_limits<double>::quiet_NaN();

  bool converged() const { return status == SolveStatus::Converged; }
};

namespace detail {

inline bool rank_deficient(const Matrix& j, double rel_threshold) {
  double sigma_max, sigma_min;
  const Eigen::Index n = j.rows();
  if (n == 1) {
    sigma_max = sigma_min = std::abs(j(0, 0));
  } else if (n == 2) {
    // closed-form singular values from the eigenvalues of J^T J
    const double t = j(0, 0) * j(0, 0) + j(0, 1) * j(0, 1) + j(1, 0) * j(1, 0) +
                     j(1, 1) * j(1, 1);
    const double det = j(0, 0) * j(1, 1) - j(0, 1) * j(1, 0);
    const double s = std::sqrt(std::max(0.0, t * t - 4.0 * det * det));
    sigma_max = std::sqrt(0.5 * (t + s));
    sigma_min = std::sqrt(std::max(0.0, 0.5 * (t - s)));
  } else {
    Eigen::JacobiSVD<Matrix> svd(j);
    sigma_max = svd.singularValues()(0);
    sigma_min = svd.singularValues()(n - 1);
  }
  const double cutoff = static_cast<double>(n) * rel_threshold * sigma_max;
  return !(sigma_min > cutoff);
}

struct RawResult {
  SolveStatus status;
  Vector y;
  int iterations;
  double residual_norm;
};

/// Newton iteration on F(y) = 0 with an SVD invertibility gate and the two
/// relative stopping criteria (residual against the predictor's residual,
/// step against the current iterate).
template <class ResidualFn, class JacFn>
RawResult newton_raw(const ResidualFn& residual_fn, const JacFn& jac_fn, const Vector& y0,
                     const SolverConfig& cfg) {
  Vector y = y0;
  Vector r = residual_fn(y);
  if (!r.allFinite()) return {SolveStatus::Diverged, y, 0, r.norm()};
  const double ref = r.norm();

  for (int i = 0; i < cfg.n_newton; ++i) {
    const Matrix j = jac_fn(y);
    if (!j.allFinite()) return {SolveStatus::Diverged, y, i, r.norm()};
    if (rank_deficient(j, cfg.rank_rel_threshold))
      return {SolveStatus::JacobianSingular, y, i, r.norm()};
    const Vector step = Eigen::PartialPivLU<Matrix>(j).solve(-r);
    const Vector y_next = y + step;
    if (!y_next.allFinite()) return {SolveStatus::Diverged, y, i + 1, r.norm()};
    const Vector r_next = residual_fn(y_next);
    if (!r_next.allFinite()) return {SolveStatus::Diverged, y_next, i + 1, r_next.norm()};

    const double rnorm = r_next.norm();
    // ref == 0 means the predictor is already an exact root; the relative
    // residual criterion is then satisfied vacuously.
    if (rnorm < cfg.eta_newton * ref || (ref == 0.0 && rnorm == 0.0))
      return {SolveStatus::Converged, y_next, i + 1, rnorm};
    if (step.norm() < cfg.eta_newton_tilde * std::max(y.norm(), kNormFloor))
      return {SolveStatus::Converged, y_next, i + 1, rnorm};
    y = y_next;
    r = r_next;
  }
  return {SolveStatus::MaxIterations, y, cfg.n_newton, r.norm()};
}

inline double certificate_scale(const Vector& x) { return std::max(1.0, x.norm()); }

}  // namespace detail

/// Practical Newton on the full chain unknown y = (y_1, .., y_k) from the
/// predictor chain y0. Statuses are the error channel; converged results
/// carry the solution chain and are re-checked against the residual
/// certificate.
inline SolveResult newton_solve(const SchemeResidual& scheme, const Vector& x, const Chain& y0,
                                const SolverConfig& cfg) {
  const Eigen::Index d = scheme.dim();
  auto residual_fn = [&](const Vector& y) { return scheme.residual(x, split_chain(y, d)); };
  auto jac_fn = [&](const Vector& y) { return scheme.jac_y(x, split_chain(y, d)); };
  const auto raw = detail::newton_raw(residual_fn, jac_fn, stack_chain(y0), cfg);

  SolveResult out;
  out.status = raw.status;
  out.iterations = raw.iterations;
  out.final_residual_norm = raw.residual_norm;
  if (raw.status == SolveStatus::Converged) {
    if (raw.residual_norm <= cfg.certificate_tol * detail::certificate_scale(x))
      out.chain = split_chain(raw.y, d);
    else
      out.status = SolveStatus::MaxIterations;
  }
  return out;
}

/// Sequential Newton for GSV: fully solve the Euler-B block (an m-dimensional
/// problem in the half-step momentum), then the Euler-A block (m-dimensional
/// in the new position). Everything depending only on the fixed position of
/// each block is computed once per sub-solve.
inline SolveResult newton_solve_gsv_sequential(const HamiltonianModel& model, double dt,
                                               const Vector& x, const SolverConfig& cfg) {
  const Eigen::Index m = model.dim();
  const double h = 0.5 * dt;
  const Vector q = x.head(m), p = x.tail(m);
  SolveResult out;

  // Euler B: p_half = p - h grad_q H(q, p_half)
  const auto pd_q = model.at(q);
  auto residual_b = [&](const Vector& ph) -> Vector {
    return ph - p + h * model.grad_q(pd_q, ph);
  };
  auto jac_b = [&](const Vector& ph) -> Matrix {
    return Matrix::Identity(m, m) + h * model.hess_qp(pd_q, ph);
  };
  const Vector ph0 = p - h * model.grad_q(pd_q, p);
  const auto res_b = detail::newton_raw(residual_b, jac_b, ph0, cfg);
  out.iterations = res_b.iterations;
  out.final_residual_norm = res_b.residual_norm;
  out.status = res_b.status;
  if (res_b.status != SolveStatus::Converged) return out;

  const Vector p_half = res_b.y;
  const Vector q1 = q + h * model.grad_p(pd_q, p_half);

  // Euler A: q2 = q1 + h grad_p H(q2, p_half)
  const DiffusionField& diff = model.diffusion();
  auto residual_a = [&](const Vector& q2) -> Vector {
    return q2 - q1 - h * (diff.eval(q2) * p_half);
  };
  auto jac_a = [&](const Vector& q2) -> Matrix {
    const auto dg = diff.grad(q2);
    Matrix j = Matrix::Identity(m, m);
    for (Eigen::Index col = 0; col < m; ++col) j.col(col) -= h * (dg[col] * p_half);
    return j;
  };
  const Vector q20 = q1 + h * (diff.eval(q1) * p_half);
  const auto res_a = detail::newton_raw(residual_a, jac_a, q20, cfg);
  out.iterations += res_a.iterations;
  out.status = res_a.status;
  if (res_a.status != SolveStatus::Converged) {
    out.final_residual_norm = res_a.residual_norm;
    return out;
  }

  const Vector q2 = res_a.y;
  const Vector p2 = p_half - h * model.grad_q(model.at(q2), p_half);

  // The assembled full-chain residual is the two sub-residuals stacked (the
  // explicit rows vanish by construction up to roundoff).
  out.final_residual_norm = std::hypot(res_b.residual_norm, res_a.residual_norm);
  if (out.final_residual_norm > cfg.certificate_tol * detail::certificate_scale(x)) {
    out.status = SolveStatus::MaxIterations;
    return out;
  }

  Vector y1(2 * m), y2(2 * m);
  y1 << q1, p_half;
  y2 << q2, p2;
  out.chain = {std::move(y1), std::move(y2)};
  return out;
}

namespace detail {

/// Picard iteration y <- g(y) with the relative step criterion.
template <class MapFn>
RawResult picard_raw(const MapFn& map_fn, const Vector& y0, const SolverConfig& cfg) {
  Vector y = y0;
  for (int i = 0; i < cfg.fp_max_iter; ++i) {
    const Vector y_next = map_fn(y);
    if (!y_next.allFinite()) return {SolveStatus::Diverged, y, i + 1, 0.0};
    if ((y_next - y).norm() < cfg.fp_tol * std::max(y.norm(), kNormFloor))
      return {SolveStatus::Converged, y_next, i + 1, 0.0};
    y = y_next;
  }
  return {SolveStatus::MaxIterations, y, cfg.fp_max_iter, 0.0};
}

}  // namespace detail

/// Banach fixed-point backend. For IMR the iterated map is
/// y <- x + dt J grad H((x + y)/2); for GSV each implicit Euler block is
/// iterated to convergence in turn. Contraction requires dt small against the
/// local Hessian; otherwise MaxIterations is returned.
inline SolveResult fixed_point_solve(const SchemeResidual& scheme, const Vector& x,
                                     const SolverConfig& cfg) {
  SolveResult out;
  Chain chain;

  if (scheme.kind() == SchemeKind::IMR) {
    const auto& imr = dynamic_cast<const ImrResidual&>(scheme);
    const HamiltonianModel& model = imr.model();
    const Eigen::Index m = model.dim();
    const double dt = imr.dt();
    auto map_fn = [&](const Vector& y) -> Vector {
      const Vector mid_q = 0.5 * (x.head(m) + y.head(m));
      const Vector mid_p = 0.5 * (x.tail(m) + y.tail(m));
      const auto pd = model.at(mid_q);
      Vector next(2 * m);
      next.head(m) = x.head(m) + dt * model.grad_p(pd, mid_p);
      next.tail(m) = x.tail(m) - dt * model.grad_q(pd, mid_p);
      return next;
    };
    const auto raw = detail::picard_raw(map_fn, x, cfg);
    out.status = raw.status;
    out.iterations = raw.iterations;
    if (raw.status != SolveStatus::Converged) return out;
    chain = {raw.y};
  } else if (scheme.kind() == SchemeKind::GSV) {
    const auto& gsv = dynamic_cast<const GsvResidual&>(scheme);
    const HamiltonianModel& model = gsv.model();
    const Eigen::Index m = model.dim();
    const double h = 0.5 * gsv.dt();
    const Vector q = x.head(m), p = x.tail(m);

    const auto pd_q = model.at(q);
    auto map_b = [&](const Vector& ph) -> Vector { return p - h * model.grad_q(pd_q, ph); };
    const auto raw_b = detail::picard_raw(map_b, p, cfg);
    out.iterations = raw_b.iterations;
    out.status = raw_b.status;
    if (raw_b.status != SolveStatus::Converged) return out;

    const Vector p_half = raw_b.y;
    const Vector q1 = q + h * model.grad_p(pd_q, p_half);
    const DiffusionField& diff = model.diffusion();
    auto map_a = [&](const Vector& q2) -> Vector { return q1 + h * (diff.eval(q2) * p_half); };
    const auto raw_a = detail::picard_raw(map_a, q1, cfg);
    out.iterations += raw_a.iterations;
    out.status = raw_a.status;
    if (raw_a.status != SolveStatus::Converged) return out;

    const Vector q2 = raw_a.y;
    Vector y1(2 * m), y2(2 * m);
    y1 << q1, p_half;
    y2 << q2, p_half - h * model.grad_q(model.at(q2), p_half);
    chain = {std::move(y1), std::move(y2)};
  } else {
    throw std::invalid_argument("fixed_point_solve: supported for IMR and GSV only");
  }

  out.final_residual_norm = scheme.residual(x, chain).norm();
  if (out.final_residual_norm <= cfg.certificate_tol * detail::certificate_scale(x)) {
    out.status = SolveStatus::Converged;
    out.chain = std::move(chain);
  } else {
    out.status = SolveStatus::MaxIterations;
  }
  return out;
}

/// Backend dispatch used by the reversibility-checked flow and the kernels.
inline SolveResult solve_chain(const SchemeResidual& scheme, const Vector& x,
                               const SolverConfig& cfg) {
  switch (cfg.backend) {
    case SolveBackend::Newton:
      return newton_solve(scheme, x, scheme.predict(x), cfg);
    case SolveBackend::NewtonSequential: {
      const auto* gsv = dynamic_cast<const GsvResidual*>(&scheme);
      if (!gsv)
        throw std::invalid_argument("newton_sequential backend requires the GSV scheme");
      return newton_solve_gsv_sequential(gsv->model(), gsv->dt(), x, cfg);
    }
    case SolveBackend::FixedPoint:
      return fixed_point_solve(scheme, x, cfg);
  }
  throw std::logic_error("solve_chain: unreachable");
}

}  // namespace revhmc

#endif
