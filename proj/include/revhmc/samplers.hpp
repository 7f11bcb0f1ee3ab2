#ifndef REVHMC_SAMPLERS_HPP
#define REVHMC_SAMPLERS_HPP

#include <revhmc/core.hpp>
#include <revhmc/ghmala_scheme.hpp>
#include <revhmc/hamiltonian.hpp>
#include <revhmc/revflow.hpp>
#include <revhmc/rng.hpp>
#include <revhmc/schemes.hpp>
#include <revhmc/solvers.hpp>

#include <cmath>
#include <memory>
#include <string>

namespace revhmc {

enum class KernelKind { HMC, GHMC, GHMALA, HMCForwardOnly, GHMCForwardOnly };

inline std::string to_string(KernelKind k) {
  switch (k) {
    case KernelKind::HMC: return "hmc";
    case KernelKind::GHMC: return "ghmc";
    case KernelKind::GHMALA: return "ghmala";
    case KernelKind::HMCForwardOnly: return "hmc_forward_only";
    case KernelKind::GHMCForwardOnly: return "ghmc_forward_only";
  }
  return "?";
}

inline KernelKind kernel_from_string(const std::string& s) {
  if (s == "hmc") return KernelKind::HMC;
  if (s == "ghmc") return KernelKind::GHMC;
  if (s == "ghmala") return KernelKind::GHMALA;
  if (s == "hmc_forward_only") return KernelKind::HMCForwardOnly;
  if (s == "ghmc_forward_only") return KernelKind::GHMCForwardOnly;
  throw std::invalid_argument("unknown kernel: " + s);
}

enum class FdUpdate { Midpoint, ExactOU };

inline std::string to_string(FdUpdate f) {
  return f == FdUpdate::Midpoint ? "midpoint" : "exact_ou";
}

inline FdUpdate fd_update_from_string(const std::string& s) {
  if (s == "midpoint") return FdUpdate::Midpoint;
  if (s == "exact_ou") return FdUpdate::ExactOU;
  throw std::invalid_argument("unknown fd_update: " + s);
}

struct KernelConfig {
  double dt = 0.1;
  double gamma = 1.0;           // friction (GHMC)
  KernelKind kernel = KernelKind::GHMC;
  FdUpdate fd_update = FdUpdate::Midpoint;
  double dt_mala = 0.0;         // MALA sub-step of GHMALA; 0 means use dt

  double effective_dt_mala() const { return dt_mala > 0.0 ? dt_mala : dt; }

  void validate() const {
    if (dt <= 0.0) throw std::invalid_argument("KernelConfig: dt must be > 0");
    const bool uses_gamma =
        kernel == KernelKind::GHMC || kernel == KernelKind::GHMCForwardOnly;
    if (uses_gamma && gamma <= 0.0)
      throw std::invalid_argument("KernelConfig: gamma must be > 0 for GHMC");
    if (dt_mala < 0.0) throw std::invalid_argument("KernelConfig: dt_mala must be >= 0");
  }
};

/// State of one Markov chain: current point, step counter, its private random
/// stream, and the rejection accumulator.
struct ChainState {
  Vector x;
  long long step_index = 0;
  RngStream rng;
  RejectionStats stats;

  ChainState(Vector x0, RngStream rng_) : x(std::move(x0)), rng(std::move(rng_)) {}
};

/// Metropolis rule for a log ratio -delta_h; u is a uniform draw on [0, 1).
inline bool mh_accept(double u, double delta_h) { return u <= std::exp(-delta_h); }

namespace detail {

/// Midpoint discretization of the momentum Ornstein-Uhlenbeck half step:
///   p' = [I + (dt/4) g D]^{-1} [(I - (dt/4) g D) p + sqrt(g dt) G].
inline Vector ou_midpoint_half(const Matrix& d, double gamma, double dt, const Vector& p,
                               const Vector& g) {
  const Eigen::Index m = d.rows();
  const Matrix gd = (0.25 * dt * gamma) * d;
  const Vector rhs = (Matrix::Identity(m, m) - gd) * p + std::sqrt(gamma * dt) * g;
  return (Matrix::Identity(m, m) + gd).partialPivLu().solve(rhs);
}

/// Exact OU half step, valid when D is diagonal:
///   p'_i = e^{-g d_i dt/2} p_i + sqrt((1 - e^{-g d_i dt}) / d_i) G_i.
inline Vector ou_exact_half(const Matrix& d, double gamma, double dt, const Vector& p,
                            const Vector& g) {
  Vector out(p.size());
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    const double di = d(i, i);
    const double decay = std::exp(-0.5 * gamma * di * dt);
    out[i] = decay * p[i] + std::sqrt((1.0 - decay * decay) / di) * g[i];
  }
  return out;
}

/// Log Metropolis ratio of the MALA proposal q' = q - h grad V + sqrt(2h) G
/// targeting e^{-V}.
inline double mala_log_ratio(const Potential& v, double h, const Vector& q, const Vector& q_prop,
                             const Vector& grad_cur, const Vector& grad_prop) {
  return -v.value(q_prop) + v.value(q) -
         (q - q_prop + h * grad_prop).squaredNorm() / (4.0 * h) +
         (q_prop - q + h * grad_cur).squaredNorm() / (4.0 * h);
}

}  // namespace detail

/// One-step HMC kernel: full momentum refreshment, reversibility-checked
/// proposal, Metropolis correction on the Hamiltonian. The forward-only
/// variant replaces psi_rev by psi_fwd and is biased at large time steps.
class HmcKernel {
 public:
  HmcKernel(ModelPtr model, SchemePtr scheme, SolverConfig solver_cfg, RevConfig rev_cfg,
            bool forward_only = false)
      : model_(std::move(model)),
        scheme_(std::move(scheme)),
        s_(InvolutionMap::momentum_reversal(model_->dim())),
        solver_cfg_(solver_cfg),
        rev_cfg_(rev_cfg),
        forward_only_(forward_only) {
    solver_cfg_.validate();
    rev_cfg_.validate();
  }

  void step(ChainState& state) const {
    const Eigen::Index m = model_->dim();
    const Vector q = state.x.head(m);
    const auto pd = model_->at(q);
    const Vector p = sample_momentum(pd, state.rng);
    Vector x_cur(2 * m);
    x_cur << q, p;
    const double h_cur = model_->energy(pd, q, p);

    const FlowOutcome outcome = forward_only_
                                    ? psi_fwd(*scheme_, s_, x_cur, solver_cfg_)
                                    : psi_rev(*scheme_, s_, x_cur, solver_cfg_, rev_cfg_);
    // a failed flow proposes the unmoved point, so delta H is exactly zero
    const double h_prop =
        outcome.accepted() ? model_->energy(outcome.result.head(m), outcome.result.tail(m))
                           : h_cur;
    const double u = state.rng.uniform01();
    const bool accepted = mh_accept(u, h_prop - h_cur);
    state.x = accepted ? outcome.result : x_cur;
    state.stats.add_step(outcome.category, accepted);
    ++state.step_index;
  }

 private:
  ModelPtr model_;
  SchemePtr scheme_;
  InvolutionMap s_;
  SolverConfig solver_cfg_;
  RevConfig rev_cfg_;
  bool forward_only_;
};

/// GHMC kernel: Strang splitting of the Langevin dynamics. Half a
/// fluctuation-dissipation step, a reversibility-checked Hamiltonian
/// proposal with Metropolis correction, a momentum flip, and the second half
/// of the fluctuation-dissipation step.
class GhmcKernel {
 public:
  GhmcKernel(ModelPtr model, SchemePtr scheme, KernelConfig kernel_cfg, SolverConfig solver_cfg,
             RevConfig rev_cfg, bool forward_only = false)
      : model_(std::move(model)),
        scheme_(std::move(scheme)),
        s_(InvolutionMap::momentum_reversal(model_->dim())),
        kernel_cfg_(kernel_cfg),
        solver_cfg_(solver_cfg),
        rev_cfg_(rev_cfg),
        forward_only_(forward_only) {
    kernel_cfg_.validate();
    solver_cfg_.validate();
    rev_cfg_.validate();
    if (kernel_cfg_.fd_update == FdUpdate::ExactOU && !model_->diffusion().diagonal())
      throw std::invalid_argument("GhmcKernel: exact OU update requires a diagonal diffusion");
  }

  void step(ChainState& state) const {
    const Eigen::Index m = model_->dim();
    const Vector q = state.x.head(m);
    const auto pd = model_->at(q);

    const Vector p_quarter = fd_half(pd.d, state.x.tail(m), state.rng);
    Vector x_in(2 * m);
    x_in << q, p_quarter;
    const double h_cur = model_->energy(pd, q, p_quarter);

    const FlowOutcome outcome = forward_only_
                                    ? psi_fwd(*scheme_, s_, x_in, solver_cfg_)
                                    : psi_rev(*scheme_, s_, x_in, solver_cfg_, rev_cfg_);

    bool accepted = true;
    Vector x_next = x_in;
    const double u = state.rng.uniform01();
    if (outcome.accepted()) {
      const Vector q_prop = outcome.result.head(m);
      const auto pd_prop = model_->at(q_prop);
      const double h_prop = model_->energy(pd_prop, q_prop, outcome.result.tail(m));
      accepted = mh_accept(u, h_prop - h_cur);
      if (accepted) {
        x_next = outcome.result;
        const Vector p_flipped = -x_next.tail(m);
        x_next.tail(m) = fd_half(pd_prop.d, p_flipped, state.rng);
        finish(state, outcome.category, accepted, std::move(x_next));
        return;
      }
    } else {
      accepted = mh_accept(u, 0.0);  // exp(0) = 1: the unmoved proposal passes
    }
    const Vector p_flipped = -x_next.tail(m);
    x_next.tail(m) = fd_half(pd.d, p_flipped, state.rng);
    finish(state, outcome.category, accepted, std::move(x_next));
  }

 private:
  Vector fd_half(const Matrix& d, const Vector& p, RngStream& rng) const {
    const Vector g = rng.normal_vector(p.size());
    return kernel_cfg_.fd_update == FdUpdate::Midpoint
               ? detail::ou_midpoint_half(d, kernel_cfg_.gamma, kernel_cfg_.dt, p, g)
               : detail::ou_exact_half(d, kernel_cfg_.gamma, kernel_cfg_.dt, p, g);
  }

  void finish(ChainState& state, FlowCategory category, bool accepted, Vector&& x_next) const {
    state.x = std::move(x_next);
    state.stats.add_step(category, accepted);
    ++state.step_index;
  }

  ModelPtr model_;
  SchemePtr scheme_;
  InvolutionMap s_;
  KernelConfig kernel_cfg_;
  SolverConfig solver_cfg_;
  RevConfig rev_cfg_;
  bool forward_only_;
};

/// GHMALA kernel on the augmented state (q, xi): a MALA sub-step for the
/// reversible part, the reversibility-checked midpoint map for the
/// nonreversible part, and a Metropolis step on V whose rejection flips the
/// direction variable.
class GhmalaKernel {
 public:
  GhmalaKernel(PotentialPtr potential, GammaPtr gamma, KernelConfig kernel_cfg,
               SolverConfig solver_cfg, RevConfig rev_cfg)
      : potential_(std::move(potential)),
        gamma_(std::move(gamma)),
        scheme_(std::make_shared<GhmalaResidual>(gamma_, kernel_cfg.dt)),
        s_(InvolutionMap::direction_reversal(potential_->dim())),
        kernel_cfg_(kernel_cfg),
        solver_cfg_(solver_cfg),
        rev_cfg_(rev_cfg) {
    kernel_cfg_.validate();
    solver_cfg_.validate();
    rev_cfg_.validate();
    if (potential_->dim() != gamma_->dim())
      throw std::invalid_argument("GhmalaKernel: potential and gamma dimension mismatch");
    if (rev_cfg_.check_mode != CheckMode::FullChain)
      throw std::invalid_argument("GhmalaKernel: GHMALA uses the full-chain check");
  }

  void step(ChainState& state) const {
    const Eigen::Index m = potential_->dim();
    const Vector q = state.x.head(m);
    const double xi = state.x[m];

    // MALA sub-step for dq = -grad V dt + sqrt(2) dW
    const double h = kernel_cfg_.effective_dt_mala();
    const Vector g = state.rng.normal_vector(m);
    const Vector grad_cur = potential_->grad(q);
    const Vector q_prop = q - h * grad_cur + std::sqrt(2.0 * h) * g;
    const Vector grad_prop = potential_->grad(q_prop);
    const double log_ratio = detail::mala_log_ratio(*potential_, h, q, q_prop, grad_cur, grad_prop);
    const double u_mala = state.rng.uniform01();
    const bool mala_accepted = mh_accept(u_mala, -log_ratio);
    const Vector q_third = mala_accepted ? q_prop : q;
    state.stats.add_mala(mala_accepted);

    // nonreversible part with the direction-reversal check
    Vector x_in(m + 1);
    x_in << q_third, xi;
    const FlowOutcome outcome = psi_rev(*scheme_, s_, x_in, solver_cfg_, rev_cfg_);
    const Vector q_two_thirds = outcome.result.head(m);

    const double u = state.rng.uniform01();
    const double dv = potential_->value(q_two_thirds) - potential_->value(q_third);
    const bool accepted = mh_accept(u, dv);
    Vector x_next(m + 1);
    if (accepted)
      x_next << q_two_thirds, xi;
    else
      x_next << q_third, -xi;
    state.x = std::move(x_next);
    state.stats.add_step(outcome.category, accepted);
    ++state.step_index;
  }

 private:
  PotentialPtr potential_;
  GammaPtr gamma_;
  std::shared_ptr<const GhmalaResidual> scheme_;
  InvolutionMap s_;
  KernelConfig kernel_cfg_;
  SolverConfig solver_cfg_;
  RevConfig rev_cfg_;
};

}  // namespace revhmc

#endif
