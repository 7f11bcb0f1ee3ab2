#ifndef REVHMC_REVFLOW_HPP
#define REVHMC_REVFLOW_HPP

#include <revhmc/core.hpp>
#include <revhmc/involution.hpp>
#include <revhmc/solvers.hpp>

#include <cmath>
#include <string>

namespace revhmc {

enum class CheckMode { FullChain, PositionOnly };

inline std::string to_string(CheckMode m) {
  return m == CheckMode::FullChain ? "full_chain" : "position_only";
}

inline CheckMode check_mode_from_string(const std::string& s) {
  if (s == "full_chain") return CheckMode::FullChain;
  if (s == "position_only") return CheckMode::PositionOnly;
  throw std::invalid_argument("unknown check mode: " + s);
}

struct RevConfig {
  // Looser than the solver tolerances to absorb the error amplification of
  // the Newton iterations.
  double eta_rev = 1e-8;
  CheckMode check_mode = CheckMode::FullChain;

  void validate() const {
    if (eta_rev <= 0.0) throw std::invalid_argument("RevConfig: eta_rev must be > 0");
  }
};

enum class FlowCategory { Accepted, ForwardFail, BackwardFail, ReversibilityFail };

inline std::string to_string(FlowCategory c) {
  switch (c) {
    case FlowCategory::Accepted: return "accepted";
    case FlowCategory::ForwardFail: return "forward_fail";
    case FlowCategory::BackwardFail: return "backward_fail";
    case FlowCategory::ReversibilityFail: return "reversibility_fail";
  }
  return "?";
}

/// Outcome of one application of the reversibility-checked flow: the output
/// state (S(phi(x)) when all checks pass, x itself otherwise) together with
/// the category and the solution chains that were found.
struct FlowOutcome {
  Vector result;
  FlowCategory category = FlowCategory::ForwardFail;
  Chain forward_chain;
  Chain backward_chain;

  bool accepted() const { return category == FlowCategory::Accepted; }
};

/// Reversibility-checked flow psi_rev: forward solve from the explicit
/// predictor, backward solve from S of the proposal, then comparison of the
/// backward chain against the reversed S-image of the forward chain. Any
/// failure returns x unchanged, so the map is an involution on the whole
/// space.
inline FlowOutcome psi_rev(const SchemeResidual& scheme, const InvolutionMap& s, const Vector& x,
                           const SolverConfig& solver_cfg, const RevConfig& rev_cfg) {
  if (s.dim() != scheme.dim())
    throw std::invalid_argument("psi_rev: involution and scheme dimension mismatch");
  if (rev_cfg.check_mode == CheckMode::PositionOnly &&
      !(scheme.kind() == SchemeKind::GSV && s.kind() == InvolutionMap::Kind::MomentumReversal))
    throw std::invalid_argument(
        "psi_rev: position-only check is valid for GSV with momentum reversal only");

  FlowOutcome out;
  out.result = x;

  SolveResult fwd = solve_chain(scheme, x, solver_cfg);
  if (!fwd.converged() || !all_finite(fwd.chain)) {
    out.category = FlowCategory::ForwardFail;
    return out;
  }
  out.forward_chain = std::move(fwd.chain);

  const Vector x_back = s.apply(out.forward_chain.back());
  SolveResult bwd = solve_chain(scheme, x_back, solver_cfg);
  if (!bwd.converged() || !all_finite(bwd.chain)) {
    out.category = FlowCategory::BackwardFail;
    return out;
  }
  out.backward_chain = std::move(bwd.chain);

  const double threshold = rev_cfg.eta_rev * std::max(x.norm(), kNormFloor);
  double mismatch = 0.0;
  if (rev_cfg.check_mode == CheckMode::PositionOnly) {
    const Eigen::Index nq = s.flip_start();
    mismatch = (out.backward_chain.back().head(nq) - x.head(nq)).norm();
  } else {
    // expected backward chain: (S(y_{k-1}), ..., S(y_1), S(x))
    double sq = 0.0;
    const std::size_t k = out.forward_chain.size();
    for (std::size_t i = 0; i + 1 < k; ++i)
      sq += (out.backward_chain[i] - s.apply(out.forward_chain[k - 2 - i])).squaredNorm();
    sq += (out.backward_chain[k - 1] - s.apply(x)).squaredNorm();
    mismatch = std::sqrt(sq);
  }
  if (!(mismatch < threshold)) {
    out.category = FlowCategory::ReversibilityFail;
    return out;
  }

  out.category = FlowCategory::Accepted;
  out.result = s.apply(out.forward_chain.back());
  return out;
}

/// Forward-only variant: skips the backward solve and the chain comparison.
/// Exists to demonstrate the bias it introduces at large time steps.
inline FlowOutcome psi_fwd(const SchemeResidual& scheme, const InvolutionMap& s, const Vector& x,
                           const SolverConfig& solver_cfg) {
  FlowOutcome out;
  out.result = x;
  SolveResult fwd = solve_chain(scheme, x, solver_cfg);
  if (!fwd.converged() || !all_finite(fwd.chain)) {
    out.category = FlowCategory::ForwardFail;
    return out;
  }
  out.forward_chain = std::move(fwd.chain);
  out.category = FlowCategory::Accepted;
  out.result = s.apply(out.forward_chain.back());
  return out;
}

/// Counters for the rejection decomposition: forward / backward /
/// S-reversibility failures, Metropolis-Hastings rejections of surviving
/// proposals, and their sum as the global rejection probability.
struct RejectionStats {
  long long steps = 0;
  long long forward_fail = 0;
  long long backward_fail = 0;
  long long srev_fail = 0;
  long long mh_reject = 0;
  // MALA sub-step bookkeeping (GHMALA only; not part of the global decomposition)
  long long mala_steps = 0;
  long long mala_reject = 0;

  void add_step(FlowCategory category, bool mh_accepted) {
    ++steps;
    switch (category) {
      case FlowCategory::ForwardFail: ++forward_fail; break;
      case FlowCategory::BackwardFail: ++backward_fail; break;
      case FlowCategory::ReversibilityFail: ++srev_fail; break;
      case FlowCategory::Accepted:
        if (!mh_accepted) ++mh_reject;
        break;
    }
  }

  void add_mala(bool accepted) {
    ++mala_steps;
    if (!accepted) ++mala_reject;
  }

  void merge(const RejectionStats& other) {
    steps += other.steps;
    forward_fail += other.forward_fail;
    backward_fail += other.backward_fail;
    srev_fail += other.srev_fail;
    mh_reject += other.mh_reject;
    mala_steps += other.mala_steps;
    mala_reject += other.mala_reject;
  }

  double percent(long long count) const {
    return steps == 0 ? 0.0 : 100.0 * static_cast<double>(count) / static_cast<double>(steps);
  }
  double forward_percent() const { return percent(forward_fail); }
  double backward_percent() const { return percent(backward_fail); }
  double srev_percent() const { return percent(srev_fail); }
  double mh_percent() const { return percent(mh_reject); }
  double global_percent() const {
    return percent(forward_fail + backward_fail + srev_fail + mh_reject);
  }
};

}  // namespace revhmc

#endif
