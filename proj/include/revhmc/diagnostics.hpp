#ifndef REVHMC_DIAGNOSTICS_HPP
#define REVHMC_DIAGNOSTICS_HPP

#include <revhmc/core.hpp>
#include <revhmc/hamiltonian.hpp>
#include <revhmc/revflow.hpp>
#include <revhmc/rng.hpp>
#include <revhmc/samplers.hpp>
#include <revhmc/solvers.hpp>

#include <cmath>
#include <cstdint>
#include <functional>
#include <vector>

namespace revhmc {

/// Piecewise-constant density on a fixed binning, normalized so that
/// sum_i weights_i * width_i = 1.
struct BinnedDensity {
  Vector edges;    // n_bins + 1 ascending edges
  Vector weights;  // n_bins nonnegative values

  Eigen::Index n_bins() const { return weights.size(); }
  double width(Eigen::Index i) const { return edges[i + 1] - edges[i]; }
  double center(Eigen::Index i) const { return 0.5 * (edges[i] + edges[i + 1]); }

  void normalize() {
    double total = 0.0;
    for (Eigen::Index i = 0; i < n_bins(); ++i) total += weights[i] * width(i);
    if (total <= 0.0) throw std::invalid_argument("BinnedDensity: zero total mass");
    weights /= total;
  }

  double integral() const {
    double total = 0.0;
    for (Eigen::Index i = 0; i < n_bins(); ++i) total += weights[i] * width(i);
    return total;
  }
};

/// Streaming histogram over [lo, hi) with equal bins. Out-of-range samples
/// are clamped into the edge bins and counted separately; in periodic mode
/// samples are wrapped instead.
class HistogramAccumulator {
 public:
  HistogramAccumulator(double lo, double hi, int n_bins, bool periodic = false)
      : lo_(lo), hi_(hi), periodic_(periodic), counts_(n_bins, 0) {
    if (!(hi > lo) || n_bins < 1)
      throw std::invalid_argument("HistogramAccumulator: invalid range or bin count");
    width_ = (hi - lo) / n_bins;
  }

  void add(double x) {
    ++n_;
    if (periodic_) {
      const double range = hi_ - lo_;
      x -= range * std::floor((x - lo_) / range);
      if (x >= hi_) x = lo_;  // numerical wrap-around of the right edge
    } else if (x < lo_) {
      ++clamped_lo_;
      x = lo_;
    } else if (x >= hi_) {
      ++clamped_hi_;
      x = std::nextafter(hi_, lo_);
    }
    auto idx = static_cast<std::size_t>((x - lo_) / width_);
    if (idx >= counts_.size()) idx = counts_.size() - 1;
    ++counts_[idx];
  }

  long long total() const { return n_; }
  long long clamped_low() const { return clamped_lo_; }
  long long clamped_high() const { return clamped_hi_; }

  BinnedDensity density() const {
    BinnedDensity d;
    const auto nb = static_cast<Eigen::Index>(counts_.size());
    d.edges.resize(nb + 1);
    for (Eigen::Index i = 0; i <= nb; ++i) d.edges[i] = lo_ + width_ * static_cast<double>(i);
    d.weights.resize(nb);
    for (Eigen::Index i = 0; i < nb; ++i) d.weights[i] = static_cast<double>(counts_[i]);
    d.normalize();
    return d;
  }

 private:
  double lo_, hi_, width_;
  bool periodic_;
  std::vector<long long> counts_;
  long long n_ = 0;
  long long clamped_lo_ = 0;
  long long clamped_hi_ = 0;
};

/// Total variation distance 1/2 sum width_i |a_i - b_i| between two densities
/// on the same binning; bounded by 1 for normalized inputs.
inline double tv_distance(const BinnedDensity& a, const BinnedDensity& b) {
  if (a.edges.size() != b.edges.size() || !a.edges.isApprox(b.edges))
    throw std::invalid_argument("tv_distance: binnings differ");
  double tv = 0.0;
  for (Eigen::Index i = 0; i < a.n_bins(); ++i)
    tv += a.width(i) * std::abs(a.weights[i] - b.weights[i]);
  return 0.5 * tv;
}

/// Bin masses of Z^{-1} e^{-V} on [lo, hi] by composite Simpson quadrature
/// per bin, then normalized (Z cancels).
inline BinnedDensity analytic_density(const std::function<double(double)>& v, double lo, double hi,
                                      int n_bins, int panels_per_bin = 32) {
  if (!(hi > lo) || n_bins < 1) throw std::invalid_argument("analytic_density: invalid range");
  BinnedDensity d;
  d.edges.resize(n_bins + 1);
  d.weights.resize(n_bins);
  const double width = (hi - lo) / n_bins;
  for (int i = 0; i <= n_bins; ++i) d.edges[i] = lo + width * i;
  const int n_sub = 2 * panels_per_bin;
  for (int i = 0; i < n_bins; ++i) {
    const double a = d.edges[i];
    const double h = width / n_sub;
    double acc = 0.0;
    for (int j = 0; j <= n_sub; ++j) {
      const double f = std::exp(-v(a + h * j));
      if (!std::isfinite(f)) throw std::invalid_argument("analytic_density: non-finite density");
      acc += (j == 0 || j == n_sub) ? f : (j % 2 == 1 ? 4.0 * f : 2.0 * f);
    }
    d.weights[i] = acc * h / 3.0;  // bin mass; normalize() rescales to a density
  }
  d.normalize();
  return d;
}

struct MeanStderr {
  double mean = 0.0;
  double stderr_ = std::numeric_limits<double>::quiet_NaN();
};

inline MeanStderr mean_stderr(const std::vector<double>& xs) {
  MeanStderr out;
  const auto n = static_cast<double>(xs.size());
  if (xs.empty()) return out;
  double sum = 0.0;
  for (double x : xs) sum += x;
  out.mean = sum / n;
  if (xs.size() < 2) return out;
  double ss = 0.0;
  for (double x : xs) ss += (x - out.mean) * (x - out.mean);
  out.stderr_ = std::sqrt(ss / (n - 1.0) / n);
  return out;
}

/// Least-squares slope of log(y) against log(x); entries with y <= 0 are
/// rejected as a usage error.
inline double fit_loglog_slope(const std::vector<double>& xs, const std::vector<double>& ys) {
  if (xs.size() != ys.size() || xs.size() < 2)
    throw std::invalid_argument("fit_loglog_slope: need at least two points");
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const auto n = static_cast<double>(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (xs[i] <= 0.0 || ys[i] <= 0.0)
      throw std::invalid_argument("fit_loglog_slope: nonpositive data");
    const double lx = std::log(xs[i]), ly = std::log(ys[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

inline std::vector<double> log_spaced(double lo, double hi, int n) {
  if (!(hi > lo) || lo <= 0.0 || n < 2) throw std::invalid_argument("log_spaced: invalid grid");
  std::vector<double> grid(n);
  const double llo = std::log(lo), lhi = std::log(hi);
  for (int i = 0; i < n; ++i)
    grid[i] = std::exp(llo + (lhi - llo) * static_cast<double>(i) / (n - 1));
  return grid;
}

struct DriftResult {
  Vector estimate;
  Vector stderr_;
  Vector target;  // -D(q) grad V(q) + div D(q)
  long long n_total = 0;
  long long n_failed = 0;
};

/// Monte Carlo check of the order-dt^2 drift of the numerical flow: with
/// p ~ N(0, D(q)^{-1}), the odd terms of the one-step expansion average out
/// and 2 E[q1 - q] / dt^2 converges to -D(q) grad V(q) + div D(q).
inline DriftResult drift_test(const HamiltonianModel& model, const SchemeResidual& scheme,
                              const Vector& q, long long n_samples, RngStream& rng,
                              const SolverConfig& solver_cfg) {
  const Eigen::Index m = model.dim();
  const double dt = scheme.dt();
  const auto pd = model.at(q);
  DriftResult out;
  out.n_total = n_samples;
  Vector sum = Vector::Zero(m), sum_sq = Vector::Zero(m);
  long long n_ok = 0;
  for (long long i = 0; i < n_samples; ++i) {
    const Vector p = sample_momentum(pd, rng);
    Vector x(2 * m);
    x << q, p;
    const SolveResult res = solve_chain(scheme, x, solver_cfg);
    if (!res.converged()) {
      ++out.n_failed;
      continue;
    }
    const Vector v = 2.0 * (res.chain.back().head(m) - q) / (dt * dt);
    sum += v;
    sum_sq += v.cwiseProduct(v);
    ++n_ok;
  }
  if (n_ok < 2) throw std::runtime_error("drift_test: not enough converged samples");
  const auto n = static_cast<double>(n_ok);
  out.estimate = sum / n;
  out.stderr_ = ((sum_sq / n - out.estimate.cwiseProduct(out.estimate)) / (n - 1.0))
                    .cwiseMax(0.0)
                    .cwiseSqrt();
  out.target = -pd.d * pd.grad_v + model.diffusion().divergence(q);
  return out;
}

struct SweepRow {
  double dt;
  RejectionStats stats;
};

/// One chain per grid point; substream r of the given seed drives row r.
template <class MakeKernel>
std::vector<SweepRow> rejection_sweep(MakeKernel&& make_kernel, const std::vector<double>& dt_grid,
                                      long long n_steps, const Vector& x0, std::uint64_t seed) {
  std::vector<SweepRow> rows;
  rows.reserve(dt_grid.size());
  for (std::size_t i = 0; i < dt_grid.size(); ++i) {
    auto kernel = make_kernel(dt_grid[i]);
    ChainState state(x0, RngStream(seed, i));
    for (long long n = 0; n < n_steps; ++n) kernel.step(state);
    rows.push_back({dt_grid[i], state.stats});
  }
  return rows;
}

}  // namespace revhmc

#endif
