#ifndef REVHMC_EXPERIMENTS_HPP
#define REVHMC_EXPERIMENTS_HPP

#include <revhmc/config.hpp>
#include <revhmc/csv.hpp>
#include <revhmc/diagnostics.hpp>

#include <atomic>
#include <cmath>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <mutex>
#include <thread>

namespace revhmc {

/// Run fn(0..n-1) across a thread pool; realization r must seed its own
/// substream from r, so results do not depend on scheduling.
template <class Fn>
std::vector<double> replicate(int n_realizations, Fn&& fn) {
  if (n_realizations < 1) throw std::invalid_argument("replicate: n_realizations must be >= 1");
  std::vector<double> out(static_cast<std::size_t>(n_realizations));
  const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  const unsigned n_workers = std::min<unsigned>(hw, static_cast<unsigned>(n_realizations));
  if (n_workers <= 1) {
    for (int i = 0; i < n_realizations; ++i) out[i] = fn(i);
    return out;
  }
  std::atomic<int> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  pool.reserve(n_workers);
  for (unsigned t = 0; t < n_workers; ++t) {
    pool.emplace_back([&] {
      for (;;) {
        const int i = next.fetch_add(1);
        if (i >= n_realizations) return;
        try {
          out[i] = fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!error) error = std::current_exception();
          return;
        }
      }
    });
  }
  for (auto& w : pool) w.join();
  if (error) std::rethrow_exception(error);
  return out;
}

/// Type-erased Markov kernel, so sweeps can mix kernel classes.
class AnyKernel {
 public:
  template <class K>
  explicit AnyKernel(K kernel)
      : step_([k = std::move(kernel)](ChainState& s) { k.step(s); }) {}
  void step(ChainState& s) const { step_(s); }

 private:
  std::function<void(ChainState&)> step_;
};

namespace detail {

inline SchemePtr make_scheme(const std::string& name, ModelPtr model, double dt) {
  if (name == "gsv") return std::make_shared<GsvResidual>(std::move(model), dt);
  if (name == "imr") return std::make_shared<ImrResidual>(std::move(model), dt);
  throw std::invalid_argument("unknown scheme: " + name);
}

inline KernelKind forward_only_twin(KernelKind kind) {
  switch (kind) {
    case KernelKind::HMC: return KernelKind::HMCForwardOnly;
    case KernelKind::GHMC: return KernelKind::GHMCForwardOnly;
    default:
      throw std::invalid_argument("forward-only variant exists for hmc and ghmc only");
  }
}

inline AnyKernel make_hamiltonian_kernel(KernelKind kind, ModelPtr model, SchemePtr scheme,
                                         const KernelConfig& kc, const SolverConfig& sc,
                                         const RevConfig& rc) {
  switch (kind) {
    case KernelKind::HMC:
      return AnyKernel(HmcKernel(std::move(model), std::move(scheme), sc, rc, false));
    case KernelKind::HMCForwardOnly:
      return AnyKernel(HmcKernel(std::move(model), std::move(scheme), sc, rc, true));
    case KernelKind::GHMC:
      return AnyKernel(GhmcKernel(std::move(model), std::move(scheme), kc, sc, rc, false));
    case KernelKind::GHMCForwardOnly:
      return AnyKernel(GhmcKernel(std::move(model), std::move(scheme), kc, sc, rc, true));
    case KernelKind::GHMALA:
      throw std::invalid_argument("GHMALA is wired through its own experiment");
  }
  throw std::logic_error("make_hamiltonian_kernel: unreachable");
}

inline Vector initial_phase_state(const HamiltonianModel& model, const Vector& q0,
                                  RngStream& rng) {
  const Vector p0 = sample_momentum(model, q0, rng);
  Vector x0(2 * model.dim());
  x0 << q0, p0;
  return x0;
}

inline void append_stats(Json& summary, const std::string& prefix, const RejectionStats& stats) {
  summary[prefix + "_forward_percent"] = stats.forward_percent();
  summary[prefix + "_backward_percent"] = stats.backward_percent();
  summary[prefix + "_srev_percent"] = stats.srev_percent();
  summary[prefix + "_mh_percent"] = stats.mh_percent();
  summary[prefix + "_global_percent"] = stats.global_percent();
}

inline void write_histogram_csv(const std::filesystem::path& path, const BinnedDensity& d) {
  CsvWriter csv(path, {"bin_center", "weight"});
  for (Eigen::Index i = 0; i < d.n_bins(); ++i)
    csv.row({csv_num(d.center(i)), csv_num(d.weights[i])});
}

inline std::vector<double> resolve_dt_grid(const RunConfig& run) {
  return run.dt_grid.empty() ? log_spaced(run.dt_min, run.dt_max, run.n_dt) : run.dt_grid;
}

// ---- experiment bodies ----

inline void run_doublewell_histogram(ExperimentConfig& cfg, const std::filesystem::path& out,
                                     Json& summary) {
  ModelPtr model = make_model(cfg.model);
  if (model->dim() != 1)
    throw std::invalid_argument("doublewell_histogram expects a one-dimensional model");
  const RevConfig rc = cfg.resolved_rev();
  SchemePtr scheme = make_scheme(cfg.scheme, model, cfg.kernel.dt);

  const BinnedDensity analytic = analytic_density(
      [&](double q) {
        Vector qq(1);
        qq << q;
        return model->potential().value(qq);
      },
      cfg.run.hist_lo, cfg.run.hist_hi, cfg.run.n_bins);
  write_histogram_csv(out / "histogram_analytic.csv", analytic);

  const struct Variant {
    const char* label;
    bool forward_only;
  } variants[] = {{"checked", false}, {"forward_only", true}};

  Vector q0(1);
  q0 << cfg.run.q0;
  for (const auto& variant : variants) {
    const KernelKind kind =
        variant.forward_only ? forward_only_twin(cfg.kernel.kernel) : cfg.kernel.kernel;
    const AnyKernel kernel =
        make_hamiltonian_kernel(kind, model, scheme, cfg.kernel, cfg.solver, rc);
    // both variants share the substream so small-dt runs coincide pathwise
    RngStream rng(cfg.run.seed, 0);
    ChainState state(initial_phase_state(*model, q0, rng), std::move(rng));
    HistogramAccumulator hist(cfg.run.hist_lo, cfg.run.hist_hi, cfg.run.n_bins);
    for (long long n = 0; n < cfg.run.n_iter; ++n) {
      kernel.step(state);
      hist.add(state.x[0]);
    }
    const BinnedDensity density = hist.density();
    write_histogram_csv(out / (std::string("histogram_") + variant.label + ".csv"), density);
    summary[std::string("tv_") + variant.label + "_analytic"] = tv_distance(density, analytic);
    summary[std::string(variant.label) + "_clamped"] =
        hist.clamped_low() + hist.clamped_high();
    append_stats(summary, variant.label, state.stats);
  }
}

inline void run_rejection_sweep(ExperimentConfig& cfg, const std::filesystem::path& out,
                                Json& summary) {
  ModelPtr model = make_model(cfg.model);
  if (model->dim() != 1)
    throw std::invalid_argument("rejection_sweep expects a one-dimensional model");
  const RevConfig rc = cfg.resolved_rev();
  const std::vector<double> grid = resolve_dt_grid(cfg.run);

  Vector q0(1);
  q0 << cfg.run.q0;
  RngStream init_rng(cfg.run.seed, 0xfeed);
  const Vector x0 = initial_phase_state(*model, q0, init_rng);

  const auto rows = rejection_sweep(
      [&](double dt) {
        SchemePtr scheme = make_scheme(cfg.scheme, model, dt);
        KernelConfig kc = cfg.kernel;
        kc.dt = dt;
        return make_hamiltonian_kernel(cfg.kernel.kernel, model, scheme, kc, cfg.solver, rc);
      },
      grid, cfg.run.n_iter, x0, cfg.run.seed);

  CsvWriter csv(out / "rejection.csv", {"dt", "forward", "backward", "srev", "mh", "global"});
  std::vector<double> fit_dts, fit_mh;
  for (const auto& row : rows) {
    csv.row({csv_num(row.dt), csv_num(row.stats.forward_percent()),
             csv_num(row.stats.backward_percent()), csv_num(row.stats.srev_percent()),
             csv_num(row.stats.mh_percent()), csv_num(row.stats.global_percent())});
    if (row.dt >= cfg.run.slope_fit_lo && row.dt <= cfg.run.slope_fit_hi &&
        row.stats.mh_reject > 0) {
      fit_dts.push_back(row.dt);
      fit_mh.push_back(row.stats.mh_percent() / 100.0);
    }
  }
  summary["n_dt"] = static_cast<long long>(rows.size());
  summary["mh_loglog_slope"] =
      fit_dts.size() >= 2 ? fit_loglog_slope(fit_dts, fit_mh)
                          : std::numeric_limits<double>::quiet_NaN();
  summary["slope_fit_points"] = static_cast<long long>(fit_dts.size());
}

inline void run_circle_tv(ExperimentConfig& cfg, const std::filesystem::path& out,
                          Json& summary) {
  PotentialPtr potential = make_potential(cfg.model.potential, cfg.model.potential_params);
  if (potential->dim() != 2)
    throw std::invalid_argument("circle_tv expects a two-dimensional potential");
  // resolve the configured diffusion for the dump; both fields below share eps
  (void)make_diffusion(cfg.model.diffusion, cfg.model.diffusion_params);
  const double eps = detail::param_or(cfg.model.diffusion_params, "eps", 0.1);
  const RevConfig rc = cfg.resolved_rev();
  const std::vector<double> grid = resolve_dt_grid(cfg.run);
  const int n_real = cfg.run.n_realizations;

  const BinnedDensity uniform = [&] {
    BinnedDensity d;
    const int nb = cfg.run.n_bins;
    d.edges.resize(nb + 1);
    for (int i = 0; i <= nb; ++i) d.edges[i] = 2.0 * M_PI * i / nb;
    d.weights = Vector::Constant(nb, 1.0 / (2.0 * M_PI));
    return d;
  }();

  const std::vector<KernelKind> kernels = {KernelKind::HMC, KernelKind::GHMC};
  const std::vector<std::string> kernel_labels = {"hmc", "ghmc"};
  const std::vector<std::string> field_labels = {"aniso", "iso"};

  for (std::size_t ki = 0; ki < kernels.size(); ++ki) {
    for (std::size_t fi = 0; fi < field_labels.size(); ++fi) {
      DiffusionPtr field;
      if (fi == 0)
        field = std::make_shared<AnisotropicDiffusion>(eps);
      else
        field = std::make_shared<IsotropicDiffusion>(eps);
      ModelPtr model = rmhmc_hamiltonian(potential, field);

      const std::string label = "tv_" + kernel_labels[ki] + "_" + field_labels[fi];
      CsvWriter csv(out / (label + ".csv"), {"dt", "mean_tv", "stderr"});
      double min_tv = std::numeric_limits<double>::infinity();
      double argmin_dt = grid.front();
      for (std::size_t di = 0; di < grid.size(); ++di) {
        const double dt = grid[di];
        SchemePtr scheme = make_scheme(cfg.scheme, model, dt);
        KernelConfig kc = cfg.kernel;
        kc.dt = dt;
        const AnyKernel kernel =
            make_hamiltonian_kernel(kernels[ki], model, scheme, kc, cfg.solver, rc);

        const std::uint64_t block = ((ki * 2 + fi) * grid.size() + di) *
                                    static_cast<std::uint64_t>(n_real);
        const auto tvs = replicate(n_real, [&](int r) {
          RngStream rng(cfg.run.seed, block + static_cast<std::uint64_t>(r));
          const double theta0 = 2.0 * M_PI * rng.uniform01();
          Vector q0(2);
          q0 << std::cos(theta0), std::sin(theta0);
          ChainState state(initial_phase_state(*model, q0, rng), std::move(rng));
          HistogramAccumulator hist(0.0, 2.0 * M_PI, cfg.run.n_bins, true);
          for (long long n = 0; n < cfg.run.n_iter; ++n) {
            kernel.step(state);
            double theta = std::atan2(state.x[1], state.x[0]);
            if (theta < 0.0) theta += 2.0 * M_PI;
            hist.add(theta);
          }
          return tv_distance(hist.density(), uniform);
        });
        const MeanStderr ms = mean_stderr(tvs);
        csv.row({csv_num(dt), csv_num(ms.mean), csv_num(ms.stderr_)});
        if (ms.mean < min_tv) {
          min_tv = ms.mean;
          argmin_dt = dt;
        }
      }
      summary["min_" + label] = min_tv;
      summary["argmin_dt_" + kernel_labels[ki] + "_" + field_labels[fi]] = argmin_dt;
    }
  }
}

inline void run_drift_test(ExperimentConfig& cfg, const std::filesystem::path& out,
                           Json& summary) {
  ModelPtr model = make_model(cfg.model);
  if (model->dim() != 1)
    throw std::invalid_argument("drift_test expects a one-dimensional model");
  SchemePtr scheme = make_scheme(cfg.scheme, model, cfg.kernel.dt);

  CsvWriter csv(out / "drift.csv",
                {"q", "estimate", "stderr", "target", "n_failed", "n_total"});
  double max_z = 0.0;
  for (std::size_t i = 0; i < cfg.run.q_points.size(); ++i) {
    Vector q(1);
    q << cfg.run.q_points[i];
    RngStream rng(cfg.run.seed, i);
    const DriftResult res = drift_test(*model, *scheme, q, cfg.run.n_iter, rng, cfg.solver);
    csv.row({csv_num(q[0]), csv_num(res.estimate[0]), csv_num(res.stderr_[0]),
             csv_num(res.target[0]), csv_num(res.n_failed), csv_num(res.n_total)});
    max_z = std::max(max_z, std::abs(res.estimate[0] - res.target[0]) / res.stderr_[0]);
    summary["failed_fraction_q" + std::to_string(i)] =
        static_cast<double>(res.n_failed) / static_cast<double>(res.n_total);
  }
  summary["max_abs_z"] = max_z;
}

inline void run_ghmala_gaussian(ExperimentConfig& cfg, const std::filesystem::path& out,
                                Json& summary) {
  PotentialPtr potential = make_potential(cfg.model.potential, cfg.model.potential_params);
  if (potential->dim() != 2)
    throw std::invalid_argument("ghmala_gaussian expects a two-dimensional potential");
  if (cfg.kernel.kernel != KernelKind::GHMALA)
    throw std::invalid_argument("ghmala_gaussian requires kernel = ghmala");
  if (cfg.solver.backend == SolveBackend::NewtonSequential)
    throw std::invalid_argument("ghmala_gaussian requires backend = newton or fixed_point");
  auto gamma = std::make_shared<RotatedGradField>(potential);
  RevConfig rc = cfg.resolved_rev();
  const GhmalaKernel kernel(potential, gamma, cfg.kernel, cfg.solver, rc);

  Vector x0(3);
  x0 << 0.0, 0.0, 1.0;
  ChainState state(x0, RngStream(cfg.run.seed, 0));
  const long long n = cfg.run.n_iter;
  const int n_batches = 100;
  const long long batch_len = std::max<long long>(1, n / n_batches);

  struct Moment {
    const char* name;
    double target;
    std::function<double(const Vector&)> eval;
  };
  const std::vector<Moment> moments = {
      {"mean_q1", 0.0, [](const Vector& x) { return x[0]; }},
      {"mean_q2", 0.0, [](const Vector& x) { return x[1]; }},
      {"var_q1", 1.0, [](const Vector& x) { return x[0] * x[0]; }},
      {"var_q2", 1.0, [](const Vector& x) { return x[1] * x[1]; }}};

  std::vector<std::vector<double>> batch_means(moments.size());
  std::vector<double> acc(moments.size(), 0.0);
  bool xi_conserved = true;
  long long in_batch = 0;
  for (long long step = 0; step < n; ++step) {
    kernel.step(state);
    if (std::abs(state.x[2]) != 1.0) xi_conserved = false;
    for (std::size_t mi = 0; mi < moments.size(); ++mi) acc[mi] += moments[mi].eval(state.x);
    if (++in_batch == batch_len) {
      for (std::size_t mi = 0; mi < moments.size(); ++mi) {
        batch_means[mi].push_back(acc[mi] / static_cast<double>(batch_len));
        acc[mi] = 0.0;
      }
      in_batch = 0;
    }
  }

  CsvWriter csv(out / "moments.csv", {"stat", "value", "stderr", "target"});
  double max_z = 0.0;
  for (std::size_t mi = 0; mi < moments.size(); ++mi) {
    const MeanStderr ms = mean_stderr(batch_means[mi]);  // batch means absorb autocorrelation
    csv.row({moments[mi].name, csv_num(ms.mean), csv_num(ms.stderr_),
             csv_num(moments[mi].target)});
    max_z = std::max(max_z, std::abs(ms.mean - moments[mi].target) / ms.stderr_);
    summary[moments[mi].name] = ms.mean;
    summary[std::string(moments[mi].name) + "_stderr"] = ms.stderr_;
  }
  summary["max_abs_z"] = max_z;
  summary["xi_conserved"] = xi_conserved ? 1 : 0;
  summary["mala_reject_percent"] =
      100.0 * static_cast<double>(state.stats.mala_reject) /
      static_cast<double>(state.stats.mala_steps);
  append_stats(summary, "chain", state.stats);
}

inline void run_invariant_suite(ExperimentConfig& cfg, const std::filesystem::path& out,
                                Json& summary) {
  ModelPtr model = make_model(cfg.model);
  if (model->dim() != 1)
    throw std::invalid_argument("invariant_suite expects a one-dimensional model");
  const InvolutionMap s = InvolutionMap::momentum_reversal(1);
  const RevConfig rc = cfg.resolved_rev();
  RngStream rng(cfg.run.seed, 0);
  CsvWriter csv(out / "checks.csv", {"check", "value", "threshold", "pass"});
  bool all_pass = true;
  const auto record = [&](const std::string& name, double value, double threshold) {
    const bool pass = value <= threshold;
    all_pass = all_pass && pass;
    csv.row({name, csv_num(value), csv_num(threshold), csv_num(pass ? 1LL : 0LL)});
    summary[name] = value;
  };

  // psi_rev involution across small and large steps
  double worst_involution = 0.0;
  for (const double dt : {0.05, 0.5, 1.5}) {
    const GsvResidual gsv(model, dt);
    for (int trial = 0; trial < 100; ++trial) {
      Vector x(2);
      x << 1.3 * (2.0 * rng.uniform01() - 1.0), 2.0 * rng.normal();
      const FlowOutcome once = psi_rev(gsv, s, x, cfg.solver, rc);
      const FlowOutcome twice = psi_rev(gsv, s, once.result, cfg.solver, rc);
      const double err = (twice.result - x).norm() / std::max(x.norm(), 1e-12);
      worst_involution = std::max(
          worst_involution, once.accepted() ? err : ((twice.result - x).norm() == 0.0 ? 0.0 : 1.0));
    }
  }
  record("involution_max_rel_err", worst_involution, 10.0 * rc.eta_rev);

  // volume preservation of accepted flows, via finite differences
  double worst_det = 0.0;
  for (const double dt : {0.01, 0.1}) {
    const GsvResidual gsv(model, dt);
    const ImrResidual imr(model, dt);
    SolverConfig newton_cfg = cfg.solver;
    newton_cfg.backend = SolveBackend::Newton;
    int done = 0;
    for (int trial = 0; trial < 60 && done < 20; ++trial) {
      Vector x(2);
      x << 1.2 * (2.0 * rng.uniform01() - 1.0), rng.normal();
      for (const SchemeResidual* scheme :
           {static_cast<const SchemeResidual*>(&gsv), static_cast<const SchemeResidual*>(&imr)}) {
        const SolveResult center = solve_chain(*scheme, x, newton_cfg);
        if (!center.converged()) continue;
        Matrix jac(2, 2);
        bool ok = true;
        for (int i = 0; i < 2 && ok; ++i) {
          Vector xp = x, xm = x;
          xp[i] += 1e-4;
          xm[i] -= 1e-4;
          const SolveResult rp = solve_chain(*scheme, xp, newton_cfg);
          const SolveResult rm = solve_chain(*scheme, xm, newton_cfg);
          ok = rp.converged() && rm.converged();
          if (ok) jac.col(i) = (rp.chain.back() - rm.chain.back()) / 2e-4;
        }
        if (!ok) continue;
        worst_det = std::max(worst_det, std::abs(std::abs(jac.determinant()) - 1.0));
        ++done;
      }
    }
  }
  record("symplectic_max_err", worst_det, 1e-6);

  // determinism of full chains
  {
    auto scheme = make_scheme("gsv", model, 0.3);
    KernelConfig kc = cfg.kernel;
    kc.dt = 0.3;
    kc.kernel = KernelKind::GHMC;
    const AnyKernel kernel =
        make_hamiltonian_kernel(KernelKind::GHMC, model, scheme, kc, cfg.solver, rc);
    Vector q0(1);
    q0 << cfg.run.q0;
    double max_diff = 0.0;
    RngStream ra(cfg.run.seed, 1), rb(cfg.run.seed, 1);
    ChainState sa(initial_phase_state(*model, q0, ra), std::move(ra));
    ChainState sb(initial_phase_state(*model, q0, rb), std::move(rb));
    for (int i = 0; i < 200; ++i) {
      kernel.step(sa);
      kernel.step(sb);
      max_diff = std::max(max_diff, (sa.x - sb.x).cwiseAbs().maxCoeff());
    }
    record("determinism_max_diff", max_diff, 0.0);
  }

  // backend agreement on converged solves
  {
    const GsvResidual gsv(model, 0.05);
    SolverConfig newton_cfg = cfg.solver;
    newton_cfg.backend = SolveBackend::Newton;
    double max_diff = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
      Vector x(2);
      x << 1.3 * (2.0 * rng.uniform01() - 1.0), 2.0 * rng.normal();
      const SolveResult nw = newton_solve(gsv, x, gsv.predict(x), newton_cfg);
      const SolveResult seq = newton_solve_gsv_sequential(gsv.model(), 0.05, x, newton_cfg);
      const SolveResult fp = fixed_point_solve(gsv, x, newton_cfg);
      if (!(nw.converged() && seq.converged() && fp.converged())) continue;
      max_diff = std::max(max_diff,
                          (stack_chain(nw.chain) - stack_chain(seq.chain)).cwiseAbs().maxCoeff());
      max_diff = std::max(max_diff,
                          (stack_chain(nw.chain) - stack_chain(fp.chain)).cwiseAbs().maxCoeff());
    }
    record("backend_agreement_max_diff", max_diff, 1e-8);
  }

  summary["all_pass"] = all_pass ? 1 : 0;
}

}  // namespace detail

struct ExperimentResult {
  std::filesystem::path out_dir;
  Json summary;
};

/// Run one configured experiment: writes the resolved config, the
/// experiment's CSV artifacts and a summary.csv into the output directory.
inline ExperimentResult run_experiment(ExperimentConfig cfg) {
  cfg.validate();
  const std::filesystem::path out(cfg.run.output_dir);
  std::filesystem::create_directories(out);

  Json summary;
  if (cfg.experiment == "doublewell_histogram")
    detail::run_doublewell_histogram(cfg, out, summary);
  else if (cfg.experiment == "rejection_sweep")
    detail::run_rejection_sweep(cfg, out, summary);
  else if (cfg.experiment == "circle_tv")
    detail::run_circle_tv(cfg, out, summary);
  else if (cfg.experiment == "drift_test")
    detail::run_drift_test(cfg, out, summary);
  else if (cfg.experiment == "ghmala_gaussian")
    detail::run_ghmala_gaussian(cfg, out, summary);
  else if (cfg.experiment == "invariant_suite")
    detail::run_invariant_suite(cfg, out, summary);
  else
    throw std::invalid_argument("unknown experiment: " + cfg.experiment);

  // resolved config after wiring, with every default made explicit
  {
    std::ofstream f(out / "config.resolved.json");
    f << dump_experiment_config(cfg).dump(2) << '\n';
  }
  {
    CsvWriter csv(out / "summary.csv", {"key", "value"});
    for (const auto& item : summary.items()) {
      const Json& v = item.value();
      csv.row({item.key(),
               v.is_number_float() ? csv_num(v.get<double>()) : v.dump()});
    }
  }
  return {out, std::move(summary)};
}

}  // namespace revhmc

#endif
