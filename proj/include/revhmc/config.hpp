#ifndef REVHMC_CONFIG_HPP
#define REVHMC_CONFIG_HPP

#include <revhmc/diffusion.hpp>
#include <revhmc/ghmala_scheme.hpp>
#include <revhmc/hamiltonian.hpp>
#include <revhmc/potentials.hpp>
#include <revhmc/revflow.hpp>
#include <revhmc/samplers.hpp>
#include <revhmc/schemes.hpp>
#include <revhmc/solvers.hpp>

#include <json.hpp>

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

namespace revhmc {

using Json = nlohmann::json;

namespace detail {

inline void check_keys(const Json& j, const std::string& section,
                       const std::set<std::string>& allowed) {
  if (!j.is_object()) throw std::invalid_argument("config section '" + section + "' must be an object");
  for (const auto& item : j.items()) {
    if (!allowed.count(item.key()))
      throw std::invalid_argument("unknown config key: " + section + "." + item.key());
  }
}

inline std::map<std::string, double> parse_params(const Json& j, const std::string& section) {
  std::map<std::string, double> out;
  if (!j.is_object()) throw std::invalid_argument(section + " must be an object of numbers");
  for (const auto& item : j.items()) {
    if (!item.value().is_number())
      throw std::invalid_argument(section + "." + item.key() + " must be a number");
    out[item.key()] = item.value().get<double>();
  }
  return out;
}

inline void check_param_names(const std::string& context,
                              const std::map<std::string, double>& params,
                              const std::set<std::string>& allowed) {
  for (const auto& [name, value] : params) {
    (void)value;
    if (!allowed.count(name))
      throw std::invalid_argument("unknown parameter '" + name + "' for " + context);
  }
}

inline double param_or(const std::map<std::string, double>& params, const std::string& name,
                       double fallback) {
  const auto it = params.find(name);
  return it == params.end() ? fallback : it->second;
}

}  // namespace detail

// ---- potential / diffusion / model factories ----

struct ModelConfig {
  std::string potential = "double_well";
  std::map<std::string, double> potential_params;
  std::string diffusion = "cosine_well";
  std::map<std::string, double> diffusion_params;
};

inline PotentialPtr make_potential(const std::string& name,
                                   std::map<std::string, double>& params) {
  const std::string context = "potential '" + name + "'";
  if (name == "double_well") {
    detail::check_param_names(context, params, {"sigma", "h"});
    const double sigma = detail::param_or(params, "sigma", 0.2);
    const double h = detail::param_or(params, "h", 1.0);
    params = {{"sigma", sigma}, {"h", h}};
    return std::make_shared<DoubleWellPotential>(sigma, h);
  }
  if (name == "circle") {
    detail::check_param_names(context, params, {"stiffness"});
    const double stiffness = detail::param_or(params, "stiffness", 100.0);
    params = {{"stiffness", stiffness}};
    return std::make_shared<CirclePotential>(stiffness);
  }
  if (name == "quadratic") {
    detail::check_param_names(context, params, {"dim", "scale"});
    const double dim = detail::param_or(params, "dim", 1.0);
    const double scale = detail::param_or(params, "scale", 1.0);
    params = {{"dim", dim}, {"scale", scale}};
    return std::make_shared<QuadraticPotential>(
        QuadraticPotential::isotropic(static_cast<Eigen::Index>(dim), scale));
  }
  if (name == "zero") {
    detail::check_param_names(context, params, {"dim"});
    const double dim = detail::param_or(params, "dim", 1.0);
    params = {{"dim", dim}};
    return std::make_shared<ZeroPotential>(static_cast<Eigen::Index>(dim));
  }
  throw std::invalid_argument("unknown potential: " + name);
}

inline DiffusionPtr make_diffusion(const std::string& name,
                                   std::map<std::string, double>& params) {
  const std::string context = "diffusion '" + name + "'";
  if (name == "identity") {
    detail::check_param_names(context, params, {"dim"});
    const double dim = detail::param_or(params, "dim", 1.0);
    params = {{"dim", dim}};
    return std::make_shared<ConstantDiffusion>(
        ConstantDiffusion::identity(static_cast<Eigen::Index>(dim)));
  }
  if (name == "constant") {
    detail::check_param_names(context, params, {"dim", "value"});
    const double dim = detail::param_or(params, "dim", 1.0);
    const double value = detail::param_or(params, "value", 1.0);
    params = {{"dim", dim}, {"value", value}};
    return std::make_shared<ConstantDiffusion>(
        value * Matrix::Identity(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(dim)));
  }
  if (name == "one_plus_q_squared") {
    detail::check_param_names(context, params, {});
    return std::make_shared<OnePlusQSquaredDiffusion>();
  }
  if (name == "cosine_well") {
    detail::check_param_names(context, params, {});
    return std::make_shared<CosineWellDiffusion>();
  }
  if (name == "anisotropic") {
    detail::check_param_names(context, params, {"eps"});
    const double eps = detail::param_or(params, "eps", 0.1);
    params = {{"eps", eps}};
    return std::make_shared<AnisotropicDiffusion>(eps);
  }
  if (name == "isotropic") {
    detail::check_param_names(context, params, {"eps"});
    const double eps = detail::param_or(params, "eps", 0.1);
    params = {{"eps", eps}};
    return std::make_shared<IsotropicDiffusion>(eps);
  }
  throw std::invalid_argument("unknown diffusion: " + name);
}

inline ModelPtr make_model(ModelConfig& cfg) {
  auto potential = make_potential(cfg.potential, cfg.potential_params);
  auto diffusion = make_diffusion(cfg.diffusion, cfg.diffusion_params);
  return rmhmc_hamiltonian(std::move(potential), std::move(diffusion));
}

// ---- full experiment configuration ----

struct RunConfig {
  long long n_iter = 200000;
  int n_realizations = 50;
  int n_bins = 200;
  std::uint64_t seed = 1;
  std::string output_dir = "out";
  double hist_lo = -2.0;
  double hist_hi = 2.0;
  double q0 = -0.5;
  std::vector<double> dt_grid;  // explicit grid; empty means log-spaced below
  double dt_min = 1e-2;
  double dt_max = 2.0;
  int n_dt = 16;
  double slope_fit_lo = 0.02;
  double slope_fit_hi = 0.1;
  std::vector<double> q_points = {0.0, 0.5, 1.0};
};

struct ExperimentConfig {
  std::string experiment = "doublewell_histogram";
  ModelConfig model;
  std::string scheme = "gsv";  // gsv | imr, for the Hamiltonian kernels
  KernelConfig kernel;
  SolverConfig solver;
  double eta_rev = 1e-8;
  std::string check_mode = "auto";  // auto | full_chain | position_only
  RunConfig run;

  /// Reversibility config with "auto" resolved: position-only for GSV with
  /// momentum reversal, full-chain otherwise.
  RevConfig resolved_rev() const {
    RevConfig rc;
    rc.eta_rev = eta_rev;
    if (check_mode == "auto") {
      const bool gsv_momentum = scheme == "gsv" && kernel.kernel != KernelKind::GHMALA;
      rc.check_mode = gsv_momentum ? CheckMode::PositionOnly : CheckMode::FullChain;
    } else {
      rc.check_mode = check_mode_from_string(check_mode);
    }
    return rc;
  }

  void validate() const {
    static const std::set<std::string> experiments = {
        "doublewell_histogram", "rejection_sweep", "circle_tv",
        "drift_test",           "ghmala_gaussian", "invariant_suite"};
    if (!experiments.count(experiment))
      throw std::invalid_argument("unknown experiment: " + experiment);
    if (scheme != "gsv" && scheme != "imr")
      throw std::invalid_argument("unknown scheme: " + scheme);
    if (scheme != "gsv" && solver.backend == SolveBackend::NewtonSequential)
      throw std::invalid_argument("newton_sequential backend requires scheme = gsv");
    if (check_mode != "auto") (void)check_mode_from_string(check_mode);
    kernel.validate();
    solver.validate();
    resolved_rev().validate();
    if (run.n_iter < 1 || run.n_realizations < 1 || run.n_bins < 1)
      throw std::invalid_argument("run: n_iter, n_realizations and n_bins must be >= 1");
    if (!(run.hist_hi > run.hist_lo))
      throw std::invalid_argument("run: hist_hi must exceed hist_lo");
    for (double dt : run.dt_grid)
      if (dt <= 0.0) throw std::invalid_argument("run.dt_grid entries must be > 0");
  }
};

// ---- JSON parsing (strict) and dumping (complete) ----

inline ExperimentConfig parse_experiment_config(const Json& j) {
  ExperimentConfig cfg;
  detail::check_keys(j, "config",
                     {"experiment", "model", "scheme", "kernel", "solver", "rev", "run"});
  if (j.contains("experiment")) cfg.experiment = j.at("experiment").get<std::string>();
  if (j.contains("scheme")) cfg.scheme = j.at("scheme").get<std::string>();

  if (j.contains("model")) {
    const Json& m = j.at("model");
    detail::check_keys(m, "model",
                       {"potential", "potential_params", "diffusion", "diffusion_params"});
    if (m.contains("potential")) cfg.model.potential = m.at("potential").get<std::string>();
    if (m.contains("potential_params"))
      cfg.model.potential_params = detail::parse_params(m.at("potential_params"),
                                                        "model.potential_params");
    if (m.contains("diffusion")) cfg.model.diffusion = m.at("diffusion").get<std::string>();
    if (m.contains("diffusion_params"))
      cfg.model.diffusion_params = detail::parse_params(m.at("diffusion_params"),
                                                        "model.diffusion_params");
  }

  if (j.contains("kernel")) {
    const Json& k = j.at("kernel");
    detail::check_keys(k, "kernel", {"kernel", "dt", "gamma", "fd_update", "dt_mala"});
    if (k.contains("kernel")) cfg.kernel.kernel = kernel_from_string(k.at("kernel"));
    if (k.contains("dt")) cfg.kernel.dt = k.at("dt").get<double>();
    if (k.contains("gamma")) cfg.kernel.gamma = k.at("gamma").get<double>();
    if (k.contains("fd_update")) cfg.kernel.fd_update = fd_update_from_string(k.at("fd_update"));
    if (k.contains("dt_mala")) cfg.kernel.dt_mala = k.at("dt_mala").get<double>();
  }

  if (j.contains("solver")) {
    const Json& s = j.at("solver");
    detail::check_keys(s, "solver",
                       {"backend", "eta_newton", "eta_newton_tilde", "n_newton",
                        "rank_rel_threshold", "fp_max_iter", "fp_tol", "certificate_tol"});
    if (s.contains("backend")) cfg.solver.backend = backend_from_string(s.at("backend"));
    if (s.contains("eta_newton")) cfg.solver.eta_newton = s.at("eta_newton").get<double>();
    if (s.contains("eta_newton_tilde"))
      cfg.solver.eta_newton_tilde = s.at("eta_newton_tilde").get<double>();
    if (s.contains("n_newton")) cfg.solver.n_newton = s.at("n_newton").get<int>();
    if (s.contains("rank_rel_threshold"))
      cfg.solver.rank_rel_threshold = s.at("rank_rel_threshold").get<double>();
    if (s.contains("fp_max_iter")) cfg.solver.fp_max_iter = s.at("fp_max_iter").get<int>();
    if (s.contains("fp_tol")) cfg.solver.fp_tol = s.at("fp_tol").get<double>();
    if (s.contains("certificate_tol"))
      cfg.solver.certificate_tol = s.at("certificate_tol").get<double>();
  }

  if (j.contains("rev")) {
    const Json& r = j.at("rev");
    detail::check_keys(r, "rev", {"eta_rev", "check_mode"});
    if (r.contains("eta_rev")) cfg.eta_rev = r.at("eta_rev").get<double>();
    if (r.contains("check_mode")) cfg.check_mode = r.at("check_mode").get<std::string>();
  }

  if (j.contains("run")) {
    const Json& r = j.at("run");
    detail::check_keys(r, "run",
                       {"n_iter", "n_realizations", "n_bins", "seed", "output_dir", "hist_lo",
                        "hist_hi", "q0", "dt_grid", "dt_min", "dt_max", "n_dt", "slope_fit_lo",
                        "slope_fit_hi", "q_points"});
    if (r.contains("n_iter")) cfg.run.n_iter = r.at("n_iter").get<long long>();
    if (r.contains("n_realizations"))
      cfg.run.n_realizations = r.at("n_realizations").get<int>();
    if (r.contains("n_bins")) cfg.run.n_bins = r.at("n_bins").get<int>();
    if (r.contains("seed")) cfg.run.seed = r.at("seed").get<std::uint64_t>();
    if (r.contains("output_dir")) cfg.run.output_dir = r.at("output_dir").get<std::string>();
    if (r.contains("hist_lo")) cfg.run.hist_lo = r.at("hist_lo").get<double>();
    if (r.contains("hist_hi")) cfg.run.hist_hi = r.at("hist_hi").get<double>();
    if (r.contains("q0")) cfg.run.q0 = r.at("q0").get<double>();
    if (r.contains("dt_grid")) cfg.run.dt_grid = r.at("dt_grid").get<std::vector<double>>();
    if (r.contains("dt_min")) cfg.run.dt_min = r.at("dt_min").get<double>();
    if (r.contains("dt_max")) cfg.run.dt_max = r.at("dt_max").get<double>();
    if (r.contains("n_dt")) cfg.run.n_dt = r.at("n_dt").get<int>();
    if (r.contains("slope_fit_lo")) cfg.run.slope_fit_lo = r.at("slope_fit_lo").get<double>();
    if (r.contains("slope_fit_hi")) cfg.run.slope_fit_hi = r.at("slope_fit_hi").get<double>();
    if (r.contains("q_points")) cfg.run.q_points = r.at("q_points").get<std::vector<double>>();
  }

  cfg.validate();
  return cfg;
}

/// Every tunable consumed anywhere appears in the dump, defaults included.
inline Json dump_experiment_config(const ExperimentConfig& cfg) {
  Json j;
  j["experiment"] = cfg.experiment;
  j["scheme"] = cfg.scheme;
  j["model"] = {{"potential", cfg.model.potential},
                {"potential_params", cfg.model.potential_params},
                {"diffusion", cfg.model.diffusion},
                {"diffusion_params", cfg.model.diffusion_params}};
  j["kernel"] = {{"kernel", to_string(cfg.kernel.kernel)},
                 {"dt", cfg.kernel.dt},
                 {"gamma", cfg.kernel.gamma},
                 {"fd_update", to_string(cfg.kernel.fd_update)},
                 {"dt_mala", cfg.kernel.dt_mala}};
  j["solver"] = {{"backend", to_string(cfg.solver.backend)},
                 {"eta_newton", cfg.solver.eta_newton},
                 {"eta_newton_tilde", cfg.solver.eta_newton_tilde},
                 {"n_newton", cfg.solver.n_newton},
                 {"rank_rel_threshold", cfg.solver.rank_rel_threshold},
                 {"fp_max_iter", cfg.solver.fp_max_iter},
                 {"fp_tol", cfg.solver.fp_tol},
                 {"certificate_tol", cfg.solver.certificate_tol}};
  j["rev"] = {{"eta_rev", cfg.eta_rev}, {"check_mode", cfg.check_mode}};
  j["run"] = {{"n_iter", cfg.run.n_iter},
              {"n_realizations", cfg.run.n_realizations},
              {"n_bins", cfg.run.n_bins},
              {"seed", cfg.run.seed},
              {"output_dir", cfg.run.output_dir},
              {"hist_lo", cfg.run.hist_lo},
              {"hist_hi", cfg.run.hist_hi},
              {"q0", cfg.run.q0},
              {"dt_grid", cfg.run.dt_grid},
              {"dt_min", cfg.run.dt_min},
              {"dt_max", cfg.run.dt_max},
              {"n_dt", cfg.run.n_dt},
              {"slope_fit_lo", cfg.run.slope_fit_lo},
              {"slope_fit_hi", cfg.run.slope_fit_hi},
              {"q_points", cfg.run.q_points}};
  return j;
}

/// Dotted-path override, e.g. "kernel.dt=0.5" or "run.dt_grid=[0.1,0.2]".
/// Values parse as JSON when possible and fall back to strings.
inline void apply_override(Json& j, const std::string& key_value) {
  const auto eq = key_value.find('=');
  if (eq == std::string::npos)
    throw std::invalid_argument("override must look like key=value: " + key_value);
  const std::string path = key_value.substr(0, eq);
  const std::string raw = key_value.substr(eq + 1);

  Json value;
  try {
    value = Json::parse(raw);
  } catch (const Json::parse_error&) {
    value = raw;
  }

  Json* node = &j;
  std::size_t start = 0;
  while (true) {
    const auto dot = path.find('.', start);
    const std::string part = path.substr(start, dot == std::string::npos ? dot : dot - start);
    if (part.empty()) throw std::invalid_argument("bad override path: " + path);
    if (dot == std::string::npos) {
      (*node)[part] = value;
      return;
    }
    node = &(*node)[part];
    start = dot + 1;
  }
}

}  // namespace revhmc

#endif
