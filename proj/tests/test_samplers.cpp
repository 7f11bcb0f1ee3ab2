#include <catch2/catch_amalgamated.hpp>

#include <revhmc/samplers.hpp>

#include "test_util.hpp"

#include <cmath>
#include <memory>

using namespace revhmc;

namespace {

ModelPtr dw_cosine_model() {
  return rmhmc_hamiltonian(std::make_shared<DoubleWellPotential>(0.2, 1.0),
                           std::make_shared<CosineWellDiffusion>());
}

Vector vec2(double a, double b) {
  Vector v(2);
  v << a, b;
  return v;
}

Vector dw_start() { return vec2(-0.5, 0.3); }

}  // namespace

TEST_CASE("Metropolis rule", "[samplers]") {
  SECTION("zero energy difference always accepts") {
    for (double u : {0.0, 0.3, 0.999999}) REQUIRE(mh_accept(u, 0.0));
  }

  SECTION("delta H = ln 2 accepts exactly half of the uniform mass") {
    const double dh = std::log(2.0);
    int accepted = 0;
    const int n = 100000;
    for (int i = 0; i < n; ++i)
      if (mh_accept((i + 0.5) / n, dh)) ++accepted;
    REQUIRE(std::abs(accepted / static_cast<double>(n) - 0.5) < 1e-4);
  }
}

TEST_CASE("midpoint OU update", "[samplers]") {
  Matrix d(1, 1);
  d << 1.0;
  Vector p(1), g(1);
  p << 1.0;
  g << 0.0;

  SECTION("hand-computed value at dt = 1") {
    const Vector out = detail::ou_midpoint_half(d, 1.0, 1.0, p, g);
    REQUIRE(out[0] == Catch::Approx(0.6).epsilon(1e-15));
  }

  SECTION("dt -> 0 freezes the momentum") {
    const Vector out = detail::ou_midpoint_half(d, 1.0, 1e-14, p, g);
    REQUIRE(out[0] == Catch::Approx(1.0).epsilon(1e-12));
  }

  SECTION("midpoint and exact updates share the N(0, D^{-1}) fixed point") {
    Matrix d2(1, 1);
    d2 << 4.0;
    RngStream rng(83);
    for (const bool exact : {false, true}) {
      Vector pp(1);
      pp << 0.0;
      double sum_sq = 0.0;
      const int n = 200000;
      for (int i = 0; i < n; ++i) {
        const Vector gg = rng.normal_vector(1);
        pp = exact ? detail::ou_exact_half(d2, 1.0, 0.5, pp, gg)
                   : detail::ou_midpoint_half(d2, 1.0, 0.5, pp, gg);
        sum_sq += pp[0] * pp[0];
      }
      // stationary variance 1/D = 0.25; generous tolerance for autocorrelation
      REQUIRE(sum_sq / n == Catch::Approx(0.25).margin(0.01));
    }
  }
}

TEST_CASE("MALA log ratio satisfies detailed balance algebra", "[samplers]") {
  auto v = std::make_shared<DoubleWellPotential>(0.2, 1.0);
  RngStream rng(89);
  const double h = 0.07;
  auto log_gauss = [&](const Vector& to, const Vector& from) {
    // log density of to ~ N(from - h grad V(from), 2h I), up to the common constant
    const Vector mean = from - h * v->grad(from);
    return -(to - mean).squaredNorm() / (4.0 * h);
  };
  for (int trial = 0; trial < 100; ++trial) {
    Vector q(1), qp(1);
    q << 1.5 * rng.normal();
    qp << 1.5 * rng.normal();
    const double expected =
        -v->value(qp) + v->value(q) + log_gauss(q, qp) - log_gauss(qp, q);
    const double got = detail::mala_log_ratio(*v, h, q, qp, v->grad(q), v->grad(qp));
    REQUIRE(got == Catch::Approx(expected).margin(1e-12));
  }
}

TEST_CASE("chains are bit-identical for identical config and seed", "[samplers]") {
  auto model = dw_cosine_model();
  auto scheme = std::make_shared<GsvResidual>(model, 0.3);
  KernelConfig kc;
  kc.dt = 0.3;
  RevConfig rc;
  rc.check_mode = CheckMode::PositionOnly;
  const GhmcKernel kernel(model, scheme, kc, SolverConfig{}, rc);

  ChainState a(dw_start(), RngStream(2024, 3));
  ChainState b(dw_start(), RngStream(2024, 3));
  for (int i = 0; i < 200; ++i) {
    kernel.step(a);
    kernel.step(b);
    REQUIRE(a.x[0] == b.x[0]);
    REQUIRE(a.x[1] == b.x[1]);
  }
  REQUIRE(a.stats.mh_reject == b.stats.mh_reject);
  REQUIRE(a.stats.forward_fail == b.stats.forward_fail);
}

TEST_CASE("GHMC step follows the five sub-steps exactly", "[samplers]") {
  auto model = dw_cosine_model();
  auto scheme = std::make_shared<GsvResidual>(model, 0.4);
  KernelConfig kc;
  kc.dt = 0.4;
  kc.gamma = 1.3;
  const SolverConfig sc;
  RevConfig rc;
  rc.check_mode = CheckMode::PositionOnly;
  const GhmcKernel kernel(model, scheme, kc, sc, rc);
  const InvolutionMap s = InvolutionMap::momentum_reversal(1);

  ChainState state(dw_start(), RngStream(11, 0));
  RngStream shadow(11, 0);
  Vector x = dw_start();
  for (int i = 0; i < 100; ++i) {
    kernel.step(state);

    // independent replay of the algorithm
    const Vector q = x.head(1);
    const Matrix d = model->diffusion().eval(q);
    const Vector g1 = shadow.normal_vector(1);
    const Vector p14 = detail::ou_midpoint_half(d, kc.gamma, kc.dt, x.tail(1), g1);
    Vector x_in(2);
    x_in << q, p14;
    const FlowOutcome out = psi_rev(*scheme, s, x_in, sc, rc);
    const double u = shadow.uniform01();
    Vector chosen = x_in;
    if (out.accepted()) {
      const double dh = model->energy(out.result.head(1), out.result.tail(1)) -
                        model->energy(q, p14);
      if (mh_accept(u, dh)) chosen = out.result;
    }
    const Vector g2 = shadow.normal_vector(1);
    const Matrix d2 = model->diffusion().eval(chosen.head(1));
    Vector expected(2);
    expected << chosen.head(1),
        detail::ou_midpoint_half(d2, kc.gamma, kc.dt, Vector(-chosen.tail(1)), g2);

    REQUIRE(state.x[0] == expected[0]);
    REQUIRE(state.x[1] == expected[1]);
    x = state.x;
  }
}

TEST_CASE("GHMC momentum-flip bookkeeping in the zero-noise limit", "[samplers]") {
  auto model = dw_cosine_model();
  const double dt = 0.5;  // large enough to see Metropolis rejections
  auto scheme = std::make_shared<GsvResidual>(model, dt);
  KernelConfig kc;
  kc.dt = dt;
  kc.gamma = 1e-30;  // OU becomes the identity up to machine noise
  RevConfig rc;
  rc.check_mode = CheckMode::PositionOnly;
  const GhmcKernel kernel(model, scheme, kc, SolverConfig{}, rc);
  const InvolutionMap s = InvolutionMap::momentum_reversal(1);

  ChainState state(vec2(-0.5, 0.6), RngStream(4711, 0));
  int rejections = 0, acceptances = 0;
  for (int i = 0; i < 500; ++i) {
    const Vector before = state.x;
    const long long mh_before = state.stats.mh_reject;
    const long long fails_before =
        state.stats.forward_fail + state.stats.backward_fail + state.stats.srev_fail;
    kernel.step(state);
    const bool mh_rejected = state.stats.mh_reject > mh_before;
    const bool flow_failed =
        state.stats.forward_fail + state.stats.backward_fail + state.stats.srev_fail >
        fails_before;
    if (mh_rejected || flow_failed) {
      ++rejections;
      REQUIRE(state.x.tail(1)[0] == Catch::Approx(-before.tail(1)[0]).margin(1e-12));
    } else {
      ++acceptances;
      const FlowOutcome ref = psi_rev(*scheme, s, before, SolverConfig{}, rc);
      REQUIRE(state.x.tail(1)[0] == Catch::Approx(-ref.result.tail(1)[0]).margin(1e-10));
    }
  }
  REQUIRE(rejections > 5);
  REQUIRE(acceptances > 50);
}

TEST_CASE("forward-only kernel is pathwise identical at tiny time steps", "[samplers]") {
  auto model = dw_cosine_model();
  auto scheme = std::make_shared<GsvResidual>(model, 0.02);
  RevConfig rc;
  rc.check_mode = CheckMode::PositionOnly;
  const HmcKernel checked(model, scheme, SolverConfig{}, rc, false);
  const HmcKernel fwd(model, scheme, SolverConfig{}, rc, true);

  ChainState a(dw_start(), RngStream(99, 1));
  ChainState b(dw_start(), RngStream(99, 1));
  for (int i = 0; i < 200; ++i) {
    checked.step(a);
    fwd.step(b);
    REQUIRE(a.x[0] == b.x[0]);
    REQUIRE(a.x[1] == b.x[1]);
  }
}

TEST_CASE("HMC samples the harmonic position marginal", "[samplers]") {
  auto model = separable_hamiltonian(
      std::make_shared<QuadraticPotential>(QuadraticPotential::isotropic(1)));
  auto scheme = std::make_shared<GsvResidual>(model, 0.5);
  const HmcKernel kernel(model, scheme, SolverConfig{}, RevConfig{});
  ChainState state(vec2(0.0, 0.0), RngStream(101, 0));
  double sum = 0.0, sum_sq = 0.0;
  const int n = 50000;
  for (int i = 0; i < n; ++i) {
    kernel.step(state);
    sum += state.x[0];
    sum_sq += state.x[0] * state.x[0];
  }
  REQUIRE(sum / n == Catch::Approx(0.0).margin(0.05));
  REQUIRE(sum_sq / n == Catch::Approx(1.0).margin(0.05));
}

TEST_CASE("GHMALA conserves |xi| and explores the Gaussian", "[samplers]") {
  auto v = std::make_shared<QuadraticPotential>(QuadraticPotential::isotropic(2));
  auto gamma = std::make_shared<RotatedGradField>(v);
  KernelConfig kc;
  kc.kernel = KernelKind::GHMALA;
  kc.dt = 0.2;
  const GhmalaKernel kernel(v, gamma, kc, SolverConfig{}, RevConfig{});

  Vector x0(3);
  x0 << 0.5, -0.5, 1.0;
  ChainState state(x0, RngStream(103, 0));
  double sum_q1 = 0.0;
  const int n = 40000;
  for (int i = 0; i < n; ++i) {
    kernel.step(state);
    REQUIRE(std::abs(state.x[2]) == 1.0);  // only sign flips ever touch xi
    sum_q1 += state.x[0];
  }
  REQUIRE(sum_q1 / n == Catch::Approx(0.0).margin(0.06));
  REQUIRE(state.stats.mala_steps == n);
  REQUIRE(state.stats.mala_reject < n / 2);
}

TEST_CASE("KernelConfig validation", "[samplers]") {
  KernelConfig kc;
  kc.dt = -0.1;
  REQUIRE_THROWS_AS(kc.validate(), std::invalid_argument);
  kc = KernelConfig{};
  kc.kernel = KernelKind::GHMC;
  kc.gamma = 0.0;
  REQUIRE_THROWS_AS(kc.validate(), std::invalid_argument);
  kc = KernelConfig{};
  kc.kernel = KernelKind::HMC;
  kc.gamma = 0.0;  // gamma unused by plain HMC
  REQUIRE_NOTHROW(kc.validate());
}

TEST_CASE("GHMC with the exact OU update samples the harmonic target", "[samplers]") {
  auto model = separable_hamiltonian(
      std::make_shared<QuadraticPotential>(QuadraticPotential::isotropic(1)));
  auto scheme = std::make_shared<GsvResidual>(model, 0.4);
  KernelConfig kc;
  kc.dt = 0.4;
  kc.gamma = 1.0;
  kc.fd_update = FdUpdate::ExactOU;
  const GhmcKernel kernel(model, scheme, kc, SolverConfig{}, RevConfig{});
  ChainState state(vec2(0.0, 0.0), RngStream(113, 0));
  double sum_q2 = 0.0, sum_p2 = 0.0;
  const int n = 40000;
  for (int i = 0; i < n; ++i) {
    kernel.step(state);
    sum_q2 += state.x[0] * state.x[0];
    sum_p2 += state.x[1] * state.x[1];
  }
  REQUIRE(sum_q2 / n == Catch::Approx(1.0).margin(0.08));
  REQUIRE(sum_p2 / n == Catch::Approx(1.0).margin(0.08));
}

TEST_CASE("exact OU update requires a diagonal diffusion", "[samplers]") {
  auto model = rmhmc_hamiltonian(std::make_shared<CirclePotential>(),
                                 std::make_shared<AnisotropicDiffusion>(0.1));
  auto scheme = std::make_shared<GsvResidual>(model, 0.1);
  KernelConfig kc;
  kc.dt = 0.1;
  kc.fd_update = FdUpdate::ExactOU;
  REQUIRE_THROWS_AS(GhmcKernel(model, scheme, kc, SolverConfig{}, RevConfig{}),
                    std::invalid_argument);
}
