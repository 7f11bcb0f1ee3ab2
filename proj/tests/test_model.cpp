#include <catch2/catch_amalgamated.hpp>

#include <revhmc/diffusion.hpp>
#include <revhmc/hamiltonian.hpp>
#include <revhmc/potentials.hpp>
#include <revhmc/rng.hpp>

#include "test_util.hpp"

#include <cmath>
#include <memory>

using namespace revhmc;

namespace {

ModelPtr double_well_cosine_model(double sigma = 0.2, double h = 1.0) {
  return rmhmc_hamiltonian(std::make_shared<DoubleWellPotential>(sigma, h),
                           std::make_shared<CosineWellDiffusion>());
}

}  // namespace

TEST_CASE("PhasePoint validates its invariants", "[model]") {
  Vector q(2), p(2);
  q << 1.0, 2.0;
  p << 0.0, -1.0;
  const PhasePoint x(q, p);
  REQUIRE(x.dim() == 2);
  REQUIRE(x.flat().size() == 4);

  Vector p3(3);
  p3.setZero();
  REQUIRE_THROWS_AS(PhasePoint(q, p3), std::invalid_argument);
  Vector bad = p;
  bad[0] = std::nan("");
  REQUIRE_THROWS_AS(PhasePoint(q, bad), std::invalid_argument);
}

TEST_CASE("RMHMC Hamiltonian matches direct evaluation", "[model]") {
  Vector q(1), p(1);

  SECTION("separable reduction: D = 1, V = q^2/2") {
    auto model = rmhmc_hamiltonian(
        std::make_shared<QuadraticPotential>(QuadraticPotential::isotropic(1)),
        std::make_shared<ConstantDiffusion>(ConstantDiffusion::identity(1)));
    q << 1.0;
    p << 1.0;
    REQUIRE(model->energy(q, p) == Catch::Approx(1.0).margin(1e-15));
  }

  SECTION("D = 1 + q^2, V = 0") {
    auto model = rmhmc_hamiltonian(std::make_shared<ZeroPotential>(1),
                                   std::make_shared<OnePlusQSquaredDiffusion>());
    q << 1.0;
    p << 1.0;
    REQUIRE(model->energy(q, p) == Catch::Approx(-0.5 * std::log(2.0) + 1.0).epsilon(1e-12));
    REQUIRE(model->grad_q(q, p)[0] == Catch::Approx(0.5).epsilon(1e-12));
    REQUIRE(model->grad_p(q, p)[0] == Catch::Approx(2.0).epsilon(1e-12));
  }
}

TEST_CASE("H is exactly even in the momenta", "[model]") {
  auto model = double_well_cosine_model();
  RngStream rng(7);
  for (int i = 0; i < 1000; ++i) {
    Vector q(1), p(1);
    q << 2.0 * rng.uniform01() - 1.0;
    p << 3.0 * rng.normal();
    REQUIRE(model->energy(q, p) == model->energy(q, -p));
  }
}

TEST_CASE("gradients agree with finite differences of H", "[model]") {
  struct Case {
    ModelPtr model;
    double q_scale;
  };
  const std::vector<Case> cases = {
      {double_well_cosine_model(), 1.5},
      {rmhmc_hamiltonian(std::make_shared<ZeroPotential>(1),
                         std::make_shared<OnePlusQSquaredDiffusion>()),
       2.0},
      {rmhmc_hamiltonian(std::make_shared<CirclePotential>(),
                         std::make_shared<AnisotropicDiffusion>(0.1)),
       0.0},  // handled below: stay away from the origin
      {rmhmc_hamiltonian(std::make_shared<CirclePotential>(),
                         std::make_shared<IsotropicDiffusion>(0.1)),
       1.0}};

  RngStream rng(11);
  for (const auto& c : cases) {
    const Eigen::Index m = c.model->dim();
    for (int trial = 0; trial < 100; ++trial) {
      Vector q(m), p(m);
      if (c.q_scale == 0.0) {
        const double theta = 2.0 * M_PI * rng.uniform01();
        const double r = 0.7 + 0.6 * rng.uniform01();
        q << r * std::cos(theta), r * std::sin(theta);
      } else {
        for (Eigen::Index i = 0; i < m; ++i) q[i] = c.q_scale * (2.0 * rng.uniform01() - 1.0);
      }
      for (Eigen::Index i = 0; i < m; ++i) p[i] = rng.normal();

      const Vector gq = c.model->grad_q(q, p);
      const Vector gp = c.model->grad_p(q, p);
      const Vector gq_fd = test::fd_gradient(
          [&](const Vector& qq) { return c.model->energy(qq, p); }, q, 1e-5);
      const Vector gp_fd = test::fd_gradient(
          [&](const Vector& pp) { return c.model->energy(q, pp); }, p, 1e-5);
      const double scale_q = std::max(1.0, gq.norm());
      const double scale_p = std::max(1.0, gp.norm());
      REQUIRE((gq - gq_fd).norm() / scale_q < 1e-6);
      REQUIRE((gp - gp_fd).norm() / scale_p < 1e-6);
    }
  }
}

TEST_CASE("Hessian blocks agree with finite differences of the gradients", "[model]") {
  auto model = rmhmc_hamiltonian(std::make_shared<CirclePotential>(),
                                 std::make_shared<AnisotropicDiffusion>(0.1));
  RngStream rng(13);
  for (int trial = 0; trial < 25; ++trial) {
    const double theta = 2.0 * M_PI * rng.uniform01();
    const double r = 0.7 + 0.6 * rng.uniform01();
    Vector q(2), p(2);
    q << r * std::cos(theta), r * std::sin(theta);
    p << rng.normal(), rng.normal();

    const Matrix h_full = model->hessian(q, p);
    const Matrix hqq_fd = test::fd_jacobian(
        [&](const Vector& qq) { return model->grad_q(qq, p); }, q);
    const Matrix hqp_fd = test::fd_jacobian(
        [&](const Vector& pp) { return model->grad_q(q, pp); }, p);
    const Matrix hpq_fd = test::fd_jacobian(
        [&](const Vector& qq) { return model->grad_p(qq, p); }, q);
    const Matrix hpp_fd = test::fd_jacobian(
        [&](const Vector& pp) { return model->grad_p(q, pp); }, p);
    REQUIRE((h_full.topLeftCorner(2, 2) - hqq_fd).norm() < 1e-5 * std::max(1.0, hqq_fd.norm()));
    REQUIRE((h_full.topRightCorner(2, 2) - hqp_fd).norm() < 1e-6 * std::max(1.0, hqp_fd.norm()));
    REQUIRE((h_full.bottomLeftCorner(2, 2) - hpq_fd).norm() < 1e-6 * std::max(1.0, hpq_fd.norm()));
    REQUIRE((h_full.bottomRightCorner(2, 2) - hpp_fd).norm() <
            1e-6 * std::max(1.0, hpp_fd.norm()));
  }
}

TEST_CASE("divergence matches finite differences of D's columns", "[model]") {
  const std::vector<DiffusionPtr> fields = {std::make_shared<OnePlusQSquaredDiffusion>(),
                                            std::make_shared<CosineWellDiffusion>(),
                                            std::make_shared<AnisotropicDiffusion>(0.1)};
  RngStream rng(17);
  for (const auto& field : fields) {
    const Eigen::Index m = field->dim();
    for (int trial = 0; trial < 50; ++trial) {
      Vector q(m);
      if (m == 2) {
        const double theta = 2.0 * M_PI * rng.uniform01();
        const double r = 0.7 + 0.6 * rng.uniform01();
        q << r * std::cos(theta), r * std::sin(theta);
      } else {
        q[0] = 2.0 * (2.0 * rng.uniform01() - 1.0);
      }
      Vector div_fd(m);
      for (Eigen::Index i = 0; i < m; ++i) {
        double acc = 0.0;
        for (Eigen::Index j = 0; j < m; ++j) {
          Vector qp = q, qm = q;
          qp[j] += 1e-5;
          qm[j] -= 1e-5;
          acc += (field->eval(qp)(i, j) - field->eval(qm)(i, j)) / 2e-5;
        }
        div_fd[i] = acc;
      }
      const Vector div = field->divergence(q);
      REQUIRE((div - div_fd).norm() < 1e-6 * std::max(1.0, div_fd.norm()));
    }
  }
}

TEST_CASE("diffusion hessians match finite differences of the grads", "[model]") {
  const std::vector<DiffusionPtr> fields = {std::make_shared<OnePlusQSquaredDiffusion>(),
                                            std::make_shared<CosineWellDiffusion>(),
                                            std::make_shared<AnisotropicDiffusion>(0.1)};
  RngStream rng(19);
  for (const auto& field : fields) {
    const Eigen::Index m = field->dim();
    for (int trial = 0; trial < 20; ++trial) {
      Vector q(m);
      if (m == 2) {
        const double theta = 2.0 * M_PI * rng.uniform01();
        q << (0.8 + 0.5 * rng.uniform01()) * std::cos(theta),
            (0.8 + 0.5 * rng.uniform01()) * std::sin(theta);
      } else {
        q[0] = 1.5 * (2.0 * rng.uniform01() - 1.0);
      }
      const auto hess = field->hessian(q);
      for (Eigen::Index i = 0; i < m; ++i) {
        for (Eigen::Index j = 0; j < m; ++j) {
          Vector qp = q, qm = q;
          qp[j] += 1e-5;
          qm[j] -= 1e-5;
          const Matrix fd = (field->grad(qp)[i] - field->grad(qm)[i]) / 2e-5;
          REQUIRE((hess[i * m + j] - fd).norm() < 1e-5 * std::max(1.0, fd.norm()));
        }
      }
    }
  }
}

TEST_CASE("anisotropic and isotropic annulus diffusions", "[model]") {
  const AnisotropicDiffusion aniso(0.1);
  const IsotropicDiffusion iso(0.1);
  Vector q(2);
  q << 1.0, 0.0;

  Matrix expected(2, 2);
  expected << 0.1, 0.0, 0.0, 1.1;
  REQUIRE((aniso.eval(q) - expected).norm() < 1e-14);
  REQUIRE((iso.eval(q) - 1.1 * Matrix::Identity(2, 2)).norm() == 0.0);

  RngStream rng(23);
  for (int trial = 0; trial < 50; ++trial) {
    const double theta = 2.0 * M_PI * rng.uniform01();
    const double r = 0.3 + 2.0 * rng.uniform01();
    q << r * std::cos(theta), r * std::sin(theta);
    Eigen::SelfAdjointEigenSolver<Matrix> es(aniso.eval(q));
    REQUIRE(es.eigenvalues()[0] == Catch::Approx(0.1).epsilon(1e-10));
    REQUIRE(es.eigenvalues()[1] == Catch::Approx(1.1).epsilon(1e-10));
  }

  q.setZero();
  REQUIRE_THROWS_AS(aniso.eval(q), std::domain_error);
}

TEST_CASE("double well has two symmetric minima and a barrier at zero", "[model]") {
  const DoubleWellPotential v(0.2, 1.0);
  Vector q(1);
  auto val = [&](double x) {
    Vector qq(1);
    qq << x;
    return v.value(qq);
  };
  auto deriv = [&](double x) {
    Vector qq(1);
    qq << x;
    return v.grad(qq)[0];
  };
  // V' changes sign across a minimum in each half line; V''(0) < 0
  REQUIRE(deriv(0.5) < 0.0);
  REQUIRE(deriv(1.5) > 0.0);
  REQUIRE(deriv(-0.5) > 0.0);
  REQUIRE(deriv(-1.5) < 0.0);
  q << 0.0;
  REQUIRE(v.hessian(q)(0, 0) < 0.0);
  REQUIRE(val(0.3) == Catch::Approx(val(-0.3)).epsilon(1e-14));
  REQUIRE(val(0.0) > val(1.0));
}

TEST_CASE("momentum sampling", "[model]") {
  Vector q(1);
  q << 0.3;

  SECTION("identity covariance returns the raw Gaussian draw") {
    auto model = separable_hamiltonian(std::make_shared<ZeroPotential>(1));
    RngStream rng(5), ref(5);
    const Vector p = sample_momentum(*model, q, rng);
    REQUIRE(p[0] == ref.normal());
  }

  SECTION("scalar D = 4 halves the draw") {
    auto model = rmhmc_hamiltonian(
        std::make_shared<ZeroPotential>(1),
        std::make_shared<ConstantDiffusion>(Matrix::Constant(1, 1, 4.0)));
    RngStream rng(5), ref(5);
    const Vector p = sample_momentum(*model, q, rng);
    REQUIRE(p[0] == ref.normal() / 2.0);
  }

  SECTION("sample covariance matches D^{-1} for D = diag(1, 4)") {
    Matrix d = Matrix::Zero(2, 2);
    d(0, 0) = 1.0;
    d(1, 1) = 4.0;
    auto model = rmhmc_hamiltonian(std::make_shared<ZeroPotential>(2),
                                   std::make_shared<ConstantDiffusion>(d));
    Vector q2 = Vector::Zero(2);
    RngStream rng(29);
    const int n = 100000;
    Matrix sum = Matrix::Zero(2, 2);
    for (int i = 0; i < n; ++i) {
      const Vector p = sample_momentum(*model, q2, rng);
      sum += p * p.transpose();
    }
    const Matrix cov = sum / n;
    // 3 standard errors: var(p_i^2) = 2 sigma_i^4, var(p_1 p_2) = sigma_1^2 sigma_2^2
    REQUIRE(std::abs(cov(0, 0) - 1.0) < 3.0 * std::sqrt(2.0 / n));
    REQUIRE(std::abs(cov(1, 1) - 0.25) < 3.0 * 0.25 * std::sqrt(2.0 / n));
    REQUIRE(std::abs(cov(0, 1)) < 3.0 * std::sqrt(0.25 / n));
  }
}

TEST_CASE("separable case has p-free grad_q and exact grad_p", "[model]") {
  Matrix a(1, 1), d(1, 1);
  a << 1.0;
  d << 2.5;
  auto model = rmhmc_hamiltonian(std::make_shared<QuadraticPotential>(a),
                                 std::make_shared<ConstantDiffusion>(d));
  REQUIRE(model->separable());
  Vector q(1), p1(1), p2(1);
  q << 0.7;
  p1 << 1.3;
  p2 << -42.0;
  REQUIRE(model->grad_q(q, p1)[0] == model->grad_q(q, p2)[0]);
  REQUIRE(model->grad_p(q, p1)[0] == 2.5 * 1.3);
}
