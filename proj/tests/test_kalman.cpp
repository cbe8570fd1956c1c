#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "stealthsim/errors.hpp"
#include "stealthsim/kalman.hpp"
#include "test_support.hpp"

using namespace stealthsim;
using testsupport::example1;
using testsupport::example2;
using testsupport::golden_matrix;
using testsupport::golden_scalar;

TEST_CASE("scalar filter design matches the closed form") {
  StateSpaceModel m;
  m.A = Matrix::Constant(1, 1, 1.0);
  m.B = Matrix::Constant(1, 1, 1.0);
  m.C = Matrix::Constant(1, 1, 1.0);
  m.Sigma_w = Matrix::Constant(1, 1, 1.0);
  m.Sigma_v = Matrix::Constant(1, 1, 1.0);
  const auto d = design_filter(m);
  const double phi = 0.5 * (1.0 + std::sqrt(5.0));
  CHECK(std::abs(d.P(0, 0) - phi) < 1e-10);
  CHECK(std::abs(d.Sigma_z(0, 0) - (phi + 1.0)) < 1e-10);
  CHECK(std::abs(d.K(0, 0) - phi / (phi + 1.0)) < 1e-10);
  CHECK(std::abs(d.baseline_mse - phi / (phi + 1.0)) < 1e-10);
}

TEST_CASE("example 1 filter design matches the golden records") {
  const auto m = example1();
  const auto d = design_filter(m);
  CHECK((d.P - golden_matrix("ex1_P")).norm() < 1e-9);
  CHECK((d.K - golden_matrix("ex1_K")).norm() < 1e-9);
  CHECK((d.Sigma_z - golden_matrix("ex1_Sigma_z")).norm() < 1e-9);
  CHECK(std::abs(d.baseline_mse - golden_scalar("ex1_tr_pw")) < 1e-9);
  CHECK(filter_dare_residual(m, d) < 1e-10);
}

TEST_CASE("example 2 filter design matches the golden records") {
  const auto m = example2();
  const auto d = design_filter(m);
  CHECK((d.P - golden_matrix("ex2_P")).norm() < 1e-9);
  CHECK((d.K - golden_matrix("ex2_K")).norm() < 1e-9);
  CHECK((d.Sigma_z - golden_matrix("ex2_Sigma_z")).norm() < 1e-9);
  CHECK(std::abs(d.baseline_mse - golden_scalar("ex2_tr_pw")) < 1e-9);
  CHECK(filter_dare_residual(m, d) < 1e-10);
}

TEST_CASE("designed filter closes the loop stably") {
  for (const auto& m : {example1(), example2()}) {
    const auto d = design_filter(m);
    const Matrix F = m.A - d.K * m.C;
    CHECK(spectral_radius(F) < 1.0);
    // Lyapunov convergence is the library's own stability certificate.
    CHECK_NOTHROW(solve_dlyap(F, Matrix::Identity(m.nx(), m.nx())));
  }
}

TEST_CASE("filter step reproduces the innovation identity") {
  const auto m = example1();
  const auto d = design_filter(m);
  auto st = make_filter_state(m);
  std::mt19937 rng(3);
  std::normal_distribution<double> g(0.0, 1.0);
  Vector x = Vector::Zero(m.nx());
  for (int k = 0; k < 20; ++k) {
    Vector u(m.nu()), w(m.nx()), v(m.ny());
    for (int i = 0; i < m.nu(); ++i) u(i) = g(rng);
    for (int i = 0; i < m.nx(); ++i) w(i) = g(rng);
    for (int i = 0; i < m.ny(); ++i) v(i) = g(rng);
    const Vector y = m.C * x + v;
    const Vector xhat_before = st.xhat;
    const Vector z = filter_step(m, d, &st, y, u);
    CHECK((z - (y - m.C * xhat_before)).norm() < 1e-12);
    // One-step predictor recursion.
    const Vector expected = m.A * xhat_before + m.B * u + d.K * z;
    CHECK((st.xhat - expected).norm() < 1e-12);
    x = m.A * x + m.B * u + w;
  }
  CHECK_THROWS_AS(filter_step(m, d, &st, Vector::Zero(1), Vector::Zero(2)),
                  DimensionMismatch);
}

TEST_CASE("weight matrix ties to the innovation covariance") {
  const auto m = example2();
  const auto d = design_filter(m);
  // W = C^T Sigma_z^{-1} C, so Sigma_z W-weighted trace of C P C^T matches
  // tr(P W) through the cyclic property.
  const Matrix lhs = d.Sigma_z * pseudoinverse(d.Sigma_z);
  CHECK((lhs - Matrix::Identity(m.ny(), m.ny())).norm() < 1e-9);
  const double tr1 = (d.P * d.W).trace();
  const double tr2 =
      (m.C * d.P * m.C.transpose() * pseudoinverse(d.Sigma_z)).trace();
  CHECK(std::abs(tr1 - tr2) < 1e-10);
}
