#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "subcurv/lq.hpp"
#include "subcurv/zoo.hpp"

using namespace subcurv;

namespace {

double rel_err(double got, double want) {
  return std::abs(got - want) / std::max(std::abs(want), 1e-6);
}

// One-row diagram of length m.
YoungDiagram one_row(int m) { return YoungDiagram(std::vector<int>(m, 1)); }

}  // namespace

TEST_SUITE_BEGIN("lq");

TEST_CASE("shift problem of a diagram") {
  // Two rows of length 2 and 1: the diagram with column heights (2, 1).
  const YoungDiagram diagram({2, 1});
  const LQProblem lq = LQProblem::from_young(diagram, {3.0, 5.0});
  REQUIRE(lq.dim() == 3);
  REQUIRE(lq.controls() == 2);

  // Coordinates: (1,1), (1,2), (2,1).  The drift shifts within the first
  // row and kills last columns; controls enter the first column of each row.
  Mat A = Mat::Zero(3, 3);
  A(1, 0) = 1.0;
  CHECK((lq.A - A).norm() == 0.0);
  Mat B = Mat::Zero(3, 2);
  B(0, 0) = 1.0;
  B(2, 1) = 1.0;
  CHECK((lq.B - B).norm() == 0.0);
  Mat q = Mat::Zero(3, 3);
  q(0, 0) = 3.0;
  q(1, 1) = 5.0;
  q(2, 2) = 3.0;
  CHECK((lq.q - q).norm() == 0.0);

  const Mat H = lq.hamiltonian();
  REQUIRE(H.rows() == 6);
  CHECK((H.topLeftCorner(3, 3) + lq.A.transpose()).norm() == 0.0);
  CHECK((H.topRightCorner(3, 3) + lq.q).norm() == 0.0);
  CHECK((H.bottomLeftCorner(3, 3) - lq.B * lq.B.transpose()).norm() == 0.0);
  CHECK((H.bottomRightCorner(3, 3) - lq.A).norm() == 0.0);

  // The flow of the Hamiltonian matrix is symplectic; check the invariant
  // numerically through the integrator used by the conjugate-time scan.
  CHECK_THROWS_AS(LQProblem::from_young(diagram, {1.0}), Error);
}

TEST_CASE("conjugate times of the one-row comparison problems") {
  // Length 1, potential k: first conjugate time pi / sqrt(k).
  for (double k : {0.25, 1.0, 4.0, 9.0}) {
    const LQProblem lq = LQProblem::from_young(one_row(1), {k});
    const auto tc = conjugate_time(lq, 2.5 * M_PI / std::sqrt(k));
    REQUIRE(tc.has_value());
    CHECK(rel_err(*tc, M_PI / std::sqrt(k)) < 1e-8);
  }

  // Length 2, potential (k, 0): first conjugate time 2 pi / sqrt(k).
  for (double k : {1.0, 4.0}) {
    const LQProblem lq = LQProblem::from_young(one_row(2), {k, 0.0});
    const auto tc = conjugate_time(lq, 2.6 * M_PI / std::sqrt(k));
    REQUIRE(tc.has_value());
    CHECK(rel_err(*tc, 2.0 * M_PI / std::sqrt(k)) < 1e-8);
  }

  // Zero and negative potentials admit no conjugate point.
  CHECK_FALSE(conjugate_time(LQProblem::from_young(one_row(1), {0.0}), 30.0));
  CHECK_FALSE(conjugate_time(LQProblem::from_young(one_row(1), {-1.0}), 30.0));
  CHECK_FALSE(
      conjugate_time(LQProblem::from_young(one_row(2), {0.0, 0.0}), 30.0));
}

TEST_CASE("scaling and monotonicity of conjugate times") {
  // Independent oracle: with q = diag(1, 1) the trajectories solve
  // x'''' + x'' - x = 0, and the Wronskian of the solution family with
  // x(0) = x'(0) = 0 (one trigonometric and one hyperbolic mode) first
  // vanishes at 4.123178870996829.
  const auto t1 = conjugate_time(LQProblem::from_young(one_row(2), {1.0, 1.0}), 20.0);
  REQUIRE(t1.has_value());
  CHECK(rel_err(*t1, 4.123178870996829) < 1e-8);

  // Column b carries weight 2b under the time dilation:
  // t_c(c^2 k_1, c^4 k_2) = t_c(k_1, k_2) / c.
  const auto t2 = conjugate_time(LQProblem::from_young(one_row(2), {4.0, 16.0}), 10.0);
  REQUIRE(t2.has_value());
  CHECK(rel_err(*t2, *t1 / 2.0) < 1e-8);

  // Larger potential, earlier conjugate point.
  const auto t3 = conjugate_time(LQProblem::from_young(one_row(2), {1.0, 0.0}), 20.0);
  REQUIRE(t3.has_value());
  CHECK(*t1 < *t3);
  CHECK(*t3 == doctest::Approx(2.0 * M_PI).epsilon(1e-9));

  // Independent closed-form oracle for a mixed-sign potential: the row
  // problem with q = diag(11/8, -45/256) solves x'''' + k1 x'' - k2 x = 0,
  // and the first vanishing of the solution family with x(0) = x'(0) = 0
  // happens at 8.512361155650970 (fundamental-basis Wronskian).
  const auto tz = conjugate_time(
      LQProblem::from_young(one_row(2), {11.0 / 8.0, -45.0 / 256.0}), 10.0);
  REQUIRE(tz.has_value());
  CHECK(rel_err(*tz, 8.512361155650970) < 1e-8);
}

TEST_CASE("degenerate problems are rejected") {
  // No controls at all.
  LQProblem lq = LQProblem::from_young(one_row(2), {1.0, 0.0});
  lq.B.setZero();
  CHECK_THROWS_AS((void)conjugate_time(lq, 5.0), Error);
  try {
    (void)conjugate_time(lq, 5.0);
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Degenerate);
  }

  // One uncontrollable row keeps the endpoint determinant identically zero.
  LQProblem two = LQProblem::from_young(YoungDiagram({2}), {1.0});
  two.B.col(1).setZero();
  CHECK_THROWS_AS((void)conjugate_time(two, 5.0), Error);

  CHECK_THROWS_AS(
      (void)conjugate_time(LQProblem::from_young(one_row(1), {1.0}), -1.0),
      Error);
}

TEST_CASE("compactness polynomial test") {
  // Length 1: bounded exactly when the constant is positive.
  CHECK(bm_polynomial_check({1.0}).bounded);
  CHECK(bm_polynomial_check({2.5}).bounded);
  CHECK_FALSE(bm_polynomial_check({0.0}).bounded);
  CHECK_FALSE(bm_polynomial_check({-1.0}).bounded);
  {
    const auto r = bm_polynomial_check({1.0});
    REQUIRE(r.roots.size() == 1);
    CHECK(std::abs(r.roots[0] - std::complex<double>(-1.0, 0.0)) < 1e-12);
  }

  // Length 2 profiles: (k1, k2) gives y^2 + k1 y - k2.
  CHECK(bm_polynomial_check({1.0, 0.0}).bounded);   // roots 0 and -1
  CHECK(bm_polynomial_check({0.0, 1.0}).bounded);   // roots +-1
  CHECK_FALSE(bm_polynomial_check({0.0, 0.0}).bounded);
  CHECK_FALSE(bm_polynomial_check({0.0, -1.0}).bounded);  // roots +-i
  CHECK_FALSE(bm_polynomial_check({-1.0, 0.0}).bounded);  // roots 0, +1
  // Double root at -1 is not simple: (y + 1)^2.
  CHECK_FALSE(bm_polynomial_check({2.0, -1.0}).bounded);
  // Slightly split double root becomes simple again.
  CHECK(bm_polynomial_check({2.0, -0.99}).bounded);
  // A tiny simple negative root far from the others.
  CHECK(bm_polynomial_check({-1.0, 0.01}).bounded);

  CHECK_THROWS_AS(bm_polynomial_check({}), Error);
}

TEST_CASE("heisenberg: structure problem and variational conjugate time") {
  auto zoo = heisenberg();
  Connection conn = Connection::group(zoo.model);
  const double h = 1.3;
  Vec x0 = Vec::Zero(3), H0(3);
  H0 << 1.0, 0.0, h;
  const CovectorPoint p{x0, H0};

  // The structure problem carries the curvature matrix diag(h^2, 0, 0) on
  // the cells (rotation, its shift, velocity).
  const LQProblem lq = lq_from_canonical(conn, p);
  REQUIRE(lq.dim() == 3);
  Mat expect = Mat::Zero(3, 3);
  expect(0, 0) = h * h;
  CHECK((lq.q - expect).norm() < 1e-6);

  const double want = 2.0 * M_PI / h;
  const auto tc = conjugate_time(lq, 1.2 * want);
  REQUIRE(tc.has_value());
  CHECK(rel_err(*tc, want) < 1e-7);

  // Variational check straight on the geodesic flow: the endpoint Jacobian
  // first degenerates at the same time.
  const auto tv = geodesic_conjugate_time(conn, p, 1.15 * want, 1e-7);
  REQUIRE(tv.has_value());
  CHECK(rel_err(*tv, want) < 2e-4);

  // Vertical-only momenta have no geodesic.
  Vec Hv = Vec::Zero(3);
  Hv[2] = 1.0;
  CHECK_THROWS_AS((void)geodesic_conjugate_time(conn, {x0, Hv}, 1.0), Error);
}

TEST_CASE("quaternionic group: structure problem and variational time") {
  auto zoo = quaternionic_heisenberg(1);
  Connection conn = Connection::group(zoo.model);
  const double h = 1.2;
  const int n = 7;
  Vec x0 = Vec::Zero(n), H0 = Vec::Zero(n);
  H0[0] = 1.0;
  H0[4] = h;
  const CovectorPoint p{x0, H0};

  const LQProblem lq = lq_from_canonical(conn, p);
  REQUIRE(lq.dim() == n);

  // Structure of the curvature matrix.  Cells in row-major box order:
  // (rotation, its shift), two copies of (z-plane, its shift), velocity.
  // The distinguished rotation row decouples and carries h^2; the two
  // z-plane rows carry 11/8 h^2 and -45/256 h^4 on the diagonal plus an
  // antisymmetric adjacent-column coupling of magnitude 3/16 h^3 between
  // each other; the shifted rotation cell and the velocity are flat.
  const double h2 = h * h;
  CHECK(std::abs(lq.q(0, 0) - h2) < 1e-6);
  CHECK((lq.q.row(0).tail(6)).norm() < 1e-6);   // rotation row decouples
  CHECK(lq.q.row(1).norm() < 1e-6);             // shifted rotation cell
  CHECK(lq.q.row(6).norm() < 1e-6);             // velocity cell
  CHECK(rel_err(lq.q.trace(), 15.0 / 4.0 * h2 - 45.0 / 128.0 * h2 * h2) <
        1e-6);

  // Eigenvalues of the coupled z-block: (a+b)/2 +- sqrt((a-b)^2/4 + c^2)
  // with a = 11/8 h^2, b = -45/256 h^4, c = 3/16 h^3, each twice.
  const double za = 11.0 / 8.0 * h2, zb = -45.0 / 256.0 * h2 * h2,
               zc = 3.0 / 16.0 * h2 * h;
  const double mid = 0.5 * (za + zb),
               rad = std::sqrt(0.25 * (za - zb) * (za - zb) + zc * zc);
  Eigen::SelfAdjointEigenSolver<Mat> es(lq.q);
  Vec ev = es.eigenvalues();
  std::sort(ev.data(), ev.data() + ev.size());
  CHECK(rel_err(ev[0], mid - rad) < 1e-6);
  CHECK(rel_err(ev[1], mid - rad) < 1e-6);
  CHECK(std::abs(ev[2]) < 1e-7);
  CHECK(std::abs(ev[3]) < 1e-7);
  CHECK(rel_err(ev[4], h2) < 1e-6);
  CHECK(rel_err(ev[5], mid + rad) < 1e-6);
  CHECK(rel_err(ev[6], mid + rad) < 1e-6);

  // First conjugate time of the full structure problem: the distinguished
  // rotation block degenerates at 2 pi / h, before the z-block modes.
  const double want = 2.0 * M_PI / h;
  const auto tc = conjugate_time(lq, 1.25 * want);
  REQUIRE(tc.has_value());
  CHECK(rel_err(*tc, want) < 1e-7);

  const auto tv = geodesic_conjugate_time(conn, p, 1.12 * want, 1e-6);
  REQUIRE(tv.has_value());
  CHECK(rel_err(*tv, want) < 5e-4);
}

TEST_CASE("surface: structure problem gives the Riemannian comparison") {
  for (double kappa : {1.0, 0.5}) {
    auto zoo = constant_curvature_surface(kappa);
    Connection conn = Connection::nice(zoo.model);
    Vec x0 = Vec::Zero(2), H0(2);
    H0 << std::cos(0.3), std::sin(0.3);
    const CovectorPoint p{x0, H0};

    const LQProblem lq = lq_from_canonical(conn, p);
    REQUIRE(lq.dim() == 2);
    CHECK((lq.A).norm() == 0.0);
    // Curvature matrix kappa (I - v v^T) on the plane: eigenvalues 0, kappa.
    Eigen::SelfAdjointEigenSolver<Mat> es(lq.q);
    CHECK(std::abs(es.eigenvalues()(0)) < 1e-9);
    CHECK(rel_err(es.eigenvalues()(1), kappa) < 1e-8);

    const auto tc = conjugate_time(lq, 1.4 * M_PI / std::sqrt(kappa));
    REQUIRE(tc.has_value());
    CHECK(rel_err(*tc, M_PI / std::sqrt(kappa)) < 1e-8);
  }
}

TEST_CASE("diameter bounds of the closed and open models") {
  CovectorSampleSpec spec;
  spec.samples = 6;
  spec.seed = 3;
  spec.vertical_range = 2.0;

  // Positive-curvature 3D contact model: profile (kappa, 0) on the rotation
  // row gives the bound 2 pi.
  {
    auto zoo = contact3d(1.0);
    Connection conn = Connection::nice(zoo.model);
    const DiameterReport rep = diameter_bound(conn, spec);
    REQUIRE(rep.bound.has_value());
    CHECK(rel_err(*rep.bound, 2.0 * M_PI) < 1e-5);
    REQUIRE(!rep.routes.empty());
    CHECK(rep.routes[0].applicable);
    REQUIRE(rep.routes[0].profile.size() == 2);
    CHECK(std::abs(rep.routes[0].profile[0] - 1.0) < 1e-7);
    CHECK(std::abs(rep.routes[0].profile[1]) < 1e-7);

    // Determinism: identical spec, identical report.
    const DiameterReport rep2 = diameter_bound(conn, spec);
    CHECK(*rep2.bound == *rep.bound);
  }

  // Flat groups have vanishing infima and no bound.
  {
    auto zoo = heisenberg();
    Connection conn = Connection::group(zoo.model);
    const DiameterReport rep = diameter_bound(conn, spec);
    CHECK_FALSE(rep.bound.has_value());
  }
  {
    auto zoo = quaternionic_heisenberg(1);
    Connection conn = Connection::group(zoo.model);
    const DiameterReport rep = diameter_bound(conn, spec);
    CHECK_FALSE(rep.bound.has_value());
  }

  // Round sphere: both the row route and the final-box route yield pi.
  {
    auto zoo = constant_curvature_surface(1.0);
    Connection conn = Connection::nice(zoo.model);
    const DiameterReport rep = diameter_bound(conn, spec);
    REQUIRE(rep.bound.has_value());
    CHECK(rel_err(*rep.bound, M_PI) < 1e-6);
    int routes_with_bound = 0;
    for (const auto& r : rep.routes)
      if (r.bound) {
        ++routes_with_bound;
        CHECK(rel_err(*r.bound, M_PI) < 1e-6);
      }
    CHECK(routes_with_bound == 2);
  }

  // Flat plane: applicable routes, no positive infimum, no bound.
  {
    auto zoo = euclidean(3);
    Connection conn = Connection::nice(zoo.model);
    const DiameterReport rep = diameter_bound(conn, spec);
    CHECK_FALSE(rep.bound.has_value());
  }
}

TEST_SUITE_END();
