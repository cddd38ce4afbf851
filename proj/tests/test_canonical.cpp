#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>

#include "subcurv/canonical.hpp"
#include "subcurv/zoo.hpp"

using namespace subcurv;

namespace {

// Relative error with a floor so expected-zero checks stay meaningful.
double rel_err(double got, double want) {
  return std::abs(got - want) / std::max(std::abs(want), 1e-6);
}

// Sharp (horizontal) part of a momentum covector as a frame vector.
Vec sharp_vec(const Vec& H, int d1) {
  Vec v = Vec::Zero(H.size());
  v.head(d1) = H.head(d1);
  return v;
}

// Orthonormal basis of the orthogonal complement of u inside the span of the
// columns of U (u must lie in that span).
Mat complement_in(const Mat& U, const Vec& u) {
  Mat Z = U - u * (u.transpose() * U);
  Eigen::JacobiSVD<Mat> svd(Z, Eigen::ComputeThinU);
  int r = 0;
  for (int i = 0; i < svd.singularValues().size(); ++i)
    if (svd.singularValues()[i] > 1e-8 * svd.singularValues()[0]) ++r;
  return svd.matrixU().leftCols(r);
}

}  // namespace

TEST_SUITE_BEGIN("canonical");

TEST_CASE("heisenberg: boxes, structure maps and completed potential") {
  auto zoo = heisenberg();
  Connection conn = Connection::group(zoo.model);
  // Left-invariant model: use a non-central base point and a rotated
  // horizontal momentum to exercise generic components.
  Vec x0(3), H0(3);
  x0 << 0.4, -0.2, 0.1;
  const double r = 1.3, h = -0.7, phi = 0.6;
  H0 << r * std::cos(phi), r * std::sin(phi), h;
  const CovectorPoint p{x0, H0};

  CanonicalData d = canonical_data(conn, p);
  CHECK(d.s_level == 2);
  CHECK(d.bc_residual < 1e-12);
  CHECK(d.completion_residual < 1e-10);
  REQUIRE(d.boxes.num_boxes() == 2);
  CHECK(d.boxes.lengths == std::vector<int>{2, 1});
  CHECK(d.boxes.multiplicities == std::vector<int>{1, 1});

  const Vec y0 = sharp_vec(H0, 2) / r;
  Vec y1(3);
  y1 << -H0[1] / r, H0[0] / r, 0.0;
  const Vec z = Vec::Unit(3, 2);

  // Box 1 is the rotation direction, box 2 the velocity direction.
  const Mat U1 = d.boxes.box(1), U2 = d.boxes.box(2);
  REQUIRE(U1.cols() == 1);
  REQUIRE(U2.cols() == 1);
  CHECK(std::abs(std::abs(U1.col(0).dot(y1)) - 1.0) < 1e-12);
  CHECK(std::abs(std::abs(U2.col(0).dot(y0)) - 1.0) < 1e-12);

  // Structure maps in closed form.
  CHECK(d.B.norm() < 1e-12);
  CHECK((d.C * y0 - h * y1).norm() < 1e-12);
  CHECK((d.Q * y0 - h * y1).norm() < 1e-12);
  CHECK((d.Q * y1 + h * y0).norm() < 1e-12);

  // The completed symmetric potential has a single independent entry,
  // S(y0, y1) = -h/2; every other canonical-basis entry vanishes.
  const Mat S_expect =
      -0.5 * h * (y0 * y1.transpose() + y1 * y0.transpose());
  CHECK((d.S - S_expect).norm() < 1e-9);

  // The shifted frame field of the rotation direction.
  CHECK((d.wp1 * y1 - (r * z - h * y0)).norm() < 1e-9);
  CHECK((d.wp1 * y0).norm() < 1e-10);

  // Invariance of the base point: left-invariant data, same covector.
  CanonicalData d2 = canonical_data(conn, {Vec::Zero(3), H0});
  CHECK((d.S - d2.S).norm() < 1e-12);
  CHECK((d.Q - d2.Q).norm() < 1e-12);
}

TEST_CASE("heisenberg: curvature entries and ricci traces") {
  auto zoo = heisenberg();
  for (bool group : {true, false}) {
    Connection conn =
        group ? Connection::group(zoo.model) : Connection::nice(zoo.model);
    CAPTURE(group);
    for (double h : {0.8, -1.7, 0.0}) {
      CAPTURE(h);
      Vec x0 = Vec::Zero(3), H0(3);
      H0 << 1.0, 0.0, h;
      const CovectorPoint p{x0, H0};
      Vec y0(3), y1(3);
      y0 << 1, 0, 0;
      y1 << 0, 1, 0;

      CurvatureOperator R(conn, p);
      CHECK(std::abs(R.entry(y1, y1) - h * h) < 1e-10);
      CHECK(std::abs(R.entry(y0, y0)) < 1e-10);
      CHECK(std::abs(R.entry(y0, y1)) < 1e-10);
      const Vec x12 = R.data().wp1 * y1;
      CHECK(std::abs(R.entry(x12, x12)) < 1e-7);
      CHECK(std::abs(R.entry(y1, x12)) < 1e-8);

      auto rr = ricci(conn, p);
      CHECK(std::abs(rr.value(1, 1) - h * h) < 1e-10);
      CHECK(std::abs(rr.value(1, 2)) < 1e-7);
      CHECK(std::abs(rr.value(2, 1)) < 1e-10);
    }
  }
}

TEST_CASE("contact structures: ricci matches the closed form") {
  for (double kappa : {1.0, -0.5}) {
    auto zoo = contact3d(kappa);
    Connection conn = Connection::nice(zoo.model);
    CAPTURE(kappa);
    Vec x0(3), H0(3);
    x0 << 0.15, -0.25, 0.3;
    H0 << 0.7, -0.4, 0.6;
    const double r2 = H0.head(2).squaredNorm(), h = H0[2];
    const CovectorPoint p{x0, H0};
    auto rr = ricci(conn, p);
    CHECK(rel_err(rr.value(1, 1), kappa * r2 + h * h) < 1e-8);
    CHECK(std::abs(rr.value(1, 2)) < 1e-7);
    CHECK(std::abs(rr.value(2, 1)) < 1e-9);
    // Declared zoo value agrees.
    CHECK(rel_err(rr.value(1, 1), zoo.ricci[0].value(p)) < 1e-8);
    // Velocity-level box carries no curvature on these models.
    auto fb = final_box_ricci(conn, p);
    CHECK(std::abs(fb.trace) < 1e-9);
    REQUIRE(fb.torsion_route);
    CHECK(std::abs(*fb.torsion_route) < 1e-9);
  }
}

TEST_CASE("quaternionic group: canonical maps in closed form") {
  auto zoo = quaternionic_heisenberg(1);
  const int n = 7, d1 = 4;
  Connection conn = Connection::group(zoo.model);
  const double h = 0.9;
  Vec x0 = Vec::Zero(n), H0 = Vec::Zero(n);
  H0[0] = 1.0;
  Vec zdir(3);
  zdir << 0.36, -0.48, 0.8;  // generic unit vertical direction
  H0.segment(d1, 3) = h * zdir;
  const CovectorPoint p{x0, H0};

  CanonicalData d = canonical_data(conn, p);
  CHECK(d.boxes.lengths == std::vector<int>{2, 1});
  CHECK(d.boxes.multiplicities == std::vector<int>{3, 1});
  CHECK(d.completion_residual < 1e-10);

  const Vec y0 = sharp_vec(H0, d1);  // unit horizontal momentum
  // The distinguished rotation direction is recovered from the
  // torsion-momentum map: A y0 = -(h/2) y1.
  const Vec y1 = -(2.0 / h) * (d.A * y0);
  CHECK(std::abs(y1.norm() - 1.0) < 1e-12);
  const Mat U1 = d.boxes.box(1);
  CHECK((y1 - U1 * (U1.transpose() * y1)).norm() < 1e-10);

  CHECK((d.Q * y0 - h * y1).norm() < 1e-12);
  CHECK((d.Q * y1 + h * y0).norm() < 1e-12);

  // Potential values: S# y0 = -(h/2) y1; S# (wp1 y1) = (h^2/2) y1;
  // S# kills the transversal rotation directions and maps their shifted
  // fields to (9/16) h^2 times themselves.
  auto sharp_S = [&](const Vec& u) { return sharp_vec(d.S * u, d1); };
  CHECK((sharp_S(y0) + 0.5 * h * y1).norm() < 1e-10);
  const Vec x0v = d.wp1 * y1;
  CHECK((sharp_S(x0v) - 0.5 * h * h * y1).norm() < 1e-10);
  const Mat Z = complement_in(U1, y1);
  REQUIRE(Z.cols() == 2);
  for (int c = 0; c < 2; ++c) {
    CHECK(sharp_S(Z.col(c)).norm() < 1e-10);
    const Vec xz = d.wp1 * Z.col(c);
    CHECK((sharp_S(xz) - 9.0 / 16.0 * h * h * Z.col(c)).norm() < 1e-10);
  }
  // The vertical-vertical block vanishes in the shifted-field basis.
  const Mat W1 = d.wp1 * U1;
  CHECK((W1.transpose() * d.S * W1).norm() < 1e-8);
}

TEST_CASE("quaternionic group: curvature spectrum on the canonical frame") {
  for (int nq : {1, 2}) {
    auto zoo = quaternionic_heisenberg(nq);
    const int n = zoo.model->dim, d1 = zoo.model->horizontal_rank;
    Connection conn = Connection::group(zoo.model);
    CAPTURE(nq);
    const double h = 0.9;
    Vec x0 = Vec::Zero(n), H0 = Vec::Zero(n);
    H0[0] = 1.0;
    Vec zdir(3);
    zdir << 0.36, -0.48, 0.8;
    H0.segment(d1, 3) = h * zdir;
    const CovectorPoint p{x0, H0};

    CurvatureOperator R(conn, p);
    const CanonicalData& d = R.data();
    const Vec y0 = sharp_vec(H0, d1);
    const Vec y1 = -(2.0 / h) * (d.A * y0);

    CHECK(rel_err(R.entry(y1, y1), h * h) < 1e-8);
    CHECK(std::abs(R.entry(y0, y0)) < 1e-10);
    const Vec x0v = d.wp1 * y1;
    CHECK(std::abs(R.entry(x0v, x0v)) < 1e-7);

    const Mat Z = complement_in(d.boxes.box(1), y1);
    REQUIRE(Z.cols() == 2);
    for (int c = 0; c < 2; ++c) {
      CHECK(rel_err(R.entry(Z.col(c), Z.col(c)), 11.0 / 8.0 * h * h) < 1e-8);
      const Vec xz = d.wp1 * Z.col(c);
      CHECK(rel_err(R.entry(xz, xz), -45.0 / 256.0 * std::pow(h, 4)) < 1e-6);
      // Cross terms between distinct canonical directions vanish.
      CHECK(std::abs(R.entry(y1, Z.col(c))) < 1e-10);
      CHECK(std::abs(R.entry(y0, Z.col(c))) < 1e-10);
      CHECK(std::abs(R.entry(y1, xz)) < 1e-8);
    }
    const Vec xz0 = d.wp1 * Z.col(0), xz1 = d.wp1 * Z.col(1);
    CHECK(std::abs(R.entry(xz0, xz1)) < 1e-7);

    // Velocity-level box: zero on the velocity direction, h^2/4 on each
    // transversal direction.
    const Mat UK = d.boxes.box(2);
    Mat RK(UK.cols(), UK.cols());
    for (int i = 0; i < UK.cols(); ++i)
      for (int j = 0; j < UK.cols(); ++j)
        RK(i, j) = R.entry(UK.col(i), UK.col(j));
    const Vec yk = UK.transpose() * y0;
    const Mat K_expect = 0.25 * h * h *
                         (Mat::Identity(UK.cols(), UK.cols()) -
                          yk * yk.transpose());
    CHECK((RK - K_expect).norm() < 1e-10);
  }
}

TEST_CASE("quaternionic group: ricci traces and velocity-box routes") {
  for (int nq : {1, 2}) {
    auto zoo = quaternionic_heisenberg(nq);
    const int n = zoo.model->dim, d1 = zoo.model->horizontal_rank;
    Connection conn = Connection::group(zoo.model);
    CAPTURE(nq);
    for (double h : {0.5, 1.0}) {
      CAPTURE(h);
      Vec x0 = Vec::Zero(n), H0 = Vec::Zero(n);
      H0[0] = 1.0;
      Vec zdir(3);
      zdir << 0.36, -0.48, 0.8;
      H0.segment(d1, 3) = h * zdir;
      const CovectorPoint p{x0, H0};

      auto rr = ricci(conn, p);
      const double e11 = 15.0 / 4.0 * h * h;
      const double e12 = -45.0 / 128.0 * std::pow(h, 4);
      const double e21 = 0.25 * (d1 - 4) * h * h;
      CHECK(rel_err(rr.value(1, 1), e11) < 1e-10);
      CHECK(rel_err(rr.value(1, 2), e12) < 1e-6);
      if (nq == 1)
        CHECK(std::abs(rr.value(2, 1)) < 1e-10);
      else
        CHECK(rel_err(rr.value(2, 1), e21) < 1e-10);
      // Declared zoo closed forms match the computed traces.
      for (const auto& drc : zoo.ricci) {
        CAPTURE(drc.a);
        CAPTURE(drc.b);
        const double declared = drc.value(p);
        const double got = rr.value(drc.a, drc.b);
        CHECK(std::abs(got - declared) <
              1e-6 * std::max(1.0, std::abs(declared)));
      }

      // Velocity-box trace: direct route and torsion-only route agree with
      // the trace of the curvature over the final box.
      auto fb = final_box_ricci(conn, p);
      CHECK(fb.final_dim == d1 - 3);
      CHECK(std::abs(fb.trace - e21) < 1e-8);
      REQUIRE(fb.torsion_route);
      CHECK(std::abs(*fb.torsion_route - e21) < 1e-10);
      CHECK(fb.b_final_norm < 1e-10);
    }
  }
}

TEST_CASE("riemannian reduction: no twist, parallel frame, sectional traces") {
  {
    auto zoo = constant_curvature_surface(-0.7);
    Connection conn = Connection::nice(zoo.model);
    Vec x0(2), H0(2);
    x0 << 0.2, -0.3;
    H0 << 0.9, 0.1;
    const CovectorPoint p{x0, H0};
    CanonicalData d = canonical_data(conn, p);
    CHECK(d.boxes.lengths == std::vector<int>{1});
    CHECK(d.boxes.multiplicities == std::vector<int>{2});
    CHECK(d.Q.norm() < 1e-13);
    CHECK(d.S.norm() < 1e-13);
    CHECK(d.wp1.norm() < 1e-13);

    auto rr = ricci(conn, p);
    CHECK(rel_err(rr.value(1, 1), -0.7 * H0.squaredNorm()) < 1e-10);
    auto fb = final_box_ricci(conn, p);
    CHECK(rel_err(fb.trace, -0.7 * H0.squaredNorm()) < 1e-10);
    REQUIRE(fb.torsion_route);
    CHECK(rel_err(*fb.torsion_route, -0.7 * H0.squaredNorm()) < 1e-10);

    // Canonical frame = parallel frame: orthonormality is preserved along
    // the geodesic to integration accuracy.
    auto cf = canonical_frame(conn, p, 0.5, 0.5, 11);
    CHECK(cf.gram_drift < 1e-7);
    CHECK(cf.kernel_residual < 1e-7);
  }
  {
    auto zoo = euclidean(3);
    Connection conn = Connection::nice(zoo.model);
    Vec x0 = Vec::Zero(3), H0(3);
    H0 << 0.3, -0.5, 0.8;
    auto rr = ricci(conn, {x0, H0});
    CHECK(std::abs(rr.value(1, 1)) < 1e-12);
  }
}

TEST_CASE("ricci entries scale like the square of the column index weight") {
  // Rescaling the covector by c multiplies the entry of column b by c^{2b}.
  std::mt19937 rng(17u);
  for (const char* spec : {"heisenberg", "martinet", "quaternionic(1)"}) {
    auto zoo = zoo_lookup(spec);
    Connection conn = Connection::group(zoo.model);
    const int n = zoo.model->dim;
    CAPTURE(spec);
    Vec x0 = Vec::Zero(n);
    if (std::string(spec) == "martinet") x0 << 0.4, 0.1, -0.2;
    Vec H0(n);
    std::uniform_real_distribution<double> unif(-0.8, 0.8);
    for (int i = 0; i < n; ++i) H0[i] = unif(rng);
    H0[0] += 1.2;  // keep the covector well inside the regular region
    const CovectorPoint p{x0, H0};
    auto base = ricci(conn, p);
    for (double c : {2.0, 0.5}) {
      CAPTURE(c);
      auto scaled = ricci(conn, {x0, c * H0});
      for (const auto& e : scaled.entries) {
        const double want = std::pow(c, 2.0 * e.b) * base.value(e.a, e.b);
        // Second-column entries stack two derivative layers, so their noise
        // floor is larger relative to strongly curved covectors.
        const double tol = e.b == 1 ? 1e-6 : 1e-5;
        CHECK(std::abs(e.value - want) <
              tol * std::max(1.0, std::abs(want)));
      }
    }
  }
}

TEST_CASE("curvature is independent of the compatible connection") {
  // The canonical invariants agree across compatible connections even though
  // intermediate data (the potential S) differs.
  {
    auto zoo = heisenberg();
    SymTensor g(3, 3);
    const double s = 0.37;  // rotate the horizontal plane along the vertical
    g.at({0, 2, 1}) = Expr::constant(s);
    g.at({1, 2, 0}) = Expr::constant(-s);
    Connection tw = Connection::from_gamma(zoo.model, g, "twisted");
    Connection gr = Connection::group(zoo.model);
    Vec x0 = Vec::Zero(3), H0(3);
    H0 << 1.0, 0.3, 0.8;
    const CovectorPoint p{x0, H0};

    CanonicalData dg = canonical_data(gr, p), dt = canonical_data(tw, p);
    CHECK((dg.S - dt.S).norm() > 0.1);  // S is connection bookkeeping...
    auto rg = ricci(gr, p), rt = ricci(tw, p);
    for (const auto& e : rg.entries)  // ...the invariants are not.
      CHECK(std::abs(e.value - rt.value(e.a, e.b)) < 1e-8);
    CurvatureOperator Rg(gr, p), Rt(tw, p);
    const Mat F = Mat::Identity(3, 3);
    CHECK((Rg.matrix(F) - Rt.matrix(F)).norm() < 1e-7);
  }
  {
    auto zoo = quaternionic_heisenberg(1);
    const int n = 7, d1 = 4;
    SymTensor g(n, 3);
    // Horizontal rotation along a vertical direction, vertical rotation
    // along a horizontal direction, vertical rotation along a vertical one.
    g.at({0, d1 + 0, 1}) = Expr::constant(0.3);
    g.at({1, d1 + 0, 0}) = Expr::constant(-0.3);
    g.at({2, d1 + 0, 3}) = Expr::constant(0.15);
    g.at({3, d1 + 0, 2}) = Expr::constant(-0.15);
    g.at({d1 + 1, 0, d1 + 2}) = Expr::constant(0.2);
    g.at({d1 + 2, 0, d1 + 1}) = Expr::constant(-0.2);
    g.at({d1 + 0, d1 + 1, d1 + 2}) = Expr::constant(0.1);
    g.at({d1 + 2, d1 + 1, d1 + 0}) = Expr::constant(-0.1);
    Connection tw = Connection::from_gamma(zoo.model, g, "twisted");
    Connection gr = Connection::group(zoo.model);

    Vec x0 = Vec::Zero(n), H0 = Vec::Zero(n);
    H0[0] = 0.8;
    H0[2] = 0.6;
    H0[4] = 0.27;
    H0[5] = -0.36;
    H0[6] = 0.6;
    const CovectorPoint p{x0, H0};
    auto rg = ricci(gr, p), rt = ricci(tw, p);
    for (const auto& e : rg.entries)
      CHECK(std::abs(e.value - rt.value(e.a, e.b)) < 1e-7);
    CurvatureOperator Rg(gr, p), Rt(tw, p);
    const Mat F = Mat::Identity(n, n);
    const Mat Mg = Rg.matrix(F), Mt = Rt.matrix(F);
    CHECK((Mg - Mt).norm() < 1e-6 * std::max(1.0, Mg.norm()));
  }
  // The two built-in connections coincide in their invariants as well.
  for (const char* spec : {"heisenberg", "quaternionic(1)"}) {
    auto zoo = zoo_lookup(spec);
    const int n = zoo.model->dim;
    CAPTURE(spec);
    Vec x0 = Vec::Zero(n), H0 = Vec::Zero(n);
    H0[0] = 1.0;
    H0[n - 1] = 0.8;
    const CovectorPoint p{x0, H0};
    auto rn = ricci(Connection::nice(zoo.model), p);
    auto rg = ricci(Connection::group(zoo.model), p);
    for (const auto& e : rn.entries)
      CHECK(std::abs(e.value - rg.value(e.a, e.b)) < 1e-8);
  }
}

TEST_CASE("normalization conditions hold and detect a perturbed potential") {
  for (const char* spec :
       {"heisenberg", "contact3d(1.0)", "quaternionic(1)", "quaternionic(2)"}) {
    auto zoo = zoo_lookup(spec);
    const int n = zoo.model->dim, d1 = zoo.model->horizontal_rank;
    const int m = n - d1;
    Connection conn = zoo.left_invariant ? Connection::group(zoo.model)
                                         : Connection::nice(zoo.model);
    CAPTURE(spec);
    Vec x0 = Vec::Zero(n), H0 = Vec::Zero(n);
    H0[0] = 1.0;
    H0[d1] = 0.8;
    if (m > 1) H0[d1 + 1] = -0.4;
    const CovectorPoint p{x0, H0};

    auto checks = validate_normalization(conn, p);
    REQUIRE(checks.size() == 5);
    bool any_active = false;
    for (const auto& c : checks) {
      CAPTURE(c.condition);
      if (!c.vacuous) {
        any_active = true;
        CHECK(c.residual < 1e-10);
      }
    }
    CHECK(any_active);  // the antisymmetry condition is active on these models

    // Negative control: a symmetric perturbation of the vertical-vertical
    // potential violates the antisymmetry condition, with residual linear in
    // the perturbation size.
    double prev = 0.0;
    for (double eps : {1e-3, 2e-3}) {
      Mat dvv(m, m);
      for (int i = 0; i < m; ++i)
        for (int j = 0; j < m; ++j) dvv(i, j) = 1.0 + 0.3 * i - 0.2 * j;
      dvv = (0.5 * eps * (dvv + dvv.transpose())).eval();
      auto bad = validate_normalization(conn, p, 1e-7, &dvv);
      double worst = 0.0;
      for (const auto& c : bad)
        if (!c.vacuous) worst = std::max(worst, c.residual);
      CHECK(worst > eps);  // clearly detected
      if (prev > 0.0) CHECK(worst / prev == doctest::Approx(2.0).epsilon(0.05));
      prev = worst;
    }
  }
  // Martinet is not left-invariant but supports both connections away from
  // the singular locus.
  {
    auto zoo = martinet();
    Vec x0(3), H0(3);
    x0 << 0.4, 0.1, -0.2;
    H0 << 0.5, -0.3, 0.8;
    const CovectorPoint p{x0, H0};
    for (bool group : {true, false}) {
      Connection conn =
          group ? Connection::group(zoo.model) : Connection::nice(zoo.model);
      CAPTURE(group);
      auto checks = validate_normalization(conn, p);
      for (const auto& c : checks)
        if (!c.vacuous) CHECK(c.residual < 1e-10);
    }
  }
}

TEST_CASE("canonical frame stays orthonormal along the geodesic") {
  {
    auto zoo = heisenberg();
    Connection conn = Connection::group(zoo.model);
    Vec x0 = Vec::Zero(3), H0(3);
    H0 << 1.0, 0.0, 0.8;
    auto cf = canonical_frame(conn, {x0, H0}, 0.6, 0.6, 13);
    REQUIRE(cf.times.size() == 13);
    REQUIRE(cf.frames.size() == 13);
    CHECK(cf.gram_drift < 1e-10);
    CHECK(cf.kernel_residual < 1e-10);
  }
  {
    auto zoo = contact3d(1.0);
    Connection conn = Connection::nice(zoo.model);
    Vec x0(3), H0(3);
    x0 << 0.15, -0.25, 0.3;
    H0 << 0.7, -0.4, 0.6;
    auto cf = canonical_frame(conn, {x0, H0}, 0.4, 0.4, 9);
    CHECK(cf.gram_drift < 1e-9);
    CHECK(cf.kernel_residual < 1e-9);
  }
}

TEST_CASE("degenerate and unsupported inputs are rejected") {
  {
    // No horizontal momentum: the covector is not a geodesic direction.
    auto zoo = heisenberg();
    Connection conn = Connection::group(zoo.model);
    Vec x0 = Vec::Zero(3), H0(3);
    H0 << 0.0, 0.0, 1.0;
    CHECK_THROWS_AS(canonical_data(conn, {x0, H0}), Error);
    try {
      canonical_data(conn, {x0, H0});
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::Degenerate);
    }
  }
  {
    // Martinet along the singular locus: the twist flag does not span.
    auto zoo = martinet();
    Connection conn = Connection::group(zoo.model);
    Vec x0 = Vec::Zero(3), H0(3);
    H0 << 0.6, -0.8, 0.5;
    try {
      canonical_data(conn, {x0, H0});
      FAIL("expected a degenerate-covector error");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::Degenerate);
    }
  }
  {
    // A rank-2 step-3 group (length-3 row): the vertical completion is out
    // of scope, but the level-0 structure maps still resolve.
    SubRiemannianModel m;
    m.name = "engel";
    m.dim = 4;
    m.horizontal_rank = 2;
    m.frame.fields.assign(4, std::vector<Expr>(4, Expr::constant(0.0)));
    m.frame.fields[0][0] = Expr::constant(1.0);
    m.frame.fields[1][1] = Expr::constant(1.0);
    m.frame.fields[1][2] = Expr::coord(0);
    m.frame.fields[1][3] =
        Expr::product({Expr::constant(0.5), Expr::coord(0), Expr::coord(0)});
    m.frame.fields[2][2] = Expr::constant(1.0);
    m.frame.fields[2][3] = Expr::coord(0);
    m.frame.fields[3][3] = Expr::constant(1.0);
    m.domain.assign(4, {-4.0, 4.0});
    m.declared_diagram = YoungDiagram({2, 1, 1});
    m.validate();
    auto mp = std::make_shared<const SubRiemannianModel>(std::move(m));
    Connection conn = Connection::group(mp);
    Vec x0 = Vec::Zero(4), H0(4);
    H0 << 1.0, 0.0, 0.2, 0.7;
    try {
      canonical_data(conn, {x0, H0});
      FAIL("expected an unsupported-diagram error");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::UnsupportedDiagram);
    }
    CanonicalData d0 = canonical_data(conn, {x0, H0}, 0);
    CHECK(d0.boxes.lengths == std::vector<int>{3, 1});
    CHECK(d0.bc_residual < 1e-12);
  }
}

TEST_SUITE_END();
