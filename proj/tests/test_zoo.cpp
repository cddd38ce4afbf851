#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "doctest.h"
#include "subcurv/error.hpp"
#include "subcurv/model.hpp"
#include "subcurv/zoo.hpp"

using namespace subcurv;

namespace {

const std::vector<std::string> kAllSpecs = {
    "euclidean(3)", "surface(1.0)",  "heisenberg",
    "contact3d(1.0)", "martinet",    "quaternionic(2)"};

Vec rand_point(const SubRiemannianModel& m, std::mt19937& rng) {
  std::uniform_real_distribution<double> u(-0.4, 0.4);
  Vec x(m.dim);
  for (int i = 0; i < m.dim; ++i) {
    const auto& [lo, hi] = m.domain[i];
    x[i] = 0.5 * (lo + hi) + u(rng) * (hi - lo);
  }
  return x;
}

double ricci_of(const ZooEntry& e, int a, int b, const CovectorPoint& p) {
  for (const auto& r : e.ricci)
    if (r.a == a && r.b == b) return r.value(p);
  FAIL("entry ", e.name, " declares no ricci (", a, ",", b, ")");
  return 0.0;
}

}  // namespace

TEST_SUITE_BEGIN("zoo");

TEST_CASE("registry resolves advertised names and rejects junk") {
  for (const auto& nm : zoo_names()) CHECK_NOTHROW(zoo_lookup(nm));
  CHECK(zoo_lookup("euclidean(4)").model->dim == 4);
  CHECK(zoo_lookup("euclidean").model->dim == 3);
  CHECK(zoo_lookup("quaternionic(1)").model->dim == 7);
  CHECK(zoo_lookup("quaternionic").model->dim == 11);
  CHECK(zoo_lookup("surface(-1)").model->dim == 2);
  CHECK_THROWS_AS(zoo_lookup("nosuch"), Error);
  CHECK_THROWS_AS(zoo_lookup("surface(abc)"), Error);
  CHECK_THROWS_AS(zoo_lookup("surface(1"), Error);
}

TEST_CASE("entries validate; declared diagrams fill the dimension") {
  for (const auto& spec : kAllSpecs) {
    CAPTURE(spec);
    const ZooEntry e = zoo_lookup(spec);
    REQUIRE(e.model);
    REQUIRE(e.max_diagram.has_value());
    // Every built-in model is ample at generic covectors, so the declared
    // (maximal) diagram has exactly dim boxes.
    CHECK(e.max_diagram->num_boxes() == e.model->dim);
    CHECK(e.model->in_domain(e.model->center()));
  }
}

TEST_CASE("left-invariance flag matches constancy of structure constants") {
  std::mt19937 rng(7u);
  for (const auto& spec : kAllSpecs) {
    CAPTURE(spec);
    const ZooEntry e = zoo_lookup(spec);
    const StructureConstants sc = structure_constants(*e.model);
    const auto c1 = sc.eval(rand_point(*e.model, rng));
    const auto c2 = sc.eval(rand_point(*e.model, rng));
    double diff = 0.0;
    for (int k = 0; k < e.model->dim; ++k)
      diff = std::max(diff, (c1[k] - c2[k]).cwiseAbs().maxCoeff());
    if (e.left_invariant)
      CHECK(diff < 1e-12);
    else
      CHECK(diff > 1e-6);
  }
}

TEST_CASE("heisenberg equals the zero-curvature contact model") {
  const ZooEntry h = zoo_lookup("heisenberg");
  const ZooEntry c = zoo_lookup("contact3d(0)");
  std::mt19937 rng(11u);
  for (int trial = 0; trial < 5; ++trial) {
    const Vec x = rand_point(*h.model, rng);
    CHECK((h.model->frame.eval_matrix(x) - c.model->frame.eval_matrix(x))
              .cwiseAbs()
              .maxCoeff() == doctest::Approx(0.0).epsilon(1e-15));
  }
}

TEST_CASE("quaternionic vertical brackets satisfy the Clifford relations") {
  for (int n : {1, 2}) {
    CAPTURE(n);
    const ZooEntry e = zoo_lookup("quaternionic(" + std::to_string(n) + ")");
    const int d1 = 4 * n;
    const StructureConstants sc = structure_constants(*e.model);
    const auto c = sc.eval(e.model->center());
    // J_alpha(j,i) = c^{d1+alpha}_{ij}
    std::vector<Mat> J;
    for (int a = 0; a < 3; ++a) J.push_back(c[d1 + a].topLeftCorner(d1, d1).transpose());
    const Mat id = Mat::Identity(d1, d1);
    for (int a = 0; a < 3; ++a) {
      CHECK((J[a] + J[a].transpose()).norm() == doctest::Approx(0.0));
      CHECK((J[a] * J[a] + id).norm() == doctest::Approx(0.0));
      for (int b = a + 1; b < 3; ++b)
        CHECK((J[a] * J[b] + J[b] * J[a]).norm() == doctest::Approx(0.0));
    }
    // Quaternion multiplication table: J_1 J_2 = J_3 (cyclically).
    CHECK((J[0] * J[1] - J[2]).norm() == doctest::Approx(0.0));
    CHECK((J[1] * J[2] - J[0]).norm() == doctest::Approx(0.0));
    CHECK((J[2] * J[0] - J[1]).norm() == doctest::Approx(0.0));
  }
}

TEST_CASE("declared ricci values reproduce the closed forms") {
  {
    const ZooEntry h = zoo_lookup("heisenberg");
    Vec x = Vec::Zero(3), H(3);
    H << 1.0, 0.0, 0.7;
    const CovectorPoint p{x, H};
    CHECK(ricci_of(h, 1, 1, p) == doctest::Approx(0.49));
    CHECK(ricci_of(h, 1, 2, p) == doctest::Approx(0.0));
    CHECK(ricci_of(h, 2, 1, p) == doctest::Approx(0.0));
  }
  {
    const ZooEntry s = zoo_lookup("surface(1.3)");
    Vec x = Vec::Zero(2), H(2);
    H << 0.6, 0.8;
    CHECK(ricci_of(s, 1, 1, {x, H}) == doctest::Approx(1.3));
  }
  {
    const ZooEntry c = zoo_lookup("contact3d(-0.5)");
    Vec x = Vec::Zero(3), H(3);
    H << 0.6, 0.8, 0.3;
    CHECK(ricci_of(c, 1, 1, {x, H}) == doctest::Approx(-0.5 + 0.09));
  }
  {
    const ZooEntry q = zoo_lookup("quaternionic(2)");
    Vec x = Vec::Zero(11), H = Vec::Zero(11);
    H[0] = 1.0;
    H[8] = 0.3;
    H[9] = 0.4;
    H[10] = 1.2;  // |H_vert|^2 = 0.25 + 1.44 = 1.69
    const CovectorPoint p{x, H};
    const double h2 = 1.69;
    CHECK(ricci_of(q, 2, 1, p) == doctest::Approx(h2));
    // Rotation-level box: h^2 + 2 * (11/8) h^2 and 2 * (-45/256) h^4.
    CHECK(ricci_of(q, 1, 1, p) == doctest::Approx(15.0 / 4.0 * h2));
    CHECK(ricci_of(q, 1, 2, p) == doctest::Approx(-45.0 / 128.0 * h2 * h2));
  }
}

TEST_SUITE_END();
