#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>

#include "subcurv/error.hpp"
#include "subcurv/model.hpp"
#include "subcurv/zoo.hpp"

using namespace subcurv;

namespace {

Vec rand_point(const SubRiemannianModel& m, std::mt19937_64& rng,
               double scale = 0.5) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Vec x(m.dim);
  for (int i = 0; i < m.dim; ++i) {
    double mid = 0.5 * (m.domain[i].first + m.domain[i].second);
    double half = 0.5 * (m.domain[i].second - m.domain[i].first);
    x[i] = mid + scale * half * u(rng);
  }
  return x;
}

// Finite-difference Lie bracket of frame fields i and j in coordinate
// components: [X_i, X_j]^mu = sum_l (X_i^l d_l X_j^mu - X_j^l d_l X_i^mu).
Vec fd_bracket(const SubRiemannianModel& m, const Vec& x, int i, int j) {
  const double h = 1e-6;
  const int n = m.dim;
  Mat F = m.frame.eval_matrix(x);
  Vec out = Vec::Zero(n);
  for (int l = 0; l < n; ++l) {
    Vec xp = x, xm = x;
    xp[l] += h;
    xm[l] -= h;
    Mat dF = (m.frame.eval_matrix(xp) - m.frame.eval_matrix(xm)) / (2 * h);
    for (int mu = 0; mu < n; ++mu)
      out[mu] += F(l, i) * dF(mu, j) - F(l, j) * dF(mu, i);
  }
  return out;
}

}  // namespace

TEST_SUITE("model") {

TEST_CASE("frame evaluation and validation") {
  auto zoo = heisenberg();
  const auto& m = *zoo.model;
  CHECK(m.dim == 3);
  CHECK(m.horizontal_rank == 2);
  Vec x(3);
  x << 0.3, -0.4, 1.0;
  Mat F = m.frame.eval_matrix(x);
  CHECK(F(0, 0) == doctest::Approx(1.0));
  CHECK(F(2, 0) == doctest::Approx(0.2));   // -y/2
  CHECK(F(2, 1) == doctest::Approx(0.15));  // x/2
  CHECK(F(2, 2) == doctest::Approx(1.0));
  CHECK_NOTHROW(m.validate());
}

TEST_CASE("sharp and hamiltonian") {
  auto zoo = heisenberg();
  const auto& m = *zoo.model;
  CovectorPoint p;
  p.x = Vec::Zero(3);
  p.H = Vec(3);
  p.H << 0.6, -0.8, 2.0;
  Vec v = sharp(m, p);
  CHECK(v[0] == doctest::Approx(0.6));
  CHECK(v[1] == doctest::Approx(-0.8));
  CHECK(v[2] == doctest::Approx(0.0));  // vertical momentum does not move
  CHECK(hamiltonian(m, p) == doctest::Approx(0.5));
}

TEST_CASE("momentum conversions are mutually inverse") {
  std::mt19937_64 rng(3);
  for (const char* name : {"heisenberg", "martinet", "contact3d(1.0)"}) {
    auto zoo = zoo_lookup(name);
    const auto& m = *zoo.model;
    for (int rep = 0; rep < 5; ++rep) {
      Vec x = rand_point(m, rng);
      Vec p = Vec::Random(m.dim);
      Vec H = frame_momenta_from_coordinate(m, x, p);
      Vec p2 = coordinate_momenta_from_frame(m, x, H);
      CHECK((p - p2).norm() == doctest::Approx(0.0).epsilon(1e-10));
    }
  }
}

TEST_CASE("structure constants match finite-difference brackets") {
  std::mt19937_64 rng(17);
  for (const char* name :
       {"heisenberg", "martinet", "contact3d(1.0)", "contact3d(-0.5)",
        "quaternionic(1)", "surface(1.0)"}) {
    auto zoo = zoo_lookup(name);
    const auto& m = *zoo.model;
    StructureConstants sc = structure_constants(m);
    for (int rep = 0; rep < 3; ++rep) {
      Vec x = rand_point(m, rng);
      Mat F = m.frame.eval_matrix(x);
      auto c = sc.eval(x);
      for (int i = 0; i < m.dim; ++i)
        for (int j = i + 1; j < m.dim; ++j) {
          Vec fd = fd_bracket(m, x, i, j);
          Vec sym = Vec::Zero(m.dim);
          for (int k = 0; k < m.dim; ++k) sym += c[k](i, j) * F.col(k);
          CHECK((fd - sym).norm() < 1e-6);
        }
    }
  }
}

TEST_CASE("heisenberg structure constants are the group ones") {
  auto zoo = heisenberg();
  StructureConstants sc = structure_constants(*zoo.model);
  Vec x(3);
  x << 0.7, -0.3, 0.2;
  auto c = sc.eval(x);
  CHECK(c[2](0, 1) == doctest::Approx(1.0));
  CHECK(c[2](1, 0) == doctest::Approx(-1.0));
  CHECK(c[0].norm() == doctest::Approx(0.0));
  CHECK(c[1].norm() == doctest::Approx(0.0));
  CHECK(c[2](0, 0) == doctest::Approx(0.0));
}

TEST_CASE("martinet bracket grows linearly in x") {
  auto zoo = martinet();
  StructureConstants sc = structure_constants(*zoo.model);
  Vec x = Vec::Zero(3);
  x[0] = 0.65;
  auto c = sc.eval(x);
  CHECK(c[2](0, 1) == doctest::Approx(1.3));  // [X, Y] = 2x Z
  x[0] = 0.0;
  c = sc.eval(x);
  CHECK(c[2](0, 1) == doctest::Approx(0.0));
}

TEST_CASE("json model round trip") {
  auto zoo = contact3d(1.0);
  std::string text = model_to_json(*zoo.model);
  SubRiemannianModel back = parse_model_json(text);
  CHECK(back.dim == zoo.model->dim);
  CHECK(back.horizontal_rank == zoo.model->horizontal_rank);
  std::mt19937_64 rng(23);
  for (int rep = 0; rep < 4; ++rep) {
    Vec x = rand_point(back, rng);
    CHECK((back.frame.eval_matrix(x) - zoo.model->frame.eval_matrix(x))
              .norm() == doctest::Approx(0.0).epsilon(1e-14));
  }
}

TEST_CASE("degenerate frame is rejected") {
  SubRiemannianModel m;
  m.name = "bad";
  m.dim = 2;
  m.horizontal_rank = 2;
  m.frame.fields = {{Expr::constant(1.0), Expr::constant(0.0)},
                    {Expr::constant(2.0), Expr::constant(0.0)}};
  m.domain.assign(2, {-1.0, 1.0});
  CHECK_THROWS_AS(m.validate(), subcurv::Error);
}

TEST_CASE("in_domain respects margins") {
  auto zoo = heisenberg();
  const auto& m = *zoo.model;
  Vec x = Vec::Zero(3);
  CHECK(m.in_domain(x));
  x[0] = 3.99;
  CHECK(m.in_domain(x));
  CHECK(!m.in_domain(x, 0.1));
  x[0] = 4.01;
  CHECK(!m.in_domain(x));
}

}  // TEST_SUITE
