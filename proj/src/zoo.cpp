#include "subcurv/zoo.hpp"

#include <array>
#include <cmath>
#include <memory>
#include <stdexcept>

#include "subcurv/error.hpp"

namespace subcurv {

namespace {

Expr k0() { return Expr::constant(0.0); }
Expr k1() { return Expr::constant(1.0); }

Frame zero_frame(int n) {
  Frame f;
  f.fields.assign(n, std::vector<Expr>(n, k0()));
  return f;
}

std::shared_ptr<const SubRiemannianModel> finish(SubRiemannianModel m) {
  m.validate();
  return std::make_shared<const SubRiemannianModel>(std::move(m));
}

double vertical_sq(const CovectorPoint& p, int d1) {
  double s = 0.0;
  for (int i = d1; i < p.H.size(); ++i) s += p.H[i] * p.H[i];
  return s;
}

double horizontal_sq(const CovectorPoint& p, int d1) {
  double s = 0.0;
  for (int i = 0; i < d1; ++i) s += p.H[i] * p.H[i];
  return s;
}

// 4x4 quaternion left-multiplication matrices on basis (1, i, j, k).
const std::array<std::array<std::array<double, 4>, 4>, 3>& quat_mats() {
  static const std::array<std::array<std::array<double, 4>, 4>, 3> J = {{
      {{{0, -1, 0, 0}, {1, 0, 0, 0}, {0, 0, 0, -1}, {0, 0, 1, 0}}},
      {{{0, 0, -1, 0}, {0, 0, 0, 1}, {1, 0, 0, 0}, {0, -1, 0, 0}}},
      {{{0, 0, 0, -1}, {0, 0, -1, 0}, {0, 1, 0, 0}, {1, 0, 0, 0}}},
  }};
  return J;
}

}  // namespace

ZooEntry euclidean(int n) {
  if (n < 1) throw Error(ErrorKind::Invalid, "euclidean: n must be positive");
  SubRiemannianModel m;
  m.name = "euclidean(" + std::to_string(n) + ")";
  m.dim = n;
  m.horizontal_rank = n;
  m.frame = zero_frame(n);
  for (int i = 0; i < n; ++i) m.frame.fields[i][i] = k1();
  m.domain.assign(n, {-10.0, 10.0});
  m.declared_diagram = YoungDiagram({n});

  ZooEntry e;
  e.name = m.name;
  e.max_diagram = m.declared_diagram;
  e.left_invariant = true;
  e.model = finish(std::move(m));
  e.ricci.push_back({1, 1, [](const CovectorPoint&) { return 0.0; },
                     "flat space: all curvature vanishes"});
  return e;
}

ZooEntry constant_curvature_surface(double kappa) {
  SubRiemannianModel m;
  m.name = "surface(" + std::to_string(kappa) + ")";
  m.dim = 2;
  m.horizontal_rank = 2;
  Expr x = Expr::coord(0), y = Expr::coord(1);
  Expr F = k1() + Expr::constant(kappa / 4.0) * (x * x + y * y);
  m.frame = zero_frame(2);
  m.frame.fields[0][0] = F;
  m.frame.fields[1][1] = F;
  double b = kappa < 0.0 ? 0.8 * std::sqrt(2.0 / -kappa) : 2.0;
  m.domain.assign(2, {-b, b});
  m.declared_diagram = YoungDiagram({2});

  ZooEntry e;
  e.name = m.name;
  e.max_diagram = m.declared_diagram;
  e.left_invariant = (kappa == 0.0);
  e.model = finish(std::move(m));
  const int d1 = 2;
  e.ricci.push_back(
      {1, 1,
       [kappa, d1](const CovectorPoint& p) {
         return kappa * horizontal_sq(p, d1);
       },
       "constant-curvature Jacobi equation: trace of sectional curvature "
       "against the velocity"});
  return e;
}

ZooEntry heisenberg() { return contact3d(0.0); }

ZooEntry contact3d(double kappa) {
  SubRiemannianModel m;
  m.name = kappa == 0.0 ? "heisenberg"
                        : "contact3d(" + std::to_string(kappa) + ")";
  m.dim = 3;
  m.horizontal_rank = 2;
  Expr x = Expr::coord(0), y = Expr::coord(1);
  Expr F = k1() + Expr::constant(kappa / 4.0) * (x * x + y * y);
  m.frame = zero_frame(3);
  m.frame.fields[0][0] = F;
  m.frame.fields[0][2] = Expr::constant(-0.5) * y;
  m.frame.fields[1][1] = F;
  m.frame.fields[1][2] = Expr::constant(0.5) * x;
  m.frame.fields[2][2] = k1();
  double b = kappa < 0.0 ? 0.8 * std::sqrt(2.0 / -kappa)
                         : (kappa == 0.0 ? 4.0 : 1.5);
  m.domain = {{-b, b}, {-b, b}, {-4.0, 4.0}};
  m.declared_diagram = YoungDiagram({2, 1});

  ZooEntry e;
  e.name = m.name;
  e.max_diagram = m.declared_diagram;
  e.left_invariant = (kappa == 0.0);
  e.model = finish(std::move(m));
  e.ricci.push_back(
      {1, 1,
       [kappa](const CovectorPoint& p) {
         return kappa * horizontal_sq(p, 2) + p.H[2] * p.H[2];
       },
       "3D contact closed form: base curvature times speed squared plus "
       "vertical momentum squared"});
  e.ricci.push_back({1, 2, [](const CovectorPoint&) { return 0.0; },
                     "3D contact closed form: constant base curvature and "
                     "vanishing torsion eigenvalue kill every term"});
  e.ricci.push_back({2, 1, [](const CovectorPoint&) { return 0.0; },
                     "3D contact closed form: the velocity-box curvature "
                     "vanishes identically"});
  return e;
}

ZooEntry martinet() {
  SubRiemannianModel m;
  m.name = "martinet";
  m.dim = 3;
  m.horizontal_rank = 2;
  Expr x = Expr::coord(0);
  m.frame = zero_frame(3);
  m.frame.fields[0][0] = k1();
  m.frame.fields[1][1] = k1();
  m.frame.fields[1][2] = x * x;
  m.frame.fields[2][2] = k1();
  m.domain.assign(3, {-2.0, 2.0});
  m.declared_diagram = YoungDiagram({2, 1});  // generic class, x != 0

  ZooEntry e;
  e.name = m.name;
  e.max_diagram = m.declared_diagram;
  e.left_invariant = false;
  e.model = finish(std::move(m));
  return e;
}

ZooEntry quaternionic_heisenberg(int n) {
  if (n < 1)
    throw Error(ErrorKind::Invalid, "quaternionic_heisenberg: n must be >= 1");
  const int d1 = 4 * n;
  const int dim = d1 + 3;
  SubRiemannianModel m;
  m.name = "quaternionic(" + std::to_string(n) + ")";
  m.dim = dim;
  m.horizontal_rank = d1;
  m.frame = zero_frame(dim);
  const auto& J = quat_mats();
  for (int i = 0; i < d1; ++i) {
    m.frame.fields[i][i] = k1();
    const int blk = 4 * (i / 4), r = i % 4;
    for (int alpha = 0; alpha < 3; ++alpha) {
      // coefficient of d/dz_alpha in X_i: (1/2) (J_alpha x)_i.
      std::vector<Expr> terms;
      for (int ccol = 0; ccol < 4; ++ccol) {
        double jv = J[alpha][r][ccol];
        if (jv == 0.0) continue;
        terms.push_back(Expr::constant(0.5 * jv) * Expr::coord(blk + ccol));
      }
      m.frame.fields[i][d1 + alpha] = Expr::sum(std::move(terms));
    }
  }
  for (int alpha = 0; alpha < 3; ++alpha)
    m.frame.fields[d1 + alpha][d1 + alpha] = k1();
  m.domain.assign(dim, {-4.0, 4.0});
  m.declared_diagram = YoungDiagram({d1, 3});

  ZooEntry e;
  e.name = m.name;
  e.max_diagram = m.declared_diagram;
  e.left_invariant = true;
  e.model = finish(std::move(m));
  // Flat quaternionic group: closed forms depend only on the magnitude of the
  // vertical momentum.  Per-direction diagonal curvatures at |v| = 1,
  // |z-momentum| = h: the distinguished rotation direction contributes h^2,
  // each of the two remaining rotation directions 11/8 h^2, the velocity
  // direction 0, and each transversal velocity direction h^2/4; the
  // second-column entries are 0 for the distinguished direction and
  // -45/256 h^4 for the other two.  Tracing over the boxes gives the sums
  // below.
  e.ricci.push_back({2, 1,
                     [d1](const CovectorPoint& p) {
                       return 0.25 * (d1 - 4) * vertical_sq(p, d1);
                     },
                     "H-type closed form, velocity-level box"});
  e.ricci.push_back({1, 1,
                     [d1](const CovectorPoint& p) {
                       // h^2 + 2 * (11/8) h^2
                       return 15.0 / 4.0 * vertical_sq(p, d1);
                     },
                     "H-type closed form, rotation-level box, column 1"});
  e.ricci.push_back({1, 2,
                     [d1](const CovectorPoint& p) {
                       // 2 * (-45/256) h^4
                       double h2 = vertical_sq(p, d1);
                       return -45.0 / 128.0 * h2 * h2;
                     },
                     "H-type closed form, rotation-level box, column 2"});
  return e;
}

std::vector<std::string> zoo_names() {
  return {"euclidean",  "surface",       "heisenberg",
          "contact3d",  "martinet",      "quaternionic"};
}

ZooEntry zoo_lookup(const std::string& spec) {
  std::string base = spec;
  std::string arg;
  auto lp = spec.find('(');
  if (lp != std::string::npos) {
    if (spec.back() != ')')
      throw Error(ErrorKind::Parse, "zoo_lookup: unbalanced parentheses in '" +
                                        spec + "'");
    base = spec.substr(0, lp);
    arg = spec.substr(lp + 1, spec.size() - lp - 2);
  }
  auto num = [&](double dflt) {
    if (arg.empty()) return dflt;
    try {
      return std::stod(arg);
    } catch (const std::exception&) {
      throw Error(ErrorKind::Parse,
                  "zoo_lookup: bad argument '" + arg + "' in '" + spec + "'");
    }
  };
  if (base == "euclidean") return euclidean(static_cast<int>(num(3)));
  if (base == "surface") return constant_curvature_surface(num(1.0));
  if (base == "heisenberg") return heisenberg();
  if (base == "contact3d") return contact3d(num(1.0));
  if (base == "martinet") return martinet();
  if (base == "quaternionic")
    return quaternionic_heisenberg(static_cast<int>(num(2)));
  throw Error(ErrorKind::Parse, "zoo_lookup: unknown model '" + spec + "'");
}

}  // namespace subcurv
