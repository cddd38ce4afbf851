#pragma once
// Built-in example models with closed-form invariants used as test oracles.

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "subcurv/model.hpp"
#include "subcurv/young.hpp"

namespace subcurv {

// A closed-form invariant declared by a zoo entry, evaluated at a covector.
// `a`/`b` identify the reduced-diagram box the Ricci value belongs to
// (1-based row level and column).
struct DeclaredRicci {
  int a = 1, b = 1;
  std::function<double(const CovectorPoint&)> value;
  std::string note;  // mathematical origin of the formula
};

struct ZooEntry {
  std::string name;
  std::shared_ptr<const SubRiemannianModel> model;
  // Maximal (generic-covector) Young diagram, when constant over the sample.
  std::optional<YoungDiagram> max_diagram;
  // True when the frame has constant structure constants (left-invariant
  // frame), so the zero-Christoffel connection is canonical for it.
  bool left_invariant = false;
  std::vector<DeclaredRicci> ricci;
};

// Riemannian R^n with the coordinate frame (E = TM).
ZooEntry euclidean(int n);
// Riemannian surface of constant curvature kappa in a conformal chart:
// X_1 = F d/dx, X_2 = F d/dy with F = 1 + kappa (x^2+y^2)/4.
ZooEntry constant_curvature_surface(double kappa);
// The Heisenberg group: X_1 = d/dx - (y/2) d/dz, X_2 = d/dy + (x/2) d/dz.
ZooEntry heisenberg();
// 3D contact structure over a constant-curvature base, vanishing torsion
// eigenvalue: X_1 = F d/dx - (y/2) d/dz, X_2 = F d/dy + (x/2) d/dz, with
// F = 1 + kappa (x^2+y^2)/4.  kappa = 0 recovers the Heisenberg group;
// kappa = 1 is the standard-sphere (Hopf-type) normalization.
ZooEntry contact3d(double kappa);
// Martinet structure: X = d/dx, Y = d/dy + x^2 d/dz.
ZooEntry martinet();
// Quaternionic Heisenberg group with horizontal rank 4n and 3 vertical
// directions; J-maps are quaternion left multiplications.
ZooEntry quaternionic_heisenberg(int n);

// Registry.  `spec` is a base name with an optional argument, e.g.
// "heisenberg", "euclidean(4)", "contact3d(1.0)", "quaternionic(2)",
// "surface(-1)".  Bare parameterized names get a default argument.
std::vector<std::string> zoo_names();
ZooEntry zoo_lookup(const std::string& spec);

}  // namespace subcurv
