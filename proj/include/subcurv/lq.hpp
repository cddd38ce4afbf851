#pragma once
// Linear-quadratic comparison problems: conjugate times of constant-
// coefficient Hamiltonian systems, the compactness polynomial test, and
// sampled diameter bounds built on the canonical curvature pipeline.

#include <complex>
#include <optional>
#include <string>
#include <vector>

#include "subcurv/canonical.hpp"
#include "subcurv/young.hpp"

namespace subcurv {

// Constant-coefficient LQ optimal-control problem.  Trajectories are
// projections of solutions of the Hamiltonian system
//   d/dt (p, x) = ((-A^T, -q), (B B^T, A)) (p, x),
// and t is a conjugate time when a nontrivial solution has x(0) = x(t) = 0.
struct LQProblem {
  Mat A;  // n x n drift
  Mat B;  // n x k control injection
  Mat q;  // n x n symmetric potential

  // Shift problem of a Young diagram on the box coordinates e_{a,b} (row a,
  // column b, rows enumerated with multiplicity): A e_{a,b} = e_{a,b+1} with
  // the last column mapped to zero, and B injects one control into the first
  // column of each row.  q starts at zero.
  static LQProblem from_young(const YoungDiagram& diagram);
  // Same, with the diagonal potential q e_{a,b} = k_b e_{a,b} given by one
  // constant per column.
  static LQProblem from_young(const YoungDiagram& diagram,
                              const std::vector<double>& column_potential);

  int dim() const { return static_cast<int>(A.rows()); }
  int controls() const { return static_cast<int>(B.cols()); }
  // The 2n x 2n Hamiltonian matrix [[-A^T, -q], [B B^T, A]].
  Mat hamiltonian() const;
};

// First conjugate time in (0, t_max], located as a sign change of
// det(d x(t) / d p(0)) on a 512-point grid followed by bisection to time
// resolution tol.  Returns nullopt when no sign change occurs up to t_max.
// Throws ErrorKind::Degenerate when the determinant is identically near zero
// on the grid (e.g. no controls reach part of the state).
std::optional<double> conjugate_time(const LQProblem& lq, double t_max,
                                     double tol = 1e-10);

// Compactness test polynomial for a row profile k_1..k_m:
//   pi(x) = x^{2m} - sum_{b=0}^{m-1} (-1)^{m-b} k_{m-b} x^{2b}.
// In the variable y = x^2 this is a degree-m real polynomial; a simple purely
// imaginary x-root corresponds to a simple negative real y-root.
struct BmPolynomialResult {
  bool bounded = false;  // a simple purely imaginary root exists
  std::vector<std::complex<double>> roots;  // roots in the variable y = x^2
};
BmPolynomialResult bm_polynomial_check(const std::vector<double>& k);

// LQ problem of the structure (Jacobi) equation along the geodesic through p:
// the shift problem of the full Young diagram with q equal to the canonical
// curvature matrix in the box basis (first-column vectors are the orthonormal
// box bases, later columns their shifted fields).  The snapshot is taken at
// t = 0; it is the exact Jacobi problem whenever the curvature is constant
// along the flow (e.g. left-invariant models).
LQProblem lq_from_canonical(const Connection& conn, const CovectorPoint& p,
                            double tol = 1e-7);

// First conjugate time of the geodesic through p measured variationally:
// sign change of det(d x(t) / d p0), the endpoint-map Jacobian in chart
// coordinates, computed by central finite differences of the extremal flow.
// Grid scan plus bisection to time resolution tol.
std::optional<double> geodesic_conjugate_time(const Connection& conn,
                                              const CovectorPoint& p,
                                              double t_max, double tol = 1e-6);

// Covector sampling for diameter bounds: unit horizontal momenta paired with
// vertical momenta of magnitude up to vertical_range.  A deterministic grid
// (including zero vertical momentum) is always included; `samples` additional
// covectors are drawn from the seeded generator.
struct CovectorSampleSpec {
  int samples = 25;
  unsigned seed = 0;
  double vertical_range = 3.0;
};

// One comparison route of the diameter-bound report.
struct DiameterRoute {
  std::string name;         // which comparison produced this route
  bool applicable = false;  // rank hypothesis satisfied
  std::string detail;       // human-readable status
  std::vector<double> profile;  // sampled infima k_1..k_m (normalized)
  std::optional<double> bound;  // diameter bound when the route applies
};

struct DiameterReport {
  std::string model;
  std::string connection;
  YoungDiagram diagram;  // common reduced diagram of the sample
  int sample_count = 0;
  CovectorSampleSpec spec;
  std::vector<DiameterRoute> routes;
  std::optional<double> bound;  // best applicable bound
};

// Estimates diameter bounds by sampling unit covectors: for every row of the
// reduced diagram with enough transversal rank, the normalized sampled
// infimum profile of the Ricci entries feeds the compactness polynomial and
// the matching LQ conjugate time; the final box additionally gets the
// torsion-only route.  The infima are sampled estimates, reported as such.
DiameterReport diameter_bound(const Connection& conn,
                              const CovectorSampleSpec& spec = {},
                              double tol = 1e-7);

}  // namespace subcurv
