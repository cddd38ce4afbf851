#pragma once
// Twist polynomials of a covector, the flag they generate, numerical rank
// decisions, and Young-diagram classification (ample / equiregular /
// maximal-stratum membership).

#include <functional>
#include <optional>
#include <vector>

#include "subcurv/connection.hpp"
#include "subcurv/flow.hpp"
#include "subcurv/model.hpp"
#include "subcurv/tensor.hpp"
#include "subcurv/young.hpp"

namespace subcurv {

struct TwistData {
  CovectorPoint p;
  int horizontal_rank = 0;
  // P[k] in frame components, k = 0..k_max; P[0] = identity,
  // P[1] = -T(sharp p, .), P[k] = flow-derivative recursion.
  std::vector<Mat> P;

  // Filled by flag_and_ranks():
  std::vector<Mat> flag;   // flag[i]: orthonormal basis (columns) of E^{i+1}
  std::vector<int> ranks;  // d_1, d_2, ... (d_1 = horizontal rank)
  std::vector<std::vector<double>> decision_singular_values;
  bool saturated = false;  // flag reached the full tangent space
  bool uncertain = false;  // some rank decision fell in the ambiguous band
  bool irregular = false;  // a rank exceeded its predecessor (cut to zero)
};

// Exact closed forms built from the torsion and its covariant derivatives
// contracted with the tautological (Euler) one-form e, whose frame
// components at p are just the momenta H.  All outputs are frame components.
Vec euler_d1(const Connection& conn, const CovectorPoint& p);
Vec euler_d2(const Connection& conn, const CovectorPoint& p);
Vec euler_d3(const Connection& conn, const CovectorPoint& p);
Mat twist_p1(const Connection& conn, const CovectorPoint& p);
Mat twist_p2(const Connection& conn, const CovectorPoint& p);
Mat twist_p3(const Connection& conn, const CovectorPoint& p);

// Derivative along the extremal flow of a section of the pulled-back tensor
// bundle: integrates a short piece of the extremal through p, expresses the
// section in the parallel-transported frame, and differentiates by central
// differences with Richardson extrapolation.  `section` receives the flow
// state (base point, momenta, transports) and must return frame components
// at that state's base point; `upper[s]` marks contravariant slots.
NumTensor flow_derivative(
    const Connection& conn, const CovectorPoint& p,
    const std::function<NumTensor(const FlowState&)>& section,
    const std::vector<bool>& upper, int order,
    const std::vector<double>& h_grid = {1e-2, 5e-3, 2.5e-3});

// P_0..P_{k_max} at p (k_max <= 4).  k <= 3 use the exact algebraic path;
// k = 4 differentiates the exact P_3 along the flow.
TwistData twist_polynomials(const Connection& conn, const CovectorPoint& p,
                            int k_max);

// Builds the nested flag E^{i+1} = E^i + span(P_i * horizontal space) with
// incremental SVD rank decisions: a direction counts when its singular value
// exceeds tol times the largest singular value of the stacked basis, and a
// decision within one decade of that threshold marks the result uncertain.
void flag_and_ranks(TwistData& data, double tol = 1e-7);

struct Classification {
  explicit Classification(YoungDiagram d) : diagram(std::move(d)) {}

  YoungDiagram diagram;
  bool ample = false;
  bool equiregular = false;
  // Whether the diagram equals the model's declared maximal diagram
  // (empty when the model does not declare one).
  std::optional<bool> in_sigma;
  bool uncertain = false;
  bool irregular = false;
  std::vector<std::vector<int>> sampled_ranks;  // per sample time
  std::vector<double> sample_times;
};

// Classifies p and monitors the rank sequence at `samples` times spread over
// [0, t_window] along the extremal; equiregular iff the sequence never
// changes.  t_window = 0 classifies the single point.
Classification classify(const Connection& conn, const CovectorPoint& p,
                        double t_window, int samples = 5, double tol = 1e-7);

}  // namespace subcurv
