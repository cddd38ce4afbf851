#pragma once
// Normal-extremal integration with joint parallel transport, dense output,
// and the transport-based derivative oracle for twist polynomials.

#include <functional>
#include <memory>
#include <vector>

#include "subcurv/connection.hpp"
#include "subcurv/model.hpp"

namespace subcurv {

struct IntegratorOptions {
  double atol = 1e-11;
  double rtol = 1e-10;
  double initial_step = 1e-3;
  double max_step = 0.25;
  // Times the integrator must land on exactly (interpreted in the direction
  // of integration; out-of-range entries are ignored).
  std::vector<double> mandatory_times;
  // Stop integration (with the truncation flag) when the base point leaves
  // the chart box shrunk by this margin.
  double domain_margin = 0.0;
};

// State of the joint flow at a time t: base point, frame momenta, and the
// parallel-transport matrices of the connection (M) and its adjoint (Mhat).
// Columns of M are the transported frame vectors in frame components.
struct FlowState {
  double t = 0.0;
  Vec x;
  Vec H;
  Mat M;
  Mat Mhat;

  CovectorPoint covector() const { return {x, H}; }
};

// One normal extremal through p = (x, H), covering a time window
// [t_min, t_max] containing 0, integrated with an embedded Runge-Kutta 5(4)
// pair (adaptive steps, continuous dense output).  Immutable after creation.
class Extremal {
 public:
  const Connection& connection() const { return conn_; }
  const SubRiemannianModel& model() const { return conn_.model(); }
  const CovectorPoint& initial() const { return p0_; }

  double t_min() const;
  double t_max() const;
  // True when the corresponding end of the window was cut short because the
  // trajectory left the chart domain.
  bool truncated_backward() const { return trunc_back_; }
  bool truncated_forward() const { return trunc_fwd_; }

  FlowState state_at(double t) const;
  CovectorPoint covector_at(double t) const;

  struct Step {
    double t0, t1;
    // Dense-output coefficients (per state component).
    Vec r1, r2, r3, r4, r5;
  };
  struct Branch {
    std::vector<Step> steps;  // ordered away from t = 0
    double t_end = 0.0;
    bool truncated = false;
  };

 private:
  friend Extremal integrate_extremal(const Connection&, const CovectorPoint&,
                                     double, const IntegratorOptions&);
  friend Extremal integrate_window(const Connection&, const CovectorPoint&,
                                   double, double, const IntegratorOptions&);

  explicit Extremal(Connection conn, CovectorPoint p0)
      : conn_(std::move(conn)), p0_(std::move(p0)) {}

  FlowState unpack(double t, const Vec& y) const;

  Connection conn_;
  CovectorPoint p0_;
  Branch fwd_, bwd_;
  bool trunc_back_ = false, trunc_fwd_ = false;
};

// Integrates from t = 0 to t_end (either sign).
Extremal integrate_extremal(const Connection& conn, const CovectorPoint& p,
                            double t_end,
                            const IntegratorOptions& opts = {});

// Integrates both directions: window [-t_back, t_fwd] (t_back, t_fwd >= 0).
Extremal integrate_window(const Connection& conn, const CovectorPoint& p,
                          double t_back, double t_fwd,
                          const IntegratorOptions& opts = {});

struct TransportFrame {
  Mat M;     // transport of the connection
  Mat Mhat;  // transport of the adjoint connection
};

TransportFrame parallel_transport(const Extremal& ext, double t);

// k-th derivative at 0 of a vector-valued function sampled on symmetric
// stencils: central differences at each h in h_grid, then Neville
// extrapolation in h^2.  Shared by the transport oracle and the
// flow-derivative scheme of the twist module.
Vec stencil_derivative(const std::function<Vec(double)>& sample, int k,
                       const std::vector<double>& h_grid);

// d^k/dt^k of M_hat(t)^{-1} M(t) at t = 0, by central finite differences on
// the stencil h_grid (each entry half the previous) with Richardson
// extrapolation.  This is the transport characterization of the k-th twist
// polynomial, used as a cross-validation oracle for the algebraic recursion.
Mat transport_twist_oracle(const Connection& conn, const CovectorPoint& p,
                           int k,
                           const std::vector<double>& h_grid = {1e-2, 5e-3,
                                                                2.5e-3});

}  // namespace subcurv
