#include "subcurv/flow.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <utility>

#include "subcurv/error.hpp"

namespace subcurv {
namespace {

// Sparse view of an order-3 coefficient tensor t^k_{im}: only non-zero
// entries are kept, and entries that fold to constants are pre-evaluated.
class SparseCoeffs {
 public:
  SparseCoeffs() = default;
  SparseCoeffs(const SymTensor& t, int d1) {
    const int n = t.n();
    for (int k = 0; k < n; ++k)
      for (int i = 0; i < d1; ++i)  // only horizontal i is ever contracted
        for (int m = 0; m < n; ++m) {
          const Expr& e = t.at({k, i, m});
          if (e.is_zero()) continue;
          Entry ent;
          ent.k = k;
          ent.i = i;
          ent.m = m;
          if (e.is_constant()) {
            ent.constant = true;
            ent.value = e.constant_value();
          } else {
            ent.expr = e;
          }
          entries_.push_back(std::move(ent));
        }
  }

  // out(k, m) += sum_i w_i t^k_{im}(x)
  void accumulate(const Vec& x, const Vec& w, Mat& out) const {
    for (const Entry& e : entries_) {
      const double wi = w[e.i];
      if (wi == 0.0) continue;
      const double v = e.constant ? e.value : e.expr.eval(x.data());
      out(e.k, e.m) += wi * v;
    }
  }

 private:
  struct Entry {
    int k = 0, i = 0, m = 0;
    bool constant = false;
    double value = 0.0;
    Expr expr;
  };
  std::vector<Entry> entries_;
};

struct OdeSystem {
  const SubRiemannianModel* model = nullptr;
  int n = 0, d1 = 0;
  SparseCoeffs gamma, torsion;

  explicit OdeSystem(const Connection& conn)
      : model(&conn.model()),
        n(conn.dim()),
        d1(conn.horizontal_rank()),
        gamma(conn.gamma(), conn.horizontal_rank()),
        torsion(conn.torsion(), conn.horizontal_rank()) {}

  int state_size() const { return 2 * n + 2 * n * n; }

  void rhs(const Vec& y, Vec& dy) const {
    const auto x = y.head(n);
    const auto H = y.segment(n, n);
    Vec w = Vec::Zero(n);
    w.head(d1) = H.head(d1);

    Mat G = Mat::Zero(n, n);
    gamma.accumulate(x, w, G);
    Mat Ghat = G;
    {
      Mat Tw = Mat::Zero(n, n);
      torsion.accumulate(x, w, Tw);
      Ghat -= Tw;
    }

    const Mat F = model->frame.eval_matrix(x);
    dy.resize(y.size());
    dy.head(n) = F * w;
    dy.segment(n, n) = Ghat.transpose() * H;

    Eigen::Map<const Mat> M(y.data() + 2 * n, n, n);
    Eigen::Map<const Mat> Mh(y.data() + 2 * n + n * n, n, n);
    Eigen::Map<Mat> dM(dy.data() + 2 * n, n, n);
    Eigen::Map<Mat> dMh(dy.data() + 2 * n + n * n, n, n);
    dM = -G * M;
    dMh = -Ghat * Mh;
  }
};

// Dormand-Prince 5(4) tableau.
constexpr double kA21 = 1.0 / 5;
constexpr double kA31 = 3.0 / 40, kA32 = 9.0 / 40;
constexpr double kA41 = 44.0 / 45, kA42 = -56.0 / 15, kA43 = 32.0 / 9;
constexpr double kA51 = 19372.0 / 6561, kA52 = -25360.0 / 2187,
                 kA53 = 64448.0 / 6561, kA54 = -212.0 / 729;
constexpr double kA61 = 9017.0 / 3168, kA62 = -355.0 / 33,
                 kA63 = 46732.0 / 5247, kA64 = 49.0 / 176,
                 kA65 = -5103.0 / 18656;
constexpr double kA71 = 35.0 / 384, kA73 = 500.0 / 1113, kA74 = 125.0 / 192,
                 kA75 = -2187.0 / 6784, kA76 = 11.0 / 84;
// Error coefficients: b5 - b4.
constexpr double kE1 = 71.0 / 57600, kE3 = -71.0 / 16695, kE4 = 71.0 / 1920,
                 kE5 = -17253.0 / 339200, kE6 = 22.0 / 525, kE7 = -1.0 / 40;
// Dense-output quartic coefficients.
constexpr double kD1 = -12715105075.0 / 11282082432.0;
constexpr double kD3 = 87487479700.0 / 32700410799.0;
constexpr double kD4 = -10690763975.0 / 1880347072.0;
constexpr double kD5 = 701980252875.0 / 199316789632.0;
constexpr double kD6 = -1453857185.0 / 822651844.0;
constexpr double kD7 = 69997945.0 / 29380423.0;

Vec dense_eval(const Extremal::Step& s, double t) {
  const double theta = (t - s.t0) / (s.t1 - s.t0);
  const double th1 = 1.0 - theta;
  return s.r1 +
         theta * (s.r2 + th1 * (s.r3 + theta * (s.r4 + th1 * s.r5)));
}

}  // namespace

double Extremal::t_min() const { return bwd_.t_end; }
double Extremal::t_max() const { return fwd_.t_end; }

FlowState Extremal::unpack(double t, const Vec& y) const {
  const int n = conn_.dim();
  FlowState st;
  st.t = t;
  st.x = y.head(n);
  st.H = y.segment(n, n);
  st.M = Eigen::Map<const Mat>(y.data() + 2 * n, n, n);
  st.Mhat = Eigen::Map<const Mat>(y.data() + 2 * n + n * n, n, n);
  return st;
}

FlowState Extremal::state_at(double t) const {
  const int n = conn_.dim();
  if (t == 0.0) {
    FlowState st;
    st.t = 0.0;
    st.x = p0_.x;
    st.H = p0_.H;
    st.M = Mat::Identity(n, n);
    st.Mhat = Mat::Identity(n, n);
    return st;
  }
  const Branch& br = (t > 0.0) ? fwd_ : bwd_;
  const double pad = 1e-12 * std::max(1.0, std::abs(br.t_end));
  if (std::abs(t) > std::abs(br.t_end) + pad || br.steps.empty()) {
    if (br.truncated)
      throw Error(ErrorKind::Domain,
                  "extremal truncated at t = " + std::to_string(br.t_end) +
                      " (chart exit); requested t = " + std::to_string(t));
    throw Error(ErrorKind::Invalid,
                "time " + std::to_string(t) + " outside integrated window [" +
                    std::to_string(bwd_.t_end) + ", " +
                    std::to_string(fwd_.t_end) + "]");
  }
  // Steps are ordered away from zero; locate the one containing t.
  const auto& steps = br.steps;
  size_t lo = 0, hi = steps.size() - 1;
  while (lo < hi) {
    const size_t mid = (lo + hi) / 2;
    if (std::abs(steps[mid].t1) >= std::abs(t))
      hi = mid;
    else
      lo = mid + 1;
  }
  return unpack(t, dense_eval(steps[lo], t));
}

CovectorPoint Extremal::covector_at(double t) const {
  FlowState st = state_at(t);
  return {std::move(st.x), std::move(st.H)};
}

namespace {

void integrate_branch(const OdeSystem& sys, const IntegratorOptions& opts,
                      const Vec& y_init, double t_end,
                      Extremal::Branch* branch) {
  branch->steps.clear();
  branch->t_end = 0.0;
  branch->truncated = false;
  if (t_end == 0.0) return;
  const double dir = (t_end > 0.0) ? 1.0 : -1.0;

  if (!sys.model->in_domain(y_init.head(sys.n), opts.domain_margin)) {
    branch->truncated = true;
    return;
  }

  std::vector<double> stops;
  for (double tm : opts.mandatory_times)
    if (tm * dir > 0.0 && std::abs(tm) < std::abs(t_end)) stops.push_back(tm);
  stops.push_back(t_end);
  std::sort(stops.begin(), stops.end(),
            [dir](double a, double b) { return a * dir < b * dir; });
  stops.erase(std::unique(stops.begin(), stops.end()), stops.end());
  size_t next_stop = 0;

  const int m = sys.state_size();
  Vec y = y_init, y1(m), err(m), k1(m), k2(m), k3(m), k4(m), k5(m), k6(m),
      k7(m), ytmp(m);
  double t = 0.0;
  double h = dir * std::min(opts.initial_step, std::abs(t_end));
  sys.rhs(y, k1);

  const int max_steps = 1000000;
  for (int iter = 0; iter < max_steps; ++iter) {
    if (std::abs(h) > opts.max_step) h = dir * opts.max_step;
    // Land exactly on the next mandatory stop.
    bool landing = false;
    if ((t + h - stops[next_stop]) * dir >= 0.0) {
      h = stops[next_stop] - t;
      landing = true;
    }
    if (std::abs(h) < 4.0 * std::numeric_limits<double>::epsilon() *
                          std::max(1.0, std::abs(t)))
      throw Error(ErrorKind::Integration,
                  "step size underflow at t = " + std::to_string(t));

    ytmp = y + h * kA21 * k1;
    sys.rhs(ytmp, k2);
    ytmp = y + h * (kA31 * k1 + kA32 * k2);
    sys.rhs(ytmp, k3);
    ytmp = y + h * (kA41 * k1 + kA42 * k2 + kA43 * k3);
    sys.rhs(ytmp, k4);
    ytmp = y + h * (kA51 * k1 + kA52 * k2 + kA53 * k3 + kA54 * k4);
    sys.rhs(ytmp, k5);
    ytmp = y + h * (kA61 * k1 + kA62 * k2 + kA63 * k3 + kA64 * k4 + kA65 * k5);
    sys.rhs(ytmp, k6);
    y1 = y + h * (kA71 * k1 + kA73 * k3 + kA74 * k4 + kA75 * k5 + kA76 * k6);
    sys.rhs(y1, k7);
    err = h * (kE1 * k1 + kE3 * k3 + kE4 * k4 + kE5 * k5 + kE6 * k6 + kE7 * k7);

    double err_norm = 0.0;
    for (int i = 0; i < m; ++i) {
      const double sc =
          opts.atol + opts.rtol * std::max(std::abs(y[i]), std::abs(y1[i]));
      const double q = err[i] / sc;
      err_norm += q * q;
    }
    err_norm = std::sqrt(err_norm / m);

    if (err_norm <= 1.0) {
      // Accepted: record dense-output coefficients.
      Extremal::Step step;
      step.t0 = t;
      step.t1 = landing ? stops[next_stop] : t + h;
      step.r1 = y;
      step.r2 = y1 - y;
      step.r3 = h * k1 - step.r2;
      step.r4 = 2.0 * step.r2 - h * (k1 + k7);
      step.r5 = h * (kD1 * k1 + kD3 * k3 + kD4 * k4 + kD5 * k5 + kD6 * k6 +
                     kD7 * k7);
      branch->steps.push_back(step);
      t = step.t1;
      y = y1;
      k1 = k7;
      branch->t_end = t;

      if (!sys.model->in_domain(y.head(sys.n), opts.domain_margin)) {
        // Bisect the exit time inside this step so callers get a usable
        // truncated window.
        double lo = 0.0, hi = 1.0;
        const Extremal::Step& s = branch->steps.back();
        for (int b = 0; b < 60; ++b) {
          const double mid = 0.5 * (lo + hi);
          const Vec ym = dense_eval(s, s.t0 + mid * (s.t1 - s.t0));
          if (sys.model->in_domain(ym.head(sys.n), opts.domain_margin))
            lo = mid;
          else
            hi = mid;
        }
        branch->t_end = s.t0 + lo * (s.t1 - s.t0);
        branch->truncated = true;
        return;
      }
      if (landing) {
        ++next_stop;
        if (next_stop == stops.size()) return;
      }
    }
    const double factor = std::clamp(
        0.9 * std::pow(std::max(err_norm, 1e-10), -0.2), 0.2, 5.0);
    h *= factor;
  }
  throw Error(ErrorKind::Integration, "step limit exceeded");
}

Vec initial_state(const OdeSystem& sys, const CovectorPoint& p) {
  const int n = sys.n;
  Vec y = Vec::Zero(sys.state_size());
  y.head(n) = p.x;
  y.segment(n, n) = p.H;
  Eigen::Map<Mat>(y.data() + 2 * n, n, n).setIdentity();
  Eigen::Map<Mat>(y.data() + 2 * n + n * n, n, n).setIdentity();
  return y;
}

void check_point(const SubRiemannianModel& model, const CovectorPoint& p) {
  if (p.x.size() != model.dim || p.H.size() != model.dim)
    throw Error(ErrorKind::Invalid, "covector dimension mismatch");
  if (!model.in_domain(p.x, 0.0))
    throw Error(ErrorKind::Domain, "initial point outside chart domain");
}

}  // namespace

Extremal integrate_extremal(const Connection& conn, const CovectorPoint& p,
                            double t_end, const IntegratorOptions& opts) {
  check_point(conn.model(), p);
  Extremal ext(conn, p);
  OdeSystem sys(conn);
  const Vec y0 = initial_state(sys, p);
  if (t_end >= 0.0) {
    integrate_branch(sys, opts, y0, t_end, &ext.fwd_);
    ext.trunc_fwd_ = ext.fwd_.truncated;
  } else {
    integrate_branch(sys, opts, y0, t_end, &ext.bwd_);
    ext.trunc_back_ = ext.bwd_.truncated;
  }
  return ext;
}

Extremal integrate_window(const Connection& conn, const CovectorPoint& p,
                          double t_back, double t_fwd,
                          const IntegratorOptions& opts) {
  if (t_back < 0.0 || t_fwd < 0.0)
    throw Error(ErrorKind::Invalid, "window lengths must be non-negative");
  check_point(conn.model(), p);
  Extremal ext(conn, p);
  OdeSystem sys(conn);
  const Vec y0 = initial_state(sys, p);
  integrate_branch(sys, opts, y0, t_fwd, &ext.fwd_);
  integrate_branch(sys, opts, y0, -t_back, &ext.bwd_);
  ext.trunc_fwd_ = ext.fwd_.truncated;
  ext.trunc_back_ = ext.bwd_.truncated;
  return ext;
}

TransportFrame parallel_transport(const Extremal& ext, double t) {
  FlowState st = ext.state_at(t);
  return {std::move(st.M), std::move(st.Mhat)};
}

Vec stencil_derivative(const std::function<Vec(double)>& sample, int k,
                       const std::vector<double>& h_grid) {
  if (k < 1 || k > 4)
    throw Error(ErrorKind::Invalid, "derivative order must be in 1..4");
  if (h_grid.empty())
    throw Error(ErrorKind::Invalid, "empty stencil grid");

  std::map<double, Vec> memo;
  auto at = [&](double t) -> const Vec& {
    auto it = memo.find(t);
    if (it == memo.end()) it = memo.emplace(t, sample(t)).first;
    return it->second;
  };

  std::vector<Vec> diffs;
  std::vector<double> xi;  // h^2, the expansion variable
  for (double h : h_grid) {
    Vec d;
    switch (k) {
      case 1:
        d = (at(h) - at(-h)) / (2.0 * h);
        break;
      case 2:
        d = (at(h) - 2.0 * at(0.0) + at(-h)) / (h * h);
        break;
      case 3:
        d = (at(2.0 * h) - 2.0 * at(h) + 2.0 * at(-h) - at(-2.0 * h)) /
            (2.0 * h * h * h);
        break;
      default:
        d = (at(2.0 * h) - 4.0 * at(h) + 6.0 * at(0.0) - 4.0 * at(-h) +
             at(-2.0 * h)) /
            (h * h * h * h);
        break;
    }
    diffs.push_back(std::move(d));
    xi.push_back(h * h);
  }
  // Neville extrapolation in h^2 to h -> 0.
  const size_t levels = diffs.size();
  for (size_t j = 1; j < levels; ++j)
    for (size_t i = levels - 1; i >= j; --i) {
      diffs[i] = (xi[i - j] * diffs[i] - xi[i] * diffs[i - 1]) /
                 (xi[i - j] - xi[i]);
      if (i == j) break;
    }
  return diffs.back();
}

Mat transport_twist_oracle(const Connection& conn, const CovectorPoint& p,
                           int k, const std::vector<double>& h_grid) {
  if (k < 1 || k > 4)
    throw Error(ErrorKind::Invalid, "twist oracle supports k in 1..4");
  const int n = conn.dim();
  double hmax = 0.0;
  IntegratorOptions opts;
  // The k-th difference amplifies state noise by ~h^-k, so the oracle
  // integrates much tighter than the module default.
  opts.atol = 1e-13;
  opts.rtol = 1e-12;
  for (double h : h_grid) {
    if (h <= 0.0) throw Error(ErrorKind::Invalid, "stencil step must be > 0");
    const double reach = (k >= 3) ? 2.0 * h : h;
    hmax = std::max(hmax, reach);
    opts.mandatory_times.push_back(reach);
    opts.mandatory_times.push_back(-reach);
    opts.mandatory_times.push_back(h);
    opts.mandatory_times.push_back(-h);
  }
  Extremal ext = integrate_window(conn, p, hmax, hmax, opts);
  if (ext.truncated_backward() || ext.truncated_forward())
    throw Error(ErrorKind::Domain, "twist-oracle stencil leaves chart domain");

  auto sample = [&](double t) -> Vec {
    const FlowState st = ext.state_at(t);
    const Mat q = st.Mhat.partialPivLu().solve(st.M);
    return Eigen::Map<const Vec>(q.data(), n * n);
  };
  const Vec d = stencil_derivative(sample, k, h_grid);
  return Eigen::Map<const Mat>(d.data(), n, n);
}

}  // namespace subcurv
