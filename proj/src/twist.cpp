#include "subcurv/twist.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

#include "subcurv/error.hpp"

namespace subcurv {
namespace {

Vec sharp_of(const Vec& a, int d1, int n) {
  Vec v = Vec::Zero(n);
  v.head(d1) = a.head(d1);
  return v;
}

// out(k, j) = sum_i w_i t3(k, i, j): the endomorphism v -> t3(w, v).
Mat endo_from3(const NumTensor& t3, const Vec& w) {
  const int n = t3.n();
  Mat out = Mat::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    const double wi = w[i];
    if (wi == 0.0) continue;
    for (int k = 0; k < n; ++k)
      for (int j = 0; j < n; ++j) out(k, j) += wi * t3.at({k, i, j});
  }
  return out;
}

// Contracts the first (outermost) slot with w.
NumTensor contract_first(const NumTensor& t, const Vec& w) {
  NumTensor out(t.n(), t.order() - 1);
  const std::size_t s = out.size();
  for (int a = 0; a < t.n(); ++a) {
    const double wa = w[a];
    if (wa == 0.0) continue;
    const std::size_t base = static_cast<std::size_t>(a) * s;
    for (std::size_t f = 0; f < s; ++f) out[f] += wa * t[base + f];
  }
  return out;
}

// Everything the exact twist formulas need at one covector.
struct Ctx {
  int n = 0, d1 = 0;
  Vec H, sh;            // Euler form components and its horizontal lift
  NumTensor T;          // torsion at p.x
  Mat Tsh;              // T_{sharp e} as an endomorphism
  Mat P1;               // = -Tsh
  bool dt_zero = true;  // nabla T identically zero
  bool d2t_zero = true;
  NumTensor DT, D2T;
  Vec de, d2e;  // flow derivatives of the Euler form

  Vec sharp(const Vec& a) const { return sharp_of(a, d1, n); }
};

Ctx make_ctx(const Connection& conn, const CovectorPoint& p, int level) {
  Ctx c;
  c.n = conn.dim();
  c.d1 = conn.horizontal_rank();
  if (p.x.size() != c.n || p.H.size() != c.n)
    throw Error(ErrorKind::Invalid, "covector dimension mismatch");
  c.H = p.H;
  c.sh = c.sharp(p.H);
  c.T = conn.torsion().eval(p.x);
  c.Tsh = endo_from3(c.T, c.sh);
  c.P1 = -c.Tsh;
  // de = -T*_{sharp e} e  (the adjoint acts by the transposed endomorphism)
  c.de = -(c.Tsh.transpose() * c.H);
  if (level >= 2) {
    if (!conn.torsion_d1().is_identically_zero()) {
      c.dt_zero = false;
      c.DT = conn.torsion_d1().eval(p.x);
    }
    const Vec shde = c.sharp(c.de);
    Vec term = c.Tsh.transpose() * c.de;                 // T*_{#e} de
    term += endo_from3(c.T, shde).transpose() * c.H;     // T*_{# de} e
    if (!c.dt_zero) {
      const NumTensor dte = contract_first(c.DT, c.sh);  // nabla_{#e} T
      term += endo_from3(dte, c.sh).transpose() * c.H;
    }
    c.d2e = -term;
  }
  if (level >= 3) {
    if (!conn.torsion_d2().is_identically_zero()) {
      c.d2t_zero = false;
      c.D2T = conn.torsion_d2().eval(p.x);
    }
  }
  return c;
}

// dP1 along the flow: -(nabla_{#e} T)_{#e} - T_{# de}.
Mat dP1(const Ctx& c) {
  Mat out = -endo_from3(c.T, c.sharp(c.de));
  if (!c.dt_zero)
    out -= endo_from3(contract_first(c.DT, c.sh), c.sh);
  return out;
}

// Second flow derivative of P1:
// -(nabla^2_{#e,#e} T)_{#e} - (nabla_{# de} T)_{#e} - 2 (nabla_{#e} T)_{# de}
// - T_{# d2e}.
Mat d2P1(const Ctx& c) {
  Mat out = -endo_from3(c.T, c.sharp(c.d2e));
  if (!c.dt_zero) {
    out -= endo_from3(contract_first(c.DT, c.sharp(c.de)), c.sh);
    out -= 2.0 * endo_from3(contract_first(c.DT, c.sh), c.sharp(c.de));
  }
  if (!c.d2t_zero)
    out -= endo_from3(contract_first(contract_first(c.D2T, c.sh), c.sh), c.sh);
  return out;
}

Mat p2_of(const Ctx& c) { return dP1(c) + c.P1 * c.P1; }

Mat p3_of(const Ctx& c) {
  const Mat d1p = dP1(c);
  return d2P1(c) + d1p * c.P1 + 2.0 * c.P1 * d1p + c.P1 * c.P1 * c.P1;
}

// Applies A to one slot: out(i @ slot) = sum_m A(i, m) E(m @ slot).
NumTensor apply_slot(const NumTensor& e, const Mat& a, int slot) {
  const int n = e.n();
  NumTensor out(n, e.order());
  std::size_t stride = 1;
  for (int s = e.order() - 1; s > slot; --s) stride *= n;
  const std::size_t block = stride * n;
  const std::size_t total = e.size();
  for (std::size_t base = 0; base < total; base += block)
    for (std::size_t off = 0; off < stride; ++off) {
      for (int i = 0; i < n; ++i) {
        double acc = 0.0;
        for (int m = 0; m < n; ++m)
          acc += a(i, m) * e[base + m * stride + off];
        out[base + i * stride + off] = acc;
      }
    }
  return out;
}

}  // namespace

Vec euler_d1(const Connection& conn, const CovectorPoint& p) {
  return make_ctx(conn, p, 1).de;
}

Vec euler_d2(const Connection& conn, const CovectorPoint& p) {
  return make_ctx(conn, p, 2).d2e;
}

Vec euler_d3(const Connection& conn, const CovectorPoint& p) {
  const Ctx c = make_ctx(conn, p, 3);
  const Vec shde = c.sharp(c.de);
  Vec term = c.Tsh.transpose() * c.d2e;                       // T*_{#e} d2e
  term += 2.0 * (endo_from3(c.T, shde).transpose() * c.de);   // T*_{#de} de
  term += endo_from3(c.T, c.sharp(c.d2e)).transpose() * c.H;  // T*_{#d2e} e
  if (!c.dt_zero) {
    const NumTensor dte = contract_first(c.DT, c.sh);
    const Mat dte_sh = endo_from3(dte, c.sh);
    term += 2.0 * (dte_sh.transpose() * c.de);
    term += 2.0 * (endo_from3(dte, shde).transpose() * c.H);
    term += endo_from3(contract_first(c.DT, shde), c.sh).transpose() * c.H;
  }
  if (!c.d2t_zero) {
    const NumTensor d2te = contract_first(contract_first(c.D2T, c.sh), c.sh);
    term += endo_from3(d2te, c.sh).transpose() * c.H;
  }
  return -term;
}

Mat twist_p1(const Connection& conn, const CovectorPoint& p) {
  return make_ctx(conn, p, 1).P1;
}

Mat twist_p2(const Connection& conn, const CovectorPoint& p) {
  return p2_of(make_ctx(conn, p, 2));
}

Mat twist_p3(const Connection& conn, const CovectorPoint& p) {
  return p3_of(make_ctx(conn, p, 3));
}

NumTensor flow_derivative(
    const Connection& conn, const CovectorPoint& p,
    const std::function<NumTensor(const FlowState&)>& section,
    const std::vector<bool>& upper, int order,
    const std::vector<double>& h_grid) {
  if (order < 1 || order > 3)
    throw Error(ErrorKind::Invalid, "flow_derivative supports order 1..3");
  const int n = conn.dim();

  IntegratorOptions opts;
  opts.atol = 1e-13;
  opts.rtol = 1e-12;
  double hmax = 0.0;
  for (double h : h_grid) {
    if (h <= 0.0) throw Error(ErrorKind::Invalid, "stencil step must be > 0");
    const double reach = (order >= 3) ? 2.0 * h : h;
    hmax = std::max(hmax, reach);
    opts.mandatory_times.insert(opts.mandatory_times.end(),
                                {h, -h, reach, -reach});
  }
  const Extremal ext = integrate_window(conn, p, hmax, hmax, opts);
  if (ext.truncated_backward() || ext.truncated_forward())
    throw Error(ErrorKind::Domain,
                "flow-derivative stencil leaves chart domain");

  int order_of_section = -1;
  auto sample = [&](double t) -> Vec {
    const FlowState st = ext.state_at(t);
    NumTensor e = section(st);
    if (e.n() != n)
      throw Error(ErrorKind::Invalid, "section dimension mismatch");
    if (static_cast<int>(upper.size()) != e.order())
      throw Error(ErrorKind::Invalid, "valence/order mismatch");
    order_of_section = e.order();
    // Express in the parallel-transported frame.
    if (t != 0.0) {
      const Mat minv = st.M.partialPivLu().inverse();
      const Mat mt = st.M.transpose();
      for (int s = 0; s < e.order(); ++s)
        e = apply_slot(e, upper[s] ? minv : mt, s);
    }
    Vec out(e.size());
    for (std::size_t f = 0; f < e.size(); ++f) out[f] = e[f];
    return out;
  };

  const Vec d = stencil_derivative(sample, order, h_grid);
  NumTensor out(n, order_of_section);
  for (std::size_t f = 0; f < out.size(); ++f) out[f] = d[f];
  return out;
}

TwistData twist_polynomials(const Connection& conn, const CovectorPoint& p,
                            int k_max) {
  if (k_max < 0 || k_max > 4)
    throw Error(ErrorKind::Invalid, "twist polynomials are capped at k = 4");
  const int n = conn.dim();
  TwistData data;
  data.p = p;
  data.horizontal_rank = conn.horizontal_rank();
  data.P.push_back(Mat::Identity(n, n));
  if (k_max == 0) return data;

  const Ctx c = make_ctx(conn, p, std::min(k_max + 1, 3));
  data.P.push_back(c.P1);
  if (k_max >= 2) data.P.push_back(p2_of(c));
  if (k_max >= 3) data.P.push_back(p3_of(c));
  if (k_max >= 4) {
    auto section = [&conn](const FlowState& st) -> NumTensor {
      const Mat p3 = twist_p3(conn, CovectorPoint{st.x, st.H});
      NumTensor e(static_cast<int>(p3.rows()), 2);
      for (int k = 0; k < p3.rows(); ++k)
        for (int j = 0; j < p3.cols(); ++j) e.at({k, j}) = p3(k, j);
      return e;
    };
    const NumTensor d = flow_derivative(conn, p, section, {true, false}, 1);
    Mat dp3(n, n);
    for (int k = 0; k < n; ++k)
      for (int j = 0; j < n; ++j) dp3(k, j) = d.at({k, j});
    data.P.push_back(dp3 + c.P1 * data.P[3]);
  }
  return data;
}

void flag_and_ranks(TwistData& data, double tol) {
  if (data.P.empty())
    throw Error(ErrorKind::Invalid, "twist data has no polynomials");
  const int n = static_cast<int>(data.P[0].rows());
  const int d1 = data.horizontal_rank > 0 ? data.horizontal_rank : n;

  data.flag.clear();
  data.ranks.clear();
  data.decision_singular_values.clear();
  data.saturated = false;
  data.uncertain = false;
  data.irregular = false;

  const Mat e0 = Mat::Identity(n, n).leftCols(d1);
  Mat u = e0;
  data.flag.push_back(u);
  data.ranks.push_back(d1);
  if (u.cols() == n) {
    data.saturated = true;
    return;
  }

  for (std::size_t i = 1; i < data.P.size(); ++i) {
    const Mat mi = data.P[i] * e0;
    Mat stacked(n, u.cols() + d1);
    stacked << u, mi;
    const double sigma_ref =
        stacked.jacobiSvd().singularValues()(0);
    const double thr = tol * sigma_ref;

    const Mat c = mi - u * (u.transpose() * mi);
    Eigen::JacobiSVD<Mat> svd(c, Eigen::ComputeThinU);
    const Vec sv = svd.singularValues();
    data.decision_singular_values.emplace_back(sv.data(), sv.data() + sv.size());

    int r = 0;
    for (int s = 0; s < sv.size(); ++s) {
      if (sv(s) > thr) ++r;
      if (sv(s) > thr / 10.0 && sv(s) < thr * 10.0) data.uncertain = true;
    }
    if (r > data.ranks.back()) {
      data.irregular = true;
      break;
    }
    if (r == 0) break;

    Mat grown(n, u.cols() + r);
    grown << u, svd.matrixU().leftCols(r);
    Eigen::HouseholderQR<Mat> qr(grown);
    u = qr.householderQ() * Mat::Identity(n, grown.cols());
    data.flag.push_back(u);
    data.ranks.push_back(r);
    if (u.cols() == n) {
      data.saturated = true;
      break;
    }
  }
}

namespace {

TwistData analyze_covector(const Connection& conn, const CovectorPoint& p,
                           double tol) {
  int k = 1;
  TwistData td = twist_polynomials(conn, p, k);
  flag_and_ranks(td, tol);
  while (!td.saturated && !td.irregular && k < 4 &&
         td.ranks.size() == static_cast<std::size_t>(k) + 1) {
    ++k;
    td = twist_polynomials(conn, p, k);
    flag_and_ranks(td, tol);
  }
  return td;
}

}  // namespace

Classification classify(const Connection& conn, const CovectorPoint& p,
                        double t_window, int samples, double tol) {
  if (t_window < 0.0 || samples < 1)
    throw Error(ErrorKind::Invalid, "classification window must be empty or forward");

  std::vector<double> times;
  if (t_window == 0.0 || samples == 1) {
    times.push_back(0.0);
  } else {
    for (int j = 0; j < samples; ++j)
      times.push_back(t_window * j / (samples - 1));
  }

  std::optional<Extremal> ext;
  if (t_window > 0.0) {
    IntegratorOptions opts;
    opts.mandatory_times = times;
    ext = integrate_extremal(conn, p, t_window, opts);
    if (ext->truncated_forward())
      throw Error(ErrorKind::Domain,
                  "classification window leaves chart domain");
  }

  std::vector<TwistData> analyses;
  for (double t : times) {
    const CovectorPoint q = (t == 0.0) ? p : ext->covector_at(t);
    analyses.push_back(analyze_covector(conn, q, tol));
  }

  const TwistData& base = analyses.front();
  Classification out{YoungDiagram(base.ranks)};
  out.ample = base.saturated;
  out.irregular = base.irregular;
  out.sample_times = times;
  out.equiregular = true;
  for (const TwistData& td : analyses) {
    out.sampled_ranks.push_back(td.ranks);
    if (td.uncertain) out.uncertain = true;
    if (td.irregular) out.irregular = true;
    if (td.ranks != base.ranks) out.equiregular = false;
  }
  if (conn.model().declared_diagram)
    out.in_sigma = (out.diagram == *conn.model().declared_diagram);
  return out;
}

}  // namespace subcurv
