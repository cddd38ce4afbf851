#include "subcurv/canonical.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>

#include "subcurv/error.hpp"

namespace subcurv {
namespace {

constexpr double kEquationCap = 1e-6;    // defining-equation residuals
constexpr double kCompletionCap = 1e-5;  // vertical-solve consistency

Vec sharp_of(const Vec& H, int d1) {
    Vec v = Vec::Zero(H.size());
    v.head(d1) = H.head(d1);
    return v;
}

// lamT(i, j) = sum_k H_k T^k_{ij}: the momentum pairing with the torsion.
Mat momentum_torsion(const NumTensor& T, const Vec& H) {
    const int n = T.n();
    Mat out = Mat::Zero(n, n);
    for (int k = 0; k < n; ++k) {
        const double hk = H[k];
        if (hk == 0.0) continue;
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) out(i, j) += hk * T.at({k, i, j});
    }
    return out;
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

// Iterates twist degree until the flag saturates (same loop as classify()).
TwistData analyzed_twist(const Connection& conn, const CovectorPoint& p,
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

// Least-squares solve of  A beta = b  returning beta; *rel gets the relative
// residual ||A beta - b|| / max(||b||, scale).
Vec solve_ls(const Mat& A, const Vec& b, double scale, double* rel) {
    Eigen::JacobiSVD<Mat> svd(A, Eigen::ComputeThinU | Eigen::ComputeThinV);
    svd.setThreshold(1e-12);
    const Vec beta = svd.solve(b);
    const double denom = std::max({b.norm(), scale, 1e-300});
    if (rel) *rel = (A * beta - b).norm() / denom;
    return beta;
}

struct CurvCtx {
    Mat M1;    // (k, j): p(R(v, X_j) X_k)
    Mat M2;    // (a, j): p((nabla_{X_a} T)(v, X_j))
    Mat lamT;  // (i, j): p(T(X_i, X_j))
};

CurvCtx make_curv_ctx(const Connection& conn, const CovectorPoint& p) {
    const int n = conn.dim();
    const int d1 = conn.horizontal_rank();
    const Vec v = sharp_of(p.H, d1);
    CurvCtx ctx;
    ctx.M1 = Mat::Zero(n, n);
    ctx.M2 = Mat::Zero(n, n);
    ctx.lamT = momentum_torsion(conn.torsion().eval(p.x), p.H);
    if (!conn.curvature().is_identically_zero()) {
        const NumTensor R = conn.curvature().eval(p.x);
        for (int l = 0; l < n; ++l) {
            const double hl = p.H[l];
            if (hl == 0.0) continue;
            for (int i = 0; i < d1; ++i) {
                const double vi = v[i];
                if (vi == 0.0) continue;
                for (int k = 0; k < n; ++k)
                    for (int j = 0; j < n; ++j)
                        ctx.M1(k, j) += hl * vi * R.at({l, k, i, j});
            }
        }
    }
    if (!conn.torsion_d1().is_identically_zero()) {
        const NumTensor dT = conn.torsion_d1().eval(p.x);
        for (int k = 0; k < n; ++k) {
            const double hk = p.H[k];
            if (hk == 0.0) continue;
            for (int i = 0; i < d1; ++i) {
                const double vi = v[i];
                if (vi == 0.0) continue;
                for (int a = 0; a < n; ++a)
                    for (int j = 0; j < n; ++j)
                        ctx.M2(a, j) += hk * vi * dT.at({a, k, i, j});
            }
        }
    }
    return ctx;
}

// The pointwise curvature formula; `ds` must be valid on every block touched
// by the supports of X and Y.
double entry_with(const CanonicalData& d, const CurvCtx& ctx, const Mat& ds,
                  const Vec& X, const Vec& Y) {
    const Mat SE = d.s_endo();
    const Mat D = d.shift_op();
    double out = 0.5 * (Y.dot(ctx.M1 * X) + X.dot(ctx.M1 * Y));
    out += 0.5 * (X.dot(ctx.M2 * Y) + Y.dot(ctx.M2 * X));
    out += (d.A * X).dot(d.A * Y);
    out -= (SE * X).dot(SE * Y);
    out -= X.dot(ds * Y);
    out += (D * X).dot(d.S * Y) + X.dot(d.S * (D * Y));
    return out;
}

// Wraps flow_derivative for an n x n matrix section.  `upper_first` selects
// the endomorphism valence (vector x covector); false gives a bilinear form.
Mat flow_d_matrix(const Connection& conn, const CovectorPoint& p,
                  const std::function<Mat(const FlowState&)>& f,
                  bool upper_first) {
    const int n = conn.dim();
    auto section = [&](const FlowState& st) -> NumTensor {
        const Mat m = f(st);
        NumTensor e(n, 2);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) e.at({i, j}) = m(i, j);
        return e;
    };
    const NumTensor der =
        flow_derivative(conn, p, section, {upper_first, false}, 1);
    Mat out(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) out(i, j) = der.at({i, j});
    return out;
}

struct PipelineOut {
    CanonicalData data;
    Mat dwp1;        // derivative of the shift map (levels >= 1)
    Mat ds_partial;  // derivative of S with the vv block frozen (levels >= 2)
};

PipelineOut build_pipeline(const Connection& conn, const CovectorPoint& p,
                           int level, double tol);

// Level-0 matrix pipeline at a flow state (for flow-derivative sections).
Mat wp1_section(const Connection& conn, const FlowState& st, double tol) {
    return build_pipeline(conn, st.covector(), 0, tol).data.wp1;
}

PipelineOut build_pipeline(const Connection& conn, const CovectorPoint& p,
                           int level, double tol) {
    const int n = conn.dim();
    const int d1 = conn.horizontal_rank();
    PipelineOut out;
    CanonicalData& d = out.data;
    d.p = p;
    d.s_level = 0;

    d.twist = analyzed_twist(conn, p, tol);
    // The frame-map equations need twist polynomials up to the longest row.
    const int s = static_cast<int>(d.twist.ranks.size());
    if (d.twist.saturated && static_cast<int>(d.twist.P.size()) <= s) {
        TwistData deeper = twist_polynomials(conn, p, s);
        flag_and_ranks(deeper, tol);
        if (deeper.ranks != d.twist.ranks)
            throw Error(ErrorKind::Inconsistency,
                        "rank sequence changed with twist degree");
        d.twist = std::move(deeper);
    }
    d.boxes = box_decomposition(d.twist, tol);
    const std::vector<int>& len = d.boxes.lengths;
    const int kboxes = d.boxes.num_boxes();
    const int n1 = len.front();

    double tw_scale = 0.0;
    for (std::size_t l = 1; l < d.twist.P.size(); ++l)
        tw_scale = std::max(tw_scale, d.twist.P[l].norm());

    // --- A map ---------------------------------------------------------
    const Mat lamT = momentum_torsion(conn.torsion().eval(p.x), p.H);
    d.A = Mat::Zero(n, n);
    d.A.topRows(d1) = 0.5 * lamT.transpose().topRows(d1);

    // --- B and C maps ----------------------------------------------------
    d.B = Mat::Zero(n, n);
    d.C = Mat::Zero(n, n);
    d.bc_residual = 0.0;
    std::vector<Mat> proj(kboxes);
    for (int a = 1; a <= kboxes; ++a) proj[a - 1] = d.boxes.projector(a);

    for (int a = 1; a <= kboxes; ++a) {
        const Mat& U = d.boxes.box(a);
        const int l = len[a - 1];
        // Candidate target space: boxes 1..a side by side.
        int csum = 0;
        for (int i = 1; i <= a; ++i) csum += d.boxes.box_dim(i);
        Mat cand(n, csum);
        for (int i = 1, c0 = 0; i <= a; ++i) {
            cand.middleCols(c0, d.boxes.box_dim(i)) = d.boxes.box(i);
            c0 += d.boxes.box_dim(i);
        }
        Mat lhs_op = d.twist.P[l - 1] * cand;  // P_{l-1} on the candidates
        Mat rhs = d.twist.P[l] * U;
        if (l >= 2) {
            const Mat& F = d.twist.flag[l - 2];  // spans E + ... + P_{l-2} E
            lhs_op -= F * (F.transpose() * lhs_op);
            rhs -= F * (F.transpose() * rhs);
        }
        for (int c = 0; c < U.cols(); ++c) {
            double rel = 0.0;
            const Vec beta = solve_ls(lhs_op, -rhs.col(c), tw_scale, &rel);
            d.bc_residual = std::max(d.bc_residual, rel);
            d.B += (cand * beta) * U.col(c).transpose();
        }

        if (a >= 2) {  // C map (empty target on the first box)
            const int csumC = csum - d.boxes.box_dim(a);
            const Mat candC = cand.leftCols(csumC);
            Mat lhsC = d.twist.P[l] * candC;
            Mat rhsC = d.twist.P[l + 1] * U;
            const Mat& F = d.twist.flag[l - 1];  // spans E + ... + P_{l-1} E
            lhsC -= F * (F.transpose() * lhsC);
            rhsC -= F * (F.transpose() * rhsC);
            for (int c = 0; c < U.cols(); ++c) {
                double rel = 0.0;
                const Vec beta = solve_ls(lhsC, -rhsC.col(c), tw_scale, &rel);
                d.bc_residual = std::max(d.bc_residual, rel);
                d.C += (candC * beta) * U.col(c).transpose();
            }
        }
    }
    if (d.bc_residual > kEquationCap)
        throw Error(ErrorKind::Inconsistency,
                    "frame-map equations are not solvable: residual " +
                        std::to_string(d.bc_residual));

    d.B0 = Mat::Zero(n, n);
    d.Bplus = Mat::Zero(n, n);
    for (int a = 1; a <= kboxes; ++a) {
        d.B0 += proj[a - 1] * d.B * proj[a - 1];
        for (int i = 1; i < a; ++i) d.Bplus += proj[i - 1] * d.B * proj[a - 1];
    }

    // --- Q map -----------------------------------------------------------
    d.Q = Mat::Zero(n, n);
    const Mat skewA = d.B0 - d.B0.transpose() - 2.0 * d.A;
    for (int a = 1; a <= kboxes; ++a)
        d.Q += (0.5 / len[a - 1]) * proj[a - 1] * skewA * proj[a - 1];
    const Mat G = d.C - d.Bplus;
    d.Q += G - G.transpose();

    // --- S, horizontal block ----------------------------------------------
    d.S = Mat::Zero(n, n);
    const Mat symB = 0.5 * (d.B0 + d.B0.transpose());
    for (int a = 1; a <= kboxes; ++a) {
        d.S += proj[a - 1] * symB * proj[a - 1];
        for (int i = 1; i < a; ++i) {
            const Mat blk = proj[i - 1] *
                            (d.Bplus - len[a - 1] * G - d.A) * proj[a - 1];
            d.S += blk + blk.transpose();
        }
    }

    // --- degree-one shift map ---------------------------------------------
    Mat hmask = Mat::Zero(n, n);
    hmask.topLeftCorner(d1, d1).setIdentity();
    d.wp1 = (d.twist.P[1] + d.Q + d.A + d.s_endo()) * hmask;

    // The shift map must annihilate the final box; connections violating
    // this are outside the class the frame-map recipes are valid for.
    {
        const double drop = (d.wp1 * d.boxes.box(kboxes)).norm();
        if (drop > kEquationCap * std::max(1.0, tw_scale))
            throw Error(ErrorKind::Inconsistency,
                        "shift map does not annihilate the final box");
    }

    if (level <= 0) return out;
    if (n1 > 2)
        throw Error(ErrorKind::UnsupportedDiagram,
                    "vertical completion implemented for rows of length <= 2");

    // --- level 1: derivative of the shift map; vertical x horizontal S ----
    out.dwp1 = flow_d_matrix(
        conn, p,
        [&conn, tol](const FlowState& st) { return wp1_section(conn, st, tol); },
        true);

    if (n1 == 2) {
        const Mat& U1 = d.boxes.box(1);
        const int m1 = static_cast<int>(U1.cols());
        if (m1 != n - d1)
            throw Error(ErrorKind::Inconsistency,
                        "long-box dimension does not match the vertical rank");
        const Mat W1 = d.wp1 * U1;
        const Mat V = W1.bottomRows(n - d1);
        Eigen::FullPivLU<Mat> luVT(V.transpose());
        luVT.setThreshold(1e-10);
        if (luVT.rank() < m1)
            throw Error(ErrorKind::Degenerate,
                        "vertical pairing of the long box is singular");

        const Mat shift0 = d.shift_op();
        const Mat K = out.dwp1 * U1 + shift0 * W1 + d.wp1 * (d.Q * U1);
        const double kscale = std::max({K.norm(), V.norm() * V.norm(), 1e-12});
        d.completion_residual = K.bottomRows(n - d1).norm() / kscale;
        if (d.completion_residual > kCompletionCap)
            throw Error(ErrorKind::Inconsistency,
                        "second shift has a vertical remainder: residual " +
                            std::to_string(d.completion_residual));
        const Mat SvE = -luVT.solve(K.topRows(d1).transpose());
        d.S.block(d1, 0, n - d1, d1) = SvE;
        d.S.block(0, d1, d1, n - d1) = SvE.transpose();
        d.s_level = 1;
        if (level <= 1) return out;

        // --- level 2: vertical x vertical block from the normalization ----
        out.ds_partial = flow_d_matrix(
            conn, p,
            [&conn, tol](const FlowState& st) {
                return build_pipeline(conn, st.covector(), 1, tol).data.S;
            },
            false);
        const CurvCtx ctx = make_curv_ctx(conn, p);
        Mat Ksym(m1, m1);
        for (int a = 0; a < m1; ++a)
            for (int b = a; b < m1; ++b) {
                const double val =
                    entry_with(d, ctx, out.ds_partial, U1.col(a), W1.col(b)) +
                    entry_with(d, ctx, out.ds_partial, U1.col(b), W1.col(a));
                Ksym(a, b) = val;
                Ksym(b, a) = val;
            }
        // Ksym + 2 V^T Svv V = 0.
        const Mat tmp = luVT.solve(Ksym);  // V^{-T} Ksym
        Mat Svv = -0.5 * luVT.solve(tmp.transpose()).transpose();
        Svv = 0.5 * (Svv + Svv.transpose()).eval();
        d.S.block(d1, d1, n - d1, n - d1) = Svv;
        d.s_level = 2;
    } else {
        // Single-column diagram: the horizontal block already is all of S.
        if (level >= 2)
            out.ds_partial = flow_d_matrix(
                conn, p,
                [&conn, tol](const FlowState& st) {
                    return build_pipeline(conn, st.covector(), 0, tol).data.S;
                },
                false);
        d.s_level = level;
    }
    return out;
}

}  // namespace

// ---------------------------------------------------------------------------

Mat BoxDecomposition::horizontal_basis() const {
    if (basis.empty()) return Mat();
    const int n = static_cast<int>(basis.front().rows());
    int d1 = 0;
    for (const Mat& b : basis) d1 += static_cast<int>(b.cols());
    Mat out(n, d1);
    for (std::size_t a = 0, c0 = 0; a < basis.size(); ++a) {
        out.middleCols(c0, basis[a].cols()) = basis[a];
        c0 += basis[a].cols();
    }
    return out;
}

BoxDecomposition box_decomposition(const TwistData& td, double tol) {
    if (td.P.empty())
        throw Error(ErrorKind::Invalid, "twist data has no polynomials");
    if (td.ranks.empty())
        throw Error(ErrorKind::Invalid,
                    "twist data has no rank sequence; run flag_and_ranks");
    const int n = static_cast<int>(td.P[0].rows());
    const int d1 = td.horizontal_rank;
    if (td.p.H.head(d1).norm() <= 1e-12 * (1.0 + td.p.H.norm()))
        throw Error(ErrorKind::Degenerate, "covector has no horizontal momentum");
    if (td.irregular)
        throw Error(ErrorKind::Inconsistency,
                    "rank sequence increases along the flag");
    if (!td.saturated)
        throw Error(ErrorKind::Degenerate,
                    "twist flag does not span: the geodesic is not ample");

    BoxDecomposition bd;
    bd.diagram = YoungDiagram(td.ranks);
    const ReducedDiagram rd = bd.diagram.reduced();
    bd.lengths = rd.lengths;
    bd.multiplicities = rd.multiplicities;
    const int kboxes = rd.rows();
    if (bd.lengths.back() != 1)
        throw Error(ErrorKind::Inconsistency,
                    "diagram has no rows of length one");
    const int n1 = bd.lengths.front();
    if (static_cast<int>(td.P.size()) <= n1)
        throw Error(ErrorKind::Invalid,
                    "need twist polynomials up to the longest row");

    double scale = 0.0;
    for (int l = 1; l <= n1; ++l) scale = std::max(scale, td.P[l].norm());

    const Mat e0 = Mat::Identity(n, n).leftCols(d1);
    bd.basis.assign(kboxes, Mat());
    bd.split_gaps.assign(kboxes, 0.0);

    Mat W = Mat::Identity(d1, d1);  // unassigned horizontal directions
    for (int a = kboxes; a >= 1; --a) {
        const int l = bd.lengths[a - 1];
        const int expected = bd.multiplicities[a - 1];
        const int q = static_cast<int>(W.cols());
        Mat cand = td.P[l] * (e0 * W);
        const Mat& F = td.flag[l - 1];
        cand -= F * (F.transpose() * cand);
        Eigen::JacobiSVD<Mat> svd(cand, Eigen::ComputeFullV);
        const Vec sv = svd.singularValues();
        const double thr =
            tol * std::max(sv.size() > 0 ? sv(0) : 0.0, scale);
        int r = 0;
        for (int i = 0; i < sv.size(); ++i)
            if (sv(i) > thr) ++r;
        if (q - r != expected)
            throw Error(ErrorKind::Inconsistency,
                        "kernel dimension " + std::to_string(q - r) +
                            " of the reduced twist polynomial " +
                            std::to_string(l) + " does not match the diagram");
        bd.split_gaps[a - 1] = r > 0 ? sv(r - 1) : 0.0;
        bd.basis[a - 1] = e0 * (W * svd.matrixV().rightCols(expected));
        W = (W * svd.matrixV().leftCols(r)).eval();
    }
    return bd;
}

Mat CanonicalData::s_endo() const {
    const int n = dim();
    const int d1 = horizontal_rank();
    Mat out = S;
    out.bottomRows(n - d1).setZero();
    return out;
}

Mat CanonicalData::shift_op() const { return twist.P[1] + A + s_endo(); }

CanonicalData canonical_data(const Connection& conn, const CovectorPoint& p,
                             int s_level, double tol) {
    if (s_level < 0 || s_level > 2)
        throw Error(ErrorKind::Invalid, "s_level must be 0, 1 or 2");
    return build_pipeline(conn, p, s_level, tol).data;
}

// ---------------------------------------------------------------------------

CurvatureOperator::CurvatureOperator(const Connection& conn,
                                     const CovectorPoint& p, double tol)
    : conn_(conn), tol_(tol) {
    PipelineOut po = build_pipeline(conn, p, 2, tol);
    data_ = std::move(po.data);
    ds_partial_ = std::move(po.ds_partial);
    dwp1_ = std::move(po.dwp1);
    const CurvCtx ctx = make_curv_ctx(conn, p);
    const int n = data_.dim();
    riem_ = NumTensor(n, 2);
    dtor_ = NumTensor(n, 2);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            riem_.at({i, j}) = ctx.M1(i, j);
            dtor_.at({i, j}) = ctx.M2(i, j);
        }
}

void CurvatureOperator::ensure_full_ds() const {
    if (ds_full_) return;
    if (data_.boxes.lengths.front() == 1) {
        ds_full_ = ds_partial_;  // S has no vertical blocks
        return;
    }
    const double tol = tol_;
    const Connection& conn = conn_;
    ds_full_ = flow_d_matrix(
        conn, data_.p,
        [&conn, tol](const FlowState& st) {
            return canonical_data(conn, st.covector(), 2, tol).S;
        },
        false);
}

double CurvatureOperator::entry(const Vec& X, const Vec& Y) const {
    const int n = data_.dim();
    const int d1 = data_.horizontal_rank();
    CurvCtx ctx;
    ctx.M1 = Mat(n, n);
    ctx.M2 = Mat(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            ctx.M1(i, j) = riem_.at({i, j});
            ctx.M2(i, j) = dtor_.at({i, j});
        }
    const bool xv = X.tail(n - d1).norm() > 1e-12 * (1.0 + X.norm());
    const bool yv = Y.tail(n - d1).norm() > 1e-12 * (1.0 + Y.norm());
    const Mat* ds = &ds_partial_;
    if (xv && yv) {
        ensure_full_ds();
        ds = &*ds_full_;
    }
    return entry_with(data_, ctx, *ds, X, Y);
}

Mat CurvatureOperator::matrix(const Mat& frame) const {
    const int m = static_cast<int>(frame.cols());
    Mat out(m, m);
    for (int i = 0; i < m; ++i)
        for (int j = i; j < m; ++j) {
            out(i, j) = entry(frame.col(i), frame.col(j));
            out(j, i) = out(i, j);
        }
    return out;
}

Vec CurvatureOperator::shifted(const Vec& u, int b) const {
    if (b == 0) return u;
    if (b == 1) return data_.wp1 * u;
    if (b == 2 && dwp1_)
        return (*dwp1_) * u + data_.shift_op() * (data_.wp1 * u) +
               data_.wp1 * (data_.Q * u);
    throw Error(ErrorKind::UnsupportedDiagram,
                "shift powers above two are not implemented");
}

void CurvatureOperator::perturb_s(const Mat& delta_vv) {
    const int n = data_.dim();
    const int d1 = data_.horizontal_rank();
    if (delta_vv.rows() != n - d1 || delta_vv.cols() != n - d1)
        throw Error(ErrorKind::Invalid, "perturbation block size mismatch");
    // The perturbation is treated as constant in the transported frame, so
    // the derivative of the S field is left untouched.
    const Mat sym = 0.5 * (delta_vv + delta_vv.transpose());
    data_.S.block(d1, d1, n - d1, n - d1) += sym;
}

// ---------------------------------------------------------------------------

double RicciReport::value(int a, int b) const {
    for (const RicciValue& e : entries)
        if (e.a == a && e.b == b) return e.value;
    throw Error(ErrorKind::Invalid, "no Ricci entry for the requested cell");
}

RicciReport ricci(const Connection& conn, const CovectorPoint& p, double tol) {
    const CurvatureOperator op(conn, p, tol);
    const BoxDecomposition& bd = op.data().boxes;
    RicciReport rep;
    rep.p = p;
    rep.diagram = bd.diagram;
    rep.lengths = bd.lengths;
    rep.multiplicities = bd.multiplicities;
    rep.completion_residual = op.data().completion_residual;
    for (int a = 1; a <= bd.num_boxes(); ++a)
        for (int b = 1; b <= bd.lengths[a - 1]; ++b) {
            double sum = 0.0;
            for (int c = 0; c < bd.box_dim(a); ++c) {
                const Vec w = op.shifted(bd.box(a).col(c), b - 1);
                sum += op.entry(w, w);
            }
            rep.entries.push_back({a, b, sum});
        }
    return rep;
}

// ---------------------------------------------------------------------------

FinalBoxRicci final_box_ricci(const Connection& conn, const CovectorPoint& p,
                              double tol) {
    const int n = conn.dim();
    const int d1 = conn.horizontal_rank();
    const CanonicalData d = canonical_data(conn, p, 0, tol);
    const int kboxes = d.boxes.num_boxes();
    const Mat& U = d.boxes.box(kboxes);
    const int m = static_cast<int>(U.cols());

    const CurvCtx ctx = make_curv_ctx(conn, p);
    FinalBoxRicci out;
    out.final_dim = m;

    double tr_r = 0.0, tr_dt = 0.0;
    for (int c = 0; c < m; ++c) {
        tr_r += U.col(c).dot(ctx.M1 * U.col(c));
        tr_dt += U.col(c).dot(ctx.M2 * U.col(c));
    }
    const double quart = 0.25 * (U.transpose() * ctx.lamT * U).squaredNorm();

    const Mat symB = d.B0 + d.B0.transpose();
    const Mat mix = 2.0 * d.Bplus - d.C;
    double tr_b = 0.0, tr_mix = 0.0, tr_cross = 0.0;
    for (int c = 0; c < m; ++c) {
        tr_b += (symB * U.col(c)).squaredNorm();
        tr_mix += (mix * U.col(c)).squaredNorm();
        tr_cross += (mix * U.col(c)).dot(d.A * U.col(c));
    }

    // d/dt of the final-box trace of B0 along the extremal (scalar sample).
    const std::vector<double> grid = {1e-2, 5e-3, 2.5e-3};
    IntegratorOptions opts;
    opts.atol = 1e-13;
    opts.rtol = 1e-12;
    for (double h : grid)
        opts.mandatory_times.insert(opts.mandatory_times.end(), {h, -h});
    const Extremal ext = integrate_window(conn, p, grid[0], grid[0], opts);
    if (ext.truncated_backward() || ext.truncated_forward())
        throw Error(ErrorKind::Domain, "trace stencil leaves chart domain");
    auto sample = [&](double t) -> Vec {
        const CanonicalData dt_ =
            canonical_data(conn, ext.state_at(t).covector(), 0, tol);
        const int kb = dt_.boxes.num_boxes();
        Vec v(1);
        v[0] = (dt_.B0 * dt_.boxes.projector(kb)).trace();
        return v;
    };
    const double dtrace = stencil_derivative(sample, 1, grid)[0];

    out.trace =
        tr_r + tr_dt + quart - 0.25 * tr_b - tr_mix + 2.0 * tr_cross - dtrace;

    // Torsion-only route, available when B vanishes on the final box.
    out.b_final_norm = (d.B * U).norm();
    const double bscale = std::max(1.0, d.B.norm());
    if (out.b_final_norm <= kEquationCap * bscale) {
        const Vec v = sharp_of(p.H, d1);
        const NumTensor T = conn.torsion().eval(p.x);
        const Mat Tv = endo_from3(T, v);  // (k, j) -> T(v, X_j)^k
        // Complement of the final box inside the horizontal subspace.
        const Mat Uh = d.boxes.horizontal_basis();
        const Mat Wc = Uh.leftCols(d1 - m);  // boxes 1..k-1
        const Mat lhs = Tv * Wc;
        NumTensor dT;
        const bool has_dt = !conn.torsion_d1().is_identically_zero();
        if (has_dt) dT = conn.torsion_d1().eval(p.x);
        // Horizontal lift of i -> p(T(v, X_i)): the sum below ranges over an
        // orthonormal basis of E only.
        const Vec lam_tv = sharp_of(Tv.transpose() * p.H, d1);
        const Mat M3 = endo_from3(T, lam_tv);  // (k, j) -> T(lam_tv, X_j)^k

        double sum_c2 = 0.0, sum_lam = 0.0, worst = 0.0;
        for (int c = 0; c < m; ++c) {
            Vec rhs = M3 * U.col(c);
            if (has_dt) {
                for (int k = 0; k < n; ++k) {
                    double acc = 0.0;
                    for (int a = 0; a < d1; ++a)
                        for (int i = 0; i < d1; ++i)
                            for (int j = 0; j < n; ++j)
                                acc += dT.at({a, k, i, j}) * v[a] * v[i] *
                                       U.col(c)[j];
                    rhs[k] -= acc;
                }
            }
            Vec cu = Vec::Zero(n);
            if (Wc.cols() > 0) {
                double rel = 0.0;
                const Vec beta = solve_ls(lhs, rhs, Tv.norm(), &rel);
                worst = std::max(worst, rel);
                cu = Wc * beta;
            } else {
                worst = std::max(
                    worst, rhs.norm() / std::max({Tv.norm(), p.H.norm(), 1e-300}));
            }
            sum_c2 += cu.squaredNorm();
            sum_lam += U.col(c).dot(ctx.lamT * cu);
        }
        out.c_solve_residual = worst;
        if (worst <= 1e-6)
            out.torsion_route = tr_r + tr_dt + quart - sum_c2 - sum_lam;
    }
    return out;
}

// ---------------------------------------------------------------------------

std::vector<NormalizationCheck> validate_normalization(
    const Connection& conn, const CovectorPoint& p, double tol,
    const Mat* s_vv_perturbation) {
    CurvatureOperator op(conn, p, tol);
    if (s_vv_perturbation) op.perturb_s(*s_vv_perturbation);
    const BoxDecomposition& bd = op.data().boxes;
    const int kboxes = bd.num_boxes();

    // Cell fields: cell[a-1][b-1] holds the b-th column of box a.
    std::vector<std::vector<Mat>> cell(kboxes);
    double scale = 0.0;
    for (int a = 1; a <= kboxes; ++a) {
        cell[a - 1].resize(bd.lengths[a - 1]);
        for (int b = 1; b <= bd.lengths[a - 1]; ++b) {
            Mat f(bd.box(a).rows(), bd.box_dim(a));
            for (int c = 0; c < bd.box_dim(a); ++c)
                f.col(c) = op.shifted(bd.box(a).col(c), b - 1);
            cell[a - 1][b - 1] = f;
            for (int c = 0; c < f.cols(); ++c)
                scale = std::max(scale, std::abs(op.entry(f.col(c), f.col(c))));
        }
    }
    const double denom = std::max(scale, 1.0);

    std::vector<NormalizationCheck> checks(5);
    const char* names[5] = {
        "same box: R(u_b, v_{b+1}) antisymmetric against R(u_{b+1}, v_b)",
        "same box: R(u_b, v_j) = 0 for |b - j| >= 2",
        "boxes a < i: R(u_b, v_j) = 0 for j < n_i, j not in {b, b+1}",
        "boxes a < i: R(u_b, v_{n_i}) = 0 for b < n_i - 1",
        "boxes a < i: R(u_b, v_j) = 0 for n_a - n_i >= b + j"};
    for (int c = 0; c < 5; ++c) {
        checks[c].condition = c + 1;
        checks[c].description = names[c];
    }

    auto touch = [&](int which, double val) {
        checks[which - 1].vacuous = false;
        checks[which - 1].residual =
            std::max(checks[which - 1].residual, std::abs(val) / denom);
    };

    for (int a = 1; a <= kboxes; ++a) {
        const int na = bd.lengths[a - 1];
        for (int b = 1; b < na; ++b) {  // condition 1
            const Mat& Fb = cell[a - 1][b - 1];
            const Mat& Fb1 = cell[a - 1][b];
            for (int c = 0; c < Fb.cols(); ++c)
                for (int c2 = 0; c2 < Fb.cols(); ++c2)
                    touch(1, op.entry(Fb.col(c), Fb1.col(c2)) +
                                 op.entry(Fb1.col(c), Fb.col(c2)));
        }
        for (int b = 1; b <= na; ++b)  // condition 2
            for (int j = b + 2; j <= na; ++j)
                for (int c = 0; c < cell[a - 1][b - 1].cols(); ++c)
                    for (int c2 = 0; c2 < cell[a - 1][j - 1].cols(); ++c2)
                        touch(2, op.entry(cell[a - 1][b - 1].col(c),
                                          cell[a - 1][j - 1].col(c2)));
        for (int i = a + 1; i <= kboxes; ++i) {
            const int ni = bd.lengths[i - 1];
            for (int b = 1; b <= na; ++b) {
                for (int j = 1; j < ni; ++j)  // condition 3
                    if (j != b && j != b + 1)
                        for (int c = 0; c < cell[a - 1][b - 1].cols(); ++c)
                            for (int c2 = 0; c2 < cell[i - 1][j - 1].cols();
                                 ++c2)
                                touch(3, op.entry(cell[a - 1][b - 1].col(c),
                                                  cell[i - 1][j - 1].col(c2)));
                if (b < ni - 1)  // condition 4
                    for (int c = 0; c < cell[a - 1][b - 1].cols(); ++c)
                        for (int c2 = 0; c2 < cell[i - 1][ni - 1].cols(); ++c2)
                            touch(4, op.entry(cell[a - 1][b - 1].col(c),
                                              cell[i - 1][ni - 1].col(c2)));
                for (int j = 1; j <= ni; ++j)  // condition 5
                    if (na - ni >= b + j)
                        for (int c = 0; c < cell[a - 1][b - 1].cols(); ++c)
                            for (int c2 = 0; c2 < cell[i - 1][j - 1].cols();
                                 ++c2)
                                touch(5, op.entry(cell[a - 1][b - 1].col(c),
                                                  cell[i - 1][j - 1].col(c2)));
            }
        }
    }
    return checks;
}

// ---------------------------------------------------------------------------

CanonicalFrame canonical_frame(const Connection& conn, const CovectorPoint& p,
                               double t_back, double t_fwd, int samples,
                               double tol) {
    if (t_back < 0.0 || t_fwd < 0.0 || samples < 2)
        throw Error(ErrorKind::Invalid, "bad canonical-frame window");
    CanonicalFrame cf;
    for (int s = 0; s < samples; ++s)
        cf.times.push_back(-t_back +
                           (t_back + t_fwd) * s / (samples - 1));
    IntegratorOptions opts;
    opts.mandatory_times = cf.times;
    const Extremal ext = integrate_window(conn, p, t_back, t_fwd, opts);
    if (ext.truncated_backward() || ext.truncated_forward())
        throw Error(ErrorKind::Domain, "canonical-frame window leaves domain");

    const CanonicalData d0 = canonical_data(conn, p, 0, tol);
    const Mat Y0 = d0.boxes.horizontal_basis();
    const int final_dim = d0.boxes.box_dim(d0.boxes.num_boxes());
    const int d1 = static_cast<int>(Y0.cols());

    // Transported components y satisfy y' = (M^{-1} Q M) y.
    auto rhs = [&](double t, const Mat& y) -> Mat {
        const FlowState st = ext.state_at(t);
        const CanonicalData dt_ = canonical_data(conn, st.covector(), 0, tol);
        return st.M.partialPivLu().solve(dt_.Q * (st.M * y));
    };
    auto integrate_to = [&](double target, Mat y, double from) -> Mat {
        const double span = target - from;
        if (span == 0.0) return y;
        const int steps = std::max(1, static_cast<int>(std::ceil(
                                          std::abs(span) / 1.5e-3)));
        const double h = span / steps;
        double t = from;
        for (int i = 0; i < steps; ++i) {
            const Mat k1 = rhs(t, y);
            const Mat k2 = rhs(t + 0.5 * h, y + 0.5 * h * k1);
            const Mat k3 = rhs(t + 0.5 * h, y + 0.5 * h * k2);
            const Mat k4 = rhs(t + h, y + h * k3);
            y += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            t += h;
        }
        return y;
    };

    // March outward from t = 0 in both directions, storing samples in order.
    std::vector<Mat> ys(cf.times.size());
    int i0 = 0;
    while (i0 + 1 < static_cast<int>(cf.times.size()) && cf.times[i0] < 0.0)
        ++i0;
    // cf.times[i0] is the first nonnegative time (0 is always on the grid
    // when t_back > 0; otherwise the grid starts at 0).
    Mat y = Y0;
    double from = 0.0;
    for (int s = i0; s < static_cast<int>(cf.times.size()); ++s) {
        y = integrate_to(cf.times[s], y, from);
        from = cf.times[s];
        ys[s] = y;
    }
    y = Y0;
    from = 0.0;
    for (int s = i0 - 1; s >= 0; --s) {
        y = integrate_to(cf.times[s], y, from);
        from = cf.times[s];
        ys[s] = y;
    }

    cf.gram_drift = 0.0;
    cf.kernel_residual = 0.0;
    for (std::size_t s = 0; s < cf.times.size(); ++s) {
        const FlowState st = ext.state_at(cf.times[s]);
        const Mat frame = st.M * ys[s];
        cf.frames.push_back(frame);
        const CanonicalData dt_ =
            canonical_data(conn, st.covector(), 0, tol);
        cf.second.push_back(dt_.wp1 * frame.leftCols(d1 - final_dim));
        const Mat gram = frame.transpose() * frame;
        cf.gram_drift = std::max(
            cf.gram_drift,
            (gram - Mat::Identity(d1, d1)).cwiseAbs().maxCoeff());
        const double wscale = std::max(1.0, dt_.wp1.norm());
        cf.kernel_residual =
            std::max(cf.kernel_residual,
                     (dt_.wp1 * frame.rightCols(final_dim)).norm() / wscale);
    }
    return cf;
}

}  // namespace subcurv
