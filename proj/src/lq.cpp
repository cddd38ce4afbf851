#include "subcurv/lq.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>

#include <Eigen/Eigenvalues>

#include "subcurv/error.hpp"
#include "subcurv/flow.hpp"

namespace subcurv {

namespace {

// Flat index of box (a, b): rows enumerated in diagram order (weakly
// decreasing lengths), columns within a row contiguous.
std::vector<int> row_offsets(const std::vector<int>& rows) {
    std::vector<int> off(rows.size() + 1, 0);
    for (size_t a = 0; a < rows.size(); ++a)
        off[a + 1] = off[a] + rows[a];
    return off;
}

// ---------------------------------------------------------------------------
// Embedded Runge-Kutta 5(4) pair (Dormand-Prince coefficients) for the
// constant-coefficient matrix equation Phi' = Hm * Phi, with fixed tight
// tolerances.  The same pair drives the extremal flow integrator.
Mat lq_transition(const Mat& Hm, Mat phi, double dt) {
    if (dt == 0.0) return phi;
    constexpr double kAtol = 1e-12;
    constexpr double kRtol = 1e-11;

    const double dir = dt > 0.0 ? 1.0 : -1.0;
    const double t_end = dt;
    double t = 0.0;
    double h = dir * std::min(0.1, std::abs(dt));

    // Stage weights of the 5(4) pair.
    static const double a21 = 1.0 / 5;
    static const double a31 = 3.0 / 40, a32 = 9.0 / 40;
    static const double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
    static const double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187,
                        a53 = 64448.0 / 6561, a54 = -212.0 / 729;
    static const double a61 = 9017.0 / 3168, a62 = -355.0 / 33,
                        a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                        a65 = -5103.0 / 18656;
    static const double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192,
                        b5 = -2187.0 / 6784, b6 = 11.0 / 84;
    static const double e1 = 35.0 / 384 - 5179.0 / 57600,
                        e3 = 500.0 / 1113 - 7571.0 / 16695,
                        e4 = 125.0 / 192 - 393.0 / 640,
                        e5 = -2187.0 / 6784 + 92097.0 / 339200,
                        e6 = 11.0 / 84 - 187.0 / 2100, e7 = -1.0 / 40;

    int rejected_in_a_row = 0;
    for (int iter = 0; iter < 1000000; ++iter) {
        if (dir * (t + h - t_end) > 0.0) h = t_end - t;
        const Mat k1 = Hm * phi;
        const Mat k2 = Hm * (phi + h * a21 * k1);
        const Mat k3 = Hm * (phi + h * (a31 * k1 + a32 * k2));
        const Mat k4 = Hm * (phi + h * (a41 * k1 + a42 * k2 + a43 * k3));
        const Mat k5 =
            Hm * (phi + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4));
        const Mat k6 = Hm * (phi + h * (a61 * k1 + a62 * k2 + a63 * k3 +
                                        a64 * k4 + a65 * k5));
        const Mat next =
            phi + h * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
        const Mat k7 = Hm * next;
        const Mat err_mat =
            h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);
        const double scale =
            kAtol + kRtol * std::max(phi.norm(), next.norm());
        const double err = err_mat.norm() / scale;

        if (err <= 1.0) {
            t += h;
            phi = next;
            rejected_in_a_row = 0;
            if (dir * (t - t_end) >= 0.0 ||
                std::abs(t - t_end) < 1e-15 * std::abs(t_end))
                return phi;
        } else if (++rejected_in_a_row > 60) {
            throw Error(ErrorKind::Integration,
                        "comparison-system step control failed to converge");
        }
        const double factor = err > 0.0
                                  ? 0.9 * std::pow(err, -0.2)
                                  : 5.0;
        h *= std::clamp(factor, 0.2, 5.0);
        if (std::abs(h) < 1e-14 * std::max(1.0, std::abs(t_end)))
            throw Error(ErrorKind::Integration,
                        "comparison-system step size underflow");
    }
    throw Error(ErrorKind::Integration,
                "comparison-system integration exceeded the step budget");
}

// Sign-change scan shared by the LQ and variational conjugate-time finders:
// walk a grid of determinant samples, ignore values that are ambiguous
// relative to their scale, bracket the first definite sign flip, then bisect
// `det` down to the requested time resolution.
std::optional<double> first_sign_change(
    const std::vector<double>& times, const std::vector<double>& dets,
    const std::vector<double>& scales, double ambiguous_rel, double tol,
    const std::function<double(double)>& det) {
    int last_definite = -1;
    double last_sign = 0.0;
    for (size_t i = 1; i < times.size(); ++i) {
        const double eps = ambiguous_rel * std::max(scales[i], 1e-300);
        if (std::abs(dets[i]) <= eps) continue;
        const double s = dets[i] > 0.0 ? 1.0 : -1.0;
        if (last_definite >= 0 && s != last_sign) {
            double tl = times[last_definite], tr = times[i];
            double fl = dets[last_definite];
            while (tr - tl > tol) {
                const double tm = 0.5 * (tl + tr);
                const double fm = det(tm);
                if (fm == 0.0) return tm;
                if ((fm > 0.0) == (fl > 0.0)) {
                    tl = tm;
                    fl = fm;
                } else {
                    tr = tm;
                }
            }
            return 0.5 * (tl + tr);
        }
        last_definite = static_cast<int>(i);
        last_sign = s;
    }
    return std::nullopt;
}

// Conjugate time of the shift problem of a single row with diagonal potential
// k_1..k_m.  The k-th column carries weight 2k under the time dilation, so
// the scaling law reads t_c(c^2 k_1, c^4 k_2, ...) = t_c(k_1..k_m) / c: the
// potential is normalized by the weighted magnitude, and the determinant is
// scanned over windows staged from the fastest oscillation of the
// compactness polynomial outward (a single wide window would alias the fast
// crossings).
std::optional<double> row_conjugate_time(const std::vector<double>& profile,
                                         const BmPolynomialResult& bm) {
    const int m = static_cast<int>(profile.size());
    double c2 = 0.0;
    for (int b = 0; b < m; ++b)
        if (profile[b] != 0.0)
            c2 = std::max(c2, std::pow(std::abs(profile[b]), 1.0 / (b + 1)));
    if (c2 == 0.0) return std::nullopt;  // free shift problem
    const double c = std::sqrt(c2);

    std::vector<double> scaled(m);
    double w_bk = 1.0;
    for (int b = 0; b < m; ++b) {
        scaled[b] = profile[b] / (w_bk *= c2);
    }

    // Oscillation frequencies sqrt(-y) of the scaled problem over the
    // negative real roots (the roots carry weight 2, so they rescale by c2).
    double w_min = 0.0, w_max = 0.0;
    double root_scale = 1.0;
    for (const auto& y : bm.roots)
        root_scale = std::max(root_scale, std::abs(y) / c2);
    for (const auto& y : bm.roots) {
        const double re = y.real() / c2, im = y.imag() / c2;
        if (std::abs(im) > 1e-8 * root_scale || re > -1e-12 * root_scale)
            continue;
        const double w = std::sqrt(-re);
        w_min = w_min == 0.0 ? w : std::min(w_min, w);
        w_max = std::max(w_max, w);
    }
    if (w_max == 0.0) w_min = w_max = 1.0;

    const LQProblem lq = LQProblem::from_young(
        YoungDiagram(std::vector<int>(m, 1)), scaled);
    const double cap = 4.0 * M_PI / w_min;
    double window = 4.0 * M_PI / w_max;
    std::optional<double> found;
    for (;;) {
        found = conjugate_time(lq, window, 1e-10);
        if (found || window >= cap) break;
        window = std::min(4.0 * window, cap);
    }
    if (!found) return std::nullopt;

    // Re-scan the prefix of the window at full grid resolution in case the
    // coarse pass skipped an earlier crossing.
    for (int pass = 0; pass < 3; ++pass) {
        const auto again = conjugate_time(lq, *found * (1.0 + 1e-9), 1e-10);
        if (again && *again < *found - 1e-8 * *found)
            found = again;
        else
            break;
    }
    return *found / c;
}

}  // namespace

// ---------------------------------------------------------------------------
// Shift problems of Young diagrams.

LQProblem LQProblem::from_young(const YoungDiagram& diagram) {
    const std::vector<int> rows = diagram.row_lengths();
    if (rows.empty())
        throw Error(ErrorKind::Invalid, "empty diagram has no shift problem");
    const std::vector<int> off = row_offsets(rows);
    const int n = off.back();
    const int k = static_cast<int>(rows.size());

    LQProblem lq;
    lq.A = Mat::Zero(n, n);
    lq.B = Mat::Zero(n, k);
    lq.q = Mat::Zero(n, n);
    for (int a = 0; a < k; ++a) {
        lq.B(off[a], a) = 1.0;
        for (int b = 0; b + 1 < rows[a]; ++b)
            lq.A(off[a] + b + 1, off[a] + b) = 1.0;
    }
    return lq;
}

LQProblem LQProblem::from_young(const YoungDiagram& diagram,
                                const std::vector<double>& column_potential) {
    LQProblem lq = from_young(diagram);
    const std::vector<int> rows = diagram.row_lengths();
    const std::vector<int> off = row_offsets(rows);
    for (size_t a = 0; a < rows.size(); ++a) {
        if (rows[a] > static_cast<int>(column_potential.size()))
            throw Error(ErrorKind::Invalid,
                        "column potential shorter than the longest row");
        for (int b = 0; b < rows[a]; ++b)
            lq.q(off[a] + b, off[a] + b) = column_potential[b];
    }
    return lq;
}

Mat LQProblem::hamiltonian() const {
    const int n = dim();
    if (A.rows() != n || A.cols() != n || B.rows() != n || q.rows() != n ||
        q.cols() != n)
        throw Error(ErrorKind::Invalid, "inconsistent problem dimensions");
    Mat H(2 * n, 2 * n);
    H.topLeftCorner(n, n) = -A.transpose();
    H.topRightCorner(n, n) = -q;
    H.bottomLeftCorner(n, n) = B * B.transpose();
    H.bottomRightCorner(n, n) = A;
    return H;
}

// ---------------------------------------------------------------------------
// Conjugate time of an LQ problem.

std::optional<double> conjugate_time(const LQProblem& lq, double t_max,
                                     double tol) {
    if (!(t_max > 0.0))
        throw Error(ErrorKind::Invalid, "t_max must be positive");
    if (!(tol > 0.0))
        throw Error(ErrorKind::Invalid, "tol must be positive");
    const int n = lq.dim();
    const double qscale = std::max(1.0, lq.q.norm());
    if ((lq.q - lq.q.transpose()).norm() > 1e-10 * qscale)
        throw Error(ErrorKind::Invalid, "potential matrix must be symmetric");

    const Mat Hm = lq.hamiltonian();
    constexpr int kGrid = 512;
    const double dt = t_max / kGrid;

    // March the transition matrix across the grid, keeping every checkpoint
    // so the bisection can restart from the nearest one.
    std::vector<Mat> phis(kGrid + 1);
    std::vector<double> times(kGrid + 1), dets(kGrid + 1), scales(kGrid + 1);
    phis[0] = Mat::Identity(2 * n, 2 * n);
    times[0] = 0.0;
    dets[0] = 0.0;
    scales[0] = 0.0;
    for (int i = 1; i <= kGrid; ++i) {
        phis[i] = lq_transition(Hm, phis[i - 1], dt);
        times[i] = i * dt;
        const Mat block = phis[i].bottomLeftCorner(n, n);
        dets[i] = block.determinant();
        // Hadamard-type scale: the determinant of a matrix of this size is
        // bounded by the product of column norms.
        double colprod = 1.0;
        for (int j = 0; j < n; ++j) colprod *= std::max(block.col(j).norm(), 1e-300);
        scales[i] = colprod;
    }

    double max_rel = 0.0;
    for (int i = 1; i <= kGrid; ++i)
        max_rel = std::max(max_rel, std::abs(dets[i]) / std::max(scales[i], 1e-300));
    if (max_rel < 1e-9)
        throw Error(ErrorKind::Degenerate,
                    "endpoint determinant is identically degenerate on the "
                    "grid (uncontrollable problem)");

    const auto det_at = [&](double t) -> double {
        const int i = std::clamp(static_cast<int>(t / dt), 0, kGrid - 1);
        const Mat phi = lq_transition(Hm, phis[i], t - times[i]);
        return phi.bottomLeftCorner(n, n).determinant();
    };
    return first_sign_change(times, dets, scales, 1e-11, tol, det_at);
}

// ---------------------------------------------------------------------------
// Compactness polynomial.

BmPolynomialResult bm_polynomial_check(const std::vector<double>& k) {
    const int m = static_cast<int>(k.size());
    if (m == 0)
        throw Error(ErrorKind::Invalid, "empty coefficient profile");

    // Monic coefficients of p(y) = y^m - sum_b (-1)^{m-b} k_{m-b} y^b in the
    // substituted variable y = x^2 (coeffs[b] multiplies y^b).
    std::vector<double> coeffs(m + 1, 0.0);
    coeffs[m] = 1.0;
    for (int b = 0; b < m; ++b) {
        const int mb = m - b;
        const double sign = (mb % 2 == 0) ? 1.0 : -1.0;
        coeffs[b] = -sign * k[mb - 1];
    }

    BmPolynomialResult out;
    Mat companion = Mat::Zero(m, m);
    for (int i = 1; i < m; ++i) companion(i, i - 1) = 1.0;
    for (int i = 0; i < m; ++i) companion(i, m - 1) = -coeffs[i];
    const Eigen::EigenSolver<Mat> es(companion);
    out.roots.resize(m);
    double scale = 1.0;
    for (int i = 0; i < m; ++i) {
        out.roots[i] = es.eigenvalues()(i);
        scale = std::max(scale, std::abs(out.roots[i]));
    }

    // A simple purely imaginary root x corresponds to a simple negative real
    // root y = x^2 (y = 0 gives x = 0, which is real).
    for (int i = 0; i < m; ++i) {
        const auto& y = out.roots[i];
        if (std::abs(y.imag()) > 1e-8 * scale) continue;
        if (y.real() >= -1e-10 * scale) continue;
        double min_gap = std::numeric_limits<double>::infinity();
        for (int j = 0; j < m; ++j)
            if (j != i) min_gap = std::min(min_gap, std::abs(out.roots[i] - out.roots[j]));
        if (min_gap > 1e-6 * scale) {
            out.bounded = true;
            break;
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Structure-equation LQ problem of a geodesic.

LQProblem lq_from_canonical(const Connection& conn, const CovectorPoint& p,
                            double tol) {
    const CurvatureOperator R(conn, p, tol);
    const BoxDecomposition& boxes = R.data().boxes;
    const YoungDiagram& diagram = boxes.diagram;

    // Canonical fields cell by cell, in the row enumeration of the shift
    // problem: all rows of box 1 first (each contributing n_1 columns), then
    // box 2, and so on.
    std::vector<Vec> fields;
    fields.reserve(diagram.num_boxes());
    for (int a = 1; a <= boxes.num_boxes(); ++a) {
        const int len = boxes.lengths[a - 1];
        for (int c = 0; c < boxes.box_dim(a); ++c) {
            const Vec u = boxes.box(a).col(c);
            for (int b = 0; b < len; ++b) fields.push_back(R.shifted(u, b));
        }
    }

    LQProblem lq = LQProblem::from_young(diagram);
    const int n = lq.dim();
    if (static_cast<int>(fields.size()) != n)
        throw Error(ErrorKind::Inconsistency,
                    "canonical field count does not match the diagram");
    for (int i = 0; i < n; ++i)
        for (int j = i; j < n; ++j) {
            const double v = R.entry(fields[i], fields[j]);
            lq.q(i, j) = v;
            lq.q(j, i) = v;
        }
    return lq;
}

// ---------------------------------------------------------------------------
// Variational conjugate time along a geodesic.

std::optional<double> geodesic_conjugate_time(const Connection& conn,
                                              const CovectorPoint& p,
                                              double t_max, double tol) {
    if (!(t_max > 0.0))
        throw Error(ErrorKind::Invalid, "t_max must be positive");
    const int n = conn.dim();
    if (p.x.size() != n || p.H.size() != n)
        throw Error(ErrorKind::Invalid, "covector has wrong dimensions");
    if (hamiltonian(conn.model(), p) < 1e-14)
        throw Error(ErrorKind::Degenerate,
                    "covector has no horizontal momentum");

    // Endpoint-map Jacobian in frame momenta: columns are central finite
    // differences of the extremal endpoint.  The momenta-to-covector change
    // of variables is linear at fixed base point, so determinant sign changes
    // are unaffected.
    const double eps = 1e-5 * std::max(1.0, p.H.norm());
    IntegratorOptions opts;
    opts.atol = 1e-12;
    opts.rtol = 1e-11;

    std::vector<Extremal> plus, minus;
    plus.reserve(n);
    minus.reserve(n);
    double t_hi = t_max;
    for (int j = 0; j < n; ++j) {
        CovectorPoint pp = p, pm = p;
        pp.H(j) += eps;
        pm.H(j) -= eps;
        plus.push_back(integrate_extremal(conn, pp, t_max, opts));
        minus.push_back(integrate_extremal(conn, pm, t_max, opts));
        t_hi = std::min({t_hi, plus.back().t_max(), minus.back().t_max()});
    }
    if (!(t_hi > 0.0))
        throw Error(ErrorKind::Domain,
                    "extremal leaves the chart immediately");

    const auto jac_det = [&](double t) -> std::pair<double, double> {
        Mat J(n, n);
        for (int j = 0; j < n; ++j)
            J.col(j) =
                (plus[j].state_at(t).x - minus[j].state_at(t).x) / (2.0 * eps);
        double colprod = 1.0;
        for (int j = 0; j < n; ++j)
            colprod *= std::max(J.col(j).norm(), 1e-300);
        return {J.determinant(), colprod};
    };

    constexpr int kGrid = 512;
    const double dt = t_hi / kGrid;
    std::vector<double> times(kGrid + 1), dets(kGrid + 1), scales(kGrid + 1);
    times[0] = 0.0;
    dets[0] = 0.0;
    scales[0] = 0.0;
    for (int i = 1; i <= kGrid; ++i) {
        times[i] = i * dt;
        const auto [d, s] = jac_det(times[i]);
        dets[i] = d;
        scales[i] = s;
    }

    double max_rel = 0.0;
    for (int i = 1; i <= kGrid; ++i)
        max_rel = std::max(max_rel, std::abs(dets[i]) / std::max(scales[i], 1e-300));
    if (max_rel < 1e-6)
        throw Error(ErrorKind::Degenerate,
                    "endpoint Jacobian is identically degenerate on the grid");

    // Finite differencing leaves more noise in the determinant than the LQ
    // marching does, so the ambiguity band is wider.
    return first_sign_change(times, dets, scales, 1e-7, tol,
                             [&](double t) { return jac_det(t).first; });
}

// ---------------------------------------------------------------------------
// Sampled diameter bounds.

namespace {

std::vector<CovectorPoint> sample_covectors(const SubRiemannianModel& model,
                                            const CovectorSampleSpec& spec) {
    const int n = model.dim;
    const int d1 = model.horizontal_rank;
    const int m = n - d1;
    const Vec x0 = model.center();

    std::vector<Vec> hdirs;
    {
        Vec e = Vec::Zero(d1);
        e(0) = 1.0;
        hdirs.push_back(e);
        if (d1 > 1) hdirs.push_back(Vec::Ones(d1).normalized());
    }
    std::vector<Vec> vdirs;
    if (m > 0) {
        Vec e = Vec::Zero(m);
        e(0) = 1.0;
        vdirs.push_back(e);
        if (m > 1) vdirs.push_back(Vec::Ones(m).normalized());
    }

    std::vector<CovectorPoint> out;
    const auto push = [&](const Vec& hu, const Vec& vpart) {
        Vec H = Vec::Zero(n);
        H.head(d1) = hu;
        if (m > 0) H.tail(m) = vpart;
        out.push_back({x0, H});
    };

    // Deterministic part: zero vertical momentum first, then a magnitude grid
    // in each fixed vertical direction.
    for (const Vec& hu : hdirs) push(hu, Vec::Zero(std::max(m, 0)));
    if (m > 0 && spec.vertical_range > 0.0) {
        for (const Vec& hu : hdirs)
            for (const Vec& vd : vdirs)
                for (double frac : {0.25, 0.5, 0.75, 1.0})
                    push(hu, frac * spec.vertical_range * vd);
    }

    std::mt19937 gen(spec.seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (int s = 0; s < spec.samples; ++s) {
        Vec hu(d1);
        do {
            for (int i = 0; i < d1; ++i) hu(i) = gauss(gen);
        } while (hu.norm() < 1e-8);
        hu.normalize();
        Vec vp = Vec::Zero(std::max(m, 0));
        if (m > 0 && spec.vertical_range > 0.0) {
            Vec vd(m);
            do {
                for (int i = 0; i < m; ++i) vd(i) = gauss(gen);
            } while (vd.norm() < 1e-8);
            vd.normalize();
            vp = unif(gen) * spec.vertical_range * vd;
        }
        push(hu, vp);
    }
    return out;
}

std::string profile_string(const std::vector<double>& ks) {
    std::ostringstream os;
    os.precision(6);
    for (size_t i = 0; i < ks.size(); ++i) os << (i ? ", " : "") << ks[i];
    return os.str();
}

}  // namespace

DiameterReport diameter_bound(const Connection& conn,
                              const CovectorSampleSpec& spec, double tol) {
    const SubRiemannianModel& model = conn.model();
    DiameterReport report;
    report.model = model.name;
    report.connection = conn.label();
    report.spec = spec;

    const auto samples = sample_covectors(model, spec);
    report.sample_count = static_cast<int>(samples.size());

    std::vector<int> lengths, mults;
    std::vector<std::vector<double>> inf_ric;  // per reduced row, per column
    double inf_final = 0.0;
    bool have_final = false;
    bool first = true;

    for (const auto& p : samples) {
        const RicciReport rr = ricci(conn, p, tol);
        if (first) {
            lengths = rr.lengths;
            mults = rr.multiplicities;
            report.diagram = rr.diagram;
            inf_ric.resize(lengths.size());
            for (size_t a = 0; a < lengths.size(); ++a)
                inf_ric[a].assign(lengths[a],
                                  std::numeric_limits<double>::infinity());
            first = false;
        } else if (rr.lengths != lengths || rr.multiplicities != mults) {
            throw Error(ErrorKind::Inconsistency,
                        "sampled covectors produce different geodesic "
                        "diagrams; restrict the sampling domain");
        }
        for (size_t a = 0; a < lengths.size(); ++a)
            for (int b = 1; b <= lengths[a]; ++b)
                inf_ric[a][b - 1] = std::min(
                    inf_ric[a][b - 1], rr.value(static_cast<int>(a) + 1, b));

        if (lengths.back() == 1 && mults.back() > 1) {
            const FinalBoxRicci fb = final_box_ricci(conn, p, tol);
            const double v = fb.torsion_route ? *fb.torsion_route : fb.trace;
            inf_final = have_final ? std::min(inf_final, v) : v;
            have_final = true;
        }
    }

    const int D = static_cast<int>(lengths.size());
    for (int a = 1; a <= D; ++a) {
        DiameterRoute route;
        route.name = "row-" + std::to_string(a) + "-trace";
        const bool is_final = (a == D && lengths[a - 1] == 1);
        const int denom = mults[a - 1] - (is_final ? 1 : 0);
        if (denom < 1) {
            route.applicable = false;
            route.detail = "transversal rank of the box is too small";
            report.routes.push_back(std::move(route));
            continue;
        }
        route.applicable = true;
        route.profile.resize(lengths[a - 1]);
        for (int b = 0; b < lengths[a - 1]; ++b)
            route.profile[b] = inf_ric[a - 1][b] / denom;

        const BmPolynomialResult bm = bm_polynomial_check(route.profile);
        if (!bm.bounded) {
            route.detail = "sampled curvature profile (" +
                           profile_string(route.profile) +
                           ") fails the compactness polynomial test";
        } else if (auto tc = row_conjugate_time(route.profile, bm)) {
            route.bound = *tc;
            route.detail = "comparison conjugate time of the row profile (" +
                           profile_string(route.profile) + ")";
        } else {
            route.detail = "comparison system has no conjugate time in the "
                           "scanned window";
        }
        report.routes.push_back(std::move(route));
    }

    // Torsion-only route over the final box: bound pi / sqrt(k) from the
    // normalized trace, available when the box has transversal rank.
    if (!lengths.empty() && lengths.back() == 1) {
        DiameterRoute route;
        route.name = "final-box-trace";
        const int rank = mults.back();
        if (rank <= 1) {
            route.applicable = false;
            route.detail = "final box has no transversal directions";
        } else if (!have_final) {
            route.applicable = false;
            route.detail = "final-box trace unavailable on the sample";
        } else {
            route.applicable = true;
            const double k1 = inf_final / (rank - 1);
            route.profile = {k1};
            if (k1 > 0.0) {
                route.bound = M_PI / std::sqrt(k1);
                route.detail = "normalized final-box trace is positive";
            } else {
                route.detail = "sampled final-box trace infimum (" +
                               profile_string(route.profile) +
                               ") is not positive";
            }
        }
        report.routes.push_back(std::move(route));
    }

    for (const auto& route : report.routes)
        if (route.bound)
            report.bound = report.bound ? std::min(*report.bound, *route.bound)
                                        : *route.bound;
    return report;
}

}  // namespace subcurv
