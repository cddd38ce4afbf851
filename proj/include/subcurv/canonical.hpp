#pragma once
// Canonical decomposition of the horizontal space along a normal extremal and
// the normalized transport law built on top of the twist polynomials: the box
// decomposition indexed by the reduced Young diagram, the frame maps B, C, Q
// and the symmetric normalizer S, the curvature of the normalized transport,
// box-wise Ricci traces, the closed-form final-box trace, and the canonical
// frame itself (integrated along the extremal).
//
// Everything is expressed in frame components at a covector (x, H): vectors
// are length-n coordinate columns over the adapted frame, the horizontal
// subspace E is the span of the first d1 coordinates, and g restricted to E
// is the Euclidean product of those components.

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "subcurv/connection.hpp"
#include "subcurv/flow.hpp"
#include "subcurv/twist.hpp"
#include "subcurv/young.hpp"

namespace subcurv {

// ---------------------------------------------------------------------------
// Box decomposition.
//
// The kernels of the projected twist polynomials split E into orthogonal
// "boxes", one per distinct row length of the reduced Young diagram.  Box a
// (1-based, a = 1 holding the longest rows of length n_1) has dimension equal
// to the number of rows of that length.  The boxes are built final-first:
//   box_k = ker [P_1],   box_a = ker [P_{n_a}] ∩ (box_{a+1} ⊕ ... ⊕ box_k)^⊥,
// with [P_l] the twist polynomial P_l reduced modulo the flag subspace
// spanned by E, P_1 E, ..., P_{l-1} E.
struct BoxDecomposition {
    YoungDiagram diagram;            // full diagram (column heights)
    std::vector<int> lengths;        // reduced row lengths n_1 > ... > n_k = 1
    std::vector<int> multiplicities; // box dimensions
    // basis[a]: n x multiplicities[a], orthonormal columns supported on the
    // first d1 coordinates.  0-based storage: basis[0] is box 1.
    std::vector<Mat> basis;
    // Smallest singular value retained in each kernel decision (diagnostic).
    std::vector<double> split_gaps;

    int num_boxes() const { return static_cast<int>(basis.size()); }
    int box_dim(int a) const { return static_cast<int>(basis[a - 1].cols()); }
    const Mat& box(int a) const { return basis[a - 1]; }  // 1-based
    Mat projector(int a) const {                          // n x n, onto box a
        return basis[a - 1] * basis[a - 1].transpose();
    }
    Mat horizontal_basis() const;  // n x d1: all boxes side by side
};

// Splits E at the covector underlying `td` (requires td.flag/ranks computed,
// i.e. twist_polynomials + flag_and_ranks with k up to the longest row).
// Throws Inconsistency if a kernel dimension disagrees with the diagram and
// Degenerate if the covector has no horizontal part.
BoxDecomposition box_decomposition(const TwistData& td, double tol = 1e-7);

// ---------------------------------------------------------------------------
// Canonical data at a covector: the frame maps of the normalized transport.
//
// All maps are stored as n x n matrices acting on frame components.
//   A      : one-half the momentum pairing with the torsion,
//            <A X, Y>_g = (1/2) p(T(X, Y)) for Y horizontal (E-valued rows).
//   B      : per-box solution of  P_{n_a} u = -P_{n_a - 1} (B u)  modulo the
//            flag below, with B u constrained to boxes 1..a.  B0 / Bplus are
//            the diagonal and strictly-upper box blocks.
//   C      : per-box solution of  P_{n_a + 1} u = -P_{n_a} (C u)  modulo the
//            flag, with C u constrained to boxes 1..a-1 (zero on box 1).
//   Q      : the antisymmetric rotation removed from the transport so that
//            the degree-one shift map below becomes canonical,
//            Q = (1/2) Σ_a (1/n_a) pr_a (B0 - B0^T - 2 A) pr_a
//                + (C - Bplus) - (C - Bplus)^T          (E block only).
//   S      : the symmetric normalizer.  Its E x E block is algebraic:
//            diagonal blocks (1/2)(B0 + B0^T), block (i,a) for i < a equal to
//            pr_i (Bplus - n_a (C - Bplus) - A) pr_a, mirrored below.  The
//            vertical blocks are completed from the curvature normalization
//            (s_level 1 fills the vertical x horizontal block, s_level 2 the
//            vertical x vertical block); completion is implemented for
//            reduced diagrams with rows of length at most 2.
//   wp1    : the degree-one shift map on E, wp1 = (P1 + Q + A + S-endo)|_E;
//            annihilates the final box.
struct CanonicalData {
    CovectorPoint p;
    TwistData twist;
    BoxDecomposition boxes;
    Mat A;
    Mat B, B0, Bplus;
    Mat C;
    Mat Q;
    Mat S;
    Mat wp1;
    int s_level = 0;
    double bc_residual = 0.0;          // worst defining-equation residual
    double completion_residual = 0.0;  // consistency of the vertical solve

    int dim() const { return static_cast<int>(S.rows()); }
    int horizontal_rank() const { return twist.horizontal_rank; }
    // Endomorphism v -> Σ_j S(v, X_j) X_j over horizontal j (E-valued rows).
    Mat s_endo() const;
    // Shift generator P1 + A + S-endo applied to all of TM.
    Mat shift_op() const;
};

// Computes the box decomposition and frame maps at p.  s_level 0 is purely
// pointwise algebra; levels 1 and 2 differentiate the lower-level data along
// the extremal through p (one short integration window per level).
CanonicalData canonical_data(const Connection& conn, const CovectorPoint& p,
                             int s_level = 2, double tol = 1e-7);

// ---------------------------------------------------------------------------
// Curvature of the normalized transport.
//
// entry(X, Y) evaluates the symmetric curvature form
//   R^S(X,Y) = (1/2) p(R(v,X)Y) + (1/2) p(R(v,Y)X)
//            + (1/2) p((∇_X T)(v, Y)) + (1/2) p((∇_Y T)(v, X))
//            + <A X, A Y> - <S-endo X, S-endo Y> - (dS)(X, Y)
//            + S(D X, Y) + S(X, D Y),
// with v = ♯p, D = P1 + A + S-endo and dS the derivative of the S field along
// the extremal in the transported frame.  The block of dS contracted by a
// vertical argument pair is computed lazily (it needs the fully completed S
// along the flow).
class CurvatureOperator {
  public:
    CurvatureOperator(const Connection& conn, const CovectorPoint& p,
                      double tol = 1e-7);

    const CanonicalData& data() const { return data_; }

    // X, Y are length-n frame-component columns at p.
    double entry(const Vec& X, const Vec& Y) const;
    // Gram-type matrix over the columns of `frame`.
    Mat matrix(const Mat& frame) const;

    // Degree-one shift map applied b times to a horizontal column (b <= 2 is
    // supported; the square requires the level-1 derivative of wp1).
    Vec shifted(const Vec& u, int b) const;

    // Evaluates entries with the supplied symmetric perturbation added to the
    // vertical x vertical block of S (negative control for the validator).
    void perturb_s(const Mat& delta_vv);

  private:
    void ensure_full_ds() const;
    const Connection& conn_;
    double tol_;
    CanonicalData data_;
    Mat ds_partial_;  // derivative of S with the vv block frozen to zero
    mutable std::optional<Mat> ds_full_;
    mutable std::optional<Mat> dwp1_;
    NumTensor riem_, dtor_;
};

// ---------------------------------------------------------------------------
// Ricci traces.
//
// value(a, b) = Σ_c R^S(W_{b-1} u_c, W_{b-1} u_c) over an orthonormal basis
// u_c of box a, with W the degree-one shift map iterated b-1 times: the trace
// of the curvature over the (a, b) cell of the reduced diagram.
struct RicciValue {
    int a = 1, b = 1;
    double value = 0.0;
};

struct RicciReport {
    CovectorPoint p;
    YoungDiagram diagram;
    std::vector<int> lengths, multiplicities;
    std::vector<RicciValue> entries;
    double completion_residual = 0.0;

    double value(int a, int b) const;
};

RicciReport ricci(const Connection& conn, const CovectorPoint& p,
                  double tol = 1e-7);

// ---------------------------------------------------------------------------
// Final-box Ricci trace (closed form, no S completion needed).
//
// `trace` is the general closed form over the final box (rows of length 1):
//   tr λR + tr λ∇T + (1/4) |p T(pr·, pr·)|^2 - (1/4) tr |(B0+B0^T) ·|^2
//   - |(2 Bplus - C) pr ·|^2 + 2 tr <(2 Bplus - C) ·, A ·> - d/dt tr <B0 ·, ·>.
// `torsion_route` is the torsion-only form available when B vanishes on the
// final box (connections whose horizontal torsion is vertical): C is solved
// from  T(v, C u) = -(∇_v T)(v, u) + Σ_i p(T(v, X_i)) T(X_i, u)  and
//   tr λR + tr λ∇T + (1/4) |p T(pr·, pr·)|^2 - Σ_c |C u_c|^2
//   - Σ_c p(T(u_c, C u_c)).
struct FinalBoxRicci {
    double trace = 0.0;
    std::optional<double> torsion_route;
    int final_dim = 0;
    double b_final_norm = 0.0;    // ‖B restricted to the final box‖
    double c_solve_residual = 0.0;
};

FinalBoxRicci final_box_ricci(const Connection& conn, const CovectorPoint& p,
                              double tol = 1e-7);

// ---------------------------------------------------------------------------
// Normalization validator.
//
// Checks the defining curvature identities of the canonical frame on the
// reduced diagram cells: with u, v ranging over orthonormal bases of the
// boxes and W the degree-one shift map,
//   (1) same box, column b < n_a:  R^S(W_{b-1} u, W_b v) + R^S(W_b u, W_{b-1} v) = 0,
//   (2) same box, |b - j| >= 2:    R^S(W_{b-1} u, W_{j-1} v) = 0,
//   (3) boxes a < i, j < n_i, j ∉ {b, b+1}:      R^S = 0,
//   (4) boxes a < i, b < n_i - 1, j = n_i:       R^S = 0,
//   (5) boxes a < i, n_a - n_i >= b + j:         R^S = 0.
// Conditions with no admissible index pair on the diagram are reported as
// vacuous.  Residuals are normalized by the largest diagonal curvature entry.
struct NormalizationCheck {
    int condition = 0;       // 1..5
    std::string description;
    bool vacuous = true;
    double residual = 0.0;   // max |entry| / scale over admissible pairs
};

std::vector<NormalizationCheck> validate_normalization(
    const Connection& conn, const CovectorPoint& p, double tol = 1e-7,
    const Mat* s_vv_perturbation = nullptr);

// ---------------------------------------------------------------------------
// Canonical frame along a window of the extremal.
//
// Integrates D_t X_{a,1} = Q X_{a,1} for the first-column fields (the
// remaining columns are the shift-map images) and reports the drift of the
// orthonormality and of the final-box kernel property along the window.
struct CanonicalFrame {
    std::vector<double> times;
    // frames[s]: n x d1 matrix, columns = first-column canonical fields at
    // times[s] in frame components, ordered box by box.
    std::vector<Mat> frames;
    // second[s]: n x (d1 - final dim): shift images of the length->=2 boxes.
    std::vector<Mat> second;
    double gram_drift = 0.0;       // max ‖frame^T frame - I‖ over the window
    double kernel_residual = 0.0;  // max ‖wp1(t) u(t)‖ over final-box fields
};

CanonicalFrame canonical_frame(const Connection& conn, const CovectorPoint& p,
                               double t_back, double t_fwd, int samples = 17,
                               double tol = 1e-7);

}  // namespace subcurv
