#pragma once
// Sub-Riemannian model data: a chart box in R^n, a global frame X_1..X_n of
// closed-form vector fields, and the horizontal rank d1.  X_1..X_d1 span the
// horizontal bundle and are declared g-orthonormal; the full frame is
// orthonormal for the taming metric.  Covectors are carried in frame-momentum
// components H_i = p(X_i).

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include "subcurv/expr.hpp"
#include "subcurv/young.hpp"

namespace subcurv {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

struct Frame {
    // fields[i][m] = coefficient of d/dx_{m+1} in X_{i+1}.
    std::vector<std::vector<Expr>> fields;

    int dim() const { return static_cast<int>(fields.size()); }

    // F(m,i) = m-th coordinate coefficient of X_{i+1}; columns are the fields.
    Mat eval_matrix(const Vec& x) const;
};

struct SubRiemannianModel {
    std::string name;
    int dim = 0;
    int horizontal_rank = 0;
    Frame frame;
    std::vector<std::pair<double, double>> domain;  // per-coordinate box

    // Optional metadata set by the zoo: the maximal (generic) geodesic diagram.
    std::optional<YoungDiagram> declared_diagram;

    bool in_domain(const Vec& x, double margin = 0.0) const;
    Vec center() const;

    void validate() const;  // shape checks + frame invertibility at the center
};

struct CovectorPoint {
    Vec x;  // base point (chart coordinates)
    Vec H;  // frame momenta H_i = p(X_i), full length n
};

// ♯p in frame components: (H_1..H_d1, 0..0).
Vec sharp(const SubRiemannianModel& m, const CovectorPoint& p);

// H(p) = (1/2) sum_{i<=d1} H_i^2.
double hamiltonian(const SubRiemannianModel& m, const CovectorPoint& p);

// Conversions between coordinate momenta and frame momenta: H = F(x)^T p.
Vec frame_momenta_from_coordinate(const SubRiemannianModel& m, const Vec& x,
                                  const Vec& p_coord);
Vec coordinate_momenta_from_frame(const SubRiemannianModel& m, const Vec& x,
                                  const Vec& H);

// Structure constants as expression trees: c[k](i,j) with
// [X_{i+1}, X_{j+1}] = sum_k c^k_{ij} X_{k+1}.  Uses the symbolic coframe.
struct StructureConstants {
    std::vector<std::vector<std::vector<Expr>>> c;  // c[k][i][j]
    int dim() const { return static_cast<int>(c.size()); }
    // Numeric evaluation: out[k](i,j).
    std::vector<Mat> eval(const Vec& x) const;
};

StructureConstants structure_constants(const SubRiemannianModel& m);

// Symbolic inverse of the frame matrix: co[k][m] = coefficient such that
// dx-basis -> frame-basis conversion holds; row k of F^{-1}.
std::vector<std::vector<Expr>> symbolic_coframe(const SubRiemannianModel& m);

// JSON model files ({"name","dim","horizontal_rank","frame","domain"}).
SubRiemannianModel load_model_json(const std::string& path);
SubRiemannianModel parse_model_json(const std::string& text);
std::string model_to_json(const SubRiemannianModel& m);

}  // namespace subcurv
