#pragma once

#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "subcurv/model.hpp"
#include "subcurv/tensor.hpp"

namespace subcurv {

// An affine connection on the frame, stored as Christoffel symbols
// Gamma^k_{ij} (slot order (k,i,j)) with nabla_{X_i} X_j = sum_k Gamma^k_{ij} X_k.
// Derived tensors (torsion, its first and second covariant derivatives, and
// the curvature) are cached lazily as expression trees; the object is
// immutable after construction and safe to share across threads.
class Connection {
 public:
  // The metric-compatible connection adapted to the horizontal/vertical
  // splitting: on two horizontal fields it is the projected Levi-Civita
  // connection of the taming metric; differentiating a horizontal field in a
  // vertical direction adds the symmetrized Lie-derivative correction
  // (tau-tensor) to the projected bracket; the mixed and vertical cases are
  // projected brackets / projected Levi-Civita.  All four cases reduce to
  // algebra in the structure constants because the frame is orthonormal.
  static Connection nice(std::shared_ptr<const SubRiemannianModel> model);

  // The zero-Christoffel connection of a frame (parallel frame fields).  For
  // left-invariant frames on groups this is the canonical left-invariant
  // connection; its torsion is minus the structure constants.
  static Connection group(std::shared_ptr<const SubRiemannianModel> model);

  static Connection from_gamma(std::shared_ptr<const SubRiemannianModel> model,
                               SymTensor gamma, std::string label);

  const SubRiemannianModel& model() const { return *model_; }
  std::shared_ptr<const SubRiemannianModel> model_ptr() const { return model_; }
  const std::string& label() const { return label_; }
  int dim() const { return model_->dim; }
  int horizontal_rank() const { return model_->horizontal_rank; }

  // Gamma^k_{ij}, slots (k,i,j).
  const SymTensor& gamma() const { return gamma_; }
  // Structure constants c^k_{ij} of the frame, slots (k,i,j).
  const SymTensor& structure() const { return c_; }
  // Torsion T^k_{ij} = Gamma^k_{ij} - Gamma^k_{ji} - c^k_{ij}, slots (k,i,j).
  const SymTensor& torsion() const { return torsion_; }
  // nabla T, slots (a, k, i, j): (nabla_{X_a} T)^k_{ij}.
  const SymTensor& torsion_d1() const;
  // nabla^2 T, slots (a, b, k, i, j): (nabla_{X_a} (nabla T))(b; k,i,j).
  const SymTensor& torsion_d2() const;
  // Curvature R^l_{kij}, slots (l,k,i,j): R(X_i, X_j) X_k = sum_l R^l_{kij} X_l.
  const SymTensor& curvature() const;

  // Adjoint connection: GammaHat = Gamma - T.  Shares the model.
  Connection adjoint() const;

  // --- numeric helpers -----------------------------------------------------

  // Matrix of the covariant derivative operator along a frame direction w:
  // out(k, m) = sum_i w_i Gamma^k_{im}(x), so that (nabla_w V)^k =
  // w(V^k) + (out * V)_k for frame components V.
  Eigen::MatrixXd gamma_matrix(const Eigen::VectorXd& x,
                               const Eigen::VectorXd& w_frame) const;
  // Same for the adjoint Christoffels GammaHat = Gamma - T.
  Eigen::MatrixXd adjoint_gamma_matrix(const Eigen::VectorXd& x,
                                       const Eigen::VectorXd& w_frame) const;

 private:
  Connection(std::shared_ptr<const SubRiemannianModel> model, SymTensor gamma,
             std::string label);

  std::shared_ptr<const SubRiemannianModel> model_;
  std::string label_;
  SymTensor gamma_;
  SymTensor c_;
  SymTensor torsion_;

  struct Cache {
    std::once_flag d1_once, d2_once, r_once;
    SymTensor torsion_d1, torsion_d2, curvature;
  };
  std::shared_ptr<Cache> cache_;
};

// Pointwise residuals of structural identities of a connection, each the
// maximum over the supplied sample points and all frame index combinations.
struct IdentityReport {
  double splitting = 0.0;      // Gamma mixes horizontal and vertical blocks
  double metric = 0.0;         // Gamma^l_{ij} + Gamma^j_{il} on the horizontal block
  double bianchi = 0.0;        // cyclic first Bianchi identity with torsion
  double hhv = 0.0;            // R(X,Y)Z vs. vertical Bianchi projection
  double hvh = 0.0;            // R(X,Z)Y vs. symmetrized horizontal projection
  double k_tau_hhv = -1.0;     // bracket-tensor form of R(X,Y)Z (-1 = not checked)
  double k_tau_hvh = -1.0;     // bracket-tensor form of R(X,Z)Y (-1 = not checked)
  double tol = 0.0;
  bool pass = false;
  std::string failure;  // name of first identity exceeding tol, if any
};

// Evaluates the identity residuals at the given chart points.  The
// k/tau-tensor forms are checked only for connections built by
// Connection::nice (they are specific to that construction).
IdentityReport validate_identities(const Connection& conn,
                                   const std::vector<Eigen::VectorXd>& points,
                                   double tol = 1e-8);

}  // namespace subcurv
