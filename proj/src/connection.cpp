#include "subcurv/connection.hpp"

#include <cmath>
#include <utility>

namespace subcurv {

namespace {

SymTensor structure_tensor(const SubRiemannianModel& m) {
  StructureConstants sc = structure_constants(m);
  const int n = m.dim;
  SymTensor out(n, 3);
  for (int k = 0; k < n; ++k)
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) out.at({k, i, j}) = sc.c[k][i][j];
  return out;
}

Expr half_of(Expr e) { return Expr::product({Expr::constant(0.5), std::move(e)}); }

}  // namespace

Connection::Connection(std::shared_ptr<const SubRiemannianModel> model,
                       SymTensor gamma, std::string label)
    : model_(std::move(model)),
      label_(std::move(label)),
      gamma_(std::move(gamma)),
      c_(structure_tensor(*model_)),
      cache_(std::make_shared<Cache>()) {
  const int n = model_->dim;
  torsion_ = SymTensor(n, 3);
  for (int k = 0; k < n; ++k)
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        torsion_.at({k, i, j}) = Expr::sum(
            {gamma_.at({k, i, j}), -gamma_.at({k, j, i}), -c_.at({k, i, j})});
}

Connection Connection::nice(std::shared_ptr<const SubRiemannianModel> model) {
  const int n = model->dim;
  const int d1 = model->horizontal_rank;
  SymTensor c = structure_tensor(*model);
  SymTensor gamma(n, 3);
  auto hor = [d1](int i) { return i < d1; };
  // Levi-Civita Christoffels of the taming metric in an orthonormal frame
  // (Koszul formula reduces to structure-constant algebra).
  auto koszul = [&](int k, int i, int j) {
    return half_of(Expr::sum(
        {c.at({k, i, j}), -c.at({i, j, k}), c.at({j, k, i})}));
  };
  for (int k = 0; k < n; ++k)
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        Expr g = Expr::constant(0.0);
        if (hor(i) && hor(j)) {
          if (hor(k)) g = koszul(k, i, j);
        } else if (!hor(i) && hor(j)) {
          // projected bracket plus the tau-tensor: the symmetric part of the
          // Lie derivative of the horizontal metric along the vertical field.
          if (hor(k))
            g = half_of(Expr::sum({c.at({k, i, j}), -c.at({j, i, k})}));
        } else if (hor(i) && !hor(j)) {
          if (!hor(k)) g = c.at({k, i, j});
        } else {
          if (!hor(k)) g = koszul(k, i, j);
        }
        gamma.at({k, i, j}) = std::move(g);
      }
  return Connection(std::move(model), std::move(gamma), "nice");
}

Connection Connection::group(std::shared_ptr<const SubRiemannianModel> model) {
  const int n = model->dim;
  return Connection(std::move(model), SymTensor(n, 3), "group");
}

Connection Connection::from_gamma(
    std::shared_ptr<const SubRiemannianModel> model, SymTensor gamma,
    std::string label) {
  return Connection(std::move(model), std::move(gamma), std::move(label));
}

const SymTensor& Connection::torsion_d1() const {
  std::call_once(cache_->d1_once, [this] {
    cache_->torsion_d1 = covariant_derivative(
        torsion_, {true, false, false}, gamma_, model_->frame);
  });
  return cache_->torsion_d1;
}

const SymTensor& Connection::torsion_d2() const {
  std::call_once(cache_->d2_once, [this] {
    cache_->torsion_d2 = covariant_derivative(
        torsion_d1(), {false, true, false, false}, gamma_, model_->frame);
  });
  return cache_->torsion_d2;
}

const SymTensor& Connection::curvature() const {
  std::call_once(cache_->r_once, [this] {
    const int n = model_->dim;
    const Frame& fr = model_->frame;
    SymTensor R(n, 4);
    for (int l = 0; l < n; ++l)
      for (int k = 0; k < n; ++k)
        for (int i = 0; i < n; ++i)
          for (int j = 0; j < n; ++j) {
            std::vector<Expr> terms;
            Expr di = frame_derivative(fr, i, gamma_.at({l, j, k}));
            Expr dj = frame_derivative(fr, j, gamma_.at({l, i, k}));
            if (!di.is_zero()) terms.push_back(std::move(di));
            if (!dj.is_zero()) terms.push_back(-dj);
            for (int m = 0; m < n; ++m) {
              const Expr& gjk = gamma_.at({m, j, k});
              const Expr& gik = gamma_.at({m, i, k});
              const Expr& cij = c_.at({m, i, j});
              if (!gjk.is_zero() && !gamma_.at({l, i, m}).is_zero())
                terms.push_back(Expr::product({gjk, gamma_.at({l, i, m})}));
              if (!gik.is_zero() && !gamma_.at({l, j, m}).is_zero())
                terms.push_back(
                    -Expr::product({gik, gamma_.at({l, j, m})}));
              if (!cij.is_zero() && !gamma_.at({l, m, k}).is_zero())
                terms.push_back(-Expr::product({cij, gamma_.at({l, m, k})}));
            }
            R.at({l, k, i, j}) = Expr::sum(std::move(terms));
          }
    cache_->curvature = std::move(R);
  });
  return cache_->curvature;
}

Connection Connection::adjoint() const {
  const int n = model_->dim;
  SymTensor ghat(n, 3);
  for (std::size_t f = 0; f < ghat.size(); ++f)
    ghat[f] = Expr::sum({gamma_[f], -torsion_[f]});
  return Connection(model_, std::move(ghat), label_ + "-adjoint");
}

Eigen::MatrixXd Connection::gamma_matrix(const Eigen::VectorXd& x,
                                         const Eigen::VectorXd& w_frame) const {
  const int n = model_->dim;
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    if (w_frame[i] == 0.0) continue;
    for (int k = 0; k < n; ++k)
      for (int m = 0; m < n; ++m) {
        const Expr& g = gamma_.at({k, i, m});
        if (!g.is_zero()) out(k, m) += w_frame[i] * g.eval(x.data());
      }
  }
  return out;
}

Eigen::MatrixXd Connection::adjoint_gamma_matrix(
    const Eigen::VectorXd& x, const Eigen::VectorXd& w_frame) const {
  const int n = model_->dim;
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    if (w_frame[i] == 0.0) continue;
    for (int k = 0; k < n; ++k)
      for (int m = 0; m < n; ++m) {
        const Expr& g = gamma_.at({k, i, m});
        const Expr& t = torsion_.at({k, i, m});
        double v = 0.0;
        if (!g.is_zero()) v += g.eval(x.data());
        if (!t.is_zero()) v -= t.eval(x.data());
        if (v != 0.0) out(k, m) += w_frame[i] * v;
      }
  }
  return out;
}

namespace {

// l-component of the cyclic Bianchi right-hand side for the ordered triple
// (X_x, X_y, X_z): cyc (nabla_X T)(Y,Z) + cyc T(T(X,Y),Z).
double bianchi_rhs(const NumTensor& T, const NumTensor& DT, int n, int l,
                   int x, int y, int z) {
  double v = DT.at({x, l, y, z}) + DT.at({y, l, z, x}) + DT.at({z, l, x, y});
  for (int m = 0; m < n; ++m)
    v += T.at({m, x, y}) * T.at({l, m, z}) +
         T.at({m, y, z}) * T.at({l, m, x}) +
         T.at({m, z, x}) * T.at({l, m, y});
  return v;
}

}  // namespace

IdentityReport validate_identities(const Connection& conn,
                                   const std::vector<Eigen::VectorXd>& points,
                                   double tol) {
  IdentityReport rep;
  rep.tol = tol;
  const int n = conn.dim();
  const int d1 = conn.horizontal_rank();
  const bool nice = conn.label() == "nice";

  const SymTensor& gamma_s = conn.gamma();
  const SymTensor& T_s = conn.torsion();
  const SymTensor& DT_s = conn.torsion_d1();
  const SymTensor& R_s = conn.curvature();

  SymTensor K_s, tau_s, DK_s, Dtau_s;
  if (nice) {
    const SymTensor& c = conn.structure();
    K_s = SymTensor(n, 3);
    tau_s = SymTensor(n, 3);
    auto hor = [d1](int i) { return i < d1; };
    for (int k = 0; k < n; ++k)
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
          if (hor(i) && hor(j) && !hor(k))
            K_s.at({k, i, j}) = -c.at({k, i, j});
          else if (!hor(i) && !hor(j) && hor(k))
            K_s.at({k, i, j}) = -c.at({k, i, j});
          if (!hor(i) && hor(j) && hor(k))
            tau_s.at({k, i, j}) =
                -half_of(Expr::sum({c.at({k, i, j}), c.at({j, i, k})}));
        }
    DK_s = covariant_derivative(K_s, {true, false, false}, gamma_s,
                                conn.model().frame);
    Dtau_s = covariant_derivative(tau_s, {true, false, false}, gamma_s,
                                  conn.model().frame);
    rep.k_tau_hhv = 0.0;
    rep.k_tau_hvh = 0.0;
  }

  for (const auto& x : points) {
    NumTensor G = gamma_s.eval(x);
    NumTensor T = T_s.eval(x);
    NumTensor DT = DT_s.eval(x);
    NumTensor R = R_s.eval(x);

    for (int k = 0; k < n; ++k)
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
          const double g = G.at({k, i, j});
          const bool hj = j < d1, hk = k < d1;
          if (hj != hk) rep.splitting = std::max(rep.splitting, std::abs(g));
          if (hj && hk)
            rep.metric = std::max(
                rep.metric, std::abs(g + G.at({j, i, k})));
        }

    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        for (int k = 0; k < n; ++k)
          for (int l = 0; l < n; ++l) {
            const double lhs = R.at({l, k, i, j}) + R.at({l, i, j, k}) +
                               R.at({l, j, k, i});
            rep.bianchi = std::max(
                rep.bianchi,
                std::abs(lhs - bianchi_rhs(T, DT, n, l, i, j, k)));
          }

    // l-component of B_Z(Y) X for (X, Y, Z) = (X_x, X_y, X_z).
    auto Bcomp = [&](int l, int x_, int y_, int z_) {
      return bianchi_rhs(T, DT, n, l, x_, y_, z_);
    };

    for (int i = 0; i < d1; ++i)
      for (int j = 0; j < d1; ++j)
        for (int z = d1; z < n; ++z) {
          for (int l = d1; l < n; ++l)
            rep.hhv = std::max(
                rep.hhv, std::abs(R.at({l, z, i, j}) - Bcomp(l, i, j, z)));
          for (int l = 0; l < d1; ++l) {
            const double rhs = 0.5 * (Bcomp(l, j, i, z) - Bcomp(i, l, j, z) -
                                      Bcomp(j, l, i, z));
            rep.hvh = std::max(rep.hvh,
                               std::abs(R.at({l, j, i, z}) - rhs));
          }
        }

    if (nice) {
      NumTensor K = K_s.eval(x);
      NumTensor tau = tau_s.eval(x);
      NumTensor DK = DK_s.eval(x);
      NumTensor Dtau = Dtau_s.eval(x);
      for (int i = 0; i < d1; ++i)
        for (int j = 0; j < d1; ++j)
          for (int z = d1; z < n; ++z) {
            for (int l = 0; l < n; ++l) {
              double rhs = DK.at({z, l, i, j});
              for (int m = 0; m < d1; ++m)
                rhs += tau.at({m, z, i}) * K.at({l, m, j}) +
                       tau.at({m, z, j}) * K.at({l, i, m});
              rep.k_tau_hhv = std::max(
                  rep.k_tau_hhv, std::abs(R.at({l, z, i, j}) - rhs));
            }
            for (int l = 0; l < d1; ++l) {
              double rhs = Dtau.at({l, j, z, i}) - Dtau.at({j, l, z, i});
              for (int m = d1; m < n; ++m)
                rhs += 0.5 * (K.at({l, z, m}) * K.at({m, i, j}) -
                              K.at({i, z, m}) * K.at({m, j, l}) -
                              K.at({j, z, m}) * K.at({m, i, l}));
              rep.k_tau_hvh = std::max(
                  rep.k_tau_hvh, std::abs(R.at({l, j, i, z}) - rhs));
            }
          }
    }
  }

  auto check = [&](double v, const char* name) {
    if (v > tol && rep.failure.empty()) rep.failure = name;
  };
  check(rep.splitting, "splitting");
  check(rep.metric, "metric");
  check(rep.bianchi, "bianchi");
  check(rep.hhv, "hhv");
  check(rep.hvh, "hvh");
  if (nice) {
    check(rep.k_tau_hhv, "k_tau_hhv");
    check(rep.k_tau_hvh, "k_tau_hvh");
  }
  rep.pass = rep.failure.empty();
  return rep;
}

}  // namespace subcurv
