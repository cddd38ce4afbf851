#include "subcurv/tensor.hpp"

#include <stdexcept>

namespace subcurv {

Expr frame_derivative(const Frame& frame, int a, const Expr& f) {
  if (f.is_constant()) return Expr::constant(0.0);
  std::vector<Expr> terms;
  const int n = frame.dim();
  for (int mu = 0; mu < n; ++mu) {
    const Expr& coeff = frame.fields[a][mu];
    if (coeff.is_zero()) continue;
    Expr df = f.diff(mu);
    if (df.is_zero()) continue;
    terms.push_back(Expr::product({coeff, df}));
  }
  return Expr::sum(std::move(terms));
}

SymTensor covariant_derivative(const SymTensor& E,
                               const std::vector<bool>& upper,
                               const SymTensor& gamma, const Frame& frame) {
  const int n = E.n();
  const int k = E.order();
  if (static_cast<int>(upper.size()) != k)
    throw std::invalid_argument("covariant_derivative: valence size mismatch");

  SymTensor out(n, k + 1);
  std::vector<int> idx(k, 0);

  auto flat_of = [&](const std::vector<int>& I) {
    std::size_t f = 0;
    for (int v : I) f = f * static_cast<std::size_t>(n) + v;
    return f;
  };

  bool done = (E.size() == 0);
  while (!done) {
    const std::size_t base = flat_of(idx);
    for (int a = 0; a < n; ++a) {
      std::vector<Expr> terms;
      Expr lead = frame_derivative(frame, a, E[base]);
      if (!lead.is_zero()) terms.push_back(lead);
      for (int s = 0; s < k; ++s) {
        const int is = idx[s];
        std::vector<int> jdx = idx;
        for (int m = 0; m < n; ++m) {
          jdx[s] = m;
          const Expr& comp = E[flat_of(jdx)];
          if (comp.is_zero()) continue;
          const Expr& g = upper[s] ? gamma.at({is, a, m}) : gamma.at({m, a, is});
          if (g.is_zero()) continue;
          Expr term = Expr::product({g, comp});
          terms.push_back(upper[s] ? term : -term);
        }
      }
      out[static_cast<std::size_t>(a) * E.size() + base] =
          Expr::sum(std::move(terms));
    }
    // Odometer increment over the k indices of E.
    int pos = k - 1;
    while (pos >= 0) {
      if (++idx[pos] < n) break;
      idx[pos] = 0;
      --pos;
    }
    if (pos < 0) done = true;
  }
  return out;
}

}  // namespace subcurv
