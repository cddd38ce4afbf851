#include "subcurv/model.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "subcurv/error.hpp"

namespace subcurv {

Mat Frame::eval_matrix(const Vec& x) const {
    const int n = dim();
    Mat F(n, n);
    for (int i = 0; i < n; ++i)
        for (int m = 0; m < n; ++m) F(m, i) = fields[i][m].eval(x.data());
    return F;
}

bool SubRiemannianModel::in_domain(const Vec& x, double margin) const {
    for (int i = 0; i < dim; ++i)
        if (x[i] < domain[i].first + margin || x[i] > domain[i].second - margin)
            return false;
    return true;
}

Vec SubRiemannianModel::center() const {
    Vec c(dim);
    for (int i = 0; i < dim; ++i) c[i] = 0.5 * (domain[i].first + domain[i].second);
    return c;
}

void SubRiemannianModel::validate() const {
    if (dim <= 0) throw Error(ErrorKind::Invalid, "model dimension must be positive");
    if (horizontal_rank <= 0 || horizontal_rank > dim)
        throw Error(ErrorKind::Invalid, "horizontal_rank must lie in [1, dim]");
    if (frame.dim() != dim)
        throw Error(ErrorKind::Invalid, "frame must contain dim fields");
    for (const auto& f : frame.fields)
        if (static_cast<int>(f.size()) != dim)
            throw Error(ErrorKind::Invalid, "each frame field needs dim coefficients");
    if (static_cast<int>(domain.size()) != dim)
        throw Error(ErrorKind::Invalid, "domain must contain dim intervals");
    for (const auto& [lo, hi] : domain)
        if (!(lo < hi)) throw Error(ErrorKind::Invalid, "domain interval must be nonempty");

    const Vec c = center();
    Eigen::JacobiSVD<Mat> svd(frame.eval_matrix(c));
    const double smin = svd.singularValues().minCoeff();
    const double smax = svd.singularValues().maxCoeff();
    if (!(smin > 1e-9 * smax))
        throw Error(ErrorKind::FrameDegenerate,
                    "frame is numerically degenerate at the chart center");
}

Vec sharp(const SubRiemannianModel& m, const CovectorPoint& p) {
    Vec v = Vec::Zero(m.dim);
    v.head(m.horizontal_rank) = p.H.head(m.horizontal_rank);
    return v;
}

double hamiltonian(const SubRiemannianModel& m, const CovectorPoint& p) {
    return 0.5 * p.H.head(m.horizontal_rank).squaredNorm();
}

Vec frame_momenta_from_coordinate(const SubRiemannianModel& m, const Vec& x,
                                  const Vec& p_coord) {
    return m.frame.eval_matrix(x).transpose() * p_coord;
}

Vec coordinate_momenta_from_frame(const SubRiemannianModel& m, const Vec& x,
                                  const Vec& H) {
    return m.frame.eval_matrix(x).transpose().partialPivLu().solve(H);
}

// ---------------------------------------------------------------------------
// Symbolic coframe by Gauss-Jordan elimination on the frame matrix.

std::vector<std::vector<Expr>> symbolic_coframe(const SubRiemannianModel& m) {
    const int n = m.dim;
    // a = [F | I] with F(m,i) as in eval_matrix.
    std::vector<std::vector<Expr>> a(n, std::vector<Expr>(2 * n, Expr::constant(0.0)));
    for (int r = 0; r < n; ++r) {
        for (int i = 0; i < n; ++i) a[r][i] = m.frame.fields[i][r];
        a[r][n + r] = Expr::constant(1.0);
    }

    std::vector<bool> used(n, false);
    for (int col = 0; col < n; ++col) {
        // Prefer a nonzero-constant pivot; otherwise any syntactically nonzero
        // entry.  (Numerically validated downstream via model.validate().)
        int pivot = -1;
        for (int r = 0; r < n; ++r)
            if (!used[r] && a[r][col].is_constant() &&
                a[r][col].constant_value() != 0.0) {
                pivot = r;
                break;
            }
        if (pivot < 0)
            for (int r = 0; r < n; ++r)
                if (!used[r] && !a[r][col].is_zero()) {
                    pivot = r;
                    break;
                }
        if (pivot < 0)
            throw Error(ErrorKind::FrameDegenerate,
                        "frame matrix is symbolically singular");
        used[pivot] = true;

        const Expr inv = Expr::pow(a[pivot][col], -1.0);
        for (int cc = 0; cc < 2 * n; ++cc) a[pivot][cc] = a[pivot][cc] * inv;
        a[pivot][col] = Expr::constant(1.0);
        for (int r = 0; r < n; ++r) {
            if (r == pivot || a[r][col].is_zero()) continue;
            const Expr f = a[r][col];
            for (int cc = 0; cc < 2 * n; ++cc)
                a[r][cc] = a[r][cc] - f * a[pivot][cc];
            a[r][col] = Expr::constant(0.0);
        }
    }

    // Row permutation: row r of the result solves e_col placement; reorder so
    // that out[k] is row k of F^{-1}.
    std::vector<std::vector<Expr>> out(n, std::vector<Expr>(n, Expr::constant(0.0)));
    for (int col = 0; col < n; ++col) {
        int r = -1;
        for (int rr = 0; rr < n; ++rr)
            if (a[rr][col].is_constant() && a[rr][col].constant_value() == 1.0) {
                bool clean = true;
                for (int c2 = 0; c2 < n; ++c2)
                    if (c2 != col && !a[rr][c2].is_zero()) { clean = false; break; }
                if (clean) { r = rr; break; }
            }
        if (r < 0)
            throw Error(ErrorKind::FrameDegenerate, "coframe extraction failed");
        for (int c2 = 0; c2 < n; ++c2) out[col][c2] = a[r][n + c2];
    }
    return out;
}

// ---------------------------------------------------------------------------
// Structure constants

StructureConstants structure_constants(const SubRiemannianModel& m) {
    const int n = m.dim;
    const auto co = symbolic_coframe(m);

    // Coordinate components of [X_i, X_j]:
    //   B^mu_{ij} = sum_l ( X_i^l d_l X_j^mu - X_j^l d_l X_i^mu ).
    auto bracket = [&](int i, int j, int mu) {
        std::vector<Expr> terms;
        for (int l = 0; l < n; ++l) {
            Expr d1 = m.frame.fields[j][mu].diff(l);
            if (!d1.is_zero()) terms.push_back(m.frame.fields[i][l] * d1);
            Expr d2 = m.frame.fields[i][mu].diff(l);
            if (!d2.is_zero())
                terms.push_back(Expr::constant(-1.0) * m.frame.fields[j][l] * d2);
        }
        return Expr::sum(std::move(terms));
    };

    StructureConstants sc;
    sc.c.assign(n, std::vector<std::vector<Expr>>(n, std::vector<Expr>(n)));
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            if (j < i) {  // antisymmetry: fill once, negate
                for (int k = 0; k < n; ++k)
                    sc.c[k][i][j] = Expr::constant(-1.0) * sc.c[k][j][i];
                continue;
            }
            if (j == i) {
                for (int k = 0; k < n; ++k) sc.c[k][i][j] = Expr::constant(0.0);
                continue;
            }
            std::vector<Expr> br(n);
            for (int mu = 0; mu < n; ++mu) br[mu] = bracket(i, j, mu);
            for (int k = 0; k < n; ++k) {
                std::vector<Expr> terms;
                for (int mu = 0; mu < n; ++mu)
                    if (!co[k][mu].is_zero() && !br[mu].is_zero())
                        terms.push_back(co[k][mu] * br[mu]);
                sc.c[k][i][j] = Expr::sum(std::move(terms));
            }
        }
    return sc;
}

std::vector<Mat> StructureConstants::eval(const Vec& x) const {
    const int n = dim();
    std::vector<Mat> out(n, Mat::Zero(n, n));
    for (int k = 0; k < n; ++k)
        for (int i = 0; i < n; ++i)
            for (int j = i + 1; j < n; ++j) {
                const double v = c[k][i][j].eval(x.data());
                out[k](i, j) = v;
                out[k](j, i) = -v;
            }
    return out;
}

// ---------------------------------------------------------------------------
// JSON model files

SubRiemannianModel parse_model_json(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const std::exception& e) {
        throw Error(ErrorKind::Parse, std::string("model JSON parse failure: ") + e.what());
    }
    SubRiemannianModel m;
    try {
        m.name = j.at("name").get<std::string>();
        m.dim = j.at("dim").get<int>();
        m.horizontal_rank = j.at("horizontal_rank").get<int>();
        const auto& fr = j.at("frame");
        for (const auto& row : fr) {
            std::vector<Expr> coeffs;
            for (const auto& cell : row)
                coeffs.push_back(Expr::parse(cell.get<std::string>(), m.dim));
            m.frame.fields.push_back(std::move(coeffs));
        }
        for (const auto& iv : j.at("domain"))
            m.domain.emplace_back(iv.at(0).get<double>(), iv.at(1).get<double>());
    } catch (const Error&) {
        throw;
    } catch (const std::exception& e) {
        throw Error(ErrorKind::Parse, std::string("model JSON schema failure: ") + e.what());
    }
    m.validate();
    return m;
}

SubRiemannianModel load_model_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::Invalid, "cannot open model file: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_model_json(ss.str());
}

std::string model_to_json(const SubRiemannianModel& m) {
    nlohmann::json j;
    j["name"] = m.name;
    j["dim"] = m.dim;
    j["horizontal_rank"] = m.horizontal_rank;
    nlohmann::json frame = nlohmann::json::array();
    for (const auto& f : m.frame.fields) {
        nlohmann::json row = nlohmann::json::array();
        for (const auto& e : f) row.push_back(e.to_string());
        frame.push_back(row);
    }
    j["frame"] = frame;
    nlohmann::json dom = nlohmann::json::array();
    for (const auto& [lo, hi] : m.domain) dom.push_back({lo, hi});
    j["domain"] = dom;
    return j.dump(2);
}

}  // namespace subcurv
