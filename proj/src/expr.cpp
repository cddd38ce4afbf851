#include "subcurv/expr.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>

#include "subcurv/error.hpp"

namespace subcurv {

std::shared_ptr<const Expr::Node> Expr::zero_node() {
    static const std::shared_ptr<const Node> z = [] {
        auto n = std::make_shared<Node>();
        n->kind = Kind::Const;
        n->cval = 0.0;
        return n;
    }();
    return z;
}

Expr Expr::make(Node&& n) {
    return Expr(std::make_shared<const Node>(std::move(n)));
}

Expr Expr::constant(double c) {
    Node n;
    n.kind = Kind::Const;
    n.cval = c;
    return make(std::move(n));
}

Expr Expr::coord(int i) {
    if (i < 0) throw Error(ErrorKind::Invalid, "negative coordinate index");
    Node n;
    n.kind = Kind::Coord;
    n.coord = i;
    return make(std::move(n));
}

double Expr::constant_value() const {
    if (!is_constant()) throw Error(ErrorKind::Invalid, "expression is not constant");
    return node_->cval;
}

Expr Expr::sum(std::vector<Expr> terms) {
    std::vector<Expr> flat;
    double c = 0.0;
    for (auto& t : terms) {
        if (t.node_->kind == Kind::Sum) {
            for (auto& k : t.node_->kids) {
                if (k.is_constant()) c += k.node_->cval;
                else flat.push_back(k);
            }
        } else if (t.is_constant()) {
            c += t.node_->cval;
        } else {
            flat.push_back(std::move(t));
        }
    }
    if (c != 0.0) flat.push_back(constant(c));
    if (flat.empty()) return constant(0.0);
    if (flat.size() == 1) return flat[0];
    Node n;
    n.kind = Kind::Sum;
    n.kids = std::move(flat);
    return make(std::move(n));
}

Expr Expr::product(std::vector<Expr> factors) {
    std::vector<Expr> flat;
    double c = 1.0;
    for (auto& f : factors) {
        if (f.node_->kind == Kind::Prod) {
            for (auto& k : f.node_->kids) {
                if (k.is_constant()) c *= k.node_->cval;
                else flat.push_back(k);
            }
        } else if (f.is_constant()) {
            c *= f.node_->cval;
        } else {
            flat.push_back(std::move(f));
        }
    }
    if (c == 0.0) return constant(0.0);
    if (flat.empty()) return constant(c);
    if (c != 1.0) flat.insert(flat.begin(), constant(c));
    if (flat.size() == 1) return flat[0];
    Node n;
    n.kind = Kind::Prod;
    n.kids = std::move(flat);
    return make(std::move(n));
}

Expr Expr::pow(const Expr& base, double exponent) {
    if (exponent == 0.0) return constant(1.0);
    if (exponent == 1.0) return base;
    if (base.is_constant()) return constant(std::pow(base.node_->cval, exponent));
    if (base.node_->kind == Kind::Pow)
        return pow(base.node_->kids[0], base.node_->expo * exponent);
    Node n;
    n.kind = Kind::Pow;
    n.expo = exponent;
    n.kids = {base};
    return make(std::move(n));
}

Expr Expr::sin(const Expr& a) {
    if (a.is_constant()) return constant(std::sin(a.node_->cval));
    Node n;
    n.kind = Kind::Sin;
    n.kids = {a};
    return make(std::move(n));
}

Expr Expr::cos(const Expr& a) {
    if (a.is_constant()) return constant(std::cos(a.node_->cval));
    Node n;
    n.kind = Kind::Cos;
    n.kids = {a};
    return make(std::move(n));
}

Expr Expr::exp(const Expr& a) {
    if (a.is_constant()) return constant(std::exp(a.node_->cval));
    Node n;
    n.kind = Kind::Exp;
    n.kids = {a};
    return make(std::move(n));
}

double Expr::eval(const double* x) const {
    const Node& n = *node_;
    switch (n.kind) {
        case Kind::Const: return n.cval;
        case Kind::Coord: return x[n.coord];
        case Kind::Sum: {
            double s = 0.0;
            for (const auto& k : n.kids) s += k.eval(x);
            return s;
        }
        case Kind::Prod: {
            double p = 1.0;
            for (const auto& k : n.kids) p *= k.eval(x);
            return p;
        }
        case Kind::Pow: return std::pow(n.kids[0].eval(x), n.expo);
        case Kind::Sin: return std::sin(n.kids[0].eval(x));
        case Kind::Cos: return std::cos(n.kids[0].eval(x));
        case Kind::Exp: return std::exp(n.kids[0].eval(x));
    }
    return 0.0;
}

Expr Expr::diff(int i) const {
    const Node& n = *node_;
    switch (n.kind) {
        case Kind::Const: return constant(0.0);
        case Kind::Coord: return constant(n.coord == i ? 1.0 : 0.0);
        case Kind::Sum: {
            std::vector<Expr> d;
            d.reserve(n.kids.size());
            for (const auto& k : n.kids) d.push_back(k.diff(i));
            return sum(std::move(d));
        }
        case Kind::Prod: {
            std::vector<Expr> terms;
            for (size_t j = 0; j < n.kids.size(); ++j) {
                Expr dj = n.kids[j].diff(i);
                if (dj.is_zero()) continue;
                std::vector<Expr> fac;
                fac.reserve(n.kids.size());
                for (size_t l = 0; l < n.kids.size(); ++l)
                    fac.push_back(l == j ? dj : n.kids[l]);
                terms.push_back(product(std::move(fac)));
            }
            return sum(std::move(terms));
        }
        case Kind::Pow: {
            Expr du = n.kids[0].diff(i);
            if (du.is_zero()) return constant(0.0);
            return product({constant(n.expo), pow(n.kids[0], n.expo - 1.0), du});
        }
        case Kind::Sin: {
            Expr du = n.kids[0].diff(i);
            if (du.is_zero()) return constant(0.0);
            return product({cos(n.kids[0]), du});
        }
        case Kind::Cos: {
            Expr du = n.kids[0].diff(i);
            if (du.is_zero()) return constant(0.0);
            return product({constant(-1.0), sin(n.kids[0]), du});
        }
        case Kind::Exp: {
            Expr du = n.kids[0].diff(i);
            if (du.is_zero()) return constant(0.0);
            return product({exp(n.kids[0]), du});
        }
    }
    return constant(0.0);
}

// ---------------------------------------------------------------------------
// Printing

namespace {

std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::string print(const Expr& e, int parent_prec) {
    const auto& n = e.node();
    std::string out;
    switch (n.kind) {
        case Expr::Kind::Const:
            out = fmt_double(n.cval);
            if (n.cval < 0 && parent_prec >= 2) out = "(" + out + ")";
            return out;
        case Expr::Kind::Coord:
            return "x" + std::to_string(n.coord + 1);
        case Expr::Kind::Sum: {
            for (size_t i = 0; i < n.kids.size(); ++i) {
                std::string part = print(n.kids[i], 1);
                if (i == 0) out = part;
                else if (!part.empty() && part[0] == '-') out += " - " + part.substr(1);
                else out += " + " + part;
            }
            if (parent_prec > 1) out = "(" + out + ")";
            return out;
        }
        case Expr::Kind::Prod: {
            for (size_t i = 0; i < n.kids.size(); ++i) {
                if (i) out += " * ";
                out += print(n.kids[i], 2);
            }
            if (parent_prec > 2) out = "(" + out + ")";
            return out;
        }
        case Expr::Kind::Pow:
            out = print(n.kids[0], 4) + "^";
            if (n.expo < 0 || n.expo != std::floor(n.expo))
                out += "(" + fmt_double(n.expo) + ")";
            else
                out += fmt_double(n.expo);
            return out;
        case Expr::Kind::Sin: return "sin(" + print(n.kids[0], 0) + ")";
        case Expr::Kind::Cos: return "cos(" + print(n.kids[0], 0) + ")";
        case Expr::Kind::Exp: return "exp(" + print(n.kids[0], 0) + ")";
    }
    return out;
}

}  // namespace

std::string Expr::to_string() const { return print(*this, 0); }

// ---------------------------------------------------------------------------
// Parsing (recursive descent)

namespace {

struct Parser {
    const std::string& s;
    size_t pos = 0;
    int dim;

    explicit Parser(const std::string& text, int d) : s(text), dim(d) {}

    void skip_ws() {
        while (pos < s.size() && std::isspace(static_cast<unsigned char>(s[pos]))) ++pos;
    }

    bool eat(char c) {
        skip_ws();
        if (pos < s.size() && s[pos] == c) {
            ++pos;
            return true;
        }
        return false;
    }

    char peek() {
        skip_ws();
        return pos < s.size() ? s[pos] : '\0';
    }

    [[noreturn]] void fail(const std::string& what) {
        throw Error(ErrorKind::Parse,
                    "expression parse error at position " + std::to_string(pos) + ": " + what);
    }

    Expr parse_expr() {
        Expr e = parse_term();
        while (true) {
            if (eat('+')) e = e + parse_term();
            else if (eat('-')) e = e - parse_term();
            else return e;
        }
    }

    Expr parse_term() {
        Expr e = parse_factor();
        while (true) {
            if (eat('*')) e = e * parse_factor();
            else if (eat('/')) e = e / parse_factor();
            else return e;
        }
    }

    Expr parse_factor() {
        if (eat('-')) return -parse_factor();
        if (eat('+')) return parse_factor();
        Expr base = parse_base();
        if (eat('^')) {
            Expr ex = parse_factor();  // right-associative; handles -2, (3/2)
            if (!ex.is_constant()) fail("exponent must be a constant");
            return Expr::pow(base, ex.constant_value());
        }
        return base;
    }

    Expr parse_base() {
        skip_ws();
        if (pos >= s.size()) fail("unexpected end of input");
        char c = s[pos];
        if (c == '(') {
            ++pos;
            Expr e = parse_expr();
            if (!eat(')')) fail("expected ')'");
            return e;
        }
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return parse_number();
        if (std::isalpha(static_cast<unsigned char>(c))) return parse_ident();
        fail(std::string("unexpected character '") + c + "'");
    }

    Expr parse_number() {
        size_t start = pos;
        while (pos < s.size() &&
               (std::isdigit(static_cast<unsigned char>(s[pos])) || s[pos] == '.'))
            ++pos;
        if (pos < s.size() && (s[pos] == 'e' || s[pos] == 'E')) {
            size_t mark = pos++;
            if (pos < s.size() && (s[pos] == '+' || s[pos] == '-')) ++pos;
            if (pos < s.size() && std::isdigit(static_cast<unsigned char>(s[pos]))) {
                while (pos < s.size() && std::isdigit(static_cast<unsigned char>(s[pos]))) ++pos;
            } else {
                pos = mark;  // 'e' belonged to something else
            }
        }
        const std::string tok = s.substr(start, pos - start);
        char* end = nullptr;
        double v = std::strtod(tok.c_str(), &end);
        if (end != tok.c_str() + tok.size()) fail("bad numeric literal '" + tok + "'");
        return Expr::constant(v);
    }

    Expr parse_ident() {
        size_t start = pos;
        while (pos < s.size() &&
               (std::isalnum(static_cast<unsigned char>(s[pos])) || s[pos] == '_'))
            ++pos;
        const std::string name = s.substr(start, pos - start);
        if (name == "sin" || name == "cos" || name == "exp") {
            if (!eat('(')) fail("expected '(' after " + name);
            Expr a = parse_expr();
            if (!eat(')')) fail("expected ')'");
            if (name == "sin") return Expr::sin(a);
            if (name == "cos") return Expr::cos(a);
            return Expr::exp(a);
        }
        if (name.size() >= 2 && name[0] == 'x') {
            char* end = nullptr;
            long idx = std::strtol(name.c_str() + 1, &end, 10);
            if (*end == '\0' && idx >= 1) {
                if (idx > dim)
                    fail("coordinate " + name + " exceeds chart dimension " +
                         std::to_string(dim));
                return Expr::coord(static_cast<int>(idx - 1));
            }
        }
        fail("unknown identifier '" + name + "'");
    }
};

}  // namespace

Expr Expr::parse(const std::string& text, int dim) {
    Parser p(text, dim);
    Expr e = p.parse_expr();
    p.skip_ws();
    if (p.pos != text.size())
        throw Error(ErrorKind::Parse,
                    "trailing input at position " + std::to_string(p.pos));
    return e;
}

// ---------------------------------------------------------------------------
// Operators

Expr operator+(const Expr& a, const Expr& b) { return Expr::sum({a, b}); }
Expr operator-(const Expr& a, const Expr& b) {
    return Expr::sum({a, Expr::product({Expr::constant(-1.0), b})});
}
Expr operator*(const Expr& a, const Expr& b) { return Expr::product({a, b}); }
Expr operator/(const Expr& a, const Expr& b) {
    return Expr::product({a, Expr::pow(b, -1.0)});
}
Expr operator-(const Expr& a) { return Expr::product({Expr::constant(-1.0), a}); }

}  // namespace subcurv
