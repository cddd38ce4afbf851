#pragma once
// Closed-form scalar expressions on a coordinate chart: immutable trees with
// exact symbolic differentiation, constant folding, evaluation, parsing and
// round-trip printing.  Coordinates are named x1..xn.

#include <memory>
#include <string>
#include <vector>

namespace subcurv {

class Expr {
public:
    enum class Kind { Const, Coord, Sum, Prod, Pow, Sin, Cos, Exp };

    struct Node {
        Kind kind;
        double cval = 0.0;         // Const
        int coord = -1;            // Coord (0-based)
        double expo = 1.0;         // Pow exponent (real constant)
        std::vector<Expr> kids;    // Sum/Prod children, Pow/Sin/Cos/Exp operand
    };

    Expr() : node_(zero_node()) {}  // default: 0

    static Expr constant(double c);
    static Expr coord(int i);

    // Smart constructors (flatten, fold constants, prune zeros/ones).
    static Expr sum(std::vector<Expr> terms);
    static Expr product(std::vector<Expr> factors);
    static Expr pow(const Expr& base, double exponent);
    static Expr sin(const Expr& a);
    static Expr cos(const Expr& a);
    static Expr exp(const Expr& a);

    double eval(const double* x) const;
    double eval(const std::vector<double>& x) const { return eval(x.data()); }

    // Exact partial derivative with respect to coordinate i.
    Expr diff(int i) const;

    bool is_constant() const { return node_->kind == Kind::Const; }
    bool is_zero() const { return is_constant() && node_->cval == 0.0; }
    double constant_value() const;  // requires is_constant()

    // Printable form using x1..xn; parses back to an equivalent expression.
    std::string to_string() const;

    // Parse the model-file grammar: decimal literals, coordinates x1..xn,
    // + - * / ^, sin, cos, exp, parentheses.  Exponents must be constant.
    // Throws subcurv::Error on malformed input or out-of-range coordinates.
    static Expr parse(const std::string& text, int dim);

    const Node& node() const { return *node_; }

private:
    explicit Expr(std::shared_ptr<const Node> n) : node_(std::move(n)) {}
    static std::shared_ptr<const Node> zero_node();
    static Expr make(Node&& n);

    std::shared_ptr<const Node> node_;
};

Expr operator+(const Expr& a, const Expr& b);
Expr operator-(const Expr& a, const Expr& b);
Expr operator*(const Expr& a, const Expr& b);
Expr operator/(const Expr& a, const Expr& b);
Expr operator-(const Expr& a);

}  // namespace subcurv
