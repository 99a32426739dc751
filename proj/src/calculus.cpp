#include <cmath>
#include <numbers>

#include "fexkit/expr.hpp"

namespace fexkit {

namespace {

using E = Expression;

std::optional<double> try_fold_unary(Op op, double alpha, double beta, double x) {
    try {
        const double v = alpha * apply_unary(op, x) + beta;
        if (std::isfinite(v)) return v;
    } catch (const DomainError&) {
    }
    return std::nullopt;
}

std::optional<double> try_fold_binary(Op op, double a, double b) {
    try {
        const double v = apply_binary(op, a, b);
        if (std::isfinite(v)) return v;
    } catch (const DomainError&) {
    }
    return std::nullopt;
}

// Smart constructors. Children are assumed already simplified.
E mk_unary(Op op, double alpha, double beta, const E& c);
E mk_binary(Op op, const E& l, const E& r);

E mk_unary(Op op, double alpha, double beta, const E& c) {
    if (alpha == 0.0 || op == Op::Zero) return E::constant(beta);
    if (op == Op::One) return E::constant(alpha + beta);
    if (c.is_constant()) {
        if (auto v = try_fold_unary(op, alpha, beta, c.value())) return E::constant(*v);
    }
    if (op == Op::Id) {
        if (alpha == 1.0 && beta == 0.0) return c;
        if (c.kind() == NodeKind::Unary) {
            return mk_unary(c.op(), alpha * c.alpha(), alpha * c.beta() + beta, c.child());
        }
    }
    return E::unary(op, alpha, beta, c);
}

E mk_binary(Op op, const E& l, const E& r) {
    if (l.is_constant() && r.is_constant()) {
        if (auto v = try_fold_binary(op, l.value(), r.value())) return E::constant(*v);
        return E::binary(op, l, r);
    }
    switch (op) {
        case Op::Add:
            if (l.is_constant()) return mk_unary(Op::Id, 1.0, l.value(), r);
            if (r.is_constant()) return mk_unary(Op::Id, 1.0, r.value(), l);
            break;
        case Op::Sub:
            if (r.is_constant()) return mk_unary(Op::Id, 1.0, -r.value(), l);
            if (l.is_constant()) return mk_unary(Op::Id, -1.0, l.value(), r);
            break;
        case Op::Mul:
            if (l.is_constant()) return mk_unary(Op::Id, l.value(), 0.0, r);
            if (r.is_constant()) return mk_unary(Op::Id, r.value(), 0.0, l);
            break;
        case Op::Div:
            if (l.is_constant(0.0)) return E::constant(0.0);
            if (r.is_constant() && r.value() != 0.0) return mk_unary(Op::Id, 1.0 / r.value(), 0.0, l);
            break;
        default: break;
    }
    return E::binary(op, l, r);
}

E simplify_rec(const E& e) {
    switch (e.kind()) {
        case NodeKind::Variable:
        case NodeKind::Constant: return e;
        case NodeKind::Unary:
            if (e.op() == Op::Zero || e.op() == Op::One || e.alpha() == 0.0)
                return mk_unary(e.op(), e.alpha(), e.beta(), e.child());
            return mk_unary(e.op(), e.alpha(), e.beta(), simplify_rec(e.child()));
        case NodeKind::Binary: return mk_binary(e.op(), simplify_rec(e.left()), simplify_rec(e.right()));
    }
    return e;
}

// Derivative of op at c, as an expression in c (without the alpha factor).
E unary_derivative(Op op, const E& c) {
    switch (op) {
        case Op::Zero:
        case Op::One: return E::constant(0.0);
        case Op::Id: return E::constant(1.0);
        case Op::Square: return mk_unary(Op::Id, 2.0, 0.0, c);
        case Op::Cube: return mk_unary(Op::Square, 3.0, 0.0, c);
        case Op::Quart: return mk_unary(Op::Cube, 4.0, 0.0, c);
        case Op::Exp: return mk_unary(Op::Exp, 1.0, 0.0, c);
        case Op::Sin: return mk_unary(Op::Cos, 1.0, 0.0, c);
        case Op::Cos: return mk_unary(Op::Sin, -1.0, 0.0, c);
        case Op::Sqrt: return mk_binary(Op::Div, E::constant(1.0), mk_unary(Op::Sqrt, 2.0, 0.0, c));
        case Op::Abs: return mk_unary(Op::Sign, 1.0, 0.0, c);
        case Op::Lg: return mk_binary(Op::Div, E::constant(1.0), mk_unary(Op::Id, std::numbers::ln10, 0.0, c));
        case Op::Ln: return mk_binary(Op::Div, E::constant(1.0), c);
        case Op::Sign: throw UnsupportedOperator("SIGN has no derivative rule");
        default: break;
    }
    throw UnsupportedOperator("no derivative rule for " + std::string(op_token(op)));
}

E diff_rec(const E& e, int var) {
    switch (e.kind()) {
        case NodeKind::Variable: return E::constant(e.var_index() == var ? 1.0 : 0.0);
        case NodeKind::Constant: return E::constant(0.0);
        case NodeKind::Unary: {
            if (e.op() == Op::Zero || e.op() == Op::One || e.alpha() == 0.0) return E::constant(0.0);
            E dc = diff_rec(e.child(), var);
            if (dc.is_constant(0.0)) return dc;
            E outer = mk_unary(Op::Id, e.alpha(), 0.0, unary_derivative(e.op(), e.child()));
            return mk_binary(Op::Mul, outer, dc);
        }
        case NodeKind::Binary: {
            const E& l = e.left();
            const E& r = e.right();
            E dl = diff_rec(l, var);
            E dr = diff_rec(r, var);
            switch (e.op()) {
                case Op::Add: return mk_binary(Op::Add, dl, dr);
                case Op::Sub: return mk_binary(Op::Sub, dl, dr);
                case Op::Mul: return mk_binary(Op::Add, mk_binary(Op::Mul, dl, r), mk_binary(Op::Mul, l, dr));
                case Op::Div: {
                    E num = mk_binary(Op::Sub, mk_binary(Op::Mul, dl, r), mk_binary(Op::Mul, l, dr));
                    return mk_binary(Op::Div, num, mk_unary(Op::Square, 1.0, 0.0, r));
                }
                default: break;
            }
            break;
        }
    }
    throw Error("differentiate: corrupt node");
}

}  // namespace

Expression simplify(const Expression& expr) { return simplify_rec(expr); }

Expression differentiate(const Expression& expr, int var) {
    if (var < 1) throw std::invalid_argument("differentiate: variable index must be >= 1");
    return simplify_rec(diff_rec(simplify_rec(expr), var));
}

Expression laplacian(const Expression& expr, int dim) {
    if (dim < 1) throw std::invalid_argument("laplacian: dimension must be >= 1");
    const E s = simplify_rec(expr);
    E acc = E::constant(0.0);
    for (int k = 1; k <= dim; ++k) acc = mk_binary(Op::Add, acc, diff_rec(diff_rec(s, k), k));
    return simplify_rec(acc);
}

}  // namespace fexkit
