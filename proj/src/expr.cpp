#include "fexkit/expr.hpp"

#include <algorithm>
#include <array>
#include <cmath>

namespace fexkit {

namespace {

struct OpInfo {
    Op op;
    std::string_view token;
};

constexpr std::array<OpInfo, 18> kOps{{
    {Op::Zero, "0"},
    {Op::One, "1"},
    {Op::Id, "Id"},
    {Op::Square, "^2"},
    {Op::Cube, "^3"},
    {Op::Quart, "^4"},
    {Op::Exp, "EXP"},
    {Op::Sin, "SIN"},
    {Op::Cos, "COS"},
    {Op::Sqrt, "SQRT"},
    {Op::Abs, "ABS"},
    {Op::Lg, "LG"},
    {Op::Ln, "LN"},
    {Op::Sign, "SIGN"},
    {Op::Add, "+"},
    {Op::Sub, "-"},
    {Op::Mul, "*"},
    {Op::Div, "/"},
}};

constexpr std::array<Op, 18> kAllOps{Op::Zero, Op::One,  Op::Id, Op::Square, Op::Cube, Op::Quart,
                                     Op::Exp,  Op::Sin,  Op::Cos, Op::Sqrt,  Op::Abs,  Op::Lg,
                                     Op::Ln,   Op::Sign, Op::Add, Op::Sub,   Op::Mul,  Op::Div};

constexpr std::array<Op, 9> kDefaultUnary{Op::Zero, Op::One, Op::Id,  Op::Square, Op::Cube,
                                          Op::Quart, Op::Exp, Op::Sin, Op::Cos};
constexpr std::array<Op, 3> kDefaultBinary{Op::Add, Op::Sub, Op::Mul};

double checked(double v) {
    if (!std::isfinite(v)) throw DomainError("non-finite value");
    return v;
}

}  // namespace

std::string_view op_token(Op op) { return kOps[static_cast<std::size_t>(op)].token; }

std::optional<Op> op_from_token(std::string_view token) {
    for (const auto& info : kOps)
        if (info.token == token) return info.op;
    return std::nullopt;
}

std::span<const Op> all_ops() { return kAllOps; }
std::span<const Op> default_unary_ops() { return kDefaultUnary; }
std::span<const Op> default_binary_ops() { return kDefaultBinary; }

double apply_unary(Op op, double x) {
    switch (op) {
        case Op::Zero: return 0.0;
        case Op::One: return 1.0;
        case Op::Id: return x;
        case Op::Square: return x * x;
        case Op::Cube: return x * x * x;
        case Op::Quart: {
            const double s = x * x;
            return s * s;
        }
        case Op::Exp: return checked(std::exp(x));
        case Op::Sin: return std::sin(x);
        case Op::Cos: return std::cos(x);
        case Op::Sqrt:
            if (x < 0.0) throw DomainError("SQRT of negative value");
            return std::sqrt(x);
        case Op::Abs: return std::abs(x);
        case Op::Lg:
            if (x <= 0.0) throw DomainError("LG of non-positive value");
            return std::log10(x);
        case Op::Ln:
            if (x <= 0.0) throw DomainError("LN of non-positive value");
            return std::log(x);
        case Op::Sign: return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0);
        default: break;
    }
    throw Error("apply_unary: not a unary operator");
}

double apply_binary(Op op, double a, double b) {
    switch (op) {
        case Op::Add: return a + b;
        case Op::Sub: return a - b;
        case Op::Mul: return a * b;
        case Op::Div:
            if (b == 0.0) throw DomainError("division by zero");
            return a / b;
        default: break;
    }
    throw Error("apply_binary: not a binary operator");
}

// ---------------------------------------------------------------------------

Expression Expression::variable(int index) {
    if (index < 1) throw std::invalid_argument("variable index must be >= 1");
    auto n = std::make_shared<Node>();
    n->kind = NodeKind::Variable;
    n->var = index;
    return Expression(std::move(n));
}

Expression Expression::constant(double value) {
    auto n = std::make_shared<Node>();
    n->kind = NodeKind::Constant;
    n->value = value == 0.0 ? 0.0 : value;  // drop negative zero
    return Expression(std::move(n));
}

Expression Expression::unary(Op op, double alpha, double beta, Expression child) {
    if (!is_unary(op)) throw std::invalid_argument("Expression::unary: binary operator given");
    auto n = std::make_shared<Node>();
    n->kind = NodeKind::Unary;
    n->op = op;
    n->alpha = alpha;
    n->beta = beta;
    n->children.push_back(std::move(child));
    return Expression(std::move(n));
}

Expression Expression::binary(Op op, Expression left, Expression right) {
    if (!is_binary(op)) throw std::invalid_argument("Expression::binary: unary operator given");
    auto n = std::make_shared<Node>();
    n->kind = NodeKind::Binary;
    n->op = op;
    n->children.push_back(std::move(left));
    n->children.push_back(std::move(right));
    return Expression(std::move(n));
}

NodeKind Expression::kind() const { return node_->kind; }
Op Expression::op() const { return node_->op; }
double Expression::alpha() const { return node_->alpha; }
double Expression::beta() const { return node_->beta; }
double Expression::value() const { return node_->value; }
int Expression::var_index() const { return node_->var; }
const Expression& Expression::child() const { return node_->children.at(0); }
const Expression& Expression::left() const { return node_->children.at(0); }
const Expression& Expression::right() const { return node_->children.at(1); }

std::size_t Expression::size() const {
    std::size_t n = 1;
    for (const auto& c : node_->children) n += c.size();
    return n;
}

int Expression::unary_depth() const {
    int d = 0;
    for (const auto& c : node_->children) d = std::max(d, c.unary_depth());
    return d + (kind() == NodeKind::Unary ? 1 : 0);
}

int Expression::max_variable() const {
    int m = kind() == NodeKind::Variable ? var_index() : 0;
    for (const auto& c : node_->children) m = std::max(m, c.max_variable());
    return m;
}

bool operator==(const Expression& a, const Expression& b) {
    if (a.node_ == b.node_) return true;
    const Node& x = *a.node_;
    const Node& y = *b.node_;
    if (x.kind != y.kind) return false;
    switch (x.kind) {
        case NodeKind::Variable: return x.var == y.var;
        case NodeKind::Constant: return x.value == y.value;
        case NodeKind::Unary:
            return x.op == y.op && x.alpha == y.alpha && x.beta == y.beta && x.children[0] == y.children[0];
        case NodeKind::Binary:
            return x.op == y.op && x.children[0] == y.children[0] && x.children[1] == y.children[1];
    }
    return false;
}

Expression operator+(const Expression& a, const Expression& b) { return Expression::binary(Op::Add, a, b); }
Expression operator-(const Expression& a, const Expression& b) { return Expression::binary(Op::Sub, a, b); }
Expression operator*(const Expression& a, const Expression& b) { return Expression::binary(Op::Mul, a, b); }
Expression operator/(const Expression& a, const Expression& b) { return Expression::binary(Op::Div, a, b); }

double eval(const Expression& expr, std::span<const double> point) {
    switch (expr.kind()) {
        case NodeKind::Variable: {
            const auto k = static_cast<std::size_t>(expr.var_index());
            if (k > point.size()) throw std::invalid_argument("eval: point has fewer coordinates than x" + std::to_string(k));
            return point[k - 1];
        }
        case NodeKind::Constant: return expr.value();
        case NodeKind::Unary: {
            const Op op = expr.op();
            // 0 and 1 ignore their operand entirely.
            const double inner = (op == Op::Zero || op == Op::One) ? 0.0 : eval(expr.child(), point);
            return checked(expr.alpha() * apply_unary(op, inner) + expr.beta());
        }
        case NodeKind::Binary: {
            const double a = eval(expr.left(), point);
            const double b = eval(expr.right(), point);
            return checked(apply_binary(expr.op(), a, b));
        }
    }
    throw Error("eval: corrupt node");
}

}  // namespace fexkit
