#include "fexkit/jet.hpp"

#include <cmath>
#include <numbers>

namespace fexkit {

CompiledExpression::CompiledExpression(const Expression& expr) {
    const int root = compile(expr);
    if (code_[static_cast<std::size_t>(root)].kind == NodeKind::Unary) root_param_ = code_[static_cast<std::size_t>(root)].param;
    max_var_ = expr.max_variable();
}

int CompiledExpression::compile(const Expression& e) {
    Instr ins{e.kind()};
    switch (e.kind()) {
        case NodeKind::Variable: ins.var = e.var_index(); break;
        case NodeKind::Constant: ins.value = e.value(); break;
        case NodeKind::Unary: {
            ins.op = e.op();
            const bool ignores_child = e.op() == Op::Zero || e.op() == Op::One;
            if (!ignores_child) ins.a = compile(e.child());
            ins.param = static_cast<int>(params_.size());
            params_.push_back(e.alpha());
            params_.push_back(e.beta());
            if (ignores_child) {
                ignored_index_.resize(code_.size() + 1, -1);
                ignored_index_[code_.size()] = static_cast<int>(ignored_children_.size());
                ignored_children_.push_back(e.child());
            }
            break;
        }
        case NodeKind::Binary:
            ins.op = e.op();
            ins.a = compile(e.left());
            ins.b = compile(e.right());
            break;
    }
    code_.push_back(ins);
    return static_cast<int>(code_.size()) - 1;
}

Expression CompiledExpression::realize_rec(int idx, std::span<const double> p) const {
    const Instr& ins = code_[static_cast<std::size_t>(idx)];
    switch (ins.kind) {
        case NodeKind::Variable: return Expression::variable(ins.var);
        case NodeKind::Constant: return Expression::constant(ins.value);
        case NodeKind::Unary: {
            const auto pa = static_cast<std::size_t>(ins.param);
            if (ins.a < 0) {
                const Expression& child = ignored_children_[static_cast<std::size_t>(ignored_index_[static_cast<std::size_t>(idx)])];
                return Expression::unary(ins.op, p[pa], p[pa + 1], child);
            }
            return Expression::unary(ins.op, p[pa], p[pa + 1], realize_rec(ins.a, p));
        }
        case NodeKind::Binary: return Expression::binary(ins.op, realize_rec(ins.a, p), realize_rec(ins.b, p));
    }
    throw Error("realize: corrupt instruction");
}

Expression CompiledExpression::realize(std::span<const double> params) const {
    if (params.size() != params_.size()) throw std::invalid_argument("realize: parameter count mismatch");
    return realize_rec(static_cast<int>(code_.size()) - 1, params);
}

namespace {

// f, f', f'' of a unary operator at u.
inline void unary_jet(Op op, double u, double& f, double& f1, double& f2) {
    switch (op) {
        case Op::Id: f = u; f1 = 1.0; f2 = 0.0; return;
        case Op::Square: f = u * u; f1 = 2.0 * u; f2 = 2.0; return;
        case Op::Cube: f = u * u * u; f1 = 3.0 * u * u; f2 = 6.0 * u; return;
        case Op::Quart: {
            const double s = u * u;
            f = s * s; f1 = 4.0 * s * u; f2 = 12.0 * s;
            return;
        }
        case Op::Exp: f = f1 = f2 = std::exp(u); return;
        case Op::Sin: f = std::sin(u); f1 = std::cos(u); f2 = -f; return;
        case Op::Cos: f = std::cos(u); f1 = -std::sin(u); f2 = -f; return;
        case Op::Sqrt:
            if (u < 0.0) throw DomainError("SQRT of negative value");
            f = std::sqrt(u); f1 = 0.5 / f; f2 = -0.25 / (f * u);
            return;
        case Op::Abs: f = std::abs(u); f1 = u > 0.0 ? 1.0 : (u < 0.0 ? -1.0 : 0.0); f2 = 0.0; return;
        case Op::Lg:
            if (u <= 0.0) throw DomainError("LG of non-positive value");
            f = std::log10(u); f1 = 1.0 / (u * std::numbers::ln10); f2 = -f1 / u;
            return;
        case Op::Ln:
            if (u <= 0.0) throw DomainError("LN of non-positive value");
            f = std::log(u); f1 = 1.0 / u; f2 = -f1 * f1;
            return;
        case Op::Sign: f = u > 0.0 ? 1.0 : (u < 0.0 ? -1.0 : 0.0); f1 = 0.0; f2 = 0.0; return;
        case Op::Zero: f = 0.0; f1 = 0.0; f2 = 0.0; return;
        case Op::One: f = 1.0; f1 = 0.0; f2 = 0.0; return;
        default: break;
    }
    throw Error("unary_jet: not a unary operator");
}

inline void require_finite(const double* v, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i)
        if (!std::isfinite(v[i])) throw DomainError("non-finite value");
}

}  // namespace

JetValues CompiledExpression::evaluate(const PointSet& points, std::span<const double> p, int order) const {
    if (p.size() != params_.size()) throw std::invalid_argument("evaluate: parameter count mismatch");
    if (order < 0 || order > 2) throw std::invalid_argument("evaluate: order must be 0, 1 or 2");
    if (max_var_ > points.dim) throw std::invalid_argument("evaluate: expression uses more variables than the points have");

    const std::size_t n = points.size();
    const auto d = static_cast<std::size_t>(points.dim);
    const std::size_t gsz = order >= 1 ? n * d : 0;
    const std::size_t hsz = order >= 2 ? n * d : 0;
    const std::size_t stride = n + gsz + hsz;

    thread_local std::vector<double> ws;
    if (ws.size() < stride * code_.size()) ws.resize(stride * code_.size());

    auto V = [&](int i) { return ws.data() + static_cast<std::size_t>(i) * stride; };
    auto G = [&](int i) { return V(i) + n; };
    auto H = [&](int i) { return V(i) + n + gsz; };

    for (std::size_t idx = 0; idx < code_.size(); ++idx) {
        const Instr& ins = code_[idx];
        const int me = static_cast<int>(idx);
        double* v = V(me);
        double* g = G(me);
        double* h = H(me);
        switch (ins.kind) {
            case NodeKind::Variable: {
                const auto k = static_cast<std::size_t>(ins.var - 1);
                for (std::size_t i = 0; i < n; ++i) v[i] = points.coords[i * d + k];
                if (order >= 1) {
                    std::fill(g, g + gsz, 0.0);
                    std::fill(g + k * n, g + (k + 1) * n, 1.0);
                }
                if (order >= 2) std::fill(h, h + hsz, 0.0);
                break;
            }
            case NodeKind::Constant:
                std::fill(v, v + n, ins.value);
                std::fill(g, g + gsz + hsz, 0.0);
                break;
            case NodeKind::Unary: {
                const double alpha = p[static_cast<std::size_t>(ins.param)];
                const double beta = p[static_cast<std::size_t>(ins.param) + 1];
                if (ins.a < 0) {
                    const double c = alpha * (ins.op == Op::One ? 1.0 : 0.0) + beta;
                    std::fill(v, v + n, c);
                    std::fill(g, g + gsz + hsz, 0.0);
                    break;
                }
                const double* cv = V(ins.a);
                const double* cg = G(ins.a);
                const double* ch = H(ins.a);
                for (std::size_t i = 0; i < n; ++i) {
                    double f, f1, f2;
                    unary_jet(ins.op, cv[i], f, f1, f2);
                    v[i] = alpha * f + beta;
                    if (order >= 1) {
                        const double s1 = alpha * f1;
                        for (std::size_t k = 0; k < d; ++k) {
                            const double gu = cg[k * n + i];
                            g[k * n + i] = s1 * gu;
                            if (order >= 2) h[k * n + i] = alpha * (f2 * gu * gu) + s1 * ch[k * n + i];
                        }
                    }
                }
                break;
            }
            case NodeKind::Binary: {
                const double* av = V(ins.a);
                const double* ag = G(ins.a);
                const double* ah = H(ins.a);
                const double* bv = V(ins.b);
                const double* bg = G(ins.b);
                const double* bh = H(ins.b);
                switch (ins.op) {
                    case Op::Add:
                        for (std::size_t i = 0; i < n; ++i) v[i] = av[i] + bv[i];
                        for (std::size_t j = 0; j < gsz + hsz; ++j) g[j] = ag[j] + bg[j];
                        break;
                    case Op::Sub:
                        for (std::size_t i = 0; i < n; ++i) v[i] = av[i] - bv[i];
                        for (std::size_t j = 0; j < gsz + hsz; ++j) g[j] = ag[j] - bg[j];
                        break;
                    case Op::Mul:
                        for (std::size_t i = 0; i < n; ++i) v[i] = av[i] * bv[i];
                        if (order >= 1) {
                            for (std::size_t k = 0; k < d; ++k) {
                                for (std::size_t i = 0; i < n; ++i) {
                                    const std::size_t j = k * n + i;
                                    g[j] = ag[j] * bv[i] + av[i] * bg[j];
                                    if (order >= 2) h[j] = ah[j] * bv[i] + 2.0 * ag[j] * bg[j] + av[i] * bh[j];
                                }
                            }
                        }
                        break;
                    case Op::Div:
                        for (std::size_t i = 0; i < n; ++i) {
                            if (bv[i] == 0.0) throw DomainError("division by zero");
                            v[i] = av[i] / bv[i];
                        }
                        if (order >= 1) {
                            for (std::size_t k = 0; k < d; ++k) {
                                for (std::size_t i = 0; i < n; ++i) {
                                    const std::size_t j = k * n + i;
                                    const double gq = (ag[j] - v[i] * bg[j]) / bv[i];
                                    g[j] = gq;
                                    if (order >= 2) h[j] = (ah[j] - 2.0 * gq * bg[j] - v[i] * bh[j]) / bv[i];
                                }
                            }
                        }
                        break;
                    default: throw Error("evaluate: corrupt binary instruction");
                }
                break;
            }
        }
        require_finite(v, n);
    }

    const int root = static_cast<int>(code_.size()) - 1;
    JetValues out;
    out.n = n;
    out.dim = points.dim;
    out.order = order;
    out.value.assign(V(root), V(root) + n);
    if (order >= 1) {
        out.grad.assign(G(root), G(root) + gsz);
        require_finite(out.grad.data(), gsz);
    }
    if (order >= 2) {
        out.hess_diag.assign(H(root), H(root) + hsz);
        require_finite(out.hess_diag.data(), hsz);
    }
    return out;
}

}  // namespace fexkit
