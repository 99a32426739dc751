#pragma once

#include <algorithm>
#include <cmath>
#include <random>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include <quadmath.h>

#include "fexkit/expr.hpp"

namespace testsupport {

using fexkit::Expression;
using fexkit::NodeKind;
using fexkit::Op;

using std::cos;
using std::exp;
using std::fabs;
using std::log;
using std::log10;
using std::sin;
using std::sqrt;

inline __float128 sin(__float128 v) { return sinq(v); }
inline __float128 cos(__float128 v) { return cosq(v); }
inline __float128 exp(__float128 v) { return expq(v); }
inline __float128 sqrt(__float128 v) { return sqrtq(v); }
inline __float128 fabs(__float128 v) { return fabsq(v); }
inline __float128 log(__float128 v) { return logq(v); }
inline __float128 log10(__float128 v) { return log10q(v); }

// Straight recursive evaluation, independent of the engine's kernels. T is
// double or __float128.
template <class T>
T ref_eval_as(const Expression& e, std::span<const T> x) {
    switch (e.kind()) {
        case NodeKind::Variable: return x[static_cast<std::size_t>(e.var_index() - 1)];
        case NodeKind::Constant: return e.value();
        case NodeKind::Binary: {
            const T a = ref_eval_as<T>(e.left(), x), b = ref_eval_as<T>(e.right(), x);
            switch (e.op()) {
                case Op::Add: return a + b;
                case Op::Sub: return a - b;
                case Op::Mul: return a * b;
                case Op::Div: return a / b;
                default: throw std::logic_error("ref_eval: binary op");
            }
        }
        case NodeKind::Unary: {
            const T c = ref_eval_as<T>(e.child(), x);
            T v = 0;
            switch (e.op()) {
                case Op::Zero: v = 0; break;
                case Op::One: v = 1; break;
                case Op::Id: v = c; break;
                case Op::Square: v = c * c; break;
                case Op::Cube: v = c * c * c; break;
                case Op::Quart: v = c * c * c * c; break;
                case Op::Exp: v = exp(c); break;
                case Op::Sin: v = sin(c); break;
                case Op::Cos: v = cos(c); break;
                case Op::Sqrt: v = sqrt(c); break;
                case Op::Abs: v = fabs(c); break;
                case Op::Lg: v = log10(c); break;
                case Op::Ln: v = log(c); break;
                case Op::Sign: v = (c > 0) - (c < 0); break;
                default: throw std::logic_error("ref_eval: unary op");
            }
            return T(e.alpha()) * v + T(e.beta());
        }
    }
    throw std::logic_error("ref_eval");
}

inline double ref_eval(const Expression& e, std::span<const double> x) { return ref_eval_as<double>(e, x); }

inline std::vector<double> random_point(std::mt19937_64& rng, int dim, double lo = -1.0, double hi = 1.0) {
    std::uniform_real_distribution<double> u(lo, hi);
    std::vector<double> x(static_cast<std::size_t>(dim));
    for (auto& v : x) v = u(rng);
    return x;
}

// Richardson-extrapolated difference quotients on a halving step ladder;
// returns the value where two consecutive estimates agree best. Fast
// oscillating trees need steps far below any single fixed guess.
template <class Q>
double richardson_ladder(Q&& quotient, double h, double h_min = 1e-9) {
    std::vector<double> r;
    double prev = quotient(h);
    while (h / 2.0 >= h_min) {
        h /= 2.0;
        const double cur = quotient(h);
        r.push_back((4.0 * cur - prev) / 3.0);
        prev = cur;
    }
    std::size_t best = 1;
    for (std::size_t i = 1; i < r.size(); ++i)
        if (std::abs(r[i] - r[i - 1]) < std::abs(r[best] - r[best - 1])) best = i;
    return r[best];
}

template <class F>
double fd_first(F&& f, std::vector<double> x, int k, double h) {
    return richardson_ladder(
        [&](double s) {
            auto xp = x, xm = x;
            xp[static_cast<std::size_t>(k)] += s;
            xm[static_cast<std::size_t>(k)] -= s;
            return (f(xp) - f(xm)) / (2.0 * s);
        },
        h);
}

template <class F>
double fd_second(F&& f, std::vector<double> x, int k, double h) {
    const double f0 = f(x);
    return richardson_ladder(
        [&](double s) {
            auto xp = x, xm = x;
            xp[static_cast<std::size_t>(k)] += s;
            xm[static_cast<std::size_t>(k)] -= s;
            return (f(xp) - 2.0 * f0 + f(xm)) / (s * s);
        },
        h, 3e-5);
}

inline double fd_first_quad(const Expression& e, std::span<const double> x, int k, double h) {
    const std::vector<__float128> q(x.begin(), x.end());
    return richardson_ladder(
        [&](double s) {
            auto xp = q, xm = q;
            xp[static_cast<std::size_t>(k)] += s;
            xm[static_cast<std::size_t>(k)] -= s;
            return static_cast<double>((ref_eval_as<__float128>(e, xp) - ref_eval_as<__float128>(e, xm)) / (2 * __float128(s)));
        },
        h, 1e-14);
}

// Second difference of the reference evaluator in quad precision, so the
// ladder can go down to steps near 1e-10 on steep trees.
inline double fd_second_quad(const Expression& e, std::span<const double> x, int k, double h) {
    const std::vector<__float128> q(x.begin(), x.end());
    const __float128 f0 = ref_eval_as<__float128>(e, q);
    return richardson_ladder(
        [&](double s) {
            auto xp = q, xm = q;
            xp[static_cast<std::size_t>(k)] += s;
            xm[static_cast<std::size_t>(k)] -= s;
            const __float128 s2 = __float128(s) * __float128(s);
            return static_cast<double>((ref_eval_as<__float128>(e, xp) - 2 * f0 + ref_eval_as<__float128>(e, xm)) / s2);
        },
        h, 1e-10);
}

inline double rel_err(double got, double want) {
    return std::abs(got - want) / std::max(std::abs(want), 1.0);
}

}  // namespace testsupport
