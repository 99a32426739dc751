#include <doctest.h>

#include <cmath>
#include <map>
#include <numbers>

#include "fexkit/expr.hpp"
#include "support.hpp"

using namespace fexkit;
using testsupport::ref_eval;
using testsupport::rel_err;

namespace {

Expression x(int k) { return Expression::variable(k); }
Expression c(double v) { return Expression::constant(v); }

// (5 x1)^2 + sin(3 x2) * x2
Expression table_h1() {
    return Expression::binary(Op::Add, Expression::unary(Op::Square, Expression::unary(Op::Id, 5, 0, x(1))),
                              Expression::binary(Op::Mul, Expression::unary(Op::Sin, Expression::unary(Op::Id, 3, 0, x(2))),
                                                 x(2)));
}

// 5 exp(2 x1) cos(6 x1)^3
Expression table_h2() {
    return Expression::binary(Op::Mul, Expression::unary(Op::Exp, 5, 0, Expression::unary(Op::Id, 2, 0, x(1))),
                              Expression::unary(Op::Cube, Expression::unary(Op::Cos, Expression::unary(Op::Id, 6, 0, x(1)))));
}

Expression tree(int depth, int dim, std::uint64_t seed) {
    return random_tree(depth, default_unary_ops(), default_binary_ops(), dim, seed);
}

std::string postfix(const Expression& e) { return join_tokens(to_postfix(e)); }

void walk(const Expression& e, std::map<Op, int>& counts) {
    if (e.kind() == NodeKind::Unary) {
        ++counts[e.op()];
        walk(e.child(), counts);
    } else if (e.kind() == NodeKind::Binary) {
        ++counts[e.op()];
        walk(e.left(), counts);
        walk(e.right(), counts);
    }
}

}  // namespace

TEST_CASE("eval: scaled sine") {
    const Expression e = Expression::unary(Op::Sin, 16, 0, x(3));
    const double p0[] = {0.4, -0.2, 0.0};
    const double p1[] = {0.4, -0.2, std::numbers::pi / 2};
    CHECK(eval(e, p0) == 0.0);
    CHECK(eval(e, p1) == doctest::Approx(16.0).epsilon(1e-15));
}

TEST_CASE("eval agrees with a separate recursive evaluator on depth-3 trees") {
    std::mt19937_64 rng(11);
    int checked = 0;
    for (std::uint64_t s = 0; s < 200; ++s) {
        const Expression e = tree(3, 3, s);
        const auto p = testsupport::random_point(rng, 3);
        const double want = ref_eval(e, p);
        if (!std::isfinite(want)) continue;
        CHECK(rel_err(eval(e, p), want) <= 1e-14);
        ++checked;
    }
    CHECK(checked >= 190);
}

TEST_CASE("singular points raise DomainError") {
    const double p[] = {0.0};
    CHECK_THROWS_AS(eval(Expression::unary(Op::Ln, x(1)), p), DomainError);
    CHECK_THROWS_AS(eval(Expression::binary(Op::Div, c(1), x(1)), p), DomainError);
    const double q[] = {-1.0};
    CHECK_THROWS_AS(eval(Expression::unary(Op::Sqrt, x(1)), q), DomainError);
}

TEST_CASE("differentiate: basic rules") {
    CHECK(differentiate(x(1), 1) == c(1));
    CHECK(differentiate(x(2), 1) == c(0));
    CHECK(differentiate(Expression::unary(Op::Sin, x(1)), 1) == Expression::unary(Op::Cos, x(1)));
    CHECK_THROWS_AS(differentiate(Expression::unary(Op::Sign, x(1)), 1), UnsupportedOperator);
}

TEST_CASE("differentiate matches finite differences on random depth-3 trees") {
    std::mt19937_64 rng(5);
    int checked = 0, bad = 0;
    for (std::uint64_t s = 0; s < 100; ++s) {
        const Expression e = tree(3, 3, 1000 + s);
        const auto p = testsupport::random_point(rng, 3);
        const int k = static_cast<int>(s % 3);
        try {
            const double got = eval(differentiate(e, k + 1), p);
            const double want = testsupport::fd_first([&](const std::vector<double>& q) { return eval(e, q); }, p, k, 0.1);
            ++checked;
            if (rel_err(got, want) >= 1e-6) {
                ++bad;
                MESSAGE("seed " << s << ": " << postfix(e) << " got " << got << " want " << want);
            }
        } catch (const DomainError&) {
        }
    }
    CHECK(bad == 0);
    CHECK(checked >= 90);
}

TEST_CASE("laplacian: closed forms") {
    const Expression r2 = Expression::binary(Op::Add, Expression::unary(Op::Square, x(1)), Expression::unary(Op::Square, x(2)));
    CHECK(laplacian(r2, 2) == c(4));
    const Expression l = laplacian(Expression::unary(Op::Sin, x(1)), 1);
    for (double v : {-0.7, 0.1, 0.9}) {
        const double p[] = {v};
        CHECK(eval(l, p) == doctest::Approx(-std::sin(v)).epsilon(1e-15));
    }
}

TEST_CASE("laplacian matches second differences on random depth-3 trees") {
    std::mt19937_64 rng(9);
    int bad = 0, checked = 0;
    for (std::uint64_t s = 0; s < 200; ++s) {
        const Expression e = tree(3, 3, 2000 + s);
        const auto p = testsupport::random_point(rng, 3);
        if (!std::isfinite(ref_eval(e, p))) continue;
        try {
            const double got = eval(laplacian(e, 3), p);
            double want = 0.0;
            for (int k = 0; k < 3; ++k) want += testsupport::fd_second_quad(e, p, k, 0.1);
            ++checked;
            if (rel_err(got, want) >= 1e-4) {
                ++bad;
                MESSAGE("seed " << s << ": " << postfix(e) << " got " << got << " want " << want);
            }
        } catch (const DomainError&) {
        }
    }
    CHECK(bad == 0);
    CHECK(checked >= 180);
}

TEST_CASE("simplify: folding and identities") {
    CHECK(simplify(Expression::binary(Op::Add, c(0), x(1))) == x(1));
    CHECK(simplify(Expression::binary(Op::Mul, c(2), c(3))) == c(6));
    CHECK(simplify(Expression::binary(Op::Mul, x(2), c(1))) == x(2));
    CHECK(simplify(Expression::binary(Op::Mul, x(2), c(0))) == c(0));
    CHECK(simplify(Expression::unary(Op::Id, x(3))) == x(3));
}

TEST_CASE("simplify preserves values on random trees") {
    std::mt19937_64 rng(3);
    for (std::uint64_t s = 0; s < 100; ++s) {
        const Expression e = tree(3, 3, 3000 + s);
        const Expression t = simplify(e);
        const auto p = testsupport::random_point(rng, 3);
        const double want = ref_eval(e, p);
        if (!std::isfinite(want)) continue;
        CHECK(rel_err(eval(t, p), want) <= 1e-12);
    }
}

TEST_CASE("postfix rendering") {
    CHECK(postfix(Expression::binary(Op::Add, x(1), x(2))) == "x1 x2 +");
    // The affine wrapper is applied after the operator.
    CHECK(postfix(Expression::unary(Op::Sin, 3, 0, x(2))) == "x2 SIN 3 *");
    CHECK(postfix(Expression::unary(Op::Sin, 3, 0.5, x(2))) == "x2 SIN 3 * 0.5 +");
    CHECK(postfix(Expression::unary(Op::Id, 3, 0, x(2))) == "x2 3 *");
    CHECK(postfix(table_h1()) == "x1 5 * ^2 x2 3 * SIN x2 * +");
    CHECK(extract_operator_set(to_postfix(table_h2())) == make_operator_set({"x1", "^3", "*", "COS", "EXP"}));
}

TEST_CASE("postfix parsing") {
    const auto dict = OperatorDictionary::full(3);
    CHECK(parse_postfix(split_tokens("x1 x2 +"), dict) == Expression::binary(Op::Add, x(1), x(2)));
    CHECK_THROWS_AS(parse_postfix(split_tokens("x1 +"), dict), MalformedSequence);
    CHECK_THROWS_AS(parse_postfix(split_tokens("x1 x2"), dict), MalformedSequence);
    CHECK_THROWS_AS(parse_postfix(split_tokens(""), dict), MalformedSequence);
    CHECK_THROWS_AS(parse_postfix(split_tokens("x1 SNI"), dict), UnknownToken);
    CHECK_THROWS_AS(parse_postfix(split_tokens("x4"), dict), UnknownToken);
}

TEST_CASE("postfix round trip of random depth-3 trees") {
    const auto dict = OperatorDictionary::full(3);
    std::mt19937_64 rng(21);
    int bad = 0;
    for (std::uint64_t s = 0; s < 1000; ++s) {
        const Expression e = tree(3, 3, 4000 + s);
        const Expression back = parse_postfix(to_postfix(e), dict);
        for (int i = 0; i < 20; ++i) {
            const auto p = testsupport::random_point(rng, 3);
            const double want = ref_eval(e, p);
            if (!std::isfinite(want)) continue;
            if (rel_err(ref_eval(back, p), want) > 1e-12) ++bad;
        }
    }
    CHECK(bad == 0);
}

TEST_CASE("number formatting round-trips") {
    for (double v : {0.1, -2.5, 1e-300, 6.02214076e23, 1.0 / 3.0}) CHECK(*parse_number(format_number(v)) == v);
    CHECK(format_number(16.0) == "16");
    CHECK_FALSE(parse_number("SIN"));
    CHECK_FALSE(parse_number("nan"));
}

TEST_CASE("operator sets of the reference expressions") {
    CHECK(extract_operator_set(table_h1()) == make_operator_set({"x1", "x2", "^2", "+", "*", "SIN"}));
    CHECK(extract_operator_set(table_h2()) == make_operator_set({"x1", "^3", "*", "COS", "EXP"}));
    CHECK(extract_operator_set(c(7)).empty());
}

TEST_CASE("binary encoding and mismatch") {
    const auto dict = OperatorDictionary::example9();
    CHECK(dict.tokens() == std::vector<std::string>{"x1", "x2", "^2", "^3", "+", "*", "SIN", "COS", "EXP"});
    const auto v1 = encode_operator_set(extract_operator_set(table_h1()), dict);
    const auto v2 = encode_operator_set(extract_operator_set(table_h2()), dict);
    CHECK(v1.bits == std::vector<std::uint8_t>{1, 1, 1, 0, 1, 1, 1, 0, 0});
    CHECK(v2.bits == std::vector<std::uint8_t>{1, 0, 0, 1, 0, 1, 0, 1, 1});
    CHECK(mismatch(v1, v2) == 7);
    CHECK(mismatch(v1, v1) == 0);
    const auto zero = encode_operator_set({}, dict);
    CHECK(zero.bits == std::vector<std::uint8_t>(9, 0));
    CHECK(mismatch(zero, encode_operator_set({"COS"}, dict)) == 1);
    CHECK(decode_operator_set(v2, dict) == extract_operator_set(table_h2()));
}

TEST_CASE("random_tree structure and determinism") {
    const Expression t1 = tree(1, 3, 77);
    CHECK(t1.kind() == NodeKind::Unary);
    CHECK(t1.child().kind() == NodeKind::Variable);
    CHECK(postfix(tree(3, 3, 42)) == postfix(tree(3, 3, 42)));
    CHECK(tree(3, 3, 42).unary_depth() == 3);
    CHECK_THROWS_AS(tree(0, 3, 1), std::invalid_argument);
}

TEST_CASE("random_tree operator frequencies are uniform") {
    std::map<Op, int> counts;
    const int n = 10000;
    for (int s = 0; s < n; ++s) walk(tree(3, 3, static_cast<std::uint64_t>(s)), counts);
    auto check_uniform = [&](std::span<const Op> ops, double total) {
        const double p = 1.0 / static_cast<double>(ops.size());
        const double sd = std::sqrt(total * p * (1 - p));
        for (Op op : ops) {
            INFO("op " << op_token(op));
            CHECK(std::abs(counts[op] - total * p) <= 3 * sd);
        }
    };
    check_uniform(default_unary_ops(), 7.0 * n);
    check_uniform(default_binary_ops(), 3.0 * n);
}
