#include <random>

#include "fexkit/expr.hpp"

namespace fexkit {

namespace {

struct TreeSampler {
    std::span<const Op> unary;
    std::span<const Op> binary;
    int dim;
    std::mt19937_64 rng;

    int nonzero_coefficient() {
        std::uniform_int_distribution<int> pick(0, 7);
        const int k = pick(rng);
        return k < 4 ? k - 4 : k - 3;  // -4..-1, 1..4
    }

    Expression leaf() {
        std::uniform_int_distribution<int> var(1, dim);
        return Expression::variable(var(rng));
    }

    Expression layer(int depth) {
        std::uniform_int_distribution<std::size_t> pick_u(0, unary.size() - 1);
        const Op op = unary[pick_u(rng)];
        const double alpha = nonzero_coefficient();
        std::bernoulli_distribution zero_beta(0.5);
        const double beta = zero_beta(rng) ? 0.0 : nonzero_coefficient();
        if (depth == 1) return Expression::unary(op, alpha, beta, leaf());
        std::uniform_int_distribution<std::size_t> pick_b(0, binary.size() - 1);
        const Op bop = binary[pick_b(rng)];
        Expression l = layer(depth - 1);
        Expression r = layer(depth - 1);
        return Expression::unary(op, alpha, beta, Expression::binary(bop, std::move(l), std::move(r)));
    }
};

}  // namespace

Expression random_tree(int depth, std::span<const Op> unary_set, std::span<const Op> binary_set, int dim,
                       std::uint64_t seed) {
    if (depth < 1) throw std::invalid_argument("random_tree: depth must be >= 1");
    if (dim < 1) throw std::invalid_argument("random_tree: dim must be >= 1");
    if (unary_set.empty() || (depth > 1 && binary_set.empty()))
        throw std::invalid_argument("random_tree: operator sets must be non-empty");
    for (Op op : unary_set)
        if (!is_unary(op)) throw std::invalid_argument("random_tree: binary operator in unary set");
    for (Op op : binary_set)
        if (!is_binary(op)) throw std::invalid_argument("random_tree: unary operator in binary set");
    TreeSampler s{unary_set, binary_set, dim, std::mt19937_64(seed)};
    return s.layer(depth);
}

}  // namespace fexkit
