#pragma once

#include <span>
#include <vector>

#include "fexkit/expr.hpp"

namespace fexkit {

/// n points in R^d, row-major.
struct PointSet {
    int dim = 0;
    std::vector<double> coords;

    std::size_t size() const { return dim > 0 ? coords.size() / static_cast<std::size_t>(dim) : 0; }
    std::span<const double> point(std::size_t i) const {
        return {coords.data() + i * static_cast<std::size_t>(dim), static_cast<std::size_t>(dim)};
    }
    std::span<double> point(std::size_t i) {
        return {coords.data() + i * static_cast<std::size_t>(dim), static_cast<std::size_t>(dim)};
    }
};

/// Root output of a batched evaluation. Derivative arrays are coordinate-major:
/// `grad[k * n + i]` is d/dx_{k+1} at point i.
struct JetValues {
    std::size_t n = 0;
    int dim = 0;
    int order = 0;
    std::vector<double> value;
    std::vector<double> grad;       // order >= 1
    std::vector<double> hess_diag;  // order >= 2

    double d(int k, std::size_t i) const { return grad[static_cast<std::size_t>(k) * n + i]; }
    double dd(int k, std::size_t i) const { return hess_diag[static_cast<std::size_t>(k) * n + i]; }
};

/// Flattened expression whose unary affine scalars live in a separate
/// parameter vector (alpha at 2j, beta at 2j+1 for the j-th unary node in
/// post-order). Evaluates values and exact first/second partial derivatives
/// (diagonal of the Hessian) over a batch of points in one sweep.
class CompiledExpression {
  public:
    explicit CompiledExpression(const Expression& expr);

    std::size_t param_count() const { return params_.size(); }
    const std::vector<double>& params() const { return params_; }
    /// Index of the root's alpha when the root is a unary node, else -1.
    int root_param() const { return root_param_; }
    int max_variable() const { return max_var_; }

    /// Rebuild the symbolic tree with a new parameter vector.
    Expression realize(std::span<const double> params) const;

    /// Throws DomainError when any point hits a singularity or a non-finite value.
    JetValues evaluate(const PointSet& points, std::span<const double> params, int order) const;
    JetValues evaluate(const PointSet& points, int order) const { return evaluate(points, params_, order); }

  private:
    struct Instr {
        NodeKind kind;
        Op op = Op::Id;
        int a = -1;
        int b = -1;
        int param = -1;
        double value = 0.0;
        int var = 0;
    };

    int compile(const Expression& e);
    Expression realize_rec(int idx, std::span<const double> params) const;

    std::vector<Instr> code_;
    std::vector<Expression> ignored_children_;  // operands of 0/1 nodes, kept for realize()
    std::vector<int> ignored_index_;            // code index -> ignored_children_ slot
    std::vector<double> params_;
    int root_param_ = -1;
    int max_var_ = 0;
};

}  // namespace fexkit
