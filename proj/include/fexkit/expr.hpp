#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "fexkit/errors.hpp"

namespace fexkit {

// Operator vocabulary. Unary operators come first, binaries after Add.
enum class Op : std::uint8_t {
    Zero,
    One,
    Id,
    Square,
    Cube,
    Quart,
    Exp,
    Sin,
    Cos,
    Sqrt,
    Abs,
    Lg,
    Ln,
    Sign,  // internal: derivative of Abs, never generated
    Add,
    Sub,
    Mul,
    Div,
};

enum class OpKind : std::uint8_t { Unary, Binary };

constexpr OpKind op_kind(Op op) { return op >= Op::Add ? OpKind::Binary : OpKind::Unary; }
constexpr bool is_unary(Op op) { return op_kind(op) == OpKind::Unary; }
constexpr bool is_binary(Op op) { return op_kind(op) == OpKind::Binary; }

std::string_view op_token(Op op);
std::optional<Op> op_from_token(std::string_view token);

/// All operators in canonical order (the order used for sorting operator sets).
std::span<const Op> all_ops();

/// Unary set U = {0, 1, Id, ^2, ^3, ^4, EXP, SIN, COS} and binary set B = {+, -, *}
/// used by the uninformed solver and by default data generation.
std::span<const Op> default_unary_ops();
std::span<const Op> default_binary_ops();

/// Scalar operator kernels shared by every evaluator. Throws DomainError
/// outside the operator's domain.
double apply_unary(Op op, double x);
double apply_binary(Op op, double a, double b);

// ---------------------------------------------------------------------------
// Expression tree
// ---------------------------------------------------------------------------

enum class NodeKind : std::uint8_t { Variable, Constant, Unary, Binary };

struct Node;

/// Immutable binary computational tree. Cheap to copy (shared structure).
///
/// Unary nodes realize `alpha * op(child) + beta`.
class Expression {
  public:
    static Expression variable(int index);  // 1-based: x1 ... xd
    static Expression constant(double value);
    static Expression unary(Op op, double alpha, double beta, Expression child);
    static Expression unary(Op op, Expression child) { return unary(op, 1.0, 0.0, std::move(child)); }
    static Expression binary(Op op, Expression left, Expression right);

    NodeKind kind() const;
    Op op() const;          // Unary / Binary
    double alpha() const;   // Unary
    double beta() const;    // Unary
    double value() const;   // Constant
    int var_index() const;  // Variable
    const Expression& child() const;
    const Expression& left() const;
    const Expression& right() const;

    bool is_constant() const { return kind() == NodeKind::Constant; }
    bool is_constant(double v) const { return is_constant() && value() == v; }

    /// Number of nodes in the tree.
    std::size_t size() const;
    /// Number of unary layers on the deepest root-to-leaf path.
    int unary_depth() const;
    /// Largest variable index referenced (0 when none).
    int max_variable() const;

    /// Structural equality (exact scalar comparison).
    friend bool operator==(const Expression& a, const Expression& b);

  private:
    explicit Expression(std::shared_ptr<const Node> node) : node_(std::move(node)) {}
    std::shared_ptr<const Node> node_;
};

struct Node {
    NodeKind kind;
    Op op = Op::Id;
    double alpha = 1.0;
    double beta = 0.0;
    double value = 0.0;
    int var = 0;
    std::vector<Expression> children;
};

Expression operator+(const Expression& a, const Expression& b);
Expression operator-(const Expression& a, const Expression& b);
Expression operator*(const Expression& a, const Expression& b);
Expression operator/(const Expression& a, const Expression& b);

/// Evaluate at a point. `point[k-1]` is the value of xk. Throws DomainError at
/// analytic singularities and when the result is not finite.
double eval(const Expression& expr, std::span<const double> point);

/// Symbolic partial derivative with respect to x_var (1-based), simplified.
/// d|u|/du is rendered with SIGN (sign(0) = 0); SIGN itself has no
/// derivative rule and raises UnsupportedOperator.
Expression differentiate(const Expression& expr, int var);

/// Sum of second partials over x1..x_dim, simplified.
Expression laplacian(const Expression& expr, int dim);

/// Constant folding, neutral-element removal and affine merging.
/// Preserves point values wherever the input is non-singular.
Expression simplify(const Expression& expr);

// ---------------------------------------------------------------------------
// Postfix serialization
// ---------------------------------------------------------------------------

using TokenSequence = std::vector<std::string>;

TokenSequence split_tokens(std::string_view text);
std::string join_tokens(const TokenSequence& tokens);

/// Shortest decimal that round-trips the double.
std::string format_number(double value);
std::optional<double> parse_number(std::string_view token);

/// Reverse Polish rendering. A unary node renders as
/// `child OP [alpha *] [beta +]`; Id, 0 and 1 render through their affine
/// part only.
TokenSequence to_postfix(const Expression& expr);

/// Human-readable rendering, e.g. "16*sin(x3)".
std::string to_infix(const Expression& expr);

class OperatorDictionary;

/// Parse a postfix sequence. Numeric literals are always accepted; every other
/// token must be in `dictionary` and must be an operator or variable token.
Expression parse_postfix(const TokenSequence& tokens, const OperatorDictionary& dictionary);

// ---------------------------------------------------------------------------
// Operator sets
// ---------------------------------------------------------------------------

/// Ordered token basis for operator-set encoding.
class OperatorDictionary {
  public:
    OperatorDictionary() = default;
    explicit OperatorDictionary(std::vector<std::string> tokens);

    /// The 9-token dictionary of the binary-vector example:
    /// x1 x2 ^2 ^3 + * SIN COS EXP.
    static OperatorDictionary example9();
    /// x1..xd followed by the default unary and binary sets.
    static OperatorDictionary default_fex(int dim);
    /// x1..xd followed by every engine operator except SIGN.
    static OperatorDictionary full(int dim);

    static OperatorDictionary load(const std::string& path);
    void save(const std::string& path) const;

    std::size_t size() const { return tokens_.size(); }
    const std::vector<std::string>& tokens() const { return tokens_; }
    const std::string& token(std::size_t i) const { return tokens_.at(i); }
    std::optional<std::size_t> index_of(std::string_view token) const;
    bool contains(std::string_view token) const { return index_of(token).has_value(); }

  private:
    std::vector<std::string> tokens_;
    std::unordered_map<std::string, std::size_t> index_;
};

/// A set of vocabulary tokens (variables and operators), kept sorted in
/// canonical order: variables by index, then operators in `all_ops()` order.
using OperatorSet = std::vector<std::string>;

bool is_variable_token(std::string_view token);
int variable_index(std::string_view token);  // 0 when not a variable token
std::string variable_token(int index);

/// Canonical rank used for ordering operator sets.
int canonical_rank(std::string_view token);
OperatorSet make_operator_set(std::vector<std::string> tokens);
OperatorSet set_union(const OperatorSet& a, const OperatorSet& b);
OperatorSet set_intersection(const OperatorSet& a, const OperatorSet& dictionary_tokens);

OperatorSet extract_operator_set(const Expression& expr);
/// Unique vocabulary tokens of a sequence; numeric literals and anything that
/// is neither a variable nor an operator token (e.g. FACE:k, <EOS>) are dropped.
OperatorSet extract_operator_set(const TokenSequence& tokens);

struct OperatorSetVector {
    std::vector<std::uint8_t> bits;
    friend bool operator==(const OperatorSetVector&, const OperatorSetVector&) = default;
};

OperatorSetVector encode_operator_set(const OperatorSet& set, const OperatorDictionary& dictionary);
OperatorSet decode_operator_set(const OperatorSetVector& v, const OperatorDictionary& dictionary);

/// Squared Euclidean distance between two binary vectors.
int mismatch(const OperatorSetVector& y, const OperatorSetVector& z);

// ---------------------------------------------------------------------------
// Random trees
// ---------------------------------------------------------------------------

/// Full tree of `depth` unary layers: T1 = U(leaf), Tk = U(B(Tk-1, Tk-1)).
/// Operators are uniform over the given sets, leaves uniform over x1..x_dim,
/// alpha uniform over {-4..-1, 1..4}, beta = 0 w.p. 1/2 else uniform over the
/// same set.
Expression random_tree(int depth, std::span<const Op> unary_set, std::span<const Op> binary_set, int dim,
                       std::uint64_t seed);

}  // namespace fexkit
