#pragma once

#include <optional>
#include <string>
#include <utility>

#include "fexkit/expr.hpp"
#include "fexkit/jet.hpp"

namespace fexkit {

enum class PdeType { Poisson, Conservation };
enum class BcType { Dirichlet, Neumann, Cauchy };
enum class DomainKind { UnitBox, UnitBall };

std::string to_string(PdeType t);
std::string to_string(BcType t);
std::string to_string(DomainKind k);
PdeType parse_pde_type(std::string_view s);
BcType parse_bc_type(std::string_view s);
DomainKind parse_domain_kind(std::string_view s);

/// unit_box = [-1,1]^d, unit_ball = {|x| <= 1}.
struct Domain {
    DomainKind kind = DomainKind::UnitBox;
    int dim = 3;

    double volume() const;
    double boundary_area() const;
    /// max_i |x_i| for the box, |x| for the ball; equals 1 exactly on the boundary.
    double level(std::span<const double> x) const;
    bool contains(std::span<const double> x) const { return level(x) <= 1.0; }
    bool on_boundary(std::span<const double> x, double tol = 1e-9) const { return std::abs(level(x) - 1.0) <= tol; }
    /// Number of boundary pieces carrying separate Neumann data (2d faces for the box, 1 for the ball).
    int face_count() const { return kind == DomainKind::UnitBox ? 2 * dim : 1; }
    /// Box face id 2i (x_{i+1} = +1) or 2i+1 (x_{i+1} = -1), chosen by the
    /// largest |x_i| with ties to the lowest index; always 0 for the ball.
    int face_of(std::span<const double> x) const;
    void outward_normal(std::span<const double> x, std::span<double> n) const;

    friend bool operator==(const Domain&, const Domain&) = default;
};

/// Boundary datum g: one expression, or one expression per box face.
struct BoundaryData {
    std::vector<Expression> pieces;

    bool per_face() const { return pieces.size() > 1; }
    double eval(const Domain& domain, std::span<const double> x) const;
    OperatorSet operator_set() const;
};

/// `FACE:k` separated rendering for per-face data, plain postfix otherwise.
std::string boundary_data_to_postfix(const BoundaryData& g);
BoundaryData boundary_data_from_postfix(std::string_view text, const OperatorDictionary& dictionary);

struct PdeInstance {
    PdeType pde_type = PdeType::Poisson;
    BcType bc_type = BcType::Dirichlet;
    Domain domain;
    Expression f = Expression::constant(0.0);
    BoundaryData g;
    std::optional<Expression> true_u;
    double lambda = 1.0;
};

struct CollocationConfig {
    int n_interior = 4096;
    int n_boundary = 1024;
    std::uint64_t sampler_seed = 0;
    bool resample_each_eval = false;
};

/// Du: -laplacian(u) for Poisson; du/dx1 + sum_{k>=2} du/dx_k for the
/// conservation law (x1 plays the role of time).
Expression residual_operator(PdeType pde_type, const Expression& u, const Domain& domain);

/// Boundary data that u itself satisfies for the given condition type.
BoundaryData boundary_data_for(BcType bc_type, const Expression& u, const Domain& domain);

/// Builds f and g symbolically from a known solution.
PdeInstance manufactured_instance(PdeType pde_type, BcType bc_type, const Domain& domain, const Expression& u,
                                  double lambda = 1.0);

/// Cauchy data lives on the initial face x1 = -1 and the lateral faces of the
/// box; on the ball, on the half x1 <= 0.
bool in_cauchy_region(const Domain& domain, std::span<const double> x);

double boundary_residual(BcType bc_type, const Expression& u, const BoundaryData& g, const Domain& domain,
                         std::span<const double> x);

PointSet sample_interior(const Domain& domain, int n, std::uint64_t seed);
PointSet sample_boundary(const Domain& domain, int n, std::uint64_t seed);

/// 1 / (1 + L); 0 for an infinite loss.
double reward(double loss);

/// Monte-Carlo least-squares loss over fixed collocation points.
///
/// For a candidate u = a * T + b the interior residual is a * D(T) - f and the
/// boundary residual is a * B(T) + b * B(1) - g, so the loss is quadratic in
/// (a, b); `best_affine` returns the exact minimizer.
class LossEvaluator {
  public:
    LossEvaluator(const PdeInstance& instance, const CollocationConfig& cfg);

    struct OperatorValues {
        std::vector<double> interior;  // D(T) at interior points
        std::vector<double> boundary;  // B(T) at boundary points (0 outside the Cauchy region)
    };

    OperatorValues operator_values(const CompiledExpression& expr, std::span<const double> params) const;
    double loss(const OperatorValues& ov, double a = 1.0, double b = 0.0) const;
    std::pair<double, double> best_affine(const OperatorValues& ov) const;
    /// Residuals scaled by the square roots of the quadrature weights; their
    /// squared norm is `loss(ov, a, b)`.
    std::vector<double> weighted_residuals(const OperatorValues& ov, double a, double b) const;

    /// Full loss of an expression; +inf when any sample is singular.
    double loss(const Expression& u) const;
    double interior_term(const Expression& u) const;
    double boundary_term(const Expression& u) const;

    const PdeInstance& instance() const { return instance_; }
    const PointSet& interior_points() const { return interior_; }
    const PointSet& boundary_points() const { return boundary_; }

  private:
    PdeInstance instance_;
    PointSet interior_;
    PointSet boundary_;
    std::vector<double> f_values_;
    std::vector<double> g_values_;
    std::vector<double> boundary_mask_;  // 1 where the boundary condition applies
    std::vector<double> normals_;        // row-major, Neumann only
    double interior_weight_ = 0.0;
    double boundary_weight_ = 0.0;
    double constant_response_ = 1.0;  // B(1): 1 for value data, 0 for normal-derivative data
};

double assemble_loss(const PdeInstance& instance, const Expression& u, const CollocationConfig& cfg);

/// Monte-Carlo estimate of ||u - u*|| / ||u*|| over the domain.
double relative_l2_error(const Expression& u, const Expression& true_u, const Domain& domain, int n,
                         std::uint64_t seed);

// JSON: {pde_type, bc_type, domain:{kind,d}, lambda, f_postfix, g_postfix, true_u_postfix?}
std::string instance_to_json(const PdeInstance& instance);
PdeInstance instance_from_json(std::string_view text);
PdeInstance load_instance(const std::string& path);
void save_instance(const PdeInstance& instance, const std::string& path);

}  // namespace fexkit
