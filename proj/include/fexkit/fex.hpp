#pragma once

#include <optional>
#include <string>
#include <vector>

#include "fexkit/pde.hpp"
#include "fexkit/policy.hpp"

namespace fexkit {

struct InnerConfig {
    int steps = 30;
    double fd_step = 1e-6;   // relative central-difference step
    double tolerance = 1e-14;  // stop once the loss falls below this
};

/// Scalars of one skeleton after inner optimization. The realized solution is
/// a * T(params) + b.
struct ScalarFit {
    std::vector<double> params;
    double a = 1.0;
    double b = 0.0;
    double loss = 0.0;
    double reward = 0.0;
    int steps = 0;
};

/// Levenberg-Marquardt on the weighted residual vector with finite-difference
/// Jacobians. The output affine (a, b) is eliminated in closed form at every
/// evaluation and the root unary's own scalars stay fixed at (1, 0). Accepted
/// steps never increase the loss; a singular candidate gets loss +inf.
ScalarFit optimize_scalars(const CompiledExpression& skeleton, const LossEvaluator& evaluator, const InnerConfig& cfg,
                           std::optional<std::vector<double>> start = std::nullopt);

/// a * T(params) + b as a simplified symbolic tree.
Expression realize_fit(const CompiledExpression& skeleton, const ScalarFit& fit);

struct SolveConfig {
    int depth = 2;
    int batch = 32;
    double eta = 0.05;
    double phi_max = 10.0;
    int t_max = 100;
    double reward_threshold = 0.999;
    std::uint64_t seed = 0;
    int threads = 1;
    int pool_size = 8;
    InnerConfig inner{};
    InnerConfig final_inner{200, 1e-6, 1e-20};
    CollocationConfig screen{256, 128, 0, false};
    CollocationConfig full{4096, 1024, 0, false};
    int error_samples = 8192;
};

struct TraceRow {
    int iter = 0;
    double best_reward = 0.0;
    double mean_reward = 0.0;
    double grad_norm = 0.0;
    double stat_proxy = 0.0;
    double wall_ms = 0.0;
};

struct SolveTrace {
    SearchSpace space;
    std::vector<TraceRow> rows;
    int iterations = 0;
    bool converged = false;
    double total_seconds = 0.0;
    std::size_t distinct_candidates = 0;
    Expression best = Expression::constant(0.0);
    std::vector<int> best_choices;
    double best_loss = 0.0;
    double best_reward = 0.0;
    std::optional<double> relative_l2;
};

/// Operator-informed FEX when `ops` is given, uninformed otherwise.
///
/// Candidates are scored on a small fixed screening collocation set and each
/// distinct slot assignment is fitted once. When the best screening reward
/// reaches the threshold (or after t_max iterations) the best pooled
/// candidates are refitted on the full collocation set and the best one is
/// returned.
SolveTrace solve(const PdeInstance& instance, const std::optional<OperatorSet>& ops, const SolveConfig& cfg);

/// iter,best_reward,mean_reward,grad_norm,stat_proxy,wall_ms
std::string trace_csv(const SolveTrace& trace, bool include_timing = true);

}  // namespace fexkit
