#include "fexkit/fex.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <map>
#include <sstream>

#include <Eigen/Dense>

#include "fexkit/parallel.hpp"

namespace fexkit {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct Residual {
    std::vector<double> r;
    double a = 1.0;
    double b = 0.0;
    double loss = kInf;
};

Residual residual(const CompiledExpression& c, const LossEvaluator& ev, std::span<const double> p) {
    Residual out;
    try {
        const auto ov = ev.operator_values(c, p);
        std::tie(out.a, out.b) = ev.best_affine(ov);
        out.r = ev.weighted_residuals(ov, out.a, out.b);
        double s = 0.0;
        for (double v : out.r) s += v * v;
        out.loss = std::isfinite(s) ? s : kInf;
    } catch (const DomainError&) {
        out.loss = kInf;
    }
    return out;
}

}  // namespace

ScalarFit optimize_scalars(const CompiledExpression& skeleton, const LossEvaluator& evaluator, const InnerConfig& cfg,
                           std::optional<std::vector<double>> start) {
    std::vector<double> p = start ? std::move(*start) : skeleton.params();
    if (p.size() != skeleton.param_count()) throw std::invalid_argument("optimize_scalars: parameter count mismatch");
    std::vector<std::size_t> free;
    for (std::size_t k = 0; k < p.size(); ++k) {
        const int root = skeleton.root_param();
        if (root >= 0 && (k == static_cast<std::size_t>(root) || k == static_cast<std::size_t>(root) + 1)) continue;
        free.push_back(k);
    }

    Residual cur = residual(skeleton, evaluator, p);
    ScalarFit fit;
    int step = 0;
    double mu = 1e-3;
    const std::size_t m = cur.r.size();
    const std::size_t n = free.size();
    while (step < cfg.steps && std::isfinite(cur.loss) && cur.loss > cfg.tolerance && n > 0) {
        Eigen::MatrixXd J(m, n);
        for (std::size_t j = 0; j < n; ++j) {
            const std::size_t k = free[j];
            const double h = cfg.fd_step * (1.0 + std::abs(p[k]));
            std::vector<double> pp = p, pm = p;
            pp[k] += h;
            pm[k] -= h;
            const Residual rp = residual(skeleton, evaluator, pp);
            const Residual rm = residual(skeleton, evaluator, pm);
            for (std::size_t i = 0; i < m; ++i) {
                if (std::isfinite(rp.loss) && std::isfinite(rm.loss)) J(i, j) = (rp.r[i] - rm.r[i]) / (2.0 * h);
                else if (std::isfinite(rp.loss)) J(i, j) = (rp.r[i] - cur.r[i]) / h;
                else if (std::isfinite(rm.loss)) J(i, j) = (cur.r[i] - rm.r[i]) / h;
                else J(i, j) = 0.0;
            }
        }
        const Eigen::Map<const Eigen::VectorXd> r(cur.r.data(), static_cast<Eigen::Index>(m));
        const Eigen::MatrixXd A = J.transpose() * J;
        const Eigen::VectorXd g = J.transpose() * r;
        bool accepted = false;
        for (int attempt = 0; attempt < 12 && !accepted; ++attempt) {
            Eigen::MatrixXd M = A;
            for (Eigen::Index d = 0; d < M.rows(); ++d) M(d, d) += mu * (A(d, d) + 1e-12);
            const Eigen::VectorXd delta = M.ldlt().solve(-g);
            if (!delta.allFinite()) {
                mu *= 4.0;
                continue;
            }
            std::vector<double> trial = p;
            for (std::size_t j = 0; j < n; ++j) trial[free[j]] += delta[static_cast<Eigen::Index>(j)];
            Residual next = residual(skeleton, evaluator, trial);
            if (next.loss < cur.loss) {
                p = std::move(trial);
                cur = std::move(next);
                mu = std::max(mu / 3.0, 1e-12);
                accepted = true;
            } else {
                mu *= 4.0;
            }
        }
        ++step;
        if (!accepted) break;
    }
    fit.params = std::move(p);
    fit.a = cur.a;
    fit.b = cur.b;
    fit.loss = cur.loss;
    fit.reward = reward(cur.loss);
    fit.steps = step;
    return fit;
}

Expression realize_fit(const CompiledExpression& skeleton, const ScalarFit& fit) {
    return simplify(Expression::unary(Op::Id, fit.a, fit.b, skeleton.realize(fit.params)));
}

// ---------------------------------------------------------------------------

SolveTrace solve(const PdeInstance& instance, const std::optional<OperatorSet>& ops, const SolveConfig& cfg) {
    using clock = std::chrono::steady_clock;
    const auto t0 = clock::now();
    if (cfg.t_max < 1 || cfg.batch < 1 || !(cfg.eta > 0.0)) throw ConfigError("invalid solver configuration");

    SolveTrace trace;
    trace.space = build_search_space(ops, cfg.depth, instance.domain.dim);
    PolicyParams policy = PolicyParams::uniform(trace.space, cfg.phi_max);
    std::mt19937_64 rng(cfg.seed);

    CollocationConfig screen_cfg = cfg.screen;
    std::optional<LossEvaluator> screen(std::in_place, instance, screen_cfg);
    std::map<std::vector<int>, ScalarFit> memo;

    auto fit_batch = [&](const std::vector<std::vector<int>>& batch) {
        std::vector<std::vector<int>> todo;
        for (const auto& c : batch)
            if (!memo.contains(c) && std::find(todo.begin(), todo.end(), c) == todo.end()) todo.push_back(c);
        std::vector<ScalarFit> fits(todo.size());
        parallel_for(todo.size(), cfg.threads, [&](std::size_t i) {
            const CompiledExpression c(build_expression(trace.space, todo[i]));
            fits[i] = optimize_scalars(c, *screen, cfg.inner);
        });
        for (std::size_t i = 0; i < todo.size(); ++i) memo.emplace(todo[i], std::move(fits[i]));
        std::vector<double> r;
        for (const auto& c : batch) r.push_back(memo.at(c).reward);
        return r;
    };

    double best = 0.0;
    for (int t = 1; t <= cfg.t_max; ++t) {
        const auto it0 = clock::now();
        if (screen_cfg.resample_each_eval && t > 1) {
            screen_cfg.sampler_seed = cfg.screen.sampler_seed + static_cast<std::uint64_t>(t);
            screen.emplace(instance, screen_cfg);
            memo.clear();
        }
        const StepStats st = sppgm_step(policy, cfg.batch, cfg.eta, rng, fit_batch);
        best = std::max(best, st.best_reward);
        TraceRow row;
        row.iter = t;
        row.best_reward = best;
        row.mean_reward = st.mean_reward;
        row.grad_norm = st.grad_norm;
        row.stat_proxy = st.stat_proxy;
        row.wall_ms = std::chrono::duration<double, std::milli>(clock::now() - it0).count();
        trace.rows.push_back(row);
        trace.iterations = t;
        if (best >= cfg.reward_threshold) {
            trace.converged = true;
            break;
        }
    }
    trace.distinct_candidates = memo.size();

    // Refit the best screened candidates on the full collocation set.
    std::vector<std::pair<const std::vector<int>*, const ScalarFit*>> pool;
    for (const auto& [c, f] : memo) pool.emplace_back(&c, &f);
    std::stable_sort(pool.begin(), pool.end(), [](const auto& x, const auto& y) { return x.second->loss < y.second->loss; });
    if (pool.size() > static_cast<std::size_t>(cfg.pool_size)) pool.resize(static_cast<std::size_t>(cfg.pool_size));

    const LossEvaluator full(instance, cfg.full);
    std::vector<ScalarFit> refits(pool.size());
    std::vector<Expression> realized(pool.size(), Expression::constant(0.0));
    parallel_for(pool.size(), cfg.threads, [&](std::size_t i) {
        const CompiledExpression c(build_expression(trace.space, *pool[i].first));
        refits[i] = optimize_scalars(c, full, cfg.final_inner, pool[i].second->params);
        realized[i] = realize_fit(c, refits[i]);
    });
    std::size_t pick = 0;
    for (std::size_t i = 1; i < pool.size(); ++i) {
        const double ri = refits[i].reward, rp = refits[pick].reward;
        if (ri > rp || (ri == rp && realized[i].size() < realized[pick].size())) pick = i;
    }
    if (!pool.empty()) {
        trace.best = realized[pick];
        trace.best_choices = *pool[pick].first;
        trace.best_loss = refits[pick].loss;
        trace.best_reward = refits[pick].reward;
    }
    if (instance.true_u && !pool.empty()) {
        try {
            trace.relative_l2 =
                relative_l2_error(trace.best, *instance.true_u, instance.domain, cfg.error_samples, cfg.seed ^ 0x5bd1e995ULL);
        } catch (const DegenerateReference&) {
        }
    }
    trace.total_seconds = std::chrono::duration<double>(clock::now() - t0).count();
    return trace;
}

std::string trace_csv(const SolveTrace& trace, bool include_timing) {
    std::ostringstream os;
    os.precision(17);
    os << "iter,best_reward,mean_reward,grad_norm,stat_proxy" << (include_timing ? ",wall_ms" : "") << '\n';
    for (const auto& r : trace.rows) {
        os << r.iter << ',' << r.best_reward << ',' << r.mean_reward << ',' << r.grad_norm << ',' << r.stat_proxy;
        if (include_timing) os << ',' << r.wall_ms;
        os << '\n';
    }
    return os.str();
}

}  // namespace fexkit
