#include "fexkit/wos.hpp"

#include <cmath>
#include <numbers>
#include <random>

#include "fexkit/parallel.hpp"

namespace fexkit {

BoundaryDistance distance_to_boundary(const Domain& domain, std::span<const double> x) {
    if (static_cast<int>(x.size()) != domain.dim) throw std::invalid_argument("distance_to_boundary: point dimension");
    if (domain.level(x) > 1.0 + 1e-12) throw OutsideDomain("point lies outside the domain");
    BoundaryDistance out;
    out.nearest.assign(x.begin(), x.end());
    if (domain.kind == DomainKind::UnitBox) {
        std::size_t best = 0;
        for (std::size_t i = 1; i < x.size(); ++i)
            if (std::abs(x[i]) > std::abs(x[best])) best = i;
        out.dist = std::max(0.0, 1.0 - std::abs(x[best]));
        out.nearest[best] = x[best] < 0.0 ? -1.0 : 1.0;
        return out;
    }
    const double r = domain.level(x);
    out.dist = std::max(0.0, 1.0 - r);
    if (r == 0.0) {
        std::fill(out.nearest.begin(), out.nearest.end(), 0.0);
        out.nearest[0] = 1.0;
    } else {
        for (auto& v : out.nearest) v /= r;
    }
    return out;
}

double unit_ball_green(double r, int dim) {
    if (dim == 1) return 0.5 * (1.0 - r);
    if (dim == 2) return -std::log(r) / (2.0 * std::numbers::pi);
    const double h = 0.5 * dim;
    const double sphere = 2.0 * std::pow(std::numbers::pi, h) / std::tgamma(h);
    return (std::pow(r, 2.0 - dim) - 1.0) / ((dim - 2.0) * sphere);
}

namespace {

std::uint64_t splitmix(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

double pairwise_sum(const double* v, std::size_t n) {
    if (n <= 8) {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) s += v[i];
        return s;
    }
    const std::size_t h = n / 2;
    return pairwise_sum(v, h) + pairwise_sum(v + h, n - h);
}

struct Walk {
    double value = 0.0;
    int steps = 0;
    bool truncated = false;
};

void unit_direction(std::mt19937_64& rng, std::normal_distribution<double>& gauss, std::vector<double>& y) {
    double s;
    do {
        s = 0.0;
        for (auto& v : y) {
            v = gauss(rng);
            s += v * v;
        }
    } while (s == 0.0);
    const double inv = 1.0 / std::sqrt(s);
    for (auto& v : y) v *= inv;
}

Walk walk_once(const PdeInstance& inst, std::span<const double> x0, const WosConfig& cfg, std::uint64_t seed,
               double ball_volume) {
    const Domain& dom = inst.domain;
    const auto d = static_cast<std::size_t>(dom.dim);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss;
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::vector<double> x(x0.begin(), x0.end()), y(d), z(d), p(d);
    const bool source = !inst.f.is_constant(0.0);
    Walk w;
    double acc = 0.0;
    for (;;) {
        BoundaryDistance bd = distance_to_boundary(dom, x);
        if (bd.dist < cfg.eps_shell || w.steps >= cfg.max_steps) {
            w.truncated = bd.dist >= cfg.eps_shell;
            w.value = acc + inst.g.eval(dom, bd.nearest);
            return w;
        }
        const double R = bd.dist;
        if (source) {
            double s = 0.0;
            for (int j = 0; j < cfg.samples_per_step; ++j) {
                unit_direction(rng, gauss, z);
                const double r = std::pow(unit(rng), 1.0 / dom.dim);
                for (std::size_t i = 0; i < d; ++i) p[i] = x[i] + R * r * z[i];
                s += unit_ball_green(r, dom.dim) * eval(inst.f, p);
            }
            acc += R * R * ball_volume * s / cfg.samples_per_step;
        }
        unit_direction(rng, gauss, y);
        for (std::size_t i = 0; i < d; ++i) x[i] += R * y[i];
        // Clamp round-off so the walker never leaves the closed domain.
        if (dom.level(x) > 1.0) {
            if (dom.kind == DomainKind::UnitBox) {
                for (auto& v : x) v = std::clamp(v, -1.0, 1.0);
            } else {
                const double l = dom.level(x);
                for (auto& v : x) v /= l;
            }
        }
        ++w.steps;
    }
}

}  // namespace

WosEstimate wos_estimate(const PdeInstance& instance, std::span<const double> x, const WosConfig& cfg) {
    if (instance.pde_type != PdeType::Poisson || instance.bc_type != BcType::Dirichlet)
        throw ConfigError("walk-on-spheres supports Poisson problems with Dirichlet data only");
    if (cfg.paths < 1 || !(cfg.eps_shell > 0.0) || cfg.max_steps < 1 || cfg.samples_per_step < 1)
        throw ConfigError("invalid walk-on-spheres configuration");
    const BoundaryDistance start = distance_to_boundary(instance.domain, x);
    if (start.dist <= cfg.eps_shell) throw OutsideDomain("start point lies inside the absorption shell");
    const Domain unit_ball{DomainKind::UnitBall, instance.domain.dim};
    const double vol = unit_ball.volume();

    std::vector<Walk> walks(static_cast<std::size_t>(cfg.paths));
    const std::uint64_t base = splitmix(cfg.seed);
    parallel_for(walks.size(), cfg.threads,
                 [&](std::size_t i) { walks[i] = walk_once(instance, x, cfg, splitmix(base ^ splitmix(i)), vol); });

    std::vector<double> v(walks.size()), sq(walks.size()), steps(walks.size());
    WosEstimate est;
    for (std::size_t i = 0; i < walks.size(); ++i) {
        v[i] = walks[i].value;
        steps[i] = walks[i].steps;
        est.truncated += walks[i].truncated;
    }
    const double n = static_cast<double>(walks.size());
    est.mean = pairwise_sum(v.data(), v.size()) / n;
    for (std::size_t i = 0; i < v.size(); ++i) sq[i] = (v[i] - est.mean) * (v[i] - est.mean);
    const double var = walks.size() > 1 ? pairwise_sum(sq.data(), sq.size()) / (n - 1.0) : 0.0;
    est.stderr_ = std::sqrt(var / n);
    est.mean_steps = pairwise_sum(steps.data(), steps.size()) / n;
    return est;
}

bool VerifyReport::any_flagged() const {
    for (auto f : flagged)
        if (f) return true;
    return false;
}

VerifyReport verify_solution(const Expression& candidate, const PdeInstance& instance, const PointSet& points,
                             const WosConfig& cfg) {
    VerifyReport rep;
    double scale = 1.0;
    for (std::size_t i = 0; i < points.size(); ++i) {
        WosConfig c = cfg;
        c.seed = splitmix(cfg.seed + 0x632be59bd9b4e019ULL * (i + 1));
        rep.estimates.push_back(wos_estimate(instance, points.point(i), c));
        rep.candidate.push_back(eval(candidate, points.point(i)));
        scale = std::max(scale, std::abs(rep.estimates.back().mean));
    }
    for (std::size_t i = 0; i < points.size(); ++i) {
        const double diff = rep.candidate[i] - rep.estimates[i].mean;
        const double se = rep.estimates[i].stderr_;
        const double z = se > 0.0 ? diff / se : (diff == 0.0 ? 0.0 : std::copysign(INFINITY, diff));
        rep.z.push_back(z);
        rep.flagged.push_back(std::abs(z) > 4.0);
        rep.max_scaled_diff = std::max(rep.max_scaled_diff, std::abs(diff));
    }
    rep.max_scaled_diff /= scale;
    return rep;
}

}  // namespace fexkit
