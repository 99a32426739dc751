#pragma once

#include <vector>

#include "fexkit/pde.hpp"

namespace fexkit {

struct WosConfig {
    int paths = 10000;
    double eps_shell = 1e-3;
    int max_steps = 10000;
    int samples_per_step = 1;
    std::uint64_t seed = 0;
    int threads = 1;
};

struct BoundaryDistance {
    double dist = 0.0;
    std::vector<double> nearest;
};

/// Exact distance to the boundary and the nearest boundary point. Ties on the
/// box go to the lowest coordinate index and the positive face.
BoundaryDistance distance_to_boundary(const Domain& domain, std::span<const double> x);

/// Green's function of the unit ball with pole at the centre, as a function of |z|.
double unit_ball_green(double r, int dim);

struct WosEstimate {
    double mean = 0.0;
    double stderr_ = 0.0;
    long truncated = 0;  // walks stopped by max_steps
    double mean_steps = 0.0;
};

/// Walk-on-spheres estimate of the Poisson/Dirichlet solution at x.
WosEstimate wos_estimate(const PdeInstance& instance, std::span<const double> x, const WosConfig& cfg);

struct VerifyReport {
    std::vector<double> candidate;
    std::vector<WosEstimate> estimates;
    std::vector<double> z;
    std::vector<std::uint8_t> flagged;  // |z| > 4
    double max_scaled_diff = 0.0;       // max |candidate - estimate| / max(1, max |estimate|)
    bool any_flagged() const;
};

VerifyReport verify_solution(const Expression& candidate, const PdeInstance& instance, const PointSet& points,
                             const WosConfig& cfg);

}  // namespace fexkit
