#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "fexkit/fex.hpp"

namespace fexkit {

/// Smooth bandit with a closed-form objective: theta ~ N(phi, sigma^2 I),
/// R(theta) = exp(-|theta - c|^2 / 2), so
/// J(phi) = (1 + sigma^2)^(-n/2) exp(-|phi - c|^2 / (2 (1 + sigma^2))).
struct GaussianLandscape {
    std::vector<double> center;
    double sigma = 1.0;

    std::size_t dim() const { return center.size(); }
    double reward(std::span<const double> theta) const;
    double objective(std::span<const double> phi) const;
    std::vector<double> gradient(std::span<const double> phi) const;
};

struct StationarityRun {
    std::vector<double> proxy;      // ||(phi_{t+1} - phi_t) / eta||^2 with the sampled gradient
    std::vector<double> exact_gap;  // same quantity with the exact gradient at phi_t
    std::vector<double> final_phi;
};

/// Projected stochastic gradient ascent with the score-function estimator
/// (theta - phi) / sigma^2 on the box [-phi_max, phi_max]^n.
StationarityRun run_synthetic_sppgm(const GaussianLandscape& land, std::vector<double> phi0, double phi_max, int batch,
                                    double eta, int iterations, std::uint64_t seed);

struct StationaritySummary {
    int batch = 0;
    int iterations = 0;
    double eta = 0.0;
    double proxy_mean = 0.0;     // mean over iterates (uniform random output iterate)
    double bias_term = 0.0;      // mean exact projected-gradient gap
    double variance_term = 0.0;  // proxy_mean - bias_term
};

StationaritySummary stationarity_report(const StationarityRun& run, int batch, double eta);
/// For a solver trace only the sampled proxy is known; bias and variance stay 0.
StationaritySummary stationarity_report(const SolveTrace& trace, int batch, double eta);

/// Least-squares slope of log(y) against log(x).
double loglog_slope(std::span<const double> x, std::span<const double> y);

}  // namespace fexkit
