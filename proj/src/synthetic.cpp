#include "fexkit/synthetic.hpp"

#include <cmath>
#include <random>

namespace fexkit {

double GaussianLandscape::reward(std::span<const double> theta) const {
    double s = 0.0;
    for (std::size_t i = 0; i < center.size(); ++i) s += (theta[i] - center[i]) * (theta[i] - center[i]);
    return std::exp(-0.5 * s);
}

double GaussianLandscape::objective(std::span<const double> phi) const {
    const double v = 1.0 + sigma * sigma;
    double s = 0.0;
    for (std::size_t i = 0; i < center.size(); ++i) s += (phi[i] - center[i]) * (phi[i] - center[i]);
    return std::pow(v, -0.5 * static_cast<double>(dim())) * std::exp(-0.5 * s / v);
}

std::vector<double> GaussianLandscape::gradient(std::span<const double> phi) const {
    const double v = 1.0 + sigma * sigma;
    const double j = objective(phi);
    std::vector<double> g(dim());
    for (std::size_t i = 0; i < g.size(); ++i) g[i] = -j * (phi[i] - center[i]) / v;
    return g;
}

namespace {

double projected_gap(std::span<const double> phi, std::span<const double> g, double eta, double phi_max) {
    double s = 0.0;
    for (std::size_t i = 0; i < phi.size(); ++i) {
        const double next = std::clamp(phi[i] + eta * g[i], -phi_max, phi_max);
        const double d = (next - phi[i]) / eta;
        s += d * d;
    }
    return s;
}

}  // namespace

StationarityRun run_synthetic_sppgm(const GaussianLandscape& land, std::vector<double> phi, double phi_max, int batch,
                                    double eta, int iterations, std::uint64_t seed) {
    if (phi.size() != land.dim()) throw std::invalid_argument("run_synthetic_sppgm: dimension mismatch");
    if (batch < 1 || iterations < 1 || !(eta > 0.0)) throw ConfigError("invalid synthetic run configuration");
    project(phi, phi_max);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss;
    const std::size_t n = land.dim();
    const double s2 = land.sigma * land.sigma;
    StationarityRun run;
    std::vector<double> theta(n), g(n);
    for (int t = 0; t < iterations; ++t) {
        run.exact_gap.push_back(projected_gap(phi, land.gradient(phi), eta, phi_max));
        std::fill(g.begin(), g.end(), 0.0);
        for (int b = 0; b < batch; ++b) {
            for (std::size_t i = 0; i < n; ++i) theta[i] = phi[i] + land.sigma * gauss(rng);
            const double r = land.reward(theta);
            for (std::size_t i = 0; i < n; ++i) g[i] += r * (theta[i] - phi[i]) / s2;
        }
        for (auto& v : g) v /= batch;
        run.proxy.push_back(projected_gap(phi, g, eta, phi_max));
        for (std::size_t i = 0; i < n; ++i) phi[i] = std::clamp(phi[i] + eta * g[i], -phi_max, phi_max);
    }
    run.final_phi = std::move(phi);
    return run;
}

StationaritySummary stationarity_report(const StationarityRun& run, int batch, double eta) {
    StationaritySummary s;
    s.batch = batch;
    s.eta = eta;
    s.iterations = static_cast<int>(run.proxy.size());
    for (double v : run.proxy) s.proxy_mean += v;
    for (double v : run.exact_gap) s.bias_term += v;
    if (!run.proxy.empty()) s.proxy_mean /= static_cast<double>(run.proxy.size());
    if (!run.exact_gap.empty()) s.bias_term /= static_cast<double>(run.exact_gap.size());
    s.variance_term = s.proxy_mean - s.bias_term;
    return s;
}

StationaritySummary stationarity_report(const SolveTrace& trace, int batch, double eta) {
    StationaritySummary s;
    s.batch = batch;
    s.eta = eta;
    s.iterations = static_cast<int>(trace.rows.size());
    for (const auto& r : trace.rows) s.proxy_mean += r.stat_proxy;
    if (!trace.rows.empty()) s.proxy_mean /= static_cast<double>(trace.rows.size());
    return s;
}

double loglog_slope(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size() || x.size() < 2) throw std::invalid_argument("loglog_slope: need two or more points");
    double mx = 0.0, my = 0.0;
    const double n = static_cast<double>(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += std::log(x[i]);
        my += std::log(y[i]);
    }
    mx /= n;
    my /= n;
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double dx = std::log(x[i]) - mx;
        sxy += dx * (std::log(y[i]) - my);
        sxx += dx * dx;
    }
    return sxy / sxx;
}

}  // namespace fexkit
