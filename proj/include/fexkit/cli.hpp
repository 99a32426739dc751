#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "fexkit/fex.hpp"
#include "fexkit/predictor.hpp"

namespace fexkit {

struct BenchInstance {
    std::string id;
    PdeInstance instance;
};

/// Ten manufactured depth-2 targets (five Poisson, five conservation law) with
/// Dirichlet data on the unit box in three dimensions.
std::vector<BenchInstance> acceptance_suite();

struct BenchRun {
    int iterations = 0;
    double seconds = 0.0;
    bool converged = false;
    double relative_l2 = 0.0;
};

struct BenchmarkRow {
    std::string id;
    std::string pde_type;
    std::string true_solution;
    std::vector<BenchRun> informed;
    std::vector<BenchRun> uninformed;
    std::size_t informed_choices = 0;
    std::size_t uninformed_choices = 0;

    double mean_iterations(bool inf) const;
    double mean_seconds(bool inf) const;
    double median_error(bool inf) const;
    bool all_converged(bool inf) const;
    double iteration_speedup() const { return mean_iterations(false) / mean_iterations(true); }
    double time_speedup() const { return mean_seconds(false) / mean_seconds(true); }
};

/// Solves every instance `repeats` times with oracle-predicted operator sets
/// and without; repeat r uses seed + r for both modes.
std::vector<BenchmarkRow> run_benchmark(const std::vector<BenchInstance>& suite, int repeats, const SolveConfig& cfg,
                                        std::uint64_t seed);

std::string bench_csv(const std::vector<BenchmarkRow>& rows, bool include_timing = true);
std::string bench_summary(const std::vector<BenchmarkRow>& rows, bool include_timing = true);

double median(std::vector<double> v);

/// Entry point of the `fexkit` executable. Returns the process exit code:
/// 0 success, 2 usage or configuration error, 3 I/O error, 4 numerical failure.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace fexkit
