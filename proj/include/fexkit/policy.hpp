#pragma once

#include <functional>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "fexkit/expr.hpp"

namespace fexkit {

enum class SlotKind : std::uint8_t { Unary, Binary, Leaf };

/// Fixed tree skeleton with one categorical choice per slot.
///
/// Slots are listed in pre-order: a depth-k subtree contributes its unary
/// slot, then (k > 1) its binary slot followed by both depth-(k-1) subtrees,
/// or (k = 1) a leaf slot choosing the input variable.
struct SearchSpace {
    int depth = 2;
    int dim = 3;
    std::vector<Op> unary;
    std::vector<Op> binary;
    std::vector<int> variables;  // 1-based
    std::vector<SlotKind> slots;

    std::size_t choice_count(std::size_t slot) const;
    std::size_t total_choices() const;  // length of the logit vector
    std::string describe() const;
};

/// Uninformed space when `ops` is empty: the default unary and binary sets and
/// every variable. Otherwise unary and binary choices come from `ops`
/// (Id always present; + injected when no binary operator is given) and leaves
/// from the predicted variables (all variables when none is predicted).
SearchSpace build_search_space(const std::optional<OperatorSet>& ops, int depth, int dim);

/// Tree for a slot assignment. Every unary node starts at alpha = 1, beta = 0.
Expression build_expression(const SearchSpace& space, const std::vector<int>& choices);

/// Logits of independent per-slot categoricals, confined to the box [-phi_max, phi_max].
struct PolicyParams {
    std::vector<double> phi;
    std::vector<std::size_t> offsets;  // start of each slot's block; offsets.back() == phi.size()
    double phi_max = 10.0;

    static PolicyParams uniform(const SearchSpace& space, double phi_max = 10.0);
    static PolicyParams uniform(const std::vector<std::size_t>& block_sizes, double phi_max = 10.0);
    std::size_t slot_count() const { return offsets.size() - 1; }
    std::size_t block_size(std::size_t slot) const { return offsets[slot + 1] - offsets[slot]; }
    std::vector<double> probabilities(std::size_t slot) const;
};

std::vector<int> sample_choices(const PolicyParams& policy, std::mt19937_64& rng);
double log_prob(const PolicyParams& policy, const std::vector<int>& choices);
/// d log p / d phi: onehot(choice) - softmax(logits) per block.
std::vector<double> score(const PolicyParams& policy, const std::vector<int>& choices);
/// Componentwise clamp, the Euclidean projection onto the box.
void project(std::vector<double>& phi, double phi_max);

struct StepStats {
    std::vector<std::vector<int>> choices;
    std::vector<double> rewards;
    double mean_reward = 0.0;
    double best_reward = 0.0;
    std::size_t best_index = 0;
    double grad_norm = 0.0;
    double stat_proxy = 0.0;  // ||(phi' - phi) / eta||^2
};

/// One stochastic projected policy-gradient step. `rewards` maps the batch of
/// sampled choices to rewards (it may evaluate them concurrently).
StepStats sppgm_step(PolicyParams& policy, int batch, double eta, std::mt19937_64& rng,
                     const std::function<std::vector<double>(const std::vector<std::vector<int>>&)>& rewards);

}  // namespace fexkit
