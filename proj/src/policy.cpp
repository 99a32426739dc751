#include "fexkit/policy.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace fexkit {

namespace {

void append_slots(std::vector<SlotKind>& slots, int depth) {
    slots.push_back(SlotKind::Unary);
    if (depth == 1) {
        slots.push_back(SlotKind::Leaf);
        return;
    }
    slots.push_back(SlotKind::Binary);
    append_slots(slots, depth - 1);
    append_slots(slots, depth - 1);
}

Expression build_rec(const SearchSpace& s, const std::vector<int>& c, std::size_t& pos, int depth) {
    const Op u = s.unary[static_cast<std::size_t>(c[pos++])];
    if (depth == 1) {
        const int v = s.variables[static_cast<std::size_t>(c[pos++])];
        return Expression::unary(u, Expression::variable(v));
    }
    const Op b = s.binary[static_cast<std::size_t>(c[pos++])];
    Expression l = build_rec(s, c, pos, depth - 1);
    Expression r = build_rec(s, c, pos, depth - 1);
    return Expression::unary(u, Expression::binary(b, std::move(l), std::move(r)));
}

}  // namespace

std::size_t SearchSpace::choice_count(std::size_t slot) const {
    switch (slots.at(slot)) {
        case SlotKind::Unary: return unary.size();
        case SlotKind::Binary: return binary.size();
        case SlotKind::Leaf: return variables.size();
    }
    return 0;
}

std::size_t SearchSpace::total_choices() const {
    std::size_t n = 0;
    for (std::size_t i = 0; i < slots.size(); ++i) n += choice_count(i);
    return n;
}

std::string SearchSpace::describe() const {
    std::ostringstream os;
    os << "depth=" << depth << " unary={";
    for (std::size_t i = 0; i < unary.size(); ++i) os << (i ? " " : "") << op_token(unary[i]);
    os << "} binary={";
    for (std::size_t i = 0; i < binary.size(); ++i) os << (i ? " " : "") << op_token(binary[i]);
    os << "} variables={";
    for (std::size_t i = 0; i < variables.size(); ++i) os << (i ? " " : "") << variable_token(variables[i]);
    os << "} slots=" << slots.size() << " choices=" << total_choices();
    return os.str();
}

SearchSpace build_search_space(const std::optional<OperatorSet>& ops, int depth, int dim) {
    if (depth < 1 || dim < 1) throw ConfigError("search space needs depth >= 1 and dim >= 1");
    SearchSpace s;
    s.depth = depth;
    s.dim = dim;
    if (!ops) {
        s.unary.assign(default_unary_ops().begin(), default_unary_ops().end());
        s.binary.assign(default_binary_ops().begin(), default_binary_ops().end());
        for (int k = 1; k <= dim; ++k) s.variables.push_back(k);
    } else {
        // Id never shows up in a postfix rendering, so it cannot be predicted; it is always offered.
        s.unary.push_back(Op::Id);
        for (Op op : all_ops()) {
            if (op == Op::Id || op == Op::Sign) continue;
            if (std::find(ops->begin(), ops->end(), op_token(op)) == ops->end()) continue;
            (is_unary(op) ? s.unary : s.binary).push_back(op);
        }
        std::sort(s.unary.begin(), s.unary.end());
        if (s.binary.empty() && depth > 1) s.binary.push_back(Op::Add);
        for (const auto& t : *ops) {
            const int v = variable_index(t);
            if (v >= 1 && v <= dim) s.variables.push_back(v);
        }
        if (s.variables.empty())
            for (int k = 1; k <= dim; ++k) s.variables.push_back(k);
    }
    if (s.unary.empty() || (depth > 1 && s.binary.empty())) throw EmptySearchSpace("no operator available for a slot");
    append_slots(s.slots, depth);
    return s;
}

Expression build_expression(const SearchSpace& space, const std::vector<int>& choices) {
    if (choices.size() != space.slots.size()) throw std::invalid_argument("build_expression: choice count mismatch");
    for (std::size_t i = 0; i < choices.size(); ++i)
        if (choices[i] < 0 || static_cast<std::size_t>(choices[i]) >= space.choice_count(i))
            throw std::invalid_argument("build_expression: choice out of range");
    std::size_t pos = 0;
    return build_rec(space, choices, pos, space.depth);
}

// ---------------------------------------------------------------------------
// Policy

PolicyParams PolicyParams::uniform(const std::vector<std::size_t>& block_sizes, double phi_max) {
    if (!(phi_max > 0.0)) throw ConfigError("phi_max must be positive");
    PolicyParams p;
    p.phi_max = phi_max;
    p.offsets.push_back(0);
    for (std::size_t n : block_sizes) {
        if (n == 0) throw EmptySearchSpace("slot without choices");
        p.offsets.push_back(p.offsets.back() + n);
    }
    p.phi.assign(p.offsets.back(), 0.0);
    return p;
}

PolicyParams PolicyParams::uniform(const SearchSpace& space, double phi_max) {
    std::vector<std::size_t> sizes;
    for (std::size_t i = 0; i < space.slots.size(); ++i) sizes.push_back(space.choice_count(i));
    return uniform(sizes, phi_max);
}

std::vector<double> PolicyParams::probabilities(std::size_t slot) const {
    const std::size_t a = offsets[slot], n = block_size(slot);
    double m = phi[a];
    for (std::size_t k = 1; k < n; ++k) m = std::max(m, phi[a + k]);
    std::vector<double> p(n);
    double s = 0.0;
    for (std::size_t k = 0; k < n; ++k) s += p[k] = std::exp(phi[a + k] - m);
    for (auto& v : p) v /= s;
    return p;
}

std::vector<int> sample_choices(const PolicyParams& policy, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::vector<int> c(policy.slot_count());
    for (std::size_t s = 0; s < c.size(); ++s) {
        const auto p = policy.probabilities(s);
        const double u = unif(rng);
        double acc = 0.0;
        int pick = static_cast<int>(p.size()) - 1;
        for (std::size_t k = 0; k < p.size(); ++k) {
            acc += p[k];
            if (u < acc) {
                pick = static_cast<int>(k);
                break;
            }
        }
        c[s] = pick;
    }
    return c;
}

double log_prob(const PolicyParams& policy, const std::vector<int>& choices) {
    double lp = 0.0;
    for (std::size_t s = 0; s < choices.size(); ++s) lp += std::log(policy.probabilities(s)[static_cast<std::size_t>(choices[s])]);
    return lp;
}

std::vector<double> score(const PolicyParams& policy, const std::vector<int>& choices) {
    std::vector<double> g(policy.phi.size());
    for (std::size_t s = 0; s < choices.size(); ++s) {
        const auto p = policy.probabilities(s);
        const std::size_t a = policy.offsets[s];
        for (std::size_t k = 0; k < p.size(); ++k) g[a + k] = -p[k];
        g[a + static_cast<std::size_t>(choices[s])] += 1.0;
    }
    return g;
}

void project(std::vector<double>& phi, double phi_max) {
    for (auto& v : phi) v = std::clamp(v, -phi_max, phi_max);
}

StepStats sppgm_step(PolicyParams& policy, int batch, double eta, std::mt19937_64& rng,
                     const std::function<std::vector<double>(const std::vector<std::vector<int>>&)>& rewards) {
    if (batch < 1) throw ConfigError("batch size must be >= 1");
    if (!(eta > 0.0)) throw ConfigError("step size must be positive");
    StepStats st;
    for (int i = 0; i < batch; ++i) st.choices.push_back(sample_choices(policy, rng));
    st.rewards = rewards(st.choices);
    if (st.rewards.size() != st.choices.size()) throw std::logic_error("reward callback returned the wrong count");

    std::vector<double> g(policy.phi.size(), 0.0);
    for (std::size_t i = 0; i < st.choices.size(); ++i) {
        const double r = st.rewards[i];
        st.mean_reward += r;
        if (r > st.best_reward || i == 0) {
            st.best_reward = r;
            st.best_index = i;
        }
        if (r == 0.0) continue;
        const auto sc = score(policy, st.choices[i]);
        for (std::size_t k = 0; k < g.size(); ++k) g[k] += r * sc[k];
    }
    st.mean_reward /= batch;
    double gn = 0.0;
    for (auto& v : g) {
        v /= batch;
        gn += v * v;
    }
    st.grad_norm = std::sqrt(gn);

    std::vector<double> next = policy.phi;
    for (std::size_t k = 0; k < g.size(); ++k) next[k] += eta * g[k];
    project(next, policy.phi_max);
    for (std::size_t k = 0; k < g.size(); ++k) {
        const double d = (next[k] - policy.phi[k]) / eta;
        st.stat_proxy += d * d;
    }
    policy.phi = std::move(next);
    return st;
}

}  // namespace fexkit
