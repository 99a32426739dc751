#include "fexkit/pde.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>

#include <json.hpp>

namespace fexkit {

using nlohmann::ordered_json;

std::string to_string(PdeType t) { return t == PdeType::Poisson ? "poisson" : "conservation"; }

std::string to_string(BcType t) {
    switch (t) {
        case BcType::Dirichlet: return "dirichlet";
        case BcType::Neumann: return "neumann";
        case BcType::Cauchy: return "cauchy";
    }
    return "dirichlet";
}

std::string to_string(DomainKind k) { return k == DomainKind::UnitBox ? "unit_box" : "unit_ball"; }

PdeType parse_pde_type(std::string_view s) {
    if (s == "poisson") return PdeType::Poisson;
    if (s == "conservation") return PdeType::Conservation;
    throw ConfigError("unknown pde type '" + std::string(s) + "'");
}

BcType parse_bc_type(std::string_view s) {
    if (s == "dirichlet") return BcType::Dirichlet;
    if (s == "neumann") return BcType::Neumann;
    if (s == "cauchy") return BcType::Cauchy;
    throw ConfigError("unknown boundary condition type '" + std::string(s) + "'");
}

DomainKind parse_domain_kind(std::string_view s) {
    if (s == "unit_box") return DomainKind::UnitBox;
    if (s == "unit_ball") return DomainKind::UnitBall;
    throw ConfigError("unknown domain kind '" + std::string(s) + "'");
}

// ---------------------------------------------------------------------------
// Domain

double Domain::volume() const {
    if (kind == DomainKind::UnitBox) return std::pow(2.0, dim);
    const double h = 0.5 * dim;
    return std::pow(std::numbers::pi, h) / std::tgamma(h + 1.0);
}

double Domain::boundary_area() const {
    if (kind == DomainKind::UnitBox) return 2.0 * dim * std::pow(2.0, dim - 1);
    return dim * volume();
}

double Domain::level(std::span<const double> x) const {
    if (kind == DomainKind::UnitBox) {
        double m = 0.0;
        for (double v : x) m = std::max(m, std::abs(v));
        return m;
    }
    double s = 0.0;
    for (double v : x) s += v * v;
    return std::sqrt(s);
}

int Domain::face_of(std::span<const double> x) const {
    if (kind == DomainKind::UnitBall) return 0;
    int best = 0;
    for (int i = 1; i < dim; ++i)
        if (std::abs(x[static_cast<std::size_t>(i)]) > std::abs(x[static_cast<std::size_t>(best)])) best = i;
    return 2 * best + (x[static_cast<std::size_t>(best)] < 0.0 ? 1 : 0);
}

void Domain::outward_normal(std::span<const double> x, std::span<double> n) const {
    if (kind == DomainKind::UnitBox) {
        std::fill(n.begin(), n.end(), 0.0);
        const int f = face_of(x);
        n[static_cast<std::size_t>(f / 2)] = (f % 2 == 0) ? 1.0 : -1.0;
        return;
    }
    const double r = level(x);
    if (r == 0.0) throw NotOnBoundary("normal requested at the centre of the ball");
    for (std::size_t i = 0; i < x.size(); ++i) n[i] = x[i] / r;
}

// ---------------------------------------------------------------------------
// Boundary data

double BoundaryData::eval(const Domain& domain, std::span<const double> x) const {
    if (pieces.empty()) throw ConfigError("boundary data is empty");
    if (!per_face()) return fexkit::eval(pieces.front(), x);
    const auto f = static_cast<std::size_t>(domain.face_of(x));
    if (f >= pieces.size()) throw ConfigError("boundary data has fewer pieces than the domain has faces");
    return fexkit::eval(pieces[f], x);
}

OperatorSet BoundaryData::operator_set() const {
    OperatorSet s;
    for (const auto& p : pieces) s = set_union(s, extract_operator_set(p));
    return s;
}

std::string boundary_data_to_postfix(const BoundaryData& g) {
    if (!g.per_face()) return g.pieces.empty() ? std::string() : join_tokens(to_postfix(g.pieces.front()));
    TokenSequence out;
    for (std::size_t k = 0; k < g.pieces.size(); ++k) {
        out.push_back("FACE:" + std::to_string(k));
        for (auto& t : to_postfix(g.pieces[k])) out.push_back(std::move(t));
    }
    return join_tokens(out);
}

BoundaryData boundary_data_from_postfix(std::string_view text, const OperatorDictionary& dictionary) {
    const TokenSequence tokens = split_tokens(text);
    BoundaryData g;
    if (tokens.empty()) return g;
    if (!tokens.front().starts_with("FACE:")) {
        g.pieces.push_back(parse_postfix(tokens, dictionary));
        return g;
    }
    TokenSequence current;
    std::size_t expected = 0;
    auto flush = [&] {
        if (current.empty()) throw MalformedSequence("empty FACE block");
        g.pieces.push_back(parse_postfix(current, dictionary));
        current.clear();
    };
    for (const auto& t : tokens) {
        if (t.starts_with("FACE:")) {
            if (expected > 0) flush();
            if (t != "FACE:" + std::to_string(expected)) throw MalformedSequence("out-of-order face tag " + t);
            ++expected;
        } else {
            current.push_back(t);
        }
    }
    flush();
    return g;
}

// ---------------------------------------------------------------------------
// Operators

Expression residual_operator(PdeType pde_type, const Expression& u, const Domain& domain) {
    if (pde_type == PdeType::Poisson) return simplify(Expression::constant(-1.0) * laplacian(u, domain.dim));
    Expression sum = differentiate(u, 1);
    for (int k = 2; k <= domain.dim; ++k) sum = sum + differentiate(u, k);
    return simplify(sum);
}

BoundaryData boundary_data_for(BcType bc_type, const Expression& u, const Domain& domain) {
    BoundaryData g;
    const Expression us = simplify(u);
    if (bc_type != BcType::Neumann) {
        g.pieces.push_back(us);
        return g;
    }
    if (domain.kind == DomainKind::UnitBox) {
        for (int i = 1; i <= domain.dim; ++i) {
            const Expression d = differentiate(us, i);
            g.pieces.push_back(d);
            g.pieces.push_back(simplify(Expression::constant(-1.0) * d));
        }
        return g;
    }
    Expression radial = Expression::variable(1) * differentiate(us, 1);
    for (int i = 2; i <= domain.dim; ++i) radial = radial + Expression::variable(i) * differentiate(us, i);
    g.pieces.push_back(simplify(radial));
    return g;
}

PdeInstance manufactured_instance(PdeType pde_type, BcType bc_type, const Domain& domain, const Expression& u,
                                  double lambda) {
    PdeInstance inst;
    inst.pde_type = pde_type;
    inst.bc_type = bc_type;
    inst.domain = domain;
    inst.f = residual_operator(pde_type, u, domain);
    inst.g = boundary_data_for(bc_type, u, domain);
    inst.true_u = u;
    inst.lambda = lambda;
    return inst;
}

bool in_cauchy_region(const Domain& domain, std::span<const double> x) {
    if (domain.kind == DomainKind::UnitBall) return x[0] <= 0.0;
    return domain.face_of(x) != 0;
}

namespace {

PointSet single_point(std::span<const double> x) {
    PointSet p;
    p.dim = static_cast<int>(x.size());
    p.coords.assign(x.begin(), x.end());
    return p;
}

}  // namespace

double boundary_residual(BcType bc_type, const Expression& u, const BoundaryData& g, const Domain& domain,
                         std::span<const double> x) {
    if (static_cast<int>(x.size()) != domain.dim) throw std::invalid_argument("boundary_residual: point dimension");
    if (!domain.on_boundary(x)) throw NotOnBoundary("point is not on the boundary");
    switch (bc_type) {
        case BcType::Dirichlet: return eval(u, x) - g.eval(domain, x);
        case BcType::Cauchy: return in_cauchy_region(domain, x) ? eval(u, x) - g.eval(domain, x) : 0.0;
        case BcType::Neumann: {
            const JetValues jv = CompiledExpression(u).evaluate(single_point(x), 1);
            std::vector<double> n(x.size());
            domain.outward_normal(x, n);
            double dn = 0.0;
            for (int k = 0; k < domain.dim; ++k) dn += n[static_cast<std::size_t>(k)] * jv.d(k, 0);
            return dn - g.eval(domain, x);
        }
    }
    return 0.0;
}

PointSet sample_interior(const Domain& domain, int n, std::uint64_t seed) {
    if (n < 1) throw std::invalid_argument("sample_interior: n must be >= 1");
    std::mt19937_64 rng(seed);
    PointSet p;
    p.dim = domain.dim;
    p.coords.resize(static_cast<std::size_t>(n) * static_cast<std::size_t>(domain.dim));
    std::uniform_real_distribution<double> unif(-1.0, 1.0);
    std::normal_distribution<double> gauss;
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (int i = 0; i < n; ++i) {
        auto x = p.point(static_cast<std::size_t>(i));
        if (domain.kind == DomainKind::UnitBox) {
            for (auto& v : x) v = unif(rng);
            continue;
        }
        double s;
        do {
            s = 0.0;
            for (auto& v : x) {
                v = gauss(rng);
                s += v * v;
            }
        } while (s == 0.0);
        const double r = std::pow(unit(rng), 1.0 / domain.dim) / std::sqrt(s);
        for (auto& v : x) v *= r;
    }
    return p;
}

PointSet sample_boundary(const Domain& domain, int n, std::uint64_t seed) {
    if (n < 1) throw std::invalid_argument("sample_boundary: n must be >= 1");
    std::mt19937_64 rng(seed);
    PointSet p;
    p.dim = domain.dim;
    p.coords.resize(static_cast<std::size_t>(n) * static_cast<std::size_t>(domain.dim));
    std::uniform_real_distribution<double> unif(-1.0, 1.0);
    std::normal_distribution<double> gauss;
    std::uniform_int_distribution<int> face(0, 2 * domain.dim - 1);
    for (int i = 0; i < n; ++i) {
        auto x = p.point(static_cast<std::size_t>(i));
        if (domain.kind == DomainKind::UnitBox) {
            // All faces have equal area 2^(d-1).
            const int f = face(rng);
            for (auto& v : x) v = unif(rng);
            x[static_cast<std::size_t>(f / 2)] = (f % 2 == 0) ? 1.0 : -1.0;
            continue;
        }
        double s;
        do {
            s = 0.0;
            for (auto& v : x) {
                v = gauss(rng);
                s += v * v;
            }
        } while (s == 0.0);
        const double r = 1.0 / std::sqrt(s);
        for (auto& v : x) v *= r;
    }
    return p;
}

double reward(double loss) {
    if (!(loss < std::numeric_limits<double>::infinity())) return 0.0;
    return 1.0 / (1.0 + loss);
}

// ---------------------------------------------------------------------------
// Loss

LossEvaluator::LossEvaluator(const PdeInstance& instance, const CollocationConfig& cfg) : instance_(instance) {
    if (cfg.n_interior < 1 || cfg.n_boundary < 1) throw ConfigError("collocation counts must be >= 1");
    if (!(instance.lambda > 0.0)) throw ConfigError("lambda must be positive");
    const Domain& dom = instance_.domain;
    interior_ = sample_interior(dom, cfg.n_interior, cfg.sampler_seed);
    boundary_ = sample_boundary(dom, cfg.n_boundary, cfg.sampler_seed ^ 0x9e3779b97f4a7c15ULL);
    interior_weight_ = dom.volume() / cfg.n_interior;
    boundary_weight_ = instance_.lambda * dom.boundary_area() / cfg.n_boundary;
    constant_response_ = instance_.bc_type == BcType::Neumann ? 0.0 : 1.0;

    f_values_ = CompiledExpression(instance_.f).evaluate(interior_, 0).value;
    const std::size_t m = boundary_.size();
    g_values_.resize(m);
    boundary_mask_.assign(m, 1.0);
    if (instance_.bc_type == BcType::Neumann) normals_.resize(m * static_cast<std::size_t>(dom.dim));
    for (std::size_t j = 0; j < m; ++j) {
        const auto x = boundary_.point(j);
        if (instance_.bc_type == BcType::Cauchy && !in_cauchy_region(dom, x)) {
            boundary_mask_[j] = 0.0;
            g_values_[j] = 0.0;
            continue;
        }
        g_values_[j] = instance_.g.eval(dom, x);
        if (instance_.bc_type == BcType::Neumann)
            dom.outward_normal(x, {normals_.data() + j * static_cast<std::size_t>(dom.dim),
                                   static_cast<std::size_t>(dom.dim)});
    }
}

LossEvaluator::OperatorValues LossEvaluator::operator_values(const CompiledExpression& expr,
                                                             std::span<const double> params) const {
    const Domain& dom = instance_.domain;
    const auto d = static_cast<std::size_t>(dom.dim);
    OperatorValues ov;
    const std::size_t n = interior_.size();
    ov.interior.assign(n, 0.0);
    if (instance_.pde_type == PdeType::Poisson) {
        const JetValues jv = expr.evaluate(interior_, params, 2);
        for (std::size_t k = 0; k < d; ++k)
            for (std::size_t i = 0; i < n; ++i) ov.interior[i] -= jv.hess_diag[k * n + i];
    } else {
        const JetValues jv = expr.evaluate(interior_, params, 1);
        for (std::size_t k = 0; k < d; ++k)
            for (std::size_t i = 0; i < n; ++i) ov.interior[i] += jv.grad[k * n + i];
    }
    const std::size_t m = boundary_.size();
    ov.boundary.assign(m, 0.0);
    if (instance_.bc_type == BcType::Neumann) {
        const JetValues jv = expr.evaluate(boundary_, params, 1);
        for (std::size_t j = 0; j < m; ++j) {
            double s = 0.0;
            for (std::size_t k = 0; k < d; ++k) s += normals_[j * d + k] * jv.grad[k * m + j];
            ov.boundary[j] = s;
        }
    } else {
        const JetValues jv = expr.evaluate(boundary_, params, 0);
        for (std::size_t j = 0; j < m; ++j) ov.boundary[j] = boundary_mask_[j] * jv.value[j];
    }
    return ov;
}

double LossEvaluator::loss(const OperatorValues& ov, double a, double b) const {
    double si = 0.0;
    for (std::size_t i = 0; i < ov.interior.size(); ++i) {
        const double r = a * ov.interior[i] - f_values_[i];
        si += r * r;
    }
    double sb = 0.0;
    for (std::size_t j = 0; j < ov.boundary.size(); ++j) {
        const double r = a * ov.boundary[j] + boundary_mask_[j] * (b * constant_response_ - g_values_[j]);
        sb += r * r;
    }
    const double l = interior_weight_ * si + boundary_weight_ * sb;
    return std::isfinite(l) ? l : std::numeric_limits<double>::infinity();
}

std::pair<double, double> LossEvaluator::best_affine(const OperatorValues& ov) const {
    // Normal equations of the weighted least-squares problem in (a, b).
    double saa = 0.0, sab = 0.0, sbb = 0.0, sa = 0.0, sb = 0.0;
    for (std::size_t i = 0; i < ov.interior.size(); ++i) {
        const double p = ov.interior[i];
        saa += interior_weight_ * p * p;
        sa += interior_weight_ * p * f_values_[i];
    }
    for (std::size_t j = 0; j < ov.boundary.size(); ++j) {
        const double p = ov.boundary[j];
        const double c = boundary_mask_[j] * constant_response_;
        saa += boundary_weight_ * p * p;
        sab += boundary_weight_ * p * c;
        sbb += boundary_weight_ * c * c;
        sa += boundary_weight_ * p * g_values_[j];
        sb += boundary_weight_ * c * g_values_[j];
    }
    const double scale = std::max({saa, sbb, 1e-300});
    const double det = saa * sbb - sab * sab;
    if (sbb > 0.0 && std::abs(det) > 1e-12 * scale * scale) return {(sa * sbb - sab * sb) / det, (saa * sb - sab * sa) / det};
    if (saa > 1e-12 * scale) return {sa / saa, 0.0};
    if (sbb > 0.0) return {1.0, (sb - sab) / sbb};
    return {1.0, 0.0};
}

std::vector<double> LossEvaluator::weighted_residuals(const OperatorValues& ov, double a, double b) const {
    const double wi = std::sqrt(interior_weight_);
    const double wb = std::sqrt(boundary_weight_);
    std::vector<double> r;
    r.reserve(ov.interior.size() + ov.boundary.size());
    for (std::size_t i = 0; i < ov.interior.size(); ++i) r.push_back(wi * (a * ov.interior[i] - f_values_[i]));
    for (std::size_t j = 0; j < ov.boundary.size(); ++j)
        r.push_back(wb * (a * ov.boundary[j] + boundary_mask_[j] * (b * constant_response_ - g_values_[j])));
    return r;
}

double LossEvaluator::loss(const Expression& u) const {
    try {
        const CompiledExpression c(u);
        return loss(operator_values(c, c.params()));
    } catch (const DomainError&) {
        return std::numeric_limits<double>::infinity();
    }
}

double LossEvaluator::interior_term(const Expression& u) const {
    try {
        const CompiledExpression c(u);
        OperatorValues ov = operator_values(c, c.params());
        double s = 0.0;
        for (std::size_t i = 0; i < ov.interior.size(); ++i) {
            const double r = ov.interior[i] - f_values_[i];
            s += r * r;
        }
        return interior_weight_ * s;
    } catch (const DomainError&) {
        return std::numeric_limits<double>::infinity();
    }
}

double LossEvaluator::boundary_term(const Expression& u) const {
    try {
        const CompiledExpression c(u);
        const OperatorValues ov = operator_values(c, c.params());
        double s = 0.0;
        for (std::size_t j = 0; j < ov.boundary.size(); ++j) {
            const double r = ov.boundary[j] - boundary_mask_[j] * g_values_[j];
            s += r * r;
        }
        return boundary_weight_ * s;
    } catch (const DomainError&) {
        return std::numeric_limits<double>::infinity();
    }
}

double assemble_loss(const PdeInstance& instance, const Expression& u, const CollocationConfig& cfg) {
    return LossEvaluator(instance, cfg).loss(u);
}

double relative_l2_error(const Expression& u, const Expression& true_u, const Domain& domain, int n,
                         std::uint64_t seed) {
    const PointSet pts = sample_interior(domain, n, seed);
    const std::vector<double> ref = CompiledExpression(true_u).evaluate(pts, 0).value;
    double sr = 0.0;
    for (double v : ref) sr += v * v;
    if (std::sqrt(sr / n) < 1e-14) throw DegenerateReference("reference solution vanishes on the samples");
    std::vector<double> got;
    try {
        got = CompiledExpression(u).evaluate(pts, 0).value;
    } catch (const DomainError&) {
        return std::numeric_limits<double>::infinity();
    }
    double se = 0.0;
    for (std::size_t i = 0; i < ref.size(); ++i) se += (got[i] - ref[i]) * (got[i] - ref[i]);
    return std::sqrt(se / sr);
}

// ---------------------------------------------------------------------------
// JSON

namespace {

// Derivative data may contain SIGN (from |.|).
OperatorDictionary instance_dictionary(int dim) {
    auto t = OperatorDictionary::full(dim).tokens();
    t.emplace_back(op_token(Op::Sign));
    return OperatorDictionary(std::move(t));
}

}  // namespace

std::string instance_to_json(const PdeInstance& instance) {
    ordered_json j;
    j["pde_type"] = to_string(instance.pde_type);
    j["bc_type"] = to_string(instance.bc_type);
    j["domain"] = {{"kind", to_string(instance.domain.kind)}, {"d", instance.domain.dim}};
    j["lambda"] = instance.lambda;
    j["f_postfix"] = join_tokens(to_postfix(instance.f));
    j["g_postfix"] = boundary_data_to_postfix(instance.g);
    if (instance.true_u) j["true_u_postfix"] = join_tokens(to_postfix(*instance.true_u));
    return j.dump(2);
}

PdeInstance instance_from_json(std::string_view text) {
    ordered_json j;
    try {
        j = ordered_json::parse(text);
    } catch (const ordered_json::exception& e) {
        throw ConfigError(std::string("invalid instance JSON: ") + e.what());
    }
    try {
        PdeInstance inst;
        inst.pde_type = parse_pde_type(j.at("pde_type").get<std::string>());
        inst.bc_type = parse_bc_type(j.at("bc_type").get<std::string>());
        inst.domain.kind = parse_domain_kind(j.at("domain").at("kind").get<std::string>());
        inst.domain.dim = j.at("domain").at("d").get<int>();
        if (inst.domain.dim < 1) throw ConfigError("domain dimension must be >= 1");
        inst.lambda = j.value("lambda", 1.0);
        if (!(inst.lambda > 0.0)) throw ConfigError("lambda must be positive");
        const OperatorDictionary dict = instance_dictionary(inst.domain.dim);
        inst.f = parse_postfix(split_tokens(j.at("f_postfix").get<std::string>()), dict);
        inst.g = boundary_data_from_postfix(j.at("g_postfix").get<std::string>(), dict);
        if (inst.g.pieces.empty()) throw ConfigError("g_postfix is empty");
        if (inst.g.per_face() && static_cast<int>(inst.g.pieces.size()) != inst.domain.face_count())
            throw ConfigError("per-face boundary data does not match the domain's face count");
        if (j.contains("true_u_postfix"))
            inst.true_u = parse_postfix(split_tokens(j.at("true_u_postfix").get<std::string>()), dict);
        return inst;
    } catch (const ordered_json::exception& e) {
        throw ConfigError(std::string("invalid instance JSON: ") + e.what());
    }
}

PdeInstance load_instance(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open instance file " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return instance_from_json(ss.str());
}

void save_instance(const PdeInstance& instance, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write instance file " + path);
    out << instance_to_json(instance) << '\n';
    if (!out) throw IoError("write failed for " + path);
}

}  // namespace fexkit
