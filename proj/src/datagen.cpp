#include "fexkit/datagen.hpp"

#include <fstream>
#include <random>

#include <json.hpp>

#include "fexkit/parallel.hpp"

namespace fexkit {

using nlohmann::ordered_json;

DatasetRecord make_record(PdeType pde_type, BcType bc_type, const Expression& u, int depth, int dim,
                          std::uint64_t seed) {
    const Expression us = simplify(u);
    if (us.is_constant()) throw GenerationFailure("solution is constant");
    const Domain domain{DomainKind::UnitBox, dim};
    const Expression f = residual_operator(pde_type, us, domain);
    if (f.is_constant(0.0)) throw GenerationFailure("residual simplifies to zero");
    // Reject solutions that overflow or hit a singularity on the closed domain.
    const PointSet probe = sample_interior(domain, 64, 0);
    const PointSet edge = sample_boundary(domain, 64, 0);
    try {
        const CompiledExpression cu(us), cf(f);
        cu.evaluate(probe, 0);
        cf.evaluate(probe, 0);
        cu.evaluate(edge, 1);
        cf.evaluate(edge, 0);
    } catch (const DomainError&) {
        throw GenerationFailure("solution or residual is not finite on the domain");
    }
    DatasetRecord r;
    r.pde_type = pde_type;
    r.bc_type = bc_type;
    r.dim = dim;
    r.depth = depth;
    r.seed = seed;
    r.u_postfix = join_tokens(to_postfix(us));
    r.f_postfix = join_tokens(to_postfix(f));
    r.g_postfix = boundary_data_to_postfix(boundary_data_for(bc_type, us, domain));
    return r;
}

DatasetRecord generate_instance(PdeType pde_type, BcType bc_type, int depth, int dim, std::uint64_t seed,
                                const GeneratorOptions& opts) {
    if (depth < 1 || dim < 1) throw ConfigError("depth and dim must be >= 1");
    // Attempt k draws its tree from an independent stream derived from (seed, k).
    std::seed_seq base{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)};
    std::vector<std::uint32_t> stream(2 * static_cast<std::size_t>(opts.max_attempts));
    base.generate(stream.begin(), stream.end());
    for (int k = 0; k < opts.max_attempts; ++k) {
        const std::uint64_t s = (static_cast<std::uint64_t>(stream[2 * static_cast<std::size_t>(k)]) << 32) |
                                stream[2 * static_cast<std::size_t>(k) + 1];
        const Expression u = simplify(random_tree(depth, opts.unary, opts.binary, dim, s));
        if (u.unary_depth() < 1) continue;
        try {
            return make_record(pde_type, bc_type, u, depth, dim, seed);
        } catch (const GenerationFailure&) {
        }
    }
    throw GenerationFailure("no admissible solution after " + std::to_string(opts.max_attempts) + " attempts");
}

std::vector<DatasetRecord> generate_dataset(int n, int depth, int dim,
                                            const std::vector<std::pair<PdeType, BcType>>& types,
                                            std::uint64_t seed, int threads, const GeneratorOptions& opts) {
    if (n < 0) throw ConfigError("record count must be >= 0");
    if (types.empty()) throw ConfigError("no PDE/BC types selected");
    std::vector<DatasetRecord> out(static_cast<std::size_t>(n));
    parallel_for(out.size(), threads, [&](std::size_t i) {
        const auto& [p, b] = types[i % types.size()];
        out[i] = generate_instance(p, b, depth, dim, seed + i, opts);
    });
    return out;
}

std::vector<std::pair<PdeType, BcType>> parse_type_list(std::string_view text) {
    std::vector<std::pair<PdeType, BcType>> out;
    if (text == "all") {
        for (PdeType p : {PdeType::Poisson, PdeType::Conservation})
            for (BcType b : {BcType::Dirichlet, BcType::Neumann, BcType::Cauchy}) out.emplace_back(p, b);
        return out;
    }
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const std::size_t comma = std::min(text.find(',', pos), text.size());
        const std::string_view item = text.substr(pos, comma - pos);
        const std::size_t colon = item.find(':');
        if (colon == std::string_view::npos) throw ConfigError("type entry must be pde:bc, got '" + std::string(item) + "'");
        out.emplace_back(parse_pde_type(item.substr(0, colon)), parse_bc_type(item.substr(colon + 1)));
        pos = comma + 1;
    }
    return out;
}

PromptRendering render_prompt(const DatasetRecord& record) {
    TokenSequence u = split_tokens(record.u_postfix);
    if (u.size() > PromptRendering::target_token_budget - 1) u.resize(PromptRendering::target_token_budget - 1);
    u.emplace_back(PromptRendering::eos);

    TokenSequence f = split_tokens(record.f_postfix);
    TokenSequence g = split_tokens(record.g_postfix);
    const bool with_g = !g.empty();
    // Frame: Type: | RHS: | [BC: |] BC_Type: | Solution:  (RHS:/BC: glue to their first token)
    const std::size_t frame = with_g ? 9 : 7;
    const std::size_t budget = std::min<std::size_t>(PromptRendering::prompt_token_budget,
                                                     PromptRendering::combined_budget - u.size());
    const std::size_t glued = (f.empty() ? 0 : 1) + (g.empty() ? 0 : 1);
    std::size_t total = frame + f.size() + g.size() - glued;
    while (total > budget && (g.size() > 1 || f.size() > 1)) {
        if (g.size() > 1) g.pop_back();
        else f.pop_back();
        --total;
    }

    std::string p = "Type:" + to_string(record.pde_type) + " | RHS:" + join_tokens(f);
    if (with_g) p += " | BC:" + join_tokens(g);
    p += " | BC_Type:" + to_string(record.bc_type) + " | Solution:";
    return {std::move(p), join_tokens(u)};
}

PromptFields parse_prompt(std::string_view prompt) {
    PromptFields out;
    std::size_t pos = 0;
    while (pos < prompt.size()) {
        std::size_t end = prompt.find(" | ", pos);
        if (end == std::string_view::npos) end = prompt.size();
        const std::string_view field = prompt.substr(pos, end - pos);
        const std::size_t colon = field.find(':');
        if (colon == std::string_view::npos) throw MalformedSequence("prompt field without ':'");
        const std::string_view key = field.substr(0, colon);
        const std::string value(field.substr(colon + 1));
        if (key == "Type") out.pde_type = value;
        else if (key == "RHS") out.f_postfix = value;
        else if (key == "BC") out.g_postfix = value;
        else if (key == "BC_Type") out.bc_type = value;
        else if (key != "Solution") throw MalformedSequence("unknown prompt field " + std::string(key));
        pos = end + 3;
    }
    return out;
}

PdeInstance record_instance(const DatasetRecord& record) {
    const ordered_json j = {{"pde_type", to_string(record.pde_type)},
                      {"bc_type", to_string(record.bc_type)},
                      {"domain", {{"kind", "unit_box"}, {"d", record.dim}}},
                      {"lambda", 1.0},
                      {"f_postfix", record.f_postfix},
                      {"g_postfix", record.g_postfix},
                      {"true_u_postfix", record.u_postfix}};
    return instance_from_json(j.dump());
}

std::string record_to_json(const DatasetRecord& record) {
    const PromptRendering pr = render_prompt(record);
    ordered_json j;
    j["pde_type"] = to_string(record.pde_type);
    j["bc_type"] = to_string(record.bc_type);
    j["dim"] = record.dim;
    j["depth"] = record.depth;
    j["seed"] = record.seed;
    j["f_postfix"] = record.f_postfix;
    j["g_postfix"] = record.g_postfix;
    j["u_postfix"] = record.u_postfix;
    j["prompt"] = pr.prompt;
    j["target"] = pr.target;
    return j.dump();
}

DatasetRecord record_from_json(std::string_view line) {
    const ordered_json j = ordered_json::parse(line);
    DatasetRecord r;
    r.pde_type = parse_pde_type(j.at("pde_type").get<std::string>());
    r.bc_type = parse_bc_type(j.at("bc_type").get<std::string>());
    r.dim = j.at("dim").get<int>();
    r.depth = j.at("depth").get<int>();
    r.seed = j.at("seed").get<std::uint64_t>();
    r.f_postfix = j.at("f_postfix").get<std::string>();
    r.g_postfix = j.at("g_postfix").get<std::string>();
    r.u_postfix = j.at("u_postfix").get<std::string>();
    return r;
}

void write_dataset(const std::vector<DatasetRecord>& records, const std::string& path,
                   const std::string& header_comment) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write dataset " + path);
    if (!header_comment.empty()) out << header_comment;
    for (const auto& r : records) out << record_to_json(r) << '\n';
    if (!out) throw IoError("write failed for " + path);
}

std::vector<DatasetRecord> read_dataset(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open dataset " + path);
    std::vector<DatasetRecord> out;
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
        ++n;
        if (line.empty() || line.front() == '#') continue;
        try {
            out.push_back(record_from_json(line));
        } catch (const std::exception& e) {
            throw ParseError(e.what(), n);
        }
    }
    return out;
}

}  // namespace fexkit
