#pragma once

#include <string>
#include <vector>

#include "fexkit/pde.hpp"

namespace fexkit {

/// One labelled example. Postfix fields are single-space-separated token strings.
/// Records always live on the unit box of dimension `dim`.
struct DatasetRecord {
    PdeType pde_type = PdeType::Poisson;
    BcType bc_type = BcType::Dirichlet;
    int dim = 3;
    int depth = 3;
    std::uint64_t seed = 0;
    std::string f_postfix;
    std::string g_postfix;
    std::string u_postfix;

    Domain domain() const { return Domain{DomainKind::UnitBox, dim}; }
    friend bool operator==(const DatasetRecord&, const DatasetRecord&) = default;
};

struct PromptRendering {
    static constexpr int prompt_token_budget = 256;
    static constexpr int target_token_budget = 64;
    static constexpr int combined_budget = 300;
    static constexpr const char* eos = "<EOS>";

    std::string prompt;
    std::string target;
};

struct GeneratorOptions {
    std::vector<Op> unary = {default_unary_ops().begin(), default_unary_ops().end()};
    std::vector<Op> binary = {default_binary_ops().begin(), default_binary_ops().end()};
    int max_attempts = 100;
};

/// Builds a record from a given solution; throws GenerationFailure when u is
/// constant after simplification, its residual simplifies to 0, or u, grad u
/// or f is not finite at fixed interior and boundary probe points.
DatasetRecord make_record(PdeType pde_type, BcType bc_type, const Expression& u, int depth, int dim,
                          std::uint64_t seed);

/// Random solution tree of the given depth, resampled until the record is
/// non-degenerate.
DatasetRecord generate_instance(PdeType pde_type, BcType bc_type, int depth, int dim, std::uint64_t seed,
                                const GeneratorOptions& opts = {});

/// n records cycling through `types` in order; record i uses seed + i.
std::vector<DatasetRecord> generate_dataset(int n, int depth, int dim,
                                            const std::vector<std::pair<PdeType, BcType>>& types,
                                            std::uint64_t seed, int threads = 1,
                                            const GeneratorOptions& opts = {});

/// "poisson:dirichlet,conservation:cauchy" or "all".
std::vector<std::pair<PdeType, BcType>> parse_type_list(std::string_view text);

PromptRendering render_prompt(const DatasetRecord& record);

struct PromptFields {
    std::string pde_type;
    std::string f_postfix;
    std::string g_postfix;
    std::string bc_type;
};

/// Inverse of render_prompt for untruncated prompts.
PromptFields parse_prompt(std::string_view prompt);

PdeInstance record_instance(const DatasetRecord& record);

/// JSONL, one record per line. Lines starting with '#' are ignored on read.
std::string record_to_json(const DatasetRecord& record);
DatasetRecord record_from_json(std::string_view line);
void write_dataset(const std::vector<DatasetRecord>& records, const std::string& path,
                   const std::string& header_comment = {});
std::vector<DatasetRecord> read_dataset(const std::string& path);

}  // namespace fexkit
