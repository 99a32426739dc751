#include "fexkit/cli.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "fexkit/parallel.hpp"
#include "fexkit/synthetic.hpp"
#include "fexkit/wos.hpp"

namespace fexkit {

std::vector<BenchInstance> acceptance_suite() {
    const std::vector<std::pair<const char*, PdeType>> targets = {
        {"x1 ^2 x3 * 8 * 2 +", PdeType::Poisson},
        {"x1 x2 EXP * 8 *", PdeType::Poisson},
        {"x1 ^4 x2 * -8 *", PdeType::Poisson},
        {"x1 ^2 x2 COS * 8 * 2 +", PdeType::Poisson},
        {"x2 x2 COS * -8 * 2 +", PdeType::Poisson},
        {"x3 SIN 16 *", PdeType::Conservation},
        {"x3 2 * 2 + SIN 2 * -2 +", PdeType::Conservation},
        {"x2 SIN 2 * 2 + EXP 4 *", PdeType::Conservation},
        {"x2 SIN 2 * -2 + SIN -2 *", PdeType::Conservation},
        {"x2 COS 2 * 2 + EXP 2 *", PdeType::Conservation},
    };
    const Domain domain{DomainKind::UnitBox, 3};
    const auto dict = OperatorDictionary::full(3);
    std::vector<BenchInstance> out;
    int np = 0, nc = 0;
    for (const auto& [text, type] : targets) {
        const Expression u = parse_postfix(split_tokens(text), dict);
        const std::string id = type == PdeType::Poisson ? "poisson-" + std::to_string(++np)
                                                        : "conservation-" + std::to_string(++nc);
        out.push_back({id, manufactured_instance(type, BcType::Dirichlet, domain, u)});
    }
    return out;
}

double median(std::vector<double> v) {
    if (v.empty()) return NAN;
    std::sort(v.begin(), v.end());
    const std::size_t h = v.size() / 2;
    return v.size() % 2 ? v[h] : 0.5 * (v[h - 1] + v[h]);
}

namespace {

const std::vector<BenchRun>& runs(const BenchmarkRow& r, bool inf) { return inf ? r.informed : r.uninformed; }

}  // namespace

double BenchmarkRow::mean_iterations(bool inf) const {
    double s = 0.0;
    for (const auto& r : runs(*this, inf)) s += r.iterations;
    return s / static_cast<double>(runs(*this, inf).size());
}

double BenchmarkRow::mean_seconds(bool inf) const {
    double s = 0.0;
    for (const auto& r : runs(*this, inf)) s += r.seconds;
    return s / static_cast<double>(runs(*this, inf).size());
}

double BenchmarkRow::median_error(bool inf) const {
    std::vector<double> e;
    for (const auto& r : runs(*this, inf)) e.push_back(r.relative_l2);
    return median(e);
}

bool BenchmarkRow::all_converged(bool inf) const {
    return std::all_of(runs(*this, inf).begin(), runs(*this, inf).end(), [](const BenchRun& r) { return r.converged; });
}

std::vector<BenchmarkRow> run_benchmark(const std::vector<BenchInstance>& suite, int repeats, const SolveConfig& cfg,
                                        std::uint64_t seed) {
    if (repeats < 1) throw ConfigError("repeats must be >= 1");
    std::vector<BenchmarkRow> rows(suite.size());
    for (std::size_t i = 0; i < suite.size(); ++i) {
        const auto& inst = suite[i].instance;
        rows[i].id = suite[i].id;
        rows[i].pde_type = to_string(inst.pde_type);
        rows[i].true_solution = inst.true_u ? to_infix(*inst.true_u) : "";
        rows[i].informed.resize(static_cast<std::size_t>(repeats));
        rows[i].uninformed.resize(static_cast<std::size_t>(repeats));
        const auto ops = oracle_predict(inst, OperatorDictionary::full(inst.domain.dim));
        rows[i].informed_choices = build_search_space(ops, cfg.depth, inst.domain.dim).total_choices();
        rows[i].uninformed_choices = build_search_space(std::nullopt, cfg.depth, inst.domain.dim).total_choices();
    }
    const std::size_t per = static_cast<std::size_t>(repeats) * 2;
    SolveConfig inner = cfg;
    inner.threads = 1;
    parallel_for(suite.size() * per, cfg.threads, [&](std::size_t job) {
        const std::size_t i = job / per;
        const int r = static_cast<int>((job % per) / 2);
        const bool inf = job % 2 == 0;
        const auto& inst = suite[i].instance;
        SolveConfig c = inner;
        c.seed = seed + static_cast<std::uint64_t>(r);
        std::optional<OperatorSet> ops;
        if (inf) ops = oracle_predict(inst, OperatorDictionary::full(inst.domain.dim));
        const SolveTrace t = solve(inst, ops, c);
        BenchRun& out = (inf ? rows[i].informed : rows[i].uninformed)[static_cast<std::size_t>(r)];
        out.iterations = t.iterations;
        out.seconds = t.total_seconds;
        out.converged = t.converged;
        out.relative_l2 = t.relative_l2.value_or(NAN);
    });
    return rows;
}

std::string bench_csv(const std::vector<BenchmarkRow>& rows, bool include_timing) {
    std::ostringstream os;
    os.precision(10);
    os << "instance,pde_type,true_solution,informed_choices,uninformed_choices,iter_informed,iter_uninformed,"
          "converged_informed,converged_uninformed,err_informed,err_uninformed,iter_speedup";
    if (include_timing) os << ",time_informed_s,time_uninformed_s,time_speedup";
    os << '\n';
    for (const auto& r : rows) {
        os << r.id << ',' << r.pde_type << ",\"" << r.true_solution << "\"," << r.informed_choices << ','
           << r.uninformed_choices << ',' << r.mean_iterations(true) << ',' << r.mean_iterations(false) << ','
           << r.all_converged(true) << ',' << r.all_converged(false) << ',' << r.median_error(true) << ','
           << r.median_error(false) << ',' << r.iteration_speedup();
        if (include_timing) os << ',' << r.mean_seconds(true) << ',' << r.mean_seconds(false) << ',' << r.time_speedup();
        os << '\n';
    }
    return os.str();
}

std::string bench_summary(const std::vector<BenchmarkRow>& rows, bool include_timing) {
    std::ostringstream os;
    os.precision(6);
    for (const char* type : {"poisson", "conservation", "all"}) {
        std::vector<double> it, tm;
        for (const auto& r : rows) {
            if (std::string(type) != "all" && r.pde_type != type) continue;
            it.push_back(r.iteration_speedup());
            tm.push_back(r.time_speedup());
        }
        if (it.empty()) continue;
        os << type << ": instances=" << it.size() << " median_iter_speedup=" << median(it);
        if (include_timing) os << " median_time_speedup=" << median(tm);
        os << '\n';
    }
    return os.str();
}

// ---------------------------------------------------------------------------
// Command line

namespace {

struct Globals {
    std::uint64_t seed = 0;
    int threads = 1;
    std::string out;
};

std::string header_comment(const CLI::App& app, const std::string& command) {
    std::ostringstream os;
    os << "# fexkit " << command << '\n';
    std::istringstream cfg(app.config_to_str(true, false));
    std::string line;
    while (std::getline(cfg, line)) {
        const auto eq = line.find('=');
        const auto dot = line.find('.');
        const bool global = dot == std::string::npos || dot > eq;
        if (!line.empty() && (global || line.starts_with(command + "."))) os << "# " << line << '\n';
    }
    return os.str();
}

void write_file(const std::string& path, const std::string& content) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot write " + path);
    f << content;
    if (!f) throw IoError("write failed for " + path);
}

PointSet read_points(const std::string& path, int dim) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open points file " + path);
    PointSet p;
    p.dim = dim;
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
        ++n;
        if (line.empty() || line.front() == '#') continue;
        std::replace(line.begin(), line.end(), ',', ' ');
        const auto toks = split_tokens(line);
        if (toks.empty()) continue;
        if (!parse_number(toks.front())) continue;  // header row
        if (static_cast<int>(toks.size()) != dim) throw ParseError("expected " + std::to_string(dim) + " coordinates", n);
        for (const auto& t : toks) {
            auto v = parse_number(t);
            if (!v) throw ParseError("bad number '" + t + "'", n);
            p.coords.push_back(*v);
        }
    }
    return p;
}

DatasetRecord instance_record(const PdeInstance& inst, std::uint64_t seed) {
    DatasetRecord r;
    r.pde_type = inst.pde_type;
    r.bc_type = inst.bc_type;
    r.dim = inst.domain.dim;
    r.depth = 0;
    r.seed = seed;
    r.f_postfix = join_tokens(to_postfix(inst.f));
    r.g_postfix = boundary_data_to_postfix(inst.g);
    r.u_postfix = inst.true_u ? join_tokens(to_postfix(*inst.true_u)) : "";
    return r;
}

void add_solver_options(CLI::App* cmd, SolveConfig& cfg) {
    cmd->add_option("--depth", cfg.depth, "tree depth (unary layers)")->check(CLI::Range(1, 6))->capture_default_str();
    cmd->add_option("--batch", cfg.batch, "policy samples per iteration")->check(CLI::PositiveNumber)->capture_default_str();
    cmd->add_option("--eta", cfg.eta, "policy step size")->check(CLI::PositiveNumber)->capture_default_str();
    cmd->add_option("--t-max", cfg.t_max, "maximum iterations")->check(CLI::PositiveNumber)->capture_default_str();
    cmd->add_option("--reward-threshold", cfg.reward_threshold, "stopping reward")->capture_default_str();
    cmd->add_option("--inner-steps", cfg.inner.steps, "scalar fit steps per candidate")->capture_default_str();
    cmd->add_option("--final-steps", cfg.final_inner.steps, "scalar fit steps for the final refit")->capture_default_str();
    cmd->add_option("--screen-interior", cfg.screen.n_interior, "screening interior points")->capture_default_str();
    cmd->add_option("--screen-boundary", cfg.screen.n_boundary, "screening boundary points")->capture_default_str();
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"fexkit: symbolic PDE data, operator prediction and finite-expression solving"};
    app.require_subcommand(1, 1);
    Globals g;
    app.add_option("--seed", g.seed, "random seed")->capture_default_str();
    app.add_option("--threads", g.threads, "worker threads")->check(CLI::PositiveNumber)->capture_default_str();
    app.add_option("--out", g.out, "output path");

    // gen-data
    auto* gen = app.add_subcommand("gen-data", "generate a JSONL dataset")->fallthrough();
    int gen_n = 1000, gen_depth = 3, gen_dim = 3;
    std::string gen_types = "all";
    gen->add_option("--n", gen_n, "number of records")->check(CLI::NonNegativeNumber)->capture_default_str();
    gen->add_option("--depth", gen_depth, "tree depth")->check(CLI::Range(1, 6))->capture_default_str();
    gen->add_option("--dim", gen_dim, "dimension")->check(CLI::Range(1, 16))->capture_default_str();
    gen->add_option("--types", gen_types, "pde:bc list or 'all'")->capture_default_str();

    // train-predictor
    auto* train = app.add_subcommand("train-predictor", "train the baseline operator-set predictor")->fallthrough();
    std::string train_path;
    TrainConfig tcfg;
    train->add_option("--train", train_path, "training JSONL")->required();
    train->add_option("--epochs", tcfg.epochs)->check(CLI::NonNegativeNumber)->capture_default_str();
    train->add_option("--lr", tcfg.lr)->check(CLI::NonNegativeNumber)->capture_default_str();
    train->add_option("--l2", tcfg.l2)->check(CLI::NonNegativeNumber)->capture_default_str();

    // eval-predictor
    auto* evalp = app.add_subcommand("eval-predictor", "average mismatch of a predictor on a dataset")->fallthrough();
    std::string eval_data, eval_mode = "oracle", eval_model, eval_preds, eval_report = "csv";
    double eval_threshold = 0.5;
    evalp->add_option("--data", eval_data, "test JSONL")->required();
    evalp->add_option("--mode", eval_mode)->check(CLI::IsMember({"oracle", "baseline", "external"}))->capture_default_str();
    evalp->add_option("--model", eval_model, "baseline model JSON");
    evalp->add_option("--predictions", eval_preds, "external predictions JSONL");
    evalp->add_option("--threshold", eval_threshold)->capture_default_str();
    evalp->add_option("--report", eval_report)->check(CLI::IsMember({"csv", "summary"}))->capture_default_str();

    // solve
    auto* solvec = app.add_subcommand("solve", "solve one PDE instance")->fallthrough();
    std::string solve_instance, ops_from = "none";
    SolveConfig scfg;
    solvec->add_option("--instance", solve_instance, "instance JSON")->required();
    solvec->add_option("--ops-from", ops_from, "none | oracle | model.json | predictions.jsonl")->capture_default_str();
    add_solver_options(solvec, scfg);

    // bench
    auto* bench = app.add_subcommand("bench", "informed vs uninformed benchmark")->fallthrough();
    std::vector<std::string> bench_instances;
    int bench_repeats = 5;
    bool bench_no_timing = false;
    SolveConfig bcfg;
    bench->add_option("--instances", bench_instances, "instance JSON files (default: built-in suite)");
    bench->add_option("--repeats", bench_repeats)->check(CLI::PositiveNumber)->capture_default_str();
    bench->add_flag("--no-timing", bench_no_timing, "omit wall-time columns");
    add_solver_options(bench, bcfg);

    // oracle
    auto* oracle = app.add_subcommand("oracle", "walk-on-spheres verification")->fallthrough();
    std::string oracle_instance, oracle_points, oracle_candidate;
    WosConfig wcfg;
    oracle->add_option("--instance", oracle_instance, "instance JSON")->required();
    oracle->add_option("--points", oracle_points, "CSV of evaluation points");
    oracle->add_option("--candidate", oracle_candidate, "candidate postfix (default: true_u_postfix)");
    oracle->add_option("--paths", wcfg.paths)->check(CLI::PositiveNumber)->capture_default_str();
    oracle->add_option("--eps-shell", wcfg.eps_shell)->check(CLI::PositiveNumber)->capture_default_str();
    oracle->add_option("--max-steps", wcfg.max_steps)->check(CLI::PositiveNumber)->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        app.exit(e, out, err);
        return 0;
    } catch (const CLI::ParseError& e) {
        app.exit(e, out, err);
        return 2;
    }

    auto need_out = [&] {
        if (g.out.empty()) throw ConfigError("--out is required");
    };

    try {
        if (*gen) {
            need_out();
            const auto types = parse_type_list(gen_types);
            const auto recs = generate_dataset(gen_n, gen_depth, gen_dim, types, g.seed, g.threads);
            write_dataset(recs, g.out, header_comment(app, "gen-data"));
            out << "wrote " << recs.size() << " records to " << g.out << '\n';
        } else if (*train) {
            need_out();
            const auto recs = read_dataset(train_path);
            if (recs.empty()) throw DegenerateData("training set is empty");
            tcfg.seed = g.seed;
            tcfg.threads = g.threads;
            const auto model = train_baseline(recs, OperatorDictionary::default_fex(recs.front().dim), tcfg,
                                              [&](const std::string& w) { err << "warning: " << w << '\n'; });
            save_model(model, g.out);
            out << "trained on " << recs.size() << " records; final loss " << model.loss_history.back() << '\n';
        } else if (*evalp) {
            const auto recs = read_dataset(eval_data);
            if (recs.empty()) throw DegenerateData("test set is empty");
            const auto dict = OperatorDictionary::default_fex(recs.front().dim);
            PredictorModel model;
            if (eval_mode == "oracle") model = oracle_model(dict);
            else if (eval_mode == "baseline") {
                if (eval_model.empty()) throw ConfigError("--model is required for baseline mode");
                model = load_model(eval_model);
            } else {
                if (eval_preds.empty()) throw ConfigError("--predictions is required for external mode");
                model = load_external(eval_preds, dict);
            }
            const auto rep = evaluate_predictor(model, recs, eval_threshold, g.threads);
            std::ostringstream csv;
            csv << header_comment(app, "eval-predictor");
            csv << "# average_mismatch=" << rep.average_mismatch << " all_zeros_mismatch=" << rep.mean_label_cardinality
                << '\n';
            if (eval_report == "csv") {
                csv << "seed,mismatch\n";
                for (std::size_t i = 0; i < rep.seeds.size(); ++i) csv << rep.seeds[i] << ',' << rep.mismatches[i] << '\n';
            } else {
                csv << "token,tp,fp,fn,precision,recall\n";
                for (const auto& s : rep.per_operator)
                    csv << s.token << ',' << s.tp << ',' << s.fp << ',' << s.fn << ',' << s.precision() << ','
                        << s.recall() << '\n';
            }
            if (g.out.empty()) out << csv.str();
            else write_file(g.out, csv.str());
            out << "average_mismatch " << rep.average_mismatch << " (all-zeros " << rep.mean_label_cardinality << ")\n";
        } else if (*solvec) {
            const PdeInstance inst = load_instance(solve_instance);
            std::optional<OperatorSet> ops;
            const auto dict = OperatorDictionary::full(inst.domain.dim);
            if (ops_from == "oracle") {
                ops = oracle_predict(inst, dict);
            } else if (ops_from != "none") {
                const DatasetRecord rec = instance_record(inst, g.seed);
                const PredictorModel model =
                    ops_from.ends_with(".jsonl") ? load_external(ops_from, dict) : load_model(ops_from);
                ops = predict(model, rec);
            }
            scfg.seed = g.seed;
            scfg.threads = g.threads;
            const SearchSpace informed = build_search_space(ops, scfg.depth, inst.domain.dim);
            const SearchSpace uninformed = build_search_space(std::nullopt, scfg.depth, inst.domain.dim);
            err << "search space: " << informed.describe() << " (uninformed: " << uninformed.total_choices()
                << " choices)\n";
            const SolveTrace t = solve(inst, ops, scfg);
            out << "postfix: " << join_tokens(to_postfix(t.best)) << '\n';
            out << "infix: " << to_infix(t.best) << '\n';
            out << "iterations: " << t.iterations << " converged: " << (t.converged ? "yes" : "no")
                << " loss: " << t.best_loss << " seconds: " << t.total_seconds << '\n';
            if (t.relative_l2) out << "relative_l2: " << *t.relative_l2 << '\n';
            if (!g.out.empty()) write_file(g.out, header_comment(app, "solve") + "# wall_ms in milliseconds\n" + trace_csv(t));
        } else if (*bench) {
            std::vector<BenchInstance> suite;
            if (bench_instances.empty()) suite = acceptance_suite();
            for (const auto& p : bench_instances) suite.push_back({p, load_instance(p)});
            bcfg.threads = g.threads;
            const auto rows = run_benchmark(suite, bench_repeats, bcfg, g.seed);
            const std::string head = header_comment(app, "bench") + "# times in seconds\n";
            if (!g.out.empty()) write_file(g.out, head + bench_csv(rows, !bench_no_timing));
            else out << head << bench_csv(rows, !bench_no_timing);
            out << bench_summary(rows, !bench_no_timing);
        } else if (*oracle) {
            const PdeInstance inst = load_instance(oracle_instance);
            Expression cand = Expression::constant(0.0);
            if (!oracle_candidate.empty()) {
                OperatorDictionary dict = OperatorDictionary::full(inst.domain.dim);
                cand = parse_postfix(split_tokens(oracle_candidate), dict);
            } else if (inst.true_u) {
                cand = *inst.true_u;
            } else {
                throw ConfigError("--candidate is required when the instance has no true_u_postfix");
            }
            PointSet pts;
            if (!oracle_points.empty()) {
                pts = read_points(oracle_points, inst.domain.dim);
            } else {
                pts = sample_interior(inst.domain, 20, g.seed);
                for (auto& v : pts.coords) v *= 0.9;
            }
            wcfg.seed = g.seed;
            wcfg.threads = g.threads;
            const VerifyReport rep = verify_solution(cand, inst, pts, wcfg);
            std::ostringstream csv;
            csv.precision(12);
            csv << header_comment(app, "oracle");
            for (int k = 1; k <= inst.domain.dim; ++k) csv << 'x' << k << ',';
            csv << "candidate,wos_mean,wos_stderr,z,flagged\n";
            for (std::size_t i = 0; i < pts.size(); ++i) {
                for (double v : pts.point(i)) csv << v << ',';
                csv << rep.candidate[i] << ',' << rep.estimates[i].mean << ',' << rep.estimates[i].stderr_ << ','
                    << rep.z[i] << ',' << int(rep.flagged[i]) << '\n';
            }
            if (g.out.empty()) out << csv.str();
            else write_file(g.out, csv.str());
            out << (rep.any_flagged() ? "FLAGGED" : "ok") << " max_scaled_diff " << rep.max_scaled_diff << '\n';
        }
    } catch (const ConfigError& e) {
        err << "error: " << e.what() << '\n';
        return 2;
    } catch (const IoError& e) {
        err << "error: " << e.what() << '\n';
        return 3;
    } catch (const ParseError& e) {
        err << "error: " << e.what() << '\n';
        return 3;
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return 4;
    } catch (const std::invalid_argument& e) {
        err << "error: " << e.what() << '\n';
        return 2;
    }
    return 0;
}

}  // namespace fexkit
