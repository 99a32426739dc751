#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "fexkit/cli.hpp"
#include "fexkit/datagen.hpp"

using namespace fexkit;

namespace {

std::string temp_path(const std::string& name) {
    return (std::filesystem::temp_directory_path() / ("fexkit_cli_" + name)).string();
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

struct Result {
    int code;
    std::string out;
    std::string err;
};

Result run(std::vector<std::string> args) {
    args.insert(args.begin(), "fexkit");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
    return {code, out.str(), err.str()};
}

std::string drop_comments(const std::string& s) {
    std::istringstream in(s);
    std::string line, kept;
    while (std::getline(in, line))
        if (!line.starts_with("#")) kept += line + '\n';
    return kept;
}

// Small solver budget for end-to-end runs.
const std::vector<std::string> quick = {"--t-max", "3", "--batch", "4", "--screen-interior", "64", "--screen-boundary",
                                        "32", "--inner-steps", "10", "--final-steps", "20"};

std::vector<std::string> with(std::vector<std::string> a, const std::vector<std::string>& b) {
    a.insert(a.end(), b.begin(), b.end());
    return a;
}

}  // namespace

TEST_CASE("usage errors") {
    CHECK(run({}).code == 2);
    CHECK(run({"no-such-command"}).code == 2);
    CHECK(run({"--help"}).code == 0);
    CHECK(run({"gen-data", "--n", "3"}).code == 2);  // no --out
    CHECK(run({"gen-data", "--types", "heat:dirichlet", "--out", temp_path("x.jsonl")}).code == 2);
    CHECK(run({"solve"}).code == 2);
    CHECK(run({"solve", "--instance", temp_path("missing.json")}).code == 3);
    CHECK(run({"eval-predictor", "--data", temp_path("missing.jsonl")}).code == 3);
}

TEST_CASE("gen-data is deterministic") {
    const std::string a = temp_path("a.jsonl"), b = temp_path("b.jsonl");
    REQUIRE(run({"--seed", "4", "gen-data", "--n", "40", "--out", a}).code == 0);
    REQUIRE(run({"gen-data", "--n", "40", "--out", b, "--seed", "4", "--threads", "3"}).code == 0);
    CHECK(drop_comments(slurp(a)) == drop_comments(slurp(b)));
    // The same command twice: byte-identical, header included.
    REQUIRE(run({"gen-data", "--n", "10", "--seed", "1", "--out", b}).code == 0);
    const std::string first = slurp(b);
    REQUIRE(run({"gen-data", "--n", "10", "--seed", "1", "--out", b}).code == 0);
    CHECK(slurp(b) == first);
    CHECK(read_dataset(a).size() == 40);
    CHECK(slurp(a).starts_with("# fexkit gen-data\n"));

    REQUIRE(run({"gen-data", "--n", "10", "--types", "conservation:cauchy", "--out", a}).code == 0);
    for (const auto& r : read_dataset(a)) {
        CHECK(r.pde_type == PdeType::Conservation);
        CHECK(r.bc_type == BcType::Cauchy);
    }
    std::remove(a.c_str());
    std::remove(b.c_str());
}

TEST_CASE("train and evaluate on disjoint splits") {
    const std::string tr = temp_path("train.jsonl"), te = temp_path("test.jsonl"), model = temp_path("model.json");
    REQUIRE(run({"gen-data", "--n", "300", "--seed", "1", "--out", tr}).code == 0);
    REQUIRE(run({"gen-data", "--n", "100", "--seed", "100000", "--out", te}).code == 0);
    const Result t = run({"train-predictor", "--train", tr, "--epochs", "50", "--out", model});
    REQUIRE(t.code == 0);
    CHECK(t.out.starts_with("trained on 300 records"));

    const Result base = run({"eval-predictor", "--data", te, "--mode", "baseline", "--model", model});
    REQUIRE(base.code == 0);
    CHECK(base.out.find("seed,mismatch\n") != std::string::npos);

    const Result orc = run({"eval-predictor", "--data", te, "--mode", "oracle", "--report", "summary"});
    REQUIRE(orc.code == 0);
    CHECK(orc.out.find("token,tp,fp,fn,precision,recall\n") != std::string::npos);

    // The oracle line matches the library evaluation.
    const auto recs = read_dataset(te);
    const auto rep = evaluate_predictor(oracle_model(OperatorDictionary::default_fex(3)), recs);
    std::ostringstream want;
    want << "average_mismatch " << rep.average_mismatch << " (all-zeros " << rep.mean_label_cardinality << ")\n";
    CHECK(orc.out.ends_with(want.str()));

    CHECK(run({"eval-predictor", "--data", te, "--mode", "baseline"}).code == 2);
    CHECK(run({"eval-predictor", "--data", te, "--mode", "bogus"}).code == 2);
    for (const auto& p : {tr, te, model}) std::remove(p.c_str());
}

TEST_CASE("solve with oracle and uninformed operator sets") {
    const auto suite = acceptance_suite();
    REQUIRE(suite.size() == 10);
    const std::string inst = temp_path("inst.json"), trace = temp_path("trace.csv");
    save_instance(suite[1].instance, inst);

    const Result inf = run(with({"solve", "--instance", inst, "--ops-from", "oracle", "--out", trace}, quick));
    REQUIRE(inf.code == 0);
    CHECK(inf.out.find("postfix: ") == 0);
    CHECK(inf.out.find("relative_l2: ") != std::string::npos);
    CHECK(drop_comments(slurp(trace)).starts_with("iter,best_reward,mean_reward,grad_norm,stat_proxy,wall_ms\n"));

    const Result uninf = run(with({"solve", "--instance", inst}, quick));
    REQUIRE(uninf.code == 0);
    // "search space: ... N choices) (uninformed: M choices)"
    auto choices = [](const std::string& e) {
        const auto p = e.find("uninformed: ");
        return std::stoul(e.substr(p + 12));
    };
    const auto dict = OperatorDictionary::full(3);
    CHECK(build_search_space(oracle_predict(suite[1].instance, dict), 2, 3).total_choices() <= choices(inf.err));
    CHECK(choices(uninf.err) == 36);
    std::remove(inst.c_str());
    std::remove(trace.c_str());
}

TEST_CASE("bench CSV is deterministic without timing") {
    const std::string inst = temp_path("bench_inst.json");
    save_instance(acceptance_suite()[0].instance, inst);
    const auto args = with({"bench", "--instances", inst, "--repeats", "1", "--no-timing", "--seed", "3"}, quick);
    const Result a = run(args), b = run(args);
    REQUIRE(a.code == 0);
    CHECK(a.out == b.out);
    const std::string csv = drop_comments(a.out);
    CHECK(csv.starts_with("instance,pde_type,true_solution,informed_choices,uninformed_choices,iter_informed,"
                          "iter_uninformed,converged_informed,converged_uninformed,err_informed,err_uninformed,"
                          "iter_speedup\n"));
    CHECK(std::count(csv.begin(), csv.end(), '\n') >= 2);
    std::remove(inst.c_str());
}

TEST_CASE("oracle verification") {
    const std::string inst = temp_path("oracle_inst.json"), pts = temp_path("points.csv");
    save_instance(acceptance_suite()[0].instance, inst);
    std::ofstream(pts) << "x1,x2,x3\n0.1,0.2,0.3\n-0.5,0.0,0.4\n";
    const Result ok = run({"oracle", "--instance", inst, "--points", pts, "--paths", "4000", "--seed", "2"});
    REQUIRE(ok.code == 0);
    CHECK(ok.out.find("x1,x2,x3,candidate,wos_mean,wos_stderr,z,flagged\n") != std::string::npos);
    CHECK(ok.out.find("\nok max_scaled_diff") != std::string::npos);

    const Result bad = run({"oracle", "--instance", inst, "--points", pts, "--paths", "4000", "--candidate", "x1 x2 +"});
    REQUIRE(bad.code == 0);
    CHECK(bad.out.find("FLAGGED") != std::string::npos);

    std::ofstream(pts) << "x1,x2,x3\n1.5,0,0\n";
    CHECK(run({"oracle", "--instance", inst, "--points", pts}).code != 0);

    const std::string cons = temp_path("oracle_cons.json");
    save_instance(acceptance_suite()[5].instance, cons);
    CHECK(run({"oracle", "--instance", cons, "--paths", "10"}).code == 2);
    for (const auto& p : {inst, pts, cons}) std::remove(p.c_str());
}
