#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>

#include "fexkit/predictor.hpp"

using namespace fexkit;

namespace {

std::string temp_path(const std::string& name) {
    return (std::filesystem::temp_directory_path() / ("fexkit_test_" + name)).string();
}

DatasetRecord record(PdeType p, BcType b, const char* f, const char* g, const char* u, std::uint64_t seed = 0) {
    DatasetRecord r;
    r.pde_type = p;
    r.bc_type = b;
    r.f_postfix = f;
    r.g_postfix = g;
    r.u_postfix = u;
    r.seed = seed;
    return r;
}

const auto dict = OperatorDictionary::default_fex(3);

}  // namespace

TEST_CASE("postprocess keeps dictionary tokens only") {
    CHECK(postprocess(split_tokens("x1 SIN SIN x1 3"), dict) == OperatorSet{"x1", "SIN"});
    CHECK(postprocess(split_tokens("x1 SNI"), dict) == OperatorSet{"x1"});
    CHECK(postprocess(split_tokens("<EOS> 2.5 FACE:1"), dict).empty());

    std::mt19937_64 rng(4);
    const std::vector<std::string> junk = {"x1", "x9", "SIN", "sin", "^2", "^5", "+", "/", "-0.5", "LN", "EXP", "", "*"};
    for (int i = 0; i < 500; ++i) {
        TokenSequence raw;
        for (int k = 0; k < 8; ++k) raw.push_back(junk[rng() % junk.size()]);
        for (const auto& t : postprocess(raw, dict)) CHECK(dict.contains(t));
    }
}

TEST_CASE("oracle operator sets") {
    const auto full = OperatorDictionary::full(3);
    const DatasetRecord r = record(PdeType::Poisson, BcType::Dirichlet, "-6", "x1 ^2 x2 ^2 + x3 ^2 +", "x1 ^2 x2 ^2 + x3 ^2 +");
    CHECK(oracle_predict(r, full) == make_operator_set({"x1", "x2", "x3", "^2", "+", "*", "ABS"}));
    // ABS is outside the default dictionary.
    CHECK(oracle_predict(r, dict) == make_operator_set({"x1", "x2", "x3", "^2", "+", "*"}));

    const DatasetRecord t = record(PdeType::Conservation, BcType::Dirichlet, "x2 COS", "x2 SIN", "x2 SIN");
    const auto s = oracle_predict(t, dict);
    CHECK(std::find(s.begin(), s.end(), "COS") != s.end());
    CHECK(std::find(s.begin(), s.end(), "SIN") != s.end());
}

TEST_CASE("features") {
    const DatasetRecord r = record(PdeType::Poisson, BcType::Neumann, "x1 SIN", "x1 COS FACE:1 x2", "x1 SIN");
    CHECK(FeatureMap::prompt_tokens(r) == std::vector<std::string>{"x1", "SIN", "x1", "COS", "FACE:1", "x2"});
    const FeatureMap fm = FeatureMap::build({r});
    CHECK(fm.tokens() == std::vector<std::string>{"COS", "FACE:1", "SIN", "x1", "x2"});
    CHECK(fm.dimension() == 10);
    const auto idx = fm.featurize(r);
    CHECK(std::find(idx.begin(), idx.end(), 2u) != idx.end());  // SIN
    // one-hot: poisson = 5, neumann = 7 + 1
    CHECK(idx == std::vector<std::uint32_t>{0, 1, 2, 3, 4, 5, 8});

    DatasetRecord twin = r;
    twin.u_postfix = "x2";
    twin.seed = 9;
    CHECK(fm.featurize(twin) == idx);
}

TEST_CASE("training memorizes a single record") {
    const DatasetRecord r = record(PdeType::Poisson, BcType::Dirichlet, "x1 SIN -1 *", "x1 SIN x2 *", "x1 SIN x2 *");
    std::vector<std::string> warnings;
    TrainConfig cfg;
    cfg.epochs = 200;
    const PredictorModel m = train_baseline({r}, dict, cfg, [&](const std::string& w) { warnings.push_back(w); });
    CHECK(predict(m, r) == label_set(r));
    CHECK(evaluate_predictor(m, {r}).average_mismatch == 0.0);
    CHECK(warnings.size() == dict.size() - label_set(r).size());
    CHECK(predict(m, r, 1.0 + 1e-9).empty());
}

TEST_CASE("zero learning rate leaves the weights at zero") {
    const auto recs = generate_dataset(50, 2, 3, parse_type_list("all"), 3);
    TrainConfig cfg;
    cfg.lr = 0.0;
    cfg.epochs = 20;
    const PredictorModel m = train_baseline(recs, dict, cfg);
    for (double w : m.W) CHECK(w == 0.0);
    for (double b : m.b) CHECK(b == 0.0);
    CHECK(m.loss_history.size() == 21);
    CHECK(m.loss_history.front() == m.loss_history.back());
}

TEST_CASE("training loss is non-increasing for small steps") {
    const auto recs = generate_dataset(400, 3, 3, parse_type_list("all"), 17);
    for (double lr : {1e-3, 1e-2}) {
        TrainConfig cfg;
        cfg.lr = lr;
        cfg.epochs = 100;
        const PredictorModel m = train_baseline(recs, dict, cfg);
        for (std::size_t e = 1; e < m.loss_history.size(); ++e) CHECK(m.loss_history[e] <= m.loss_history[e - 1]);
        CHECK(m.loss_history.back() < m.loss_history.front());
    }
}

TEST_CASE("degenerate training data") {
    CHECK_THROWS_AS(train_baseline({}, dict, TrainConfig{}), DegenerateData);
    const DatasetRecord r = record(PdeType::Poisson, BcType::Dirichlet, "-2", "7", "LN");
    CHECK_THROWS_AS(train_baseline({r}, OperatorDictionary({"COS"}), TrainConfig{}), DegenerateData);
}

TEST_CASE("evaluation report") {
    const auto test = generate_dataset(100, 3, 3, parse_type_list("all"), 50);
    PredictorModel perfect;
    perfect.kind = PredictorKind::External;
    perfect.output = dict;
    PredictorModel zeros = perfect;
    for (const auto& r : test) {
        perfect.external[r.seed] = set_intersection(label_set(r), dict.tokens());
        zeros.external[r.seed] = {};
    }
    const auto rp = evaluate_predictor(perfect, test);
    CHECK(rp.average_mismatch == 0.0);
    const auto rz = evaluate_predictor(zeros, test);
    CHECK(rz.average_mismatch == doctest::Approx(rz.mean_label_cardinality).epsilon(1e-15));
    CHECK(rz.mean_label_cardinality > 0.0);

    const auto ro = evaluate_predictor(oracle_model(dict), test);
    CHECK(ro.mismatches.size() == 100);
    for (std::size_t i = 0; i < test.size(); ++i) {
        CHECK(ro.mismatches[i] >= 0);
        CHECK(predict(oracle_model(dict), test[i]) == oracle_predict(test[i], dict));
    }
    int tp = 0;
    for (const auto& s : rp.per_operator) {
        CHECK(s.fp == 0);
        CHECK(s.fn == 0);
        tp += s.tp;
    }
    CHECK(tp == static_cast<int>(std::lround(rp.mean_label_cardinality * 100)));

    PredictorModel missing = zeros;
    missing.external.erase(test.front().seed);
    CHECK_THROWS_AS(evaluate_predictor(missing, test), MissingExternalPrediction);
}

TEST_CASE("regression baseline on the default split") {
    // 2000 training / 500 held-out records, default training configuration.
    const auto train = generate_dataset(2000, 3, 3, parse_type_list("all"), 1);
    const auto test = generate_dataset(500, 3, 3, parse_type_list("all"), 1000000);
    const PredictorModel m = train_baseline(train, dict, TrainConfig{});
    const auto rep = evaluate_predictor(m, test);
    CHECK(rep.average_mismatch < rep.mean_label_cardinality);
    CHECK(rep.average_mismatch == doctest::Approx(1.108).epsilon(0.10));
}

TEST_CASE("model and prediction files") {
    const auto recs = generate_dataset(60, 2, 3, parse_type_list("all"), 8);
    TrainConfig cfg;
    cfg.epochs = 30;
    const PredictorModel m = train_baseline(recs, dict, cfg);
    const std::string path = temp_path("model.json");
    save_model(m, path);
    const PredictorModel back = load_model(path);
    CHECK(back.W == m.W);
    CHECK(back.b == m.b);
    CHECK(back.active == m.active);
    for (const auto& r : recs) CHECK(predict(back, r) == predict(m, r));

    const std::string ext = temp_path("preds.jsonl");
    std::ofstream(ext) << "# comment\n"
                       << R"({"seed": 8, "ops": ["x1", "SIN", "SNI", "3"]})" << '\n'
                       << R"({"seed": 9, "ops": []})" << '\n';
    const PredictorModel e = load_external(ext, dict);
    CHECK(predict(e, recs[0]) == OperatorSet{"x1", "SIN"});
    CHECK(predict(e, recs[1]).empty());
    CHECK_THROWS_AS(predict(e, recs[2]), MissingExternalPrediction);

    std::ofstream(ext) << "{\"seed\": 1}\n";
    CHECK_THROWS_AS(load_external(ext, dict), ParseError);
    CHECK_THROWS_AS(load_model(temp_path("no_such_model.json")), IoError);
    std::remove(path.c_str());
    std::remove(ext.c_str());
}

TEST_CASE("oracle coverage on generated Poisson records") {
    const auto full = OperatorDictionary::full(3);
    const auto recs = generate_dataset(1000, 3, 3, parse_type_list("poisson:dirichlet,poisson:neumann,poisson:cauchy"), 600);
    int superset = 0, eligible = 0;
    for (const auto& r : recs) {
        const OperatorSet pred = oracle_predict(r, full);
        const OperatorSet lab = label_set(r);
        const bool covers = set_intersection(lab, pred) == lab;
        superset += covers;
        const OperatorSet base = set_union(set_union(extract_operator_set(split_tokens(r.f_postfix)),
                                                     extract_operator_set(split_tokens(r.g_postfix))),
                                           make_operator_set({"+", "*", "^2"}));
        if (set_intersection(lab, base) == lab) {
            ++eligible;
            CHECK(covers);
        }
    }
    MESSAGE("oracle superset rate " << superset / 1000.0 << " (" << eligible << " records eligible by construction)");
    CHECK(eligible > 0);
}
