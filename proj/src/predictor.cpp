#include "fexkit/predictor.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "fexkit/parallel.hpp"

namespace fexkit {

using nlohmann::ordered_json;

OperatorSet postprocess(const TokenSequence& raw, const OperatorDictionary& dictionary) {
    std::vector<std::string> keep;
    for (const auto& t : raw)
        if (!parse_number(t) && dictionary.contains(t)) keep.push_back(t);
    return make_operator_set(std::move(keep));
}

OperatorSet label_set(const DatasetRecord& record) { return extract_operator_set(split_tokens(record.u_postfix)); }

namespace {

OperatorSet oracle_core(const OperatorSet& f_ops, const OperatorSet& g_ops, DomainKind kind,
                        const OperatorDictionary& dictionary) {
    OperatorSet s = set_union(f_ops, g_ops);
    std::vector<std::string> extra = {"+", "*", "^2"};
    if (kind == DomainKind::UnitBox) {
        extra.emplace_back("ABS");
    } else {
        extra.emplace_back("SQRT");
    }
    s = set_union(s, make_operator_set(std::move(extra)));
    return set_intersection(s, dictionary.tokens());
}

}  // namespace

OperatorSet oracle_predict(const DatasetRecord& record, const OperatorDictionary& dictionary) {
    return oracle_core(extract_operator_set(split_tokens(record.f_postfix)),
                       extract_operator_set(split_tokens(record.g_postfix)), DomainKind::UnitBox, dictionary);
}

OperatorSet oracle_predict(const PdeInstance& instance, const OperatorDictionary& dictionary) {
    return oracle_core(extract_operator_set(instance.f), instance.g.operator_set(), instance.domain.kind, dictionary);
}

// ---------------------------------------------------------------------------
// Features

FeatureMap::FeatureMap(std::vector<std::string> tokens) : tokens_(std::move(tokens)) {
    for (std::size_t i = 0; i < tokens_.size(); ++i) {
        if (!index_.emplace(tokens_[i], static_cast<std::uint32_t>(i)).second)
            throw ConfigError("duplicate feature token " + tokens_[i]);
    }
}

std::vector<std::string> FeatureMap::prompt_tokens(const DatasetRecord& record) {
    std::vector<std::string> out;
    for (auto& t : split_tokens(render_prompt(record).prompt)) {
        if (t == "|" || t == "Solution:" || t.starts_with("Type:") || t.starts_with("BC_Type:")) continue;
        if (t.starts_with("RHS:")) t.erase(0, 4);
        else if (t.starts_with("BC:")) t.erase(0, 3);
        if (!t.empty()) out.push_back(std::move(t));
    }
    return out;
}

FeatureMap FeatureMap::build(const std::vector<DatasetRecord>& records) {
    std::map<std::string, int> seen;
    for (const auto& r : records)
        for (auto& t : prompt_tokens(r)) seen.emplace(std::move(t), 0);
    std::vector<std::string> tokens;
    tokens.reserve(seen.size());
    for (auto& [t, _] : seen) tokens.push_back(t);
    return FeatureMap(std::move(tokens));
}

std::vector<std::uint32_t> FeatureMap::featurize(const DatasetRecord& record) const {
    std::vector<std::uint32_t> idx;
    for (const auto& t : prompt_tokens(record)) {
        auto it = index_.find(t);
        if (it != index_.end()) idx.push_back(it->second);
    }
    const auto base = static_cast<std::uint32_t>(tokens_.size());
    idx.push_back(base + (record.pde_type == PdeType::Poisson ? 0u : 1u));
    idx.push_back(base + 2u + static_cast<std::uint32_t>(record.bc_type));
    std::sort(idx.begin(), idx.end());
    idx.erase(std::unique(idx.begin(), idx.end()), idx.end());
    return idx;
}

std::string to_string(PredictorKind k) {
    switch (k) {
        case PredictorKind::Oracle: return "oracle";
        case PredictorKind::Baseline: return "baseline";
        case PredictorKind::External: return "external";
    }
    return "oracle";
}

// ---------------------------------------------------------------------------
// Baseline

namespace {

inline double sigmoid(double z) {
    if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

// log(1 + exp(z)) without overflow.
inline double softplus(double z) { return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

struct SparseRows {
    std::vector<std::vector<std::uint32_t>> idx;
    std::vector<double> scale;  // 1/sqrt(nnz), the value of every active feature in the row
};

SparseRows featurize_all(const FeatureMap& fm, const std::vector<DatasetRecord>& records, int threads) {
    SparseRows rows;
    rows.idx.resize(records.size());
    rows.scale.resize(records.size());
    parallel_for(records.size(), threads, [&](std::size_t i) {
        rows.idx[i] = fm.featurize(records[i]);
        rows.scale[i] = 1.0 / std::sqrt(static_cast<double>(rows.idx[i].size()));
    });
    return rows;
}

std::vector<std::uint8_t> label_matrix(const std::vector<DatasetRecord>& records, const OperatorDictionary& output,
                                       int threads) {
    const std::size_t L = output.size();
    std::vector<std::uint8_t> Y(records.size() * L, 0);
    parallel_for(records.size(), threads, [&](std::size_t i) {
        for (const auto& t : label_set(records[i])) {
            if (auto k = output.index_of(t)) Y[i * L + *k] = 1;
        }
    });
    return Y;
}

}  // namespace

std::vector<double> PredictorModel::probabilities(const DatasetRecord& record) const {
    if (kind != PredictorKind::Baseline) throw ConfigError("probabilities are only defined for the baseline model");
    const auto idx = features.featurize(record);
    const double s = 1.0 / std::sqrt(static_cast<double>(idx.size()));
    const std::size_t F = features.dimension();
    std::vector<double> p(output.size(), 0.0);
    for (std::size_t l = 0; l < output.size(); ++l) {
        if (!active[l]) continue;
        double z = b[l];
        for (auto j : idx) z += W[l * F + j] * s;
        p[l] = sigmoid(z);
    }
    return p;
}

PredictorModel train_baseline(const std::vector<DatasetRecord>& train, const OperatorDictionary& output,
                              const TrainConfig& cfg, const std::function<void(const std::string&)>& warn) {
    if (train.empty()) throw DegenerateData("empty training set");
    if (cfg.epochs < 0 || !(cfg.lr >= 0.0) || !(cfg.l2 >= 0.0)) throw ConfigError("invalid training configuration");
    PredictorModel m;
    m.kind = PredictorKind::Baseline;
    m.output = output;
    m.features = FeatureMap::build(train);
    const std::size_t N = train.size();
    const std::size_t L = output.size();
    const std::size_t F = m.features.dimension();
    const SparseRows X = featurize_all(m.features, train, cfg.threads);
    const std::vector<std::uint8_t> Y = label_matrix(train, output, cfg.threads);

    m.active.assign(L, 1);
    std::size_t kept = 0;
    for (std::size_t l = 0; l < L; ++l) {
        bool any = false;
        for (std::size_t i = 0; i < N && !any; ++i) any = Y[i * L + l] != 0;
        if (!any) {
            m.active[l] = 0;
            if (warn) warn("label '" + output.token(l) + "' never occurs in the training data; column dropped");
        } else {
            ++kept;
        }
    }
    if (kept == 0) throw DegenerateData("every label column is constant zero");

    m.W.assign(L * F, 0.0);
    m.b.assign(L, 0.0);
    // Each label is an independent logistic regression; losses per epoch are summed afterwards.
    std::vector<std::vector<double>> label_loss(L, std::vector<double>(static_cast<std::size_t>(cfg.epochs) + 1, 0.0));
    const double invN = 1.0 / static_cast<double>(N);
    parallel_for(L, cfg.threads, [&](std::size_t l) {
        if (!m.active[l]) return;
        double* w = m.W.data() + l * F;
        double& bias = m.b[l];
        std::vector<double> gw(F);
        for (int e = 0; e <= cfg.epochs; ++e) {
            std::fill(gw.begin(), gw.end(), 0.0);
            double gb = 0.0;
            double loss = 0.0;
            for (std::size_t i = 0; i < N; ++i) {
                const double s = X.scale[i];
                double z = bias;
                for (auto j : X.idx[i]) z += w[j] * s;
                const double y = Y[i * L + l];
                loss += softplus(z) - y * z;
                const double r = sigmoid(z) - y;
                gb += r;
                for (auto j : X.idx[i]) gw[j] += r * s;
            }
            double reg = 0.0;
            for (std::size_t j = 0; j < F; ++j) reg += w[j] * w[j];
            label_loss[l][static_cast<std::size_t>(e)] = loss * invN + 0.5 * cfg.l2 * reg;
            if (e == cfg.epochs) break;
            for (std::size_t j = 0; j < F; ++j) w[j] -= cfg.lr * (gw[j] * invN + cfg.l2 * w[j]);
            bias -= cfg.lr * gb * invN;
        }
    });
    m.loss_history.assign(static_cast<std::size_t>(cfg.epochs) + 1, 0.0);
    for (std::size_t l = 0; l < L; ++l)
        for (std::size_t e = 0; e < m.loss_history.size(); ++e) m.loss_history[e] += label_loss[l][e];
    return m;
}

PredictorModel oracle_model(const OperatorDictionary& output) {
    PredictorModel m;
    m.kind = PredictorKind::Oracle;
    m.output = output;
    return m;
}

PredictorModel load_external(const std::string& path, const OperatorDictionary& output) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open predictions file " + path);
    PredictorModel m;
    m.kind = PredictorKind::External;
    m.output = output;
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
        ++n;
        if (line.empty() || line.front() == '#') continue;
        try {
            const auto j = ordered_json::parse(line);
            m.external[j.at("seed").get<std::uint64_t>()] =
                postprocess(j.at("ops").get<std::vector<std::string>>(), output);
        } catch (const ordered_json::exception& e) {
            throw ParseError(e.what(), n);
        }
    }
    return m;
}

OperatorSet predict(const PredictorModel& model, const DatasetRecord& record, double threshold) {
    switch (model.kind) {
        case PredictorKind::Oracle: return oracle_predict(record, model.output);
        case PredictorKind::External: {
            auto it = model.external.find(record.seed);
            if (it == model.external.end())
                throw MissingExternalPrediction("no prediction for seed " + std::to_string(record.seed));
            return it->second;
        }
        case PredictorKind::Baseline: {
            const auto p = model.probabilities(record);
            std::vector<std::string> out;
            for (std::size_t l = 0; l < p.size(); ++l)
                if (model.active[l] && p[l] >= threshold) out.push_back(model.output.token(l));
            return make_operator_set(std::move(out));
        }
    }
    return {};
}

void save_model(const PredictorModel& model, const std::string& path) {
    ordered_json j;
    j["kind"] = to_string(model.kind);
    j["output_dictionary"] = model.output.tokens();
    if (model.kind == PredictorKind::Baseline) {
        j["feature_dictionary"] = model.features.tokens();
        j["active"] = model.active;
        j["W"] = model.W;
        j["b"] = model.b;
        j["loss_history"] = model.loss_history;
    }
    std::ofstream out(path);
    if (!out) throw IoError("cannot write model " + path);
    out << j.dump() << '\n';
    if (!out) throw IoError("write failed for " + path);
}

PredictorModel load_model(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open model " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    try {
        const auto j = ordered_json::parse(ss.str());
        const std::string kind = j.at("kind").get<std::string>();
        PredictorModel m;
        m.output = OperatorDictionary(j.at("output_dictionary").get<std::vector<std::string>>());
        if (kind == "oracle") {
            m.kind = PredictorKind::Oracle;
            return m;
        }
        if (kind != "baseline") throw ConfigError("unsupported model kind '" + kind + "'");
        m.kind = PredictorKind::Baseline;
        m.features = FeatureMap(j.at("feature_dictionary").get<std::vector<std::string>>());
        m.active = j.at("active").get<std::vector<std::uint8_t>>();
        m.W = j.at("W").get<std::vector<double>>();
        m.b = j.at("b").get<std::vector<double>>();
        m.loss_history = j.value("loss_history", std::vector<double>{});
        if (m.active.size() != m.output.size() || m.b.size() != m.output.size() ||
            m.W.size() != m.output.size() * m.features.dimension())
            throw ConfigError("model arrays have inconsistent sizes");
        return m;
    } catch (const ordered_json::exception& e) {
        throw ConfigError(std::string("invalid model file: ") + e.what());
    }
}

PredictionReport evaluate_predictor(const PredictorModel& model, const std::vector<DatasetRecord>& test,
                                    double threshold, int threads) {
    PredictionReport rep;
    const OperatorDictionary& dict = model.output;
    const std::size_t L = dict.size();
    std::vector<OperatorSetVector> truth(test.size()), pred(test.size());
    parallel_for(test.size(), threads, [&](std::size_t i) {
        truth[i] = encode_operator_set(set_intersection(label_set(test[i]), dict.tokens()), dict);
        pred[i] = encode_operator_set(predict(model, test[i], threshold), dict);
    });
    rep.per_operator.resize(L);
    for (std::size_t l = 0; l < L; ++l) rep.per_operator[l].token = dict.token(l);
    double sum = 0.0, card = 0.0;
    for (std::size_t i = 0; i < test.size(); ++i) {
        rep.seeds.push_back(test[i].seed);
        const int mm = mismatch(truth[i], pred[i]);
        rep.mismatches.push_back(mm);
        sum += mm;
        for (std::size_t l = 0; l < L; ++l) {
            const bool t = truth[i].bits[l], p = pred[i].bits[l];
            card += t;
            if (t && p) ++rep.per_operator[l].tp;
            else if (p) ++rep.per_operator[l].fp;
            else if (t) ++rep.per_operator[l].fn;
        }
    }
    if (!test.empty()) {
        rep.average_mismatch = sum / static_cast<double>(test.size());
        rep.mean_label_cardinality = card / static_cast<double>(test.size());
    }
    return rep;
}

}  // namespace fexkit
