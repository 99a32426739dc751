#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "fexkit/datagen.hpp"

namespace fexkit {

/// Deduplicated dictionary tokens of a raw token stream; numbers and
/// unknown or misspelled tokens are dropped.
OperatorSet postprocess(const TokenSequence& raw, const OperatorDictionary& dictionary);

/// Label set of a record: operator set of its solution.
OperatorSet label_set(const DatasetRecord& record);

/// ops(f) + ops(g) + {+, *, ^2} + ops(distance function), restricted to the dictionary.
OperatorSet oracle_predict(const DatasetRecord& record, const OperatorDictionary& dictionary);
OperatorSet oracle_predict(const PdeInstance& instance, const OperatorDictionary& dictionary);

/// Sparse bag-of-tokens encoding of a record's prompt.
class FeatureMap {
  public:
    FeatureMap() = default;
    explicit FeatureMap(std::vector<std::string> tokens);
    static FeatureMap build(const std::vector<DatasetRecord>& records);

    /// Prompt tokens with the "RHS:" / "BC:" prefixes stripped and the frame removed.
    static std::vector<std::string> prompt_tokens(const DatasetRecord& record);

    /// Sorted indices of active features (token features first, then one-hot
    /// pde type (2) and boundary type (3)).
    std::vector<std::uint32_t> featurize(const DatasetRecord& record) const;
    std::size_t dimension() const { return tokens_.size() + 5; }
    const std::vector<std::string>& tokens() const { return tokens_; }

  private:
    std::vector<std::string> tokens_;
    std::map<std::string, std::uint32_t, std::less<>> index_;
};

enum class PredictorKind { Oracle, Baseline, External };
std::string to_string(PredictorKind k);

struct PredictorModel {
    PredictorKind kind = PredictorKind::Oracle;
    OperatorDictionary output;
    FeatureMap features;
    std::vector<std::uint8_t> active;  // per output token; inactive labels always predict 0
    std::vector<double> W;             // output.size() x features.dimension(), row-major
    std::vector<double> b;
    std::vector<double> loss_history;
    std::map<std::uint64_t, OperatorSet> external;

    /// Per-label probabilities (baseline only).
    std::vector<double> probabilities(const DatasetRecord& record) const;
};

struct TrainConfig {
    int epochs = 300;
    double lr = 1.0;
    double l2 = 1e-5;
    std::uint64_t seed = 0;
    int threads = 1;
};

/// Full-batch gradient descent on the per-label logistic loss. Feature vectors
/// are scaled to unit norm. Label columns that are never positive are dropped
/// (reported through `warn`); DegenerateData when no column remains.
PredictorModel train_baseline(const std::vector<DatasetRecord>& train, const OperatorDictionary& output,
                              const TrainConfig& cfg,
                              const std::function<void(const std::string&)>& warn = {});

PredictorModel oracle_model(const OperatorDictionary& output);
/// JSONL lines {"seed": int, "ops": [token, ...]}.
PredictorModel load_external(const std::string& path, const OperatorDictionary& output);

OperatorSet predict(const PredictorModel& model, const DatasetRecord& record, double threshold = 0.5);

void save_model(const PredictorModel& model, const std::string& path);
PredictorModel load_model(const std::string& path);

struct OperatorStats {
    std::string token;
    int tp = 0;
    int fp = 0;
    int fn = 0;
    double precision() const { return tp + fp > 0 ? static_cast<double>(tp) / (tp + fp) : 1.0; }
    double recall() const { return tp + fn > 0 ? static_cast<double>(tp) / (tp + fn) : 1.0; }
};

struct PredictionReport {
    std::vector<std::uint64_t> seeds;
    std::vector<int> mismatches;
    double average_mismatch = 0.0;
    double mean_label_cardinality = 0.0;  // average mismatch of the all-zeros predictor
    std::vector<OperatorStats> per_operator;
};

PredictionReport evaluate_predictor(const PredictorModel& model, const std::vector<DatasetRecord>& test,
                                    double threshold = 0.5, int threads = 1);

}  // namespace fexkit
