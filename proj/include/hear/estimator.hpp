#pragma once

// Semantic neural estimator: scores how audio-related a question is.

#include "hear/nn.hpp"
#include "hear/sal.hpp"
#include "hear/vocab.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <string>
#include <vector>

namespace hear {

struct EstimatorConfig {
    Index d_model = 32;
    int heads = 2;
    int layers = 1;
    Index ff_hidden = 64;
    Index max_len = 48;  // including the classification token
    int epochs = 40;
    int batch_size = 16;
    double lr = 3e-3;
    double weight_decay = 0.01;
    double holdout_fraction = 0.2;
    std::uint64_t seed = 11;

    void validate() const;
    nlohmann::json to_json() const;
    static EstimatorConfig from_json(const nlohmann::json& j);
};

class EstimatorModel {
  public:
    EstimatorModel(const EstimatorConfig& config, int vocab_size, std::uint64_t seed);

    // Pre-sigmoid logit for [<cls>, question...]; questions longer than the
    // position table are truncated.
    Var logit(std::span<const int> question_ids) const;
    Var score_var(std::span<const int> question_ids) const;
    double score(std::span<const int> question_ids) const;

    const EstimatorConfig& config() const { return config_; }
    int vocab_size() const { return vocab_size_; }
    nn::ParameterStore& parameters() { return params_; }
    const nn::ParameterStore& parameters() const { return params_; }

  private:
    EstimatorConfig config_;
    int vocab_size_;
    nn::ParameterStore params_;
    Var tokens_, positions_;
    nn::LayerNorm input_norm_, output_norm_;
    std::vector<nn::EncoderLayer> layers_;
    nn::Linear head_;
};

struct LabeledQuestion {
    std::vector<std::string> tokens;
    int label = 0;           // 1: audio-related, 0: other
    std::string provenance;  // keyword | shuffle | swap
};

// Noisy keyword labels plus negatives: a word-shuffled copy of every keyword
// positive and, for a `swap_fraction` share of keyword negatives, a copy with
// one token replaced by a random keyword. Input questions are de-duplicated.
std::vector<LabeledQuestion> build_estimator_labels(const std::vector<std::vector<std::string>>& questions,
                                                    const KeywordSet& keywords, std::uint64_t seed,
                                                    double swap_fraction = 0.5);

// Mann-Whitney AUC; ties count one half.
double roc_auc(std::span<const double> scores, std::span<const int> labels);

struct EstimatorTrainResult {
    EstimatorModel model;
    double holdout_auc = 0.0;
    std::vector<LabeledQuestion> train;
    std::vector<LabeledQuestion> holdout;
    std::vector<double> epoch_losses;
};

// Weighted squared error between the sigmoid score and the label, with
// inverse class-frequency weights and AdamW weight decay.
EstimatorTrainResult train_estimator(const std::vector<LabeledQuestion>& labeled, const Vocabulary& vocab,
                                     const EstimatorConfig& config);

RelatednessDecision estimate_relatedness(const EstimatorModel& estimator, const Vocabulary& vocab,
                                         std::span<const int> question_ids, const KeywordSet& keywords,
                                         SalMode mode = SalMode::Estimator);

}  // namespace hear
