#pragma once

// End-to-end desk-scale pipeline: synthetic corpus, estimator, training of an
// ablation variant, evaluation on the held-out clips.

#include "hear/corpus.hpp"
#include "hear/estimator.hpp"
#include "hear/evaluate.hpp"
#include "hear/trainer.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <string>
#include <vector>

namespace hear {

struct ExperimentConfig {
    SynthCorpusConfig corpus;
    EstimatorConfig estimator;
    TrainConfig train;
    EvalOptions eval;
    double train_fraction = 0.7;
    double validation_fraction = 0.15;
    double swap_fraction = 0.5;
    std::uint64_t label_seed = 3;

    // The toy setting used by the analyses: noisier features, a d=32 model
    // and a higher peak learning rate than the full-scale defaults.
    static ExperimentConfig desk_scale(std::uint64_t seed);

    void validate() const;
    nlohmann::json to_json() const;
    // Sections "corpus", "estimator", "train", "eval", "split"; unknown keys are errors.
    static ExperimentConfig from_json(const nlohmann::json& j);
};

SynthCorpusConfig synth_config_from_json(const nlohmann::json& j, SynthCorpusConfig base = {});
nlohmann::json to_json(const SynthCorpusConfig& config);
DecodeConfig decode_config_from_json(const nlohmann::json& j, DecodeConfig base = {});

// Questions of the given clips, tokenized.
std::vector<std::vector<std::string>> question_tokens(const Corpus& corpus, std::span<const std::size_t> clips);

struct PreparedData {
    Corpus corpus;
    ClipSplit split;
    KeywordSet keywords = KeywordSet::published();
    std::vector<LabeledQuestion> labeled;
    EstimatorTrainResult estimator;
};

// Builds the corpus, splits it by clip and trains the estimator on labels
// bootstrapped from the training questions.
PreparedData prepare(const ExperimentConfig& config);

struct VariantOutcome {
    std::string variant;
    TrainConfig train;
    TrainResult result;
    EvalReport report;  // from the lowest-validation-loss parameters
};

// Trains one ablation variant on the prepared data and evaluates it on the
// test clips. With a run directory the trainer writes its artifacts there.
VariantOutcome run_variant(const PreparedData& data, const ExperimentConfig& config, const std::string& variant,
                           const std::filesystem::path& run_dir = {});

}  // namespace hear
