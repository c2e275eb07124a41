#pragma once

// Decoding a split and scoring it overall and per audio bucket.

#include "hear/corpus.hpp"
#include "hear/decode.hpp"
#include "hear/metrics.hpp"
#include "hear/sal.hpp"

#include <nlohmann/json.hpp>

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace hear {

inline constexpr double kEstimatorBucketThreshold = 0.7;

struct EvalOptions {
    DecodeConfig decode;
    double bucket_threshold = kEstimatorBucketThreshold;
    bool zero_audio = false;  // also decode with the audio stream zeroed
};

struct InstanceResult {
    std::string clip_id;
    int round = 0;
    std::string question;
    std::string candidate;
    std::string reference;
    RelatednessDecision decision;
    std::optional<QuestionLabel> label;
    bool exact = false;
    std::array<double, 4> bleu{};
    double rouge_l = 0.0;
    double cider = 0.0;
    double meteor = 0.0;
    std::optional<std::string> candidate_zero_audio;
    std::optional<bool> exact_zero_audio;

    nlohmann::json to_json() const;
};

struct MetricSet {
    std::size_t count = 0;
    std::array<double, 4> bleu{};  // mean sentence BLEU-1..4
    double rouge_l = 0.0;
    double cider = 0.0;
    double meteor = 0.0;
    double accuracy = 0.0;  // exact answer match
    std::optional<double> accuracy_zero_audio;

    nlohmann::json to_json() const;
};

struct EvalReport {
    std::vector<InstanceResult> rows;
    MetricSet overall;
    std::array<double, 4> corpus_bleu{};
    MetricSet keyword_bucket;    // keyword hit
    MetricSet estimator_bucket;  // r > threshold
    std::optional<MetricSet> labeled_audio;  // ground-truth audio-related questions, when labels exist
    nlohmann::json metadata = nlohmann::json::object();

    // `bucket`: "all" (default) or one of "keyword", "estimator", "audio"
    // to keep only that bucket's metrics.
    nlohmann::json to_json(const std::string& bucket = "all") const;
};

MetricSet aggregate(const std::vector<InstanceResult>& rows, const std::vector<bool>& include);

// Decodes every instance of the given clips with the fusion chosen by
// `decisions` (per clip, per instance), then scores against the reference
// answers. CIDEr document frequencies span all decoded instances.
EvalReport evaluate(const DlmModel& model, const Corpus& corpus, std::span<const std::size_t> clips,
                    const std::vector<std::vector<RelatednessDecision>>& decisions, const EvalOptions& options);

struct KeywordShare {
    std::string keyword;
    std::size_t count = 0;  // keyword-positive questions containing it
    double share = 0.0;     // count / keyword-positive questions
};

// One entry per keyword in list order. A question with several keywords
// counts toward each of them.
std::vector<KeywordShare> keyword_proportions(const std::vector<std::vector<std::string>>& questions,
                                              const KeywordSet& keywords);

}  // namespace hear
