#pragma once

// Beam search over any next-token scorer.

#include "hear/dlm.hpp"
#include "hear/vocab.hpp"

#include <functional>
#include <vector>

namespace hear {

struct DecodeConfig {
    int beam = 5;
    int max_len = 20;             // generated tokens, the end token included
    double length_penalty = 0.3;  // final score = log_prob / length^penalty
    int end_id = Vocabulary::kEnd;

    void validate() const;
};

// Log-probabilities over the vocabulary for the token after `prefix`.
using StepScorer = std::function<Eigen::VectorXd(std::span<const int> prefix)>;

struct Hypothesis {
    TokenIds tokens;  // generated tokens, the end token included when finished
    double log_prob = 0.0;
    double score = 0.0;
    bool finished = false;
};

// Candidates are ranked by cumulative log-probability with ties broken by
// lexicographically smaller token ids. The top `beam` survive each step;
// those ending in the end token leave the beam. Search stops when no live
// hypothesis remains, `beam` have finished, or max_len is reached. Returns
// every finished (and, if none finished, live) hypothesis ordered by score.
std::vector<Hypothesis> beam_search(const StepScorer& scorer, const DecodeConfig& config);

// Argmax at every step, lowest id on ties.
TokenIds greedy_search(const StepScorer& scorer, int max_len, int end_id = Vocabulary::kEnd);

// Strips the trailing end token.
TokenIds answer_tokens(const Hypothesis& h, int end_id = Vocabulary::kEnd);

StepScorer model_scorer(const DlmModel& model, const EncoderOutput& encoded);

// Encodes `fused` for `instance` and returns the best answer, end token removed.
TokenIds beam_decode(const DlmModel& model, const Var& fused, const DialogueInstance& instance,
                     const DecodeConfig& config);
TokenIds greedy_decode(const DlmModel& model, const Var& fused, const DialogueInstance& instance, int max_len);

}  // namespace hear
