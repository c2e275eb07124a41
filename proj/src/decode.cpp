#include "hear/decode.hpp"

#include "hear/errors.hpp"

#include <algorithm>
#include <cmath>

namespace hear {

void DecodeConfig::validate() const {
    if (beam < 1) throw ConfigError("decode.beam", "must be >= 1");
    if (max_len < 1) throw ConfigError("decode.max_len", "must be >= 1");
    if (!(length_penalty >= 0.0)) throw ConfigError("decode.length_penalty", "must be >= 0");
    if (end_id < 0) throw ConfigError("decode.end_id", "must be a valid id");
}

namespace {

bool ranks_before(const Hypothesis& a, const Hypothesis& b) {
    if (a.log_prob != b.log_prob) return a.log_prob > b.log_prob;
    return a.tokens < b.tokens;
}

bool scores_before(const Hypothesis& a, const Hypothesis& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.tokens < b.tokens;
}

double final_score(const Hypothesis& h, double penalty) {
    const double len = static_cast<double>(std::max<std::size_t>(1, h.tokens.size()));
    return h.log_prob / std::pow(len, penalty);
}

}  // namespace

std::vector<Hypothesis> beam_search(const StepScorer& scorer, const DecodeConfig& config) {
    config.validate();
    const auto beam = static_cast<std::size_t>(config.beam);
    std::vector<Hypothesis> live{Hypothesis{}};
    std::vector<Hypothesis> finished;

    for (int step = 0; step < config.max_len && !live.empty() && finished.size() < beam; ++step) {
        std::vector<Hypothesis> candidates;
        for (const auto& h : live) {
            const Eigen::VectorXd lp = scorer(h.tokens);
            // Only the best `beam` continuations of each hypothesis can survive.
            std::vector<int> ids(static_cast<std::size_t>(lp.size()));
            for (int i = 0; i < static_cast<int>(ids.size()); ++i) ids[static_cast<std::size_t>(i)] = i;
            const std::size_t keep = std::min(beam, ids.size());
            std::partial_sort(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(keep), ids.end(),
                              [&](int a, int b) { return lp(a) != lp(b) ? lp(a) > lp(b) : a < b; });
            for (std::size_t k = 0; k < keep; ++k) {
                Hypothesis c = h;
                c.tokens.push_back(ids[k]);
                c.log_prob += lp(ids[k]);
                candidates.push_back(std::move(c));
            }
        }
        const std::size_t keep = std::min(beam, candidates.size());
        std::partial_sort(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(keep), candidates.end(),
                          ranks_before);
        candidates.resize(keep);
        live.clear();
        for (auto& c : candidates) {
            if (c.tokens.back() == config.end_id) {
                c.finished = true;
                finished.push_back(std::move(c));
            } else {
                live.push_back(std::move(c));
            }
        }
    }

    std::vector<Hypothesis> out = finished.empty() ? live : finished;
    for (auto& h : out) h.score = final_score(h, config.length_penalty);
    std::stable_sort(out.begin(), out.end(), scores_before);
    return out;
}

TokenIds greedy_search(const StepScorer& scorer, int max_len, int end_id) {
    TokenIds out;
    for (int step = 0; step < max_len; ++step) {
        const Eigen::VectorXd lp = scorer(out);
        Eigen::Index best = 0;
        for (Eigen::Index i = 1; i < lp.size(); ++i) {
            if (lp(i) > lp(best)) best = i;
        }
        out.push_back(static_cast<int>(best));
        if (best == end_id) break;
    }
    return out;
}

TokenIds answer_tokens(const Hypothesis& h, int end_id) {
    TokenIds t = h.tokens;
    if (!t.empty() && t.back() == end_id) t.pop_back();
    return t;
}

StepScorer model_scorer(const DlmModel& model, const EncoderOutput& encoded) {
    return [&model, encoded](std::span<const int> prefix) { return model.next_token_log_probs(encoded, prefix); };
}

TokenIds beam_decode(const DlmModel& model, const Var& fused, const DialogueInstance& instance,
                     const DecodeConfig& config) {
    if (config.max_len >= model.config().max_answer_len) {
        throw ConfigError("decode.max_len", "must be below the model's max_answer_len");
    }
    ag::NoGradGuard no_grad;
    const EncoderOutput encoded = model.encode(fused, instance);
    const auto n_best = beam_search(model_scorer(model, encoded), config);
    return answer_tokens(n_best.front(), config.end_id);
}

TokenIds greedy_decode(const DlmModel& model, const Var& fused, const DialogueInstance& instance, int max_len) {
    ag::NoGradGuard no_grad;
    const EncoderOutput encoded = model.encode(fused, instance);
    TokenIds t = greedy_search(model_scorer(model, encoded), max_len);
    if (!t.empty() && t.back() == Vocabulary::kEnd) t.pop_back();
    return t;
}

}  // namespace hear
