#include "hear/evaluate.hpp"

#include <stdexcept>

namespace hear {

nlohmann::json InstanceResult::to_json() const {
    nlohmann::json j = {{"clip_id", clip_id},
                        {"round", round},
                        {"question", question},
                        {"candidate", candidate},
                        {"reference", reference},
                        {"keyword_hit", decision.keyword_hit},
                        {"r", decision.r},
                        {"gating", to_string(decision.mode)},
                        {"exact", exact},
                        {"bleu", bleu},
                        {"rouge_l", rouge_l},
                        {"cider", cider},
                        {"meteor_simple", meteor}};
    if (label) {
        j["label"] = {{"kind", label->kind}, {"audio_related", label->audio_related}, {"audio_only", label->audio_only}};
    }
    if (candidate_zero_audio) {
        j["candidate_zero_audio"] = *candidate_zero_audio;
        j["exact_zero_audio"] = *exact_zero_audio;
    }
    return j;
}

nlohmann::json MetricSet::to_json() const {
    nlohmann::json j = {{"count", count},   {"bleu1", bleu[0]},    {"bleu2", bleu[1]},
                        {"bleu3", bleu[2]}, {"bleu4", bleu[3]},    {"rouge_l", rouge_l},
                        {"cider", cider},   {"meteor_simple", meteor}, {"accuracy", accuracy}};
    if (accuracy_zero_audio) j["accuracy_zero_audio"] = *accuracy_zero_audio;
    return j;
}

nlohmann::json EvalReport::to_json(const std::string& bucket) const {
    nlohmann::json buckets = nlohmann::json::object();
    if (bucket == "all" || bucket == "keyword") buckets["keyword"] = keyword_bucket.to_json();
    if (bucket == "all" || bucket == "estimator") buckets["estimator"] = estimator_bucket.to_json();
    if ((bucket == "all" || bucket == "audio") && labeled_audio) buckets["audio"] = labeled_audio->to_json();
    if (bucket != "all" && buckets.empty()) throw std::invalid_argument("unknown or empty bucket '" + bucket + "'");

    nlohmann::json j = {{"metadata", metadata}, {"buckets", buckets}};
    if (bucket == "all") {
        j["overall"] = overall.to_json();
        j["corpus_bleu"] = corpus_bleu;
        j["instances"] = nlohmann::json::array();
        for (const auto& r : rows) j["instances"].push_back(r.to_json());
    }
    return j;
}

MetricSet aggregate(const std::vector<InstanceResult>& rows, const std::vector<bool>& include) {
    if (rows.size() != include.size()) throw std::invalid_argument("aggregate: mask size mismatch");
    MetricSet m;
    double zero_hits = 0.0;
    bool has_zero = false;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (!include[i]) continue;
        const auto& r = rows[i];
        ++m.count;
        for (std::size_t k = 0; k < 4; ++k) m.bleu[k] += r.bleu[k];
        m.rouge_l += r.rouge_l;
        m.cider += r.cider;
        m.meteor += r.meteor;
        m.accuracy += r.exact ? 1.0 : 0.0;
        if (r.exact_zero_audio) {
            has_zero = true;
            zero_hits += *r.exact_zero_audio ? 1.0 : 0.0;
        }
    }
    if (m.count == 0) return m;
    const double inv = 1.0 / static_cast<double>(m.count);
    for (double& b : m.bleu) b *= inv;
    m.rouge_l *= inv;
    m.cider *= inv;
    m.meteor *= inv;
    m.accuracy *= inv;
    if (has_zero) m.accuracy_zero_audio = zero_hits * inv;
    return m;
}

EvalReport evaluate(const DlmModel& model, const Corpus& corpus, std::span<const std::size_t> clips,
                    const std::vector<std::vector<RelatednessDecision>>& decisions, const EvalOptions& options) {
    options.decode.validate();
    if (decisions.size() != corpus.clips.size()) throw std::invalid_argument("evaluate: decision table size mismatch");
    EvalReport report;
    std::vector<metrics::Tokens> candidates;
    std::vector<metrics::References> references;

    for (std::size_t c : clips) {
        if (c >= corpus.clips.size()) throw std::out_of_range("evaluate: clip index out of range");
        const Clip& clip = corpus.clips[c];
        FeatureTrack silent = clip.track;
        silent.audio.setZero();
        for (std::size_t i = 0; i < clip.instances.size(); ++i) {
            const DialogueInstance& inst = clip.instances[i];
            const RelatednessDecision& d = decisions[c].at(i);
            const TokenIds answer = beam_decode(model, sal_fuse(model, clip.track, d), inst, options.decode);

            InstanceResult row;
            row.clip_id = clip.clip_id;
            row.round = inst.round;
            row.question = corpus.vocab.decode(inst.question);
            row.candidate = corpus.vocab.decode(answer);
            row.reference = corpus.vocab.decode(inst.answer);
            row.decision = d;
            if (i < clip.labels.size()) row.label = clip.labels[i];
            row.exact = answer == inst.answer;
            if (options.zero_audio) {
                const TokenIds muted = beam_decode(model, sal_fuse(model, silent, d), inst, options.decode);
                row.candidate_zero_audio = corpus.vocab.decode(muted);
                row.exact_zero_audio = muted == inst.answer;
            }
            const metrics::Tokens cand = corpus.vocab.tokens_of(answer);
            const metrics::References refs = {corpus.vocab.tokens_of(inst.answer)};
            for (int n = 1; n <= 4; ++n) row.bleu[static_cast<std::size_t>(n - 1)] = metrics::bleu(cand, refs, n);
            row.rouge_l = metrics::rouge_l(cand, refs);
            row.meteor = metrics::meteor_simple(cand, refs);
            candidates.push_back(cand);
            references.push_back(refs);
            report.rows.push_back(std::move(row));
        }
    }
    if (report.rows.empty()) throw std::invalid_argument("evaluate: no instances to decode");

    const auto cider = metrics::cider_d(candidates, references);
    for (std::size_t i = 0; i < report.rows.size(); ++i) report.rows[i].cider = cider.per_instance[i];
    report.corpus_bleu = metrics::corpus_bleu(candidates, references);

    const std::size_t n = report.rows.size();
    std::vector<bool> all(n, true), keyword(n), estimator(n), audio(n);
    bool labeled = true;
    for (std::size_t i = 0; i < n; ++i) {
        const auto& r = report.rows[i];
        keyword[i] = r.decision.keyword_hit;
        estimator[i] = r.decision.r > options.bucket_threshold;
        labeled = labeled && r.label.has_value();
        audio[i] = r.label && r.label->audio_related;
    }
    report.overall = aggregate(report.rows, all);
    report.keyword_bucket = aggregate(report.rows, keyword);
    report.estimator_bucket = aggregate(report.rows, estimator);
    if (labeled) report.labeled_audio = aggregate(report.rows, audio);
    report.metadata = {{"instances", n},
                       {"clips", clips.size()},
                       {"beam", options.decode.beam},
                       {"max_len", options.decode.max_len},
                       {"length_penalty", options.decode.length_penalty},
                       {"bucket_threshold", options.bucket_threshold},
                       {"cider_single_instance_corpus", n == 1},
                       {"zero_audio", options.zero_audio}};
    return report;
}

std::vector<KeywordShare> keyword_proportions(const std::vector<std::vector<std::string>>& questions,
                                              const KeywordSet& keywords) {
    std::vector<KeywordShare> out;
    for (const auto& k : keywords.base()) out.push_back({k, 0, 0.0});
    std::size_t positives = 0;
    for (const auto& q : questions) {
        const auto hits = matched_keywords(q, keywords);
        if (hits.empty()) continue;
        ++positives;
        for (const auto& h : hits) {
            for (auto& s : out) {
                if (s.keyword == h) ++s.count;
            }
        }
    }
    if (positives > 0) {
        for (auto& s : out) s.share = static_cast<double>(s.count) / static_cast<double>(positives);
    }
    return out;
}

}  // namespace hear
